#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "causaltext/errors.hpp"
#include "causaltext/model.hpp"

namespace causaltext {

// Versioned little-endian binary checkpoint. Doubles are written as raw bit
// patterns so a save/load round trip is bit-exact.
namespace detail {

inline constexpr char kCheckpointMagic[8] = {'C', 'T', 'X', 'M', '0', '0', '0', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    in.read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    for (const double x : v) write_u64(out, std::bit_cast<std::uint64_t>(x));
}

inline std::vector<double> read_doubles(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    std::vector<double> v(n);
    for (auto& x : v) x = std::bit_cast<double>(read_u64(in));
    return v;
}

inline void write_layer(std::ostream& out, const LinearLayer& layer) {
    write_u64(out, layer.in);
    write_u64(out, layer.out);
    write_doubles(out, layer.w);
    write_doubles(out, layer.b);
}

inline LinearLayer read_layer(std::istream& in) {
    LinearLayer layer;
    layer.in = read_u64(in);
    layer.out = read_u64(in);
    layer.w = read_doubles(in);
    layer.b = read_doubles(in);
    return layer;
}

inline void write_head(std::ostream& out, const Head& head) {
    write_u64(out, head.type == HeadType::linear ? 0 : 1);
    write_u64(out, head.layers.size());
    for (const auto& layer : head.layers) write_layer(out, layer);
}

inline Head read_head(std::istream& in) {
    Head head;
    head.type = read_u64(in) == 0 ? HeadType::linear : HeadType::fcn;
    const std::uint64_t n = read_u64(in);
    for (std::uint64_t i = 0; i < n; ++i) head.layers.push_back(read_layer(in));
    return head;
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out.write(detail::kCheckpointMagic, 8);
    detail::write_u64(out, params.arch == ArchKind::shared_backbone ? 0 : 1);
    detail::write_u64(out, params.adapter_enabled ? 1 : 0);
    detail::write_u64(out, params.dim_sentiment);
    detail::write_u64(out, params.dim_riesz);
    detail::write_head(out, params.sentiment);
    detail::write_head(out, params.riesz);
    if (params.adapter_enabled) detail::write_layer(out, params.adapter);
    if (!out) throw Error("checkpoint write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, detail::kCheckpointMagic)) {
        throw Error("not a checkpoint file (bad magic): " + path);
    }
    ModelParams params;
    params.arch = detail::read_u64(in) == 0 ? ArchKind::shared_backbone : ArchKind::two_backbone;
    params.adapter_enabled = detail::read_u64(in) != 0;
    params.dim_sentiment = detail::read_u64(in);
    params.dim_riesz = detail::read_u64(in);
    params.sentiment = detail::read_head(in);
    params.riesz = detail::read_head(in);
    if (params.adapter_enabled) params.adapter = detail::read_layer(in);
    if (!in) throw Error("checkpoint truncated: " + path);
    return params;
}

}  // namespace causaltext
