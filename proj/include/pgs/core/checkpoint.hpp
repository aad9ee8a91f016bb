#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgs/core/config.hpp"
#include "pgs/core/gaussian_set.hpp"

namespace pgs {

// Checkpoint layout: "PGSPLAT" magic, u32 format version, u64 primitive
// count, then means / log_scales / rotations / colors / opacity_logits /
// sensitivity_logits / max_view_weight as little-endian f32, followed by a
// key=value text block echoing the iteration and the full TrainConfig.
inline constexpr char kCheckpointMagic[] = "PGSPLAT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

template <class T>
inline void write_f32_array(std::ostream& os, const std::vector<T>& v) {
    for (const T x : v) {
        const float f = float(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        write_u32(os, bits);
    }
}

template <class T>
inline void read_f32_array(std::istream& is, std::vector<T>& v, std::size_t n) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = read_u32(is);
        float f;
        std::memcpy(&f, &bits, 4);
        v[i] = T(f);
    }
}

}  // namespace detail

template <class T>
inline void save_checkpoint(const std::string& path, const GaussianSet<T>& set, int iteration,
                            const TrainConfig& cfg) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: '" + path + "'");
    os.write(kCheckpointMagic, 7);
    detail::write_u32(os, kCheckpointVersion);
    detail::write_u64(os, set.size());
    detail::write_f32_array(os, set.means);
    detail::write_f32_array(os, set.log_scales);
    detail::write_f32_array(os, set.rotations);
    detail::write_f32_array(os, set.colors);
    detail::write_f32_array(os, set.opacity_logits);
    detail::write_f32_array(os, set.sensitivity_logits);
    detail::write_f32_array(os, set.max_view_weight);
    os << "iteration=" << iteration << "\n" << config_to_text(cfg);
    if (!os) throw std::runtime_error("short write to checkpoint '" + path + "'");
}

template <class T>
struct Checkpoint {
    GaussianSet<T> set;
    int iteration = 0;
    TrainConfig config;
};

template <class T>
inline Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[7];
    is.read(magic, 7);
    if (!is || std::memcmp(magic, kCheckpointMagic, 7) != 0)
        throw std::runtime_error("'" + path + "' is not a checkpoint (bad magic)");
    const std::uint32_t version = detail::read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t n = detail::read_u64(is);

    Checkpoint<T> ck;
    ck.set.resize(std::size_t(n));
    detail::read_f32_array(is, ck.set.means, 3 * n);
    detail::read_f32_array(is, ck.set.log_scales, 3 * n);
    detail::read_f32_array(is, ck.set.rotations, 4 * n);
    detail::read_f32_array(is, ck.set.colors, 3 * n);
    detail::read_f32_array(is, ck.set.opacity_logits, n);
    detail::read_f32_array(is, ck.set.sensitivity_logits, n);
    detail::read_f32_array(is, ck.set.max_view_weight, n);
    if (!is) throw std::runtime_error("checkpoint '" + path + "' truncated");

    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "iteration")
            ck.iteration = std::stoi(value);
        else
            apply_config_line(ck.config, key, value);
    }
    return ck;
}

}  // namespace pgs
