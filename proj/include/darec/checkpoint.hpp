#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "darec/matrix.hpp"

namespace darec::nn {

// Versioned flat binary checkpoint: magic "DARECNN1", then for each tensor
//   u32 LE name length, name bytes,
//   u32 LE rows, u32 LE cols,
//   rows*cols f64 LE values in row-major order.
inline constexpr char kCheckpointMagic[8] = {'D', 'A', 'R', 'E', 'C', 'N', 'N', '1'};

using NamedTensors = std::vector<std::pair<std::string, DenseMatrix>>;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("checkpoint: truncated header field");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("checkpoint: truncated tensor data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const NamedTensors& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kCheckpointMagic, 8);
    for (const auto& [name, t] : tensors) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(t.rows));
        detail::put_u32(os, static_cast<std::uint32_t>(t.cols));
        for (double v : t.data) detail::put_f64(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline NamedTensors read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    NamedTensors out;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t name_len = detail::get_u32(is);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw std::runtime_error("checkpoint: truncated tensor name");
        const std::uint32_t rows = detail::get_u32(is);
        const std::uint32_t cols = detail::get_u32(is);
        if (rows == 0 || cols == 0)
            throw std::runtime_error("checkpoint: zero-sized tensor " + name);
        DenseMatrix t(rows, cols);
        for (double& v : t.data) v = detail::get_f64(is);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

}  // namespace darec::nn
