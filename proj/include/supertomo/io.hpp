#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"

// Serialization of images and sinograms.
//
// CSV:    first line "image,<n_side>" or "sinogram,<m>", then one value per line
//         printed with 17 significant digits.
// Binary: 8-byte magic ("STIMG\0\0\1" / "STSIN\0\0\1"), uint64 LE dimension,
//         then the values as IEEE-754 float64 little-endian.

namespace supertomo::io {

class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::array<char, 8> image_magic{'S', 'T', 'I', 'M', 'G', '\0', '\0', '\1'};
inline constexpr std::array<char, 8> sinogram_magic{'S', 'T', 'S', 'I', 'N', '\0', '\0', '\1'};

static_assert(std::endian::native == std::endian::little, "binary format assumes a little-endian host");

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void write_csv(const std::filesystem::path& path, const char* kind, std::size_t dim,
                      const std::vector<double>& values) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << kind << ',' << dim << '\n';
    for (double v : values) out << format_double(v) << '\n';
}

inline std::vector<double> read_csv(const std::filesystem::path& path, const std::string& kind,
                                    std::size_t& dim) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    const auto comma = header.find(',');
    if (comma == std::string::npos || header.substr(0, comma) != kind)
        throw FormatError(path.string() + ": expected '" + kind + ",<dim>' header");
    dim = std::stoull(header.substr(comma + 1));
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        values.push_back(std::stod(line));
    }
    return values;
}

inline void write_bin(const std::filesystem::path& path, const std::array<char, 8>& magic,
                      std::uint64_t dim, const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out.write(magic.data(), 8);
    out.write(reinterpret_cast<const char*>(&dim), 8);
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

inline std::vector<double> read_bin(const std::filesystem::path& path,
                                    const std::array<char, 8>& magic, std::uint64_t& dim,
                                    std::size_t count_per_dim_power) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::array<char, 8> got{};
    in.read(got.data(), 8);
    if (!in || got != magic) throw FormatError(path.string() + ": bad magic");
    in.read(reinterpret_cast<char*>(&dim), 8);
    const std::size_t count = count_per_dim_power == 2 ? dim * dim : dim;
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FormatError(path.string() + ": truncated payload");
    return values;
}

} // namespace detail

inline void write_image_csv(const std::filesystem::path& p, const Image& x) {
    detail::write_csv(p, "image", x.n_side, x.values);
}

inline Image read_image_csv(const std::filesystem::path& p) {
    std::size_t side = 0;
    auto v = detail::read_csv(p, "image", side);
    if (v.size() != side * side) throw FormatError(p.string() + ": value count does not match n_side");
    return Image(side, std::move(v));
}

inline void write_sinogram_csv(const std::filesystem::path& p, const Sinogram& b) {
    detail::write_csv(p, "sinogram", b.size(), b.values);
}

inline Sinogram read_sinogram_csv(const std::filesystem::path& p) {
    std::size_t m = 0;
    auto v = detail::read_csv(p, "sinogram", m);
    if (v.size() != m) throw FormatError(p.string() + ": value count does not match m");
    return Sinogram(std::move(v));
}

inline void write_image_bin(const std::filesystem::path& p, const Image& x) {
    detail::write_bin(p, image_magic, x.n_side, x.values);
}

inline Image read_image_bin(const std::filesystem::path& p) {
    std::uint64_t side = 0;
    auto v = detail::read_bin(p, image_magic, side, 2);
    return Image(side, std::move(v));
}

inline void write_sinogram_bin(const std::filesystem::path& p, const Sinogram& b) {
    detail::write_bin(p, sinogram_magic, b.size(), b.values);
}

inline Sinogram read_sinogram_bin(const std::filesystem::path& p) {
    std::uint64_t m = 0;
    return Sinogram(detail::read_bin(p, sinogram_magic, m, 1));
}

} // namespace supertomo::io
