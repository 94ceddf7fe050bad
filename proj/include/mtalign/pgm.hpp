#pragma once

// Binary 8-bit PGM ("P5", maxval 255).

#include <mtalign/error.hpp>
#include <mtalign/image.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace mtalign {

namespace pgm_detail {

inline void skip_space_and_comments(std::istream& in)
{
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
        } else if (c != EOF && std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

inline long read_header_int(std::istream& in, const char* what)
{
    skip_space_and_comments(in);
    std::string digits;
    while (std::isdigit(in.peek()))
        digits.push_back(static_cast<char>(in.get()));
    if (digits.empty() || digits.size() > 9)
        throw FormatError(std::string("malformed header: bad ") + what);
    return std::stol(digits);
}

}  // namespace pgm_detail

[[nodiscard]] inline Image read_pgm(std::istream& in)
{
    char magic[2] = {0, 0};
    if (!in.read(magic, 2))
        throw FormatError("malformed header: missing magic number");
    if (magic[0] != 'P' || magic[1] != '5')
        throw FormatError("unsupported format: expected binary PGM (P5)");
    if (!std::isspace(in.peek()) && in.peek() != '#')
        throw FormatError("malformed header: magic number not followed by whitespace");
    const long width = pgm_detail::read_header_int(in, "width");
    const long height = pgm_detail::read_header_int(in, "height");
    const long maxval = pgm_detail::read_header_int(in, "maxval");
    if (width < 1 || height < 1)
        throw FormatError("malformed header: non-positive dimensions");
    if (maxval != 255)
        throw FormatError("unsupported maxval " + std::to_string(maxval) + " (only 255)");
    if (!std::isspace(in.get()))
        throw FormatError("malformed header: missing whitespace before payload");

    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<char> bytes(n);
    in.read(bytes.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw FormatError("truncated payload: expected " + std::to_string(n) + " bytes, got " +
                          std::to_string(in.gcount()));
    std::vector<double> px(n);
    std::transform(bytes.begin(), bytes.end(), px.begin(),
                   [](char b) { return static_cast<double>(static_cast<unsigned char>(b)); });
    return {static_cast<int>(width), static_cast<int>(height), std::move(px)};
}

[[nodiscard]] inline Image load_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    try {
        return read_pgm(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Bytes written by save_pgm: linear rescale of [min, max] over valid pixels
/// to [0, 255], rounded half-up. Constant images and masked-out pixels give 0.
[[nodiscard]] inline std::vector<std::uint8_t> pgm_bytes(const Image& img)
{
    const auto px = img.pixels();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (!img.valid(i))
            continue;
        lo = std::min(lo, px[i]);
        hi = std::max(hi, px[i]);
    }
    std::vector<std::uint8_t> out(px.size(), 0);
    if (!(hi > lo))
        return out;
    const double range = hi - lo;
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (!img.valid(i))
            continue;
        const double scaled = std::floor((px[i] - lo) / range * 255.0 + 0.5);
        out[i] = static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
    }
    return out;
}

inline void write_pgm(std::ostream& out, const Image& img)
{
    const auto bytes = pgm_bytes(img);
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void save_pgm(const Image& img, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    write_pgm(out, img);
    out.flush();
    if (!out)
        throw Error("I/O failure writing " + path.string());
}

}  // namespace mtalign
