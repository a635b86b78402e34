#include "sbd/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "sbd/error.hpp"

namespace sbd {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

}  // namespace

std::vector<std::uint8_t> encode_f32img(const Image& img) {
    if (img.empty()) {
        throw ValidationError("cannot encode an empty image");
    }
    require_finite(img);
    std::vector<std::uint8_t> out;
    out.reserve(kF32ImgHeaderSize + 4 * img.size());
    out.insert(out.end(), kF32ImgMagic.begin(), kF32ImgMagic.end());
    put_u32(out, static_cast<std::uint32_t>(img.width()));
    put_u32(out, static_cast<std::uint32_t>(img.height()));
    put_u64(out, std::bit_cast<std::uint64_t>(img.pixel_size()));
    for (double v : img.pixels()) {
        const auto f = static_cast<float>(v);
        if (!std::isfinite(f)) {
            throw ValidationError("intensity overflows float32");
        }
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
}

Image decode_f32img(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kF32ImgHeaderSize) {
        throw FormatError("F32IMG header truncated (" + std::to_string(bytes.size()) + " bytes)");
    }
    if (std::memcmp(bytes.data(), kF32ImgMagic.data(), kF32ImgMagic.size()) != 0) {
        throw FormatError("bad F32IMG magic");
    }
    const std::uint32_t width = get_u32(bytes.data() + 8);
    const std::uint32_t height = get_u32(bytes.data() + 12);
    const double pixel_size = std::bit_cast<double>(get_u64(bytes.data() + 16));
    if (width == 0 || height == 0) {
        throw FormatError("F32IMG declares a zero dimension");
    }
    if (!std::isfinite(pixel_size) || pixel_size < 0.0) {
        throw FormatError("F32IMG pixel size is not a finite non-negative number");
    }
    const std::uint64_t count = std::uint64_t{width} * height;
    const std::uint64_t expected = kF32ImgHeaderSize + 4 * count;
    if (bytes.size() != expected) {
        throw TruncationError("F32IMG payload is " + std::to_string(bytes.size() - kF32ImgHeaderSize) +
                              " bytes, expected " + std::to_string(4 * count));
    }
    std::vector<double> data(count);
    const std::uint8_t* p = bytes.data() + kF32ImgHeaderSize;
    for (std::uint64_t i = 0; i < count; ++i, p += 4) {
        const float f = std::bit_cast<float>(get_u32(p));
        if (!std::isfinite(f)) {
            throw ValidationError("F32IMG payload contains NaN/Inf at index " + std::to_string(i));
        }
        data[i] = f;
    }
    return Image(width, height, std::move(data), pixel_size);
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_f32img(bytes);
}

void write_image(const Image& img, const std::filesystem::path& path) {
    write_bytes(path, encode_f32img(img));
}

std::uint16_t view_level(double v, double lo, double hi) {
    if (!(lo < hi)) {
        throw ParameterError("export range requires lo < hi");
    }
    const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    return static_cast<std::uint16_t>(std::floor(65535.0 * t + 0.5));
}

void export_view(const Image& img, double lo, double hi, const std::filesystem::path& path) {
    if (!(lo < hi)) {
        throw ParameterError("export range requires lo < hi");
    }
    const std::string header =
        "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + 2 * img.size());
    for (double v : img.pixels()) {
        const std::uint16_t level = view_level(v, lo, hi);
        bytes.push_back(static_cast<std::uint8_t>(level >> 8));
        bytes.push_back(static_cast<std::uint8_t>(level & 0xff));
    }
    write_bytes(path, bytes);
}

void export_signed_colormap(const Image& img, double scale, const std::filesystem::path& path) {
    if (!(scale > 0.0)) {
        throw ParameterError("colormap scale must be positive");
    }
    const std::string header =
        "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + 3 * img.size());
    for (double v : img.pixels()) {
        const double t = std::clamp(v / scale, -1.0, 1.0);
        const auto fade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::abs(t))));
        if (t >= 0.0) {
            bytes.insert(bytes.end(), {255, fade, fade});
        } else {
            bytes.insert(bytes.end(), {fade, fade, 255});
        }
    }
    write_bytes(path, bytes);
}

}  // namespace sbd
