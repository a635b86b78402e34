#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sbd/image.hpp"

namespace sbd {

/// F32IMG interchange format, all integers little-endian:
///
///   bytes  0..7   magic "F32IMG\0\1"
///   bytes  8..11  width  (uint32)
///   bytes 12..15  height (uint32)
///   bytes 16..23  pixel size in picometers (float64, 0 = unknown)
///   bytes 24..    width*height float32 samples, row-major
inline constexpr std::array<char, 8> kF32ImgMagic{'F', '3', '2', 'I', 'M', 'G', '\0', '\1'};
inline constexpr std::size_t kF32ImgHeaderSize = 24;

Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

/// In-memory codec used by the file functions; exposed for tests and pipes.
std::vector<std::uint8_t> encode_f32img(const Image& img);
Image decode_f32img(std::span<const std::uint8_t> bytes);

/// Maps v to round(65535 * clamp((v - lo) / (hi - lo), 0, 1)) with half-up rounding.
std::uint16_t view_level(double v, double lo, double hi);

/// Writes a 16-bit binary PGM (P5, big-endian samples) using view_level().
void export_view(const Image& img, double lo, double hi, const std::filesystem::path& path);

/// Writes an 8-bit PPM where negative values shade toward blue and positive
/// values toward red; |v| >= scale saturates. Zero maps to white.
void export_signed_colormap(const Image& img, double scale, const std::filesystem::path& path);

}  // namespace sbd
