#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sbd {

/// Single-channel raster of real intensities, row-major, origin top-left,
/// x to the right and y downward. Values are held in double precision.
class Image {
public:
    Image() = default;
    Image(std::size_t width, std::size_t height, double fill = 0.0, double pixel_size_pm = 0.0);
    Image(std::size_t width, std::size_t height, std::vector<double> data, double pixel_size_pm = 0.0);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    /// Picometers per pixel; 0 means unknown.
    double pixel_size() const noexcept { return pixel_size_pm_; }
    void set_pixel_size(double pm) noexcept { pixel_size_pm_ = pm; }

    double operator()(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }
    double& operator()(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }

    /// Sample with coordinates clamped into the image (replicate border).
    double clamped(long x, long y) const noexcept;

    std::span<const double> pixels() const noexcept { return data_; }
    std::span<double> pixels() noexcept { return data_; }
    std::span<const double> row(std::size_t y) const noexcept { return {data_.data() + y * width_, width_}; }
    std::span<double> row(std::size_t y) noexcept { return {data_.data() + y * width_, width_}; }

    const std::vector<double>& data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    double min() const;
    double max() const;
    double mean() const;

    bool operator==(const Image&) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    double pixel_size_pm_ = 0.0;
    std::vector<double> data_;
};

/// Throws ValidationError if any intensity is NaN or infinite.
void require_finite(const Image& img, const char* what = "image");
/// Throws DomainError if any intensity is negative.
void require_nonnegative(const Image& img, const char* what = "image");
/// Throws ValidationError unless both images have identical dimensions.
void require_same_shape(const Image& a, const Image& b, const char* what = "images");

/// Rounds every pixel through 32-bit float, matching what a file round trip stores.
Image quantize_to_float(const Image& img);

}  // namespace sbd
