#include "sbd/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sbd/error.hpp"

namespace sbd {

Image::Image(std::size_t width, std::size_t height, double fill, double pixel_size_pm)
    : width_(width), height_(height), pixel_size_pm_(pixel_size_pm), data_(width * height, fill) {
    if (width == 0 || height == 0) {
        throw ParameterError("image dimensions must be positive");
    }
}

Image::Image(std::size_t width, std::size_t height, std::vector<double> data, double pixel_size_pm)
    : width_(width), height_(height), pixel_size_pm_(pixel_size_pm), data_(std::move(data)) {
    if (width == 0 || height == 0) {
        throw ParameterError("image dimensions must be positive");
    }
    if (data_.size() != width * height) {
        throw ValidationError("image data length " + std::to_string(data_.size()) + " != " +
                              std::to_string(width) + "x" + std::to_string(height));
    }
}

double Image::clamped(long x, long y) const noexcept {
    const long w = static_cast<long>(width_);
    const long h = static_cast<long>(height_);
    x = std::clamp(x, 0L, w - 1);
    y = std::clamp(y, 0L, h - 1);
    return data_[static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x)];
}

double Image::min() const {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Image::max() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Image::mean() const {
    if (data_.empty()) return 0.0;
    return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

void require_finite(const Image& img, const char* what) {
    for (double v : img.pixels()) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string(what) + " contains non-finite intensities");
        }
    }
}

void require_nonnegative(const Image& img, const char* what) {
    for (double v : img.pixels()) {
        if (v < 0.0) {
            throw DomainError(std::string(what) + " contains negative intensities");
        }
    }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                              std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                              std::to_string(b.height()) + ")");
    }
}

Image quantize_to_float(const Image& img) {
    Image out = img;
    for (double& v : out.pixels()) {
        v = static_cast<double>(static_cast<float>(v));
    }
    return out;
}

}  // namespace sbd
