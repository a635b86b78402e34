#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sbd::detail {

/// Half-plane spectrum of a real height x width grid (FFTW r2c layout):
/// height rows of (width/2 + 1) bins.
struct HalfSpectrum {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::complex<double>> bins;

    std::size_t cols() const { return width / 2 + 1; }
    std::complex<double>& at(std::size_t ky, std::size_t kx) { return bins[ky * cols() + kx]; }

    /// Signed frequency in cycles/pixel for a bin index.
    double freq_x(std::size_t kx) const { return static_cast<double>(kx) / static_cast<double>(width); }
    double freq_y(std::size_t ky) const {
        const auto k = static_cast<double>(ky);
        const auto n = static_cast<double>(height);
        return ky <= height / 2 ? k / n : (k - n) / n;
    }
};

HalfSpectrum forward_fft(const std::vector<double>& data, std::size_t width, std::size_t height);

/// Inverse transform including the 1/(width*height) normalisation.
std::vector<double> inverse_fft(const HalfSpectrum& spectrum);

}  // namespace sbd::detail
