#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sbd/denoise.hpp"
#include "sbd/image.hpp"

namespace sbd {

struct PixelIndex {
    std::size_t x = 0;
    std::size_t y = 0;
};

struct GradientMap {
    PixelIndex target;
    std::size_t window = 0;
    double step = 0.0;
    Image values;  // d f(img)[target] / d img[j], zero outside the window
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultProbeWindow = 150;

/// 1e-3 * max(max(img), 1).
double default_probe_step(const Image& img);

/// Central-difference gradient of one output pixel with respect to every
/// input pixel within `window` (Chebyshev half-width) of the target. The
/// denoiser runs twice per probed pixel, on up to max_threads threads.
/// Non-negative pixels closer to zero than the step take a forward
/// difference so that the probe never leaves the non-negative domain.
/// Differences are divided by the step actually realised in floating point.
GradientMap gradient_map(const DenoiserFn& denoiser, const Image& img, PixelIndex target,
                         std::size_t window = kDefaultProbeWindow, std::optional<double> step = std::nullopt,
                         std::size_t max_threads = 1);

/// Uses the denoiser's own concurrency cap: 4 for external commands, the
/// hardware concurrency otherwise.
GradientMap gradient_map(const DenoiserSpec& spec, const Image& img, PixelIndex target,
                         std::size_t window = kDefaultProbeWindow, std::optional<double> step = std::nullopt);

struct GradientPeak {
    PixelIndex pixel;
    double value = 0.0;
};

struct GradientSummary {
    double mass = 0.0;            // sum of values
    double abs_mass = 0.0;        // sum of |values|
    double max_abs = 0.0;         // colormap scale
    std::vector<double> radii{8.0, 32.0, 128.0};
    std::vector<double> fractions;  // absolute mass within each radius over abs_mass, 0 when abs_mass is 0
    std::vector<GradientPeak> top;
};

GradientSummary gradient_summary(const GradientMap& g, std::size_t top_k = 10);

std::string to_json(const GradientMap& g, const GradientSummary& s);

}  // namespace sbd
