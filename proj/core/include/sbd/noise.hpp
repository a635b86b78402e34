#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sbd/image.hpp"

namespace sbd {

inline constexpr double kDefaultVacuumTarget = 0.45;

/// Pixel selection as a row-major boolean mask of the image's size.
using PixelMask = std::vector<bool>;

/// Pixels within `relative_band` of the minimum intensity: v <= min + band*|min|.
/// This is the vacuum heuristic for white-contrast images.
PixelMask vacuum_mask_near_min(const Image& img, double relative_band = 0.02);

/// Pixels within `relative_band` of a known background level: |v - level| <= band*level.
PixelMask vacuum_mask_near_level(const Image& img, double level, double relative_band = 0.02);

/// Scales `clean` so the mean over `vacuum` equals `vacuum_target`.
Image scale_to_dose(const Image& clean, double vacuum_target, const PixelMask& vacuum);

/// Same, with the vacuum chosen by vacuum_mask_near_min().
Image scale_to_dose(const Image& clean, double vacuum_target = kDefaultVacuumTarget);

/// Independent Poisson draw per pixel with rate equal to the pixel value.
/// Pixel i uses CounterRng(seed, i), so the output is reproducible and
/// independent of thread scheduling.
Image poisson_corrupt(const Image& clean, std::uint64_t seed);

struct NoiseStatsReport {
    double slope = 0.0;       ///< least-squares fit variance = slope*mean + intercept
    double intercept = 0.0;
    double histogram_divergence = 0.0;  ///< Pearson chi-square of pooled vacuum counts
    int chi_square_dof = 0;
    double chi_square_p = 1.0;
    double pooled_mean = 0.0;
    std::size_t n_frames = 0;
    std::size_t n_pixels = 0;
};

/// Temporal per-pixel statistics over a stack of frames plus a goodness-of-fit
/// test of the pooled vacuum histogram against Poisson(pooled mean).
///
/// Bins are the contiguous run of counts whose expected frequency is >= 5;
/// both tails are folded into the end bins. Degrees of freedom are
/// (bins - 2) because the rate is estimated from the same data.
NoiseStatsReport noise_stats(std::span<const Image> frames, const PixelMask& vacuum);

/// Upper tail probability of the chi-square distribution.
double chi_square_sf(double statistic, int dof);

}  // namespace sbd
