#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "sbd/detect.hpp"
#include "sbd/geometry.hpp"
#include "sbd/image.hpp"

namespace sbd {

enum class RegionKind { atom_candidate, vacuum };

struct Region {
    std::vector<std::size_t> pixels;  // row-major indices into the image
    RegionKind kind = RegionKind::atom_candidate;
    std::optional<double> fitted_intensity;
};

/// Pixels whose centres lie within `radius` of `center`.
Region disk_region(Point center, double radius, std::size_t width, std::size_t height);

inline constexpr double kMinRate = 1e-6;

/// Mean of the denoised values over the region, clamped below at kMinRate.
Region fit_region(const Image& denoised, Region region);

/// Sum over the region of y ln(rate) - rate - ln(y!). Throws DomainError for
/// rate <= 0 or non-integer / negative counts.
double poisson_loglik(const Image& noisy, const Region& region, double rate);

struct VacuumEstimate {
    double rate = 0.0;
    Region region;
};

/// Vacuum = pixels farther than scale*sqrt(2) + dilation from every detection
/// and outside the alpha-shape of the detection centres. alpha defaults to
/// default_alpha of the centres. Throws CalibrationError when nothing is left.
VacuumEstimate estimate_vacuum(const Image& noisy, const std::vector<AtomDetection>& detections, double dilation,
                               std::optional<double> alpha = std::nullopt);

struct RegionLlr {
    std::size_t id = 0;
    Point center;
    double radius = 0.0;
    std::size_t n_pixels = 0;
    double fit_rate = 0.0;
    double vacuum_rate = 0.0;
    double llr_per_pixel = 0.0;
};

/// Per-pixel log-likelihood ratio of "constant rate fitted from the denoised
/// image" against "vacuum rate" on a disk. A disk with no pixels in the image
/// yields n_pixels 0 and llr 0.
RegionLlr region_llr(const Image& noisy, const Image& denoised, Point center, double radius, double vacuum_rate);

struct LikelihoodMap {
    std::vector<RegionLlr> per_region;
    Image raster;  // region pixels carry llr_per_pixel, later regions on top
};

/// One disk of radius sqrt(2)*scale per detection.
LikelihoodMap llr_map(const Image& noisy, const Image& denoised, const std::vector<AtomDetection>& detections,
                      double vacuum_rate);

/// region_id,cx,cy,radius,n_pixels,fit_rate,vacuum_rate,llr_per_pixel
void write_llr_csv(const std::filesystem::path& path, const std::vector<RegionLlr>& regions);

}  // namespace sbd
