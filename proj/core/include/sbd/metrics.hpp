#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbd/detect.hpp"
#include "sbd/image.hpp"

namespace sbd {

/// Returned by psnr when the mean squared error is negligible.
inline constexpr double kPsnrCap = 300.0;

/// 10 log10(peak^2 / MSE). peak defaults to max(reference).
double psnr(const Image& reference, const Image& test, std::optional<double> peak = std::nullopt);

struct SsimResult {
    double value = 0.0;
    std::vector<std::string> warnings;
};

/// Mean SSIM with a Gaussian window (size `window`, sigma 1.5). Both images
/// are divided by max(reference) first; dynamic_range defaults to the range
/// of the normalized reference.
SsimResult ssim_checked(const Image& reference, const Image& test, int window = 11,
                        std::optional<double> dynamic_range = std::nullopt);
double ssim(const Image& reference, const Image& test, int window = 11,
            std::optional<double> dynamic_range = std::nullopt);

enum class Scope { surface, bulk, all };
std::string_view to_string(Scope s);

struct DetectionScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double jaccard = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

/// Precision over the detections (A), recall over the truth (B).
DetectionScores detection_metrics(const Matching& m, std::size_t size_a, std::size_t size_b);

struct MetricsReport {
    double psnr = 0.0;
    double ssim = 0.0;
    DetectionScores detection;
    Scope scope = Scope::all;
};

std::string to_json(const MetricsReport& report);

}  // namespace sbd
