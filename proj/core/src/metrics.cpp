#include "sbd/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sbd/error.hpp"

namespace sbd {

double psnr(const Image& reference, const Image& test, std::optional<double> peak) {
    require_same_shape(reference, test, "psnr images");
    const double p = peak ? *peak : reference.max();
    if (!(p > 0.0)) throw ParameterError("psnr peak must be positive");
    double sum = 0.0;
    const auto a = reference.pixels();
    const auto b = test.pixels();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse < p * p * 1e-30) return kPsnrCap;
    return 10.0 * std::log10(p * p / mse);
}

namespace {

// Separable Gaussian blur with a normalized kernel of the given size and
// replicate borders.
std::vector<double> gaussian_blur(const std::vector<double>& src, std::size_t w, std::size_t h,
                                  const std::vector<double>& kernel) {
    const long r = static_cast<long>(kernel.size() / 2);
    std::vector<double> tmp(src.size()), out(src.size());
    const long lw = static_cast<long>(w), lh = static_cast<long>(h);
    for (long y = 0; y < lh; ++y) {
        for (long x = 0; x < lw; ++x) {
            double acc = 0.0;
            for (long k = -r; k <= r; ++k) {
                const long xx = std::clamp(x + k, 0L, lw - 1);
                acc += kernel[static_cast<std::size_t>(k + r)] * src[static_cast<std::size_t>(y * lw + xx)];
            }
            tmp[static_cast<std::size_t>(y * lw + x)] = acc;
        }
    }
    for (long y = 0; y < lh; ++y) {
        for (long x = 0; x < lw; ++x) {
            double acc = 0.0;
            for (long k = -r; k <= r; ++k) {
                const long yy = std::clamp(y + k, 0L, lh - 1);
                acc += kernel[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yy * lw + x)];
            }
            out[static_cast<std::size_t>(y * lw + x)] = acc;
        }
    }
    return out;
}

}  // namespace

SsimResult ssim_checked(const Image& reference, const Image& test, int window, std::optional<double> dynamic_range) {
    require_same_shape(reference, test, "ssim images");
    if (window < 1 || window % 2 == 0) throw ParameterError("ssim window must be a positive odd size");
    SsimResult result;

    double norm = reference.max();
    if (!(norm > 0.0)) norm = 1.0;
    std::vector<double> x(reference.data()), y(test.data());
    for (auto& v : x) v /= norm;
    for (auto& v : y) v /= norm;

    double range = 0.0;
    if (dynamic_range) {
        if (!(*dynamic_range > 0.0)) throw ParameterError("ssim dynamic range must be positive");
        range = *dynamic_range;
    } else {
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        range = *hi - *lo;
    }
    if (!(range > 0.0)) {
        if (x == y) {
            result.value = 1.0;
        } else {
            result.value = 0.0;
            result.warnings.push_back("ssim: reference has zero dynamic range");
        }
        return result;
    }

    const int r = window / 2;
    std::vector<double> kernel(static_cast<std::size_t>(window));
    double ksum = 0.0;
    for (int k = -r; k <= r; ++k) {
        const double v = std::exp(-0.5 * k * k / (1.5 * 1.5));
        kernel[static_cast<std::size_t>(k + r)] = v;
        ksum += v;
    }
    for (auto& v : kernel) v /= ksum;

    const std::size_t w = reference.width(), h = reference.height();
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = gaussian_blur(x, w, h, kernel);
    const auto my = gaussian_blur(y, w, h, kernel);
    const auto sxx = gaussian_blur(xx, w, h, kernel);
    const auto syy = gaussian_blur(yy, w, h, kernel);
    const auto sxy = gaussian_blur(xy, w, h, kernel);

    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cov = sxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    result.value = total / static_cast<double>(x.size());
    return result;
}

double ssim(const Image& reference, const Image& test, int window, std::optional<double> dynamic_range) {
    return ssim_checked(reference, test, window, dynamic_range).value;
}

std::string_view to_string(Scope s) {
    switch (s) {
        case Scope::surface: return "surface";
        case Scope::bulk: return "bulk";
        case Scope::all: return "all";
    }
    return "all";
}

DetectionScores detection_metrics(const Matching& m, std::size_t size_a, std::size_t size_b) {
    DetectionScores s;
    const std::size_t tp = m.pairs.size();
    if (tp > size_a || tp > size_b) throw ValidationError("matched count exceeds a set size");
    s.true_positives = tp;
    s.false_positives = size_a - tp;
    s.false_negatives = size_b - tp;
    const bool both_empty = size_a == 0 && size_b == 0;
    s.precision = size_a == 0 ? (both_empty ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(size_a);
    s.recall = size_b == 0 ? (both_empty ? 1.0 : 0.0) : static_cast<double>(tp) / static_cast<double>(size_b);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    const std::size_t uni = size_a + size_b - tp;
    s.jaccard = uni == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(uni);
    return s;
}

std::string to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["scope"] = std::string(to_string(r.scope));
    j["psnr"] = r.psnr;
    j["ssim"] = r.ssim;
    j["precision"] = r.detection.precision;
    j["recall"] = r.detection.recall;
    j["f1"] = r.detection.f1;
    j["jaccard"] = r.detection.jaccard;
    j["true_positives"] = r.detection.true_positives;
    j["false_positives"] = r.detection.false_positives;
    j["false_negatives"] = r.detection.false_negatives;
    return j.dump();
}

}  // namespace sbd
