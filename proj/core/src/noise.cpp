#include "sbd/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "sbd/error.hpp"
#include "sbd/parallel.hpp"
#include "sbd/rng.hpp"

namespace sbd {

PixelMask vacuum_mask_near_min(const Image& img, double relative_band) {
    const double lo = img.min();
    const double limit = lo + relative_band * std::abs(lo);
    PixelMask mask(img.size());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) mask[i] = px[i] <= limit;
    return mask;
}

PixelMask vacuum_mask_near_level(const Image& img, double level, double relative_band) {
    PixelMask mask(img.size());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) mask[i] = std::abs(px[i] - level) <= relative_band * std::abs(level);
    return mask;
}

Image scale_to_dose(const Image& clean, double vacuum_target, const PixelMask& vacuum) {
    if (!(vacuum_target > 0.0)) throw ParameterError("vacuum target must be positive");
    if (vacuum.size() != clean.size()) throw ValidationError("vacuum mask size does not match image");
    double sum = 0.0;
    std::size_t n = 0;
    const auto px = clean.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (vacuum[i]) {
            sum += px[i];
            ++n;
        }
    }
    if (n == 0) throw CalibrationError("vacuum region is empty");
    const double mean = sum / static_cast<double>(n);
    if (!(mean > 0.0)) throw CalibrationError("vacuum region has non-positive mean");
    const double factor = vacuum_target / mean;
    Image out = clean;
    for (double& v : out.pixels()) v *= factor;
    return out;
}

Image scale_to_dose(const Image& clean, double vacuum_target) {
    return scale_to_dose(clean, vacuum_target, vacuum_mask_near_min(clean));
}

Image poisson_corrupt(const Image& clean, std::uint64_t seed) {
    require_finite(clean, "clean image");
    require_nonnegative(clean, "clean image");
    Image out(clean.width(), clean.height(), 0.0, clean.pixel_size());
    const auto src = clean.pixels();
    auto dst = out.pixels();
    const std::size_t w = clean.width();
    parallel_for(clean.height(), [&](std::size_t y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            CounterRng rng(seed, i);
            dst[i] = static_cast<double>(sample_poisson(src[i], rng));
        }
    });
    return out;
}

double chi_square_sf(double statistic, int dof) {
    if (dof <= 0) return 1.0;
    if (!(statistic > 0.0)) return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

NoiseStatsReport noise_stats(std::span<const Image> frames, const PixelMask& vacuum) {
    if (frames.size() < 2) throw ParameterError("noise_stats needs at least two frames");
    const Image& first = frames.front();
    for (const auto& f : frames) require_same_shape(first, f, "noise_stats frames");
    if (vacuum.size() != first.size()) throw ValidationError("vacuum mask size does not match frames");

    const std::size_t n_px = first.size();
    const auto n_f = static_cast<double>(frames.size());

    // Per-pixel temporal mean and unbiased variance, then OLS of var on mean.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n_px; ++i) {
        double m = 0.0;
        for (const auto& f : frames) m += f.pixels()[i];
        m /= n_f;
        double v = 0.0;
        for (const auto& f : frames) {
            const double d = f.pixels()[i] - m;
            v += d * d;
        }
        v /= (n_f - 1.0);
        sx += m;
        sy += v;
        sxx += m * m;
        sxy += m * v;
    }
    NoiseStatsReport report;
    report.n_frames = frames.size();
    report.n_pixels = n_px;
    const auto n = static_cast<double>(n_px);
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) > 1e-12 * n * n * std::max(1.0, sxx / n)) {
        report.slope = (n * sxy - sx * sy) / denom;
        report.intercept = (sy - report.slope * sx) / n;
    } else {
        // All pixel means identical: the slope is undetermined; report the flat fit.
        report.slope = 0.0;
        report.intercept = sy / n;
    }

    // Pooled vacuum histogram.
    std::vector<double> counts;
    double total = 0.0;
    double sum = 0.0;
    for (const auto& f : frames) {
        const auto px = f.pixels();
        for (std::size_t i = 0; i < n_px; ++i) {
            if (!vacuum[i]) continue;
            const double v = px[i];
            if (v < 0.0 || std::abs(v - std::round(v)) > 1e-6) {
                throw DomainError("vacuum pixels must hold non-negative integer counts");
            }
            const auto k = static_cast<std::size_t>(std::llround(v));
            if (k >= counts.size()) counts.resize(k + 1, 0.0);
            counts[k] += 1.0;
            total += 1.0;
            sum += v;
        }
    }
    if (total == 0.0) throw CalibrationError("vacuum mask selects no pixels");
    const double lambda = sum / total;
    report.pooled_mean = lambda;

    // Poisson pmf over the observed support plus a generous tail, then keep the
    // contiguous run of bins with expectation >= 5 and fold both tails into its ends.
    const std::size_t kmax_eval = std::max<std::size_t>(counts.size(), static_cast<std::size_t>(lambda + 20.0 * std::sqrt(lambda) + 20.0));
    std::vector<double> pmf(kmax_eval + 1);
    for (std::size_t k = 0; k <= kmax_eval; ++k) {
        pmf[k] = std::exp(static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0));
    }
    std::size_t lo = 0;
    while (lo <= kmax_eval && total * pmf[lo] < 5.0 && static_cast<double>(lo) < lambda) ++lo;
    std::size_t hi = lo;
    while (hi + 1 <= kmax_eval && total * pmf[hi + 1] >= 5.0) ++hi;
    if (hi <= lo || total * pmf[lo] < 5.0) {
        report.histogram_divergence = 0.0;
        report.chi_square_dof = 0;
        report.chi_square_p = 1.0;
        return report;
    }
    auto observed_at = [&](std::size_t k) { return k < counts.size() ? counts[k] : 0.0; };
    double chi2 = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        double e = total * pmf[k];
        double o = observed_at(k);
        if (k == lo) {
            for (std::size_t j = 0; j < lo; ++j) {
                e += total * pmf[j];
                o += observed_at(j);
            }
        }
        if (k == hi) {
            double below = 0.0;
            for (std::size_t j = 0; j <= hi; ++j) below += pmf[j];
            e += total * std::max(0.0, 1.0 - below);
            for (std::size_t j = hi + 1; j < counts.size(); ++j) o += counts[j];
        }
        const double d = o - e;
        chi2 += d * d / e;
    }
    const std::size_t bins = hi - lo + 1;
    report.histogram_divergence = chi2;
    report.chi_square_dof = static_cast<int>(bins) - 2;
    report.chi_square_p = chi_square_sf(chi2, report.chi_square_dof);
    return report;
}

}  // namespace sbd
