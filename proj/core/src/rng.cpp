#include "sbd/rng.hpp"

#include <cmath>
#include <numbers>

namespace sbd {

double CounterRng::normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::uint64_t poisson_inversion(double rate, CounterRng& rng) {
    // Sequential search on the CDF. The cap only matters for u within
    // rounding of 1, where the tail mass is below double resolution.
    const double u = rng.uniform();
    double p = std::exp(-rate);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf && k < 1000) {
        ++k;
        p *= rate / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

std::uint64_t poisson_ptrs(double rate, CounterRng& rng) {
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr) {
            return static_cast<std::uint64_t>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -rate + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

}  // namespace

std::uint64_t sample_poisson(double rate, CounterRng& rng) {
    if (!(rate > 0.0)) {
        return 0;
    }
    return rate < 10.0 ? poisson_inversion(rate, rng) : poisson_ptrs(rate, rng);
}

}  // namespace sbd
