#include "sbd/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "sbd/error.hpp"
#include "sbd/parallel.hpp"

namespace sbd {

double default_probe_step(const Image& img) { return 1e-3 * std::max(img.max(), 1.0); }

GradientMap gradient_map(const DenoiserFn& denoiser, const Image& img, PixelIndex target, std::size_t window,
                         std::optional<double> step, std::size_t max_threads) {
    if (target.x >= img.width() || target.y >= img.height()) throw ParameterError("probe target outside the image");
    require_finite(img);
    GradientMap g;
    g.target = target;
    g.window = window;
    g.step = step ? *step : default_probe_step(img);
    if (!(g.step > 0.0)) throw ParameterError("probe step must be positive");
    g.values = Image(img.width(), img.height(), 0.0, img.pixel_size());

    const std::size_t x0 = target.x > window ? target.x - window : 0;
    const std::size_t y0 = target.y > window ? target.y - window : 0;
    const std::size_t x1 = std::min(img.width() - 1, target.x + window);
    const std::size_t y1 = std::min(img.height() - 1, target.y + window);
    const std::size_t cols = x1 - x0 + 1;
    const std::size_t count = cols * (y1 - y0 + 1);

    // Pixels that would be pushed below zero use a forward difference from
    // the unperturbed output instead.
    bool needs_base = false;
    for (std::size_t y = y0; y <= y1 && !needs_base; ++y)
        for (std::size_t x = x0; x <= x1; ++x)
            if (img(x, y) >= 0.0 && img(x, y) - g.step < 0.0) {
                needs_base = true;
                break;
            }
    const double base = needs_base ? denoiser(img)(target.x, target.y) : 0.0;

    std::vector<char> flagged(count, 0);
    parallel_for(
        count,
        [&](std::size_t k) {
            const std::size_t x = x0 + k % cols;
            const std::size_t y = y0 + k / cols;
            const double v0 = img(x, y);
            Image probe = img;
            probe(x, y) = v0 + g.step;
            const double hi = probe(x, y);
            const double up = denoiser(probe)(target.x, target.y);
            double lo = v0;
            double down = base;
            if (!(v0 >= 0.0 && v0 - g.step < 0.0)) {
                probe(x, y) = v0 - g.step;
                lo = probe(x, y);
                down = denoiser(probe)(target.x, target.y);
            }
            const double v = (up - down) / (hi - lo);
            if (std::isfinite(v)) g.values(x, y) = v;
            else flagged[k] = 1;
        },
        max_threads);

    for (std::size_t k = 0; k < count; ++k) {
        if (flagged[k]) {
            g.warnings.push_back("non-finite difference at (" + std::to_string(x0 + k % cols) + "," +
                                 std::to_string(y0 + k / cols) + ")");
        }
    }
    return g;
}

GradientMap gradient_map(const DenoiserSpec& spec, const Image& img, PixelIndex target, std::size_t window,
                         std::optional<double> step) {
    const std::size_t threads = spec.kind == DenoiserKind::external ? 4 : default_concurrency();
    return gradient_map(make_denoiser(spec), img, target, window, step, threads);
}

GradientSummary gradient_summary(const GradientMap& g, std::size_t top_k) {
    GradientSummary s;
    const std::size_t w = g.values.width();
    const auto px = g.values.pixels();
    std::vector<double> within(s.radii.size(), 0.0);
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double v = px[i];
        s.mass += v;
        s.abs_mass += std::abs(v);
        s.max_abs = std::max(s.max_abs, std::abs(v));
        const double dx = static_cast<double>(i % w) - static_cast<double>(g.target.x);
        const double dy = static_cast<double>(i / w) - static_cast<double>(g.target.y);
        const double r = std::hypot(dx, dy);
        for (std::size_t k = 0; k < s.radii.size(); ++k)
            if (r <= s.radii[k]) within[k] += std::abs(v);
    }
    for (double m : within) s.fractions.push_back(s.abs_mass > 0.0 ? m / s.abs_mass : 0.0);

    std::vector<std::size_t> order(px.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t k = std::min(top_k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = std::abs(px[a]), vb = std::abs(px[b]);
        return va != vb ? va > vb : a < b;
    });
    for (std::size_t i = 0; i < k; ++i) {
        if (px[order[i]] == 0.0) break;
        s.top.push_back({{order[i] % w, order[i] / w}, px[order[i]]});
    }
    return s;
}

std::string to_json(const GradientMap& g, const GradientSummary& s) {
    nlohmann::ordered_json j;
    j["target"] = {g.target.x, g.target.y};
    j["window"] = g.window;
    j["step"] = g.step;
    j["mass"] = s.mass;
    j["abs_mass"] = s.abs_mass;
    j["colormap_scale"] = s.max_abs;
    auto& fr = j["fractions"];
    fr = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < s.radii.size(); ++k) fr.push_back({{"radius", s.radii[k]}, {"fraction", s.fractions[k]}});
    auto& top = j["top"];
    top = nlohmann::ordered_json::array();
    for (const auto& p : s.top) top.push_back({{"x", p.pixel.x}, {"y", p.pixel.y}, {"value", p.value}});
    j["warnings"] = g.warnings;
    return j.dump(2);
}

}  // namespace sbd
