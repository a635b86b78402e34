#include <doctest.h>

#include <cmath>
#include <json.hpp>

#include "sbd/denoise.hpp"
#include "sbd/error.hpp"
#include "sbd/noise.hpp"
#include "sbd/probe.hpp"
#include "sbd/rng.hpp"

using namespace sbd;

namespace {

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed, double scale) {
    Image img(w, h, 0.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CounterRng rng(seed, i);
        img.pixels()[i] = scale * rng.uniform();
    }
    return img;
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.pixels()[i] - b.pixels()[i]));
    return m;
}

}  // namespace

TEST_CASE("default step") {
    CHECK(default_probe_step(Image(4, 4, 0.2)) == doctest::Approx(1e-3));
    CHECK(default_probe_step(Image(4, 4, 7.0)) == doctest::Approx(7e-3));
}

TEST_CASE("identity gives a delta map") {
    const Image img = random_image(30, 20, 1, 5.0);
    const auto g = gradient_map([](const Image& i) { return i; }, img, {12, 7}, 6);
    for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 30; ++x) CHECK(g.values(x, y) == ((x == 12 && y == 7) ? 1.0 : 0.0));
    const auto s = gradient_summary(g);
    CHECK(s.mass == 1.0);
    for (double f : s.fractions) CHECK(f == 1.0);
    REQUIRE_FALSE(s.top.empty());
    CHECK(s.top[0].pixel.x == 12);
    CHECK(s.top[0].pixel.y == 7);
}

TEST_CASE("lowpass gradient is its impulse response") {
    const std::size_t n = 64;
    const PixelIndex t{30, 33};
    Image delta(n, n, 0.0);
    delta(t.x, t.y) = 1.0;
    const Image impulse = lowpass(delta, 0.25);
    const auto fn = make_denoiser(DenoiserSpec::parse("lowpass"));
    for (std::uint64_t seed : {2u, 3u}) {
        const auto g = gradient_map(fn, random_image(n, n, seed, 3.0 * static_cast<double>(seed)), t, n, std::nullopt, 2);
        CHECK(max_abs_diff(g.values, impulse) < 1e-6);
    }
    const auto s = gradient_summary(gradient_map(fn, random_image(n, n, 4, 1.0), t, n));
    CHECK(s.mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.fractions[0] < s.fractions[1]);
    CHECK(s.fractions[1] < 1.0);
}

TEST_CASE("window restricts the probed pixels") {
    const auto fn = make_denoiser(DenoiserSpec::parse("lowpass"));
    const auto g = gradient_map(fn, random_image(48, 48, 5, 1.0), {3, 40}, 4);
    CHECK(g.window == 4);
    for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 0; x < 48; ++x)
            if (x > 7 || y < 36 || y > 44) CHECK(g.values(x, y) == 0.0);
    CHECK(g.values(3, 40) != 0.0);
}

TEST_CASE("wiener on a constant image averages locally") {
    const auto fn = make_denoiser(DenoiserSpec::parse("wiener", {"radius=4"}));
    const auto g = gradient_map(fn, Image(40, 40, 3.0), {20, 20}, 12);
    const auto s = gradient_summary(g);
    CHECK(s.mass > 0.0);
    CHECK(s.mass <= 1.01);
}

TEST_CASE("thread count does not change the map") {
    const auto fn = make_denoiser(DenoiserSpec::parse("vstnlm", {"window=9", "patch=3"}));
    const Image img = poisson_corrupt(Image(32, 32, 2.0), 6);
    const auto a = gradient_map(fn, img, {16, 16}, 5, 0.01, 1);
    const auto b = gradient_map(fn, img, {16, 16}, 5, 0.01, 3);
    CHECK(a.values == b.values);
}

TEST_CASE("non-finite differences are flagged") {
    const auto fn = [](const Image& i) {
        Image out = i;
        if (i(0, 0) > 1.0) out(5, 5) = INFINITY;
        return out;
    };
    const auto g = gradient_map(fn, Image(10, 10, 1.0), {5, 5}, 10, 0.5);
    CHECK(g.values(0, 0) == 0.0);
    CHECK_FALSE(g.warnings.empty());
}

TEST_CASE("summary edge cases and json") {
    GradientMap zero{{2, 2}, 2, 1e-3, Image(5, 5, 0.0), {}};
    const auto s = gradient_summary(zero);
    CHECK(s.mass == 0.0);
    for (double f : s.fractions) CHECK(f == 0.0);

    const auto j = nlohmann::json::parse(to_json(zero, s));
    CHECK(j.at("mass").get<double>() == 0.0);
    CHECK(j.at("fractions").size() == 3);

    CHECK_THROWS_AS(gradient_map([](const Image& i) { return i; }, Image(4, 4, 1.0), {4, 0}, 2), ParameterError);
    CHECK_THROWS_AS(gradient_map([](const Image& i) { return i; }, Image(4, 4, 1.0), {0, 0}, 2, -1.0), ParameterError);
}
