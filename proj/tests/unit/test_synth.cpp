#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "sbd/error.hpp"
#include "sbd/synth.hpp"

using namespace sbd;

namespace {

const GeometryConfig kSmall = GeometryConfig{}.binned(4);

ImagingParams params_for(const StructureModel& m) { return {m.width, m.height, 0.0, 1.0, 0}; }

std::size_t count_species(const StructureModel& m, Species s) {
    return static_cast<std::size_t>(
        std::count_if(m.columns.begin(), m.columns.end(), [&](const AtomColumn& c) { return c.species == s; }));
}

double min_pair_distance(const StructureModel& m) {
    double best = INFINITY;
    for (std::size_t i = 0; i < m.columns.size(); ++i)
        for (std::size_t j = i + 1; j < m.columns.size(); ++j)
            best = std::min(best, distance(m.columns[i].center, m.columns[j].center));
    return best;
}

// Columns of `a` with no counterpart at the same position in `b`.
std::vector<AtomColumn> missing_from(const StructureModel& a, const StructureModel& b) {
    std::vector<AtomColumn> out;
    for (const auto& c : a.columns) {
        const bool found = std::any_of(b.columns.begin(), b.columns.end(),
                                       [&](const AtomColumn& d) { return distance(c.center, d.center) < 1e-9; });
        if (!found) out.push_back(c);
    }
    return out;
}

}  // namespace

TEST_CASE("particle class sizes follow the nominal diameters") {
    const GeometryConfig g;
    for (auto cls : {ParticleClass::PtNp1, ParticleClass::PtNp2, ParticleClass::PtNp3, ParticleClass::PtNp4}) {
        const auto m = build_structure(cls, DefectClass::D0, Contrast::white, g);
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& c : m.columns) {
            if (c.species != Species::particle) continue;
            lo = std::min(lo, c.center.x);
            hi = std::max(hi, c.center.x);
        }
        const double diameter = g.particle_diameter(cls);
        CAPTURE(to_string(cls));
        // Column centres span the envelope up to one lattice spacing at each side.
        CHECK(hi - lo <= diameter);
        CHECK(hi - lo >= diameter - 2.0 * g.particle_spacing);
    }
    const double px_per_nm = 1000.0 / g.pixel_size_pm;
    CHECK(g.particle_diameter(ParticleClass::PtNp3) == doctest::Approx(1.0 * px_per_nm));
    CHECK(g.particle_diameter(ParticleClass::PtNp2) == doctest::Approx(2.0 * px_per_nm));
}

TEST_CASE("defect operators change the column multiset as specified") {
    for (auto cls : {ParticleClass::PtNp1, ParticleClass::PtNp2, ParticleClass::PtNp3, ParticleClass::PtNp4}) {
        CAPTURE(to_string(cls));
        const auto d0 = build_structure(cls, DefectClass::D0, Contrast::white, kSmall);
        const auto d1 = build_structure(cls, DefectClass::D1, Contrast::white, kSmall);
        const auto d2 = build_structure(cls, DefectClass::D2, Contrast::white, kSmall);
        const auto dh = build_structure(cls, DefectClass::Dh, Contrast::white, kSmall);
        const auto ds = build_structure(cls, DefectClass::Ds, Contrast::white, kSmall);

        CHECK(d1.columns.size() == d0.columns.size() - 1);
        CHECK(missing_from(d0, d1).size() == 1);
        CHECK(missing_from(d1, d0).empty());

        REQUIRE(d2.columns.size() == d0.columns.size() - 2);
        const auto removed = missing_from(d0, d2);
        REQUIRE(removed.size() == 2);
        CHECK(removed[0].species == Species::particle);
        CHECK(removed[1].species == Species::particle);
        const double nn = std::hypot(kSmall.particle_spacing / 2.0, kSmall.particle_spacing * std::sqrt(2.0) / 2.0);
        CHECK(distance(removed[0].center, removed[1].center) <= nn * 1.01);

        std::map<double, int> occ_h, occ_s;
        for (const auto& c : dh.columns) ++occ_h[c.occupancy];
        for (const auto& c : ds.columns) ++occ_s[c.occupancy];
        CHECK(occ_h.size() == 2);
        CHECK(occ_h[0.5] == 1);
        CHECK(occ_h[1.0] == static_cast<int>(d0.columns.size()) - 1);
        CHECK(occ_s[1.0 / ds.column_height] == 1);
        CHECK(occ_s[1.0] == static_cast<int>(d0.columns.size()) - 1);
        REQUIRE(dh.defect_site.has_value());
        CHECK(dh.columns[*dh.defect_site].occupancy == 0.5);
    }
}

TEST_CASE("columns are well separated and both species are present") {
    for (auto cls : {ParticleClass::PtNp1, ParticleClass::PtNp2, ParticleClass::PtNp3, ParticleClass::PtNp4}) {
        const auto m = build_structure(cls, DefectClass::D0, Contrast::white);
        CHECK(min_pair_distance(m) >= 5.0 * 9.0);
        CHECK(count_species(m, Species::support) > 0);
        CHECK(count_species(m, Species::particle) > 0);
        CHECK_NOTHROW(m.validate());
    }
}

TEST_CASE("oversized particle is rejected") {
    GeometryConfig g = kSmall;
    g.particle_diameter_px = 10.0 * static_cast<double>(g.width);
    CHECK_THROWS_AS(build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::white, g), ParameterError);
}

TEST_CASE("render: empty model is the vacuum level") {
    StructureModel m = build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::white, kSmall);
    m.columns.clear();
    const Image img = render(m, params_for(m));
    CHECK(img.min() == m.vacuum_level);
    CHECK(img.max() == m.vacuum_level);
}

TEST_CASE("render: single column peak and occupancy linearity") {
    StructureModel m = build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::white, kSmall);
    m.columns = {{{40.0, 50.0}, Species::support, 1.0, 3.0}};
    const Image full = render(m, params_for(m));
    CHECK(full(40, 50) == doctest::Approx(m.vacuum_level + m.amplitude).epsilon(1e-12));
    CHECK(full.max() == full(40, 50));
    // Neighbouring pixel follows the unit-peak Gaussian.
    CHECK(full(43, 50) - m.vacuum_level == doctest::Approx(m.amplitude * std::exp(-0.5)).epsilon(1e-12));

    m.columns[0].occupancy = 0.5;
    const Image half = render(m, params_for(m));
    for (std::size_t y = 40; y < 60; ++y)
        for (std::size_t x = 30; x < 50; ++x)
            CHECK(half(x, y) - m.vacuum_level ==
                  doctest::Approx(0.5 * (full(x, y) - m.vacuum_level)).epsilon(1e-12));

    m.columns[0].occupancy = 1.0;
    m.amplitude *= 3.0;
    const Image triple = render(m, params_for(m));
    CHECK(triple(40, 50) - m.vacuum_level == doctest::Approx(3.0 * (full(40, 50) - m.vacuum_level)));
}

TEST_CASE("render: contrast polarity and bounds") {
    for (auto contrast : {Contrast::white, Contrast::intermediate, Contrast::black}) {
        const auto m = build_structure(ParticleClass::PtNp2, DefectClass::D0, contrast, kSmall);
        const Image img = render(m, params_for(m));
        CAPTURE(to_string(contrast));
        CHECK(img.min() >= 0.0);
        if (contrast == Contrast::white) {
            CHECK(img.min() == doctest::Approx(m.vacuum_level).epsilon(1e-12));
            CHECK(img.max() >= m.vacuum_level);
        }
        if (contrast == Contrast::black) CHECK(img.max() <= m.vacuum_level + 1e-12);
    }
    const auto m = build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::intermediate, kSmall);
    for (const auto& c : m.columns) CHECK((column_weight(m, c) > 0.0) == (c.species == Species::particle));
}

TEST_CASE("transform: identity is bitwise") {
    const auto m = build_structure(ParticleClass::PtNp3, DefectClass::D0, Contrast::white, kSmall);
    const Image img = render(m, params_for(m));
    CHECK(transform(img, 0.0, 1.0) == img);
    CHECK_THROWS_AS(transform(img, 0.0, 0.4), ParameterError);
    CHECK_THROWS_AS(transform(img, 0.0, 2.5), ParameterError);
}

TEST_CASE("transform: 90 degree rotation is an index permutation") {
    const std::size_t n = 33;
    Image img(n, n, 1.0);
    for (std::size_t y = 1; y + 1 < n; ++y)
        for (std::size_t x = 1; x + 1 < n; ++x) img(x, y) = std::sin(0.3 * x) + 0.1 * static_cast<double>(y * y);
    const Image rot = transform(img, 90.0, 1.0);
    // Forward map x' = c + R(90)(x - c); the output samples the inverse.
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) CHECK(rot(x, y) == doctest::Approx(img(y, n - 1 - x)).epsilon(1e-9));
}

TEST_CASE("transform: rotation round trip on interior pixels") {
    const auto m = build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::white, kSmall);
    const Image img = render(m, params_for(m));
    const Image back = transform(transform(img, 30.0, 1.0), -30.0, 1.0);
    const long w = static_cast<long>(img.width()), h = static_cast<long>(img.height());
    int checked = 0;
    for (long y = 64; y < h - 64; ++y) {
        for (long x = 64; x < w - 64; ++x) {
            double grad = 0.0;
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    const double gx = 0.5 * (img.clamped(x + dx + 1, y + dy) - img.clamped(x + dx - 1, y + dy));
                    const double gy = 0.5 * (img.clamped(x + dx, y + dy + 1) - img.clamped(x + dx, y + dy - 1));
                    grad = std::max(grad, std::hypot(gx, gy));
                }
            CHECK(std::abs(back(x, y) - img(x, y)) <= 2.0 * grad + 1e-12);
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("ground truth follows the rendering transform") {
    const auto m = build_structure(ParticleClass::PtNp2, DefectClass::D1, Contrast::white, kSmall);
    ImagingParams p = params_for(m);
    p.rotation_deg = 20.0;
    p.scale = 0.8;
    const auto truth = ground_truth(m, p);
    CHECK(truth.size() == m.columns.size());
    const Image img = render(m, p);
    // Every truth centre sits on a local peak of the rendered image.
    for (const auto& a : truth) {
        const long x = std::lround(a.center.x), y = std::lround(a.center.y);
        if (x < 2 || y < 2 || x >= static_cast<long>(img.width()) - 2 || y >= static_cast<long>(img.height()) - 2) continue;
        const double v = img.clamped(x, y);
        CHECK(v >= img.clamped(x + 2, y));
        CHECK(v >= img.clamped(x - 2, y));
        CHECK(v >= img.clamped(x, y + 2));
        CHECK(v >= img.clamped(x, y - 2));
    }
    const auto dh = build_structure(ParticleClass::PtNp2, DefectClass::Dh, Contrast::white, kSmall);
    CHECK(ground_truth(dh, params_for(dh)).size() == dh.columns.size());
}

TEST_CASE("tilt shears positions and widens peaks") {
    GeometryConfig g = kSmall;
    g.tilt_x_deg = 4.0;
    const auto m = build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::white, g);
    CHECK(m.shear.x == doctest::Approx(std::tan(4.0 * M_PI / 180.0)));
    CHECK(m.sigma_scale.x == doctest::Approx(1.2));
    CHECK(m.sigma_scale.y == doctest::Approx(1.0));
}

TEST_CASE("structure JSON round trip") {
    const auto m = build_structure(ParticleClass::PtNp1, DefectClass::Ds, Contrast::intermediate, kSmall);
    const auto back = structure_from_json(structure_to_json(m));
    REQUIRE(back.columns.size() == m.columns.size());
    for (std::size_t i = 0; i < m.columns.size(); ++i) {
        CHECK(back.columns[i].center == m.columns[i].center);
        CHECK(back.columns[i].occupancy == m.columns[i].occupancy);
        CHECK(back.columns[i].species == m.columns[i].species);
    }
    CHECK(back.contrast == m.contrast);
    CHECK(back.defect_class == m.defect_class);
    CHECK(back.column_height == m.column_height);
    CHECK(render(back, params_for(back)) == render(m, params_for(m)));
    CHECK_THROWS_AS(structure_from_json("{not json"), ConfigError);
}

TEST_CASE("enum names parse back") {
    CHECK(parse_particle_class("PtNp4") == ParticleClass::PtNp4);
    CHECK(parse_defect_class("Dh") == DefectClass::Dh);
    CHECK(parse_contrast("black") == Contrast::black);
    CHECK_THROWS_AS(parse_contrast("grey"), ParameterError);
}
