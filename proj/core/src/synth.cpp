#include "sbd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "sbd/error.hpp"
#include "sbd/parallel.hpp"

namespace sbd {
namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;
// Pt in-row column spacing along [110], used to convert nanometre sizes.
constexpr double kParticleRowSpacingPm = 277.5;
// Gaussians are evaluated out to this many sigmas; exp(-32) < 1e-13.
constexpr double kRenderCutoff = 8.0;

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<E>(i);
    }
    throw ParameterError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 2> kSpeciesNames{"support", "particle"};
constexpr std::array<std::string_view, 3> kContrastNames{"white", "intermediate", "black"};
constexpr std::array<std::string_view, 4> kParticleNames{"PtNp1", "PtNp2", "PtNp3", "PtNp4"};
constexpr std::array<std::string_view, 5> kDefectNames{"D0", "D1", "D2", "Dh", "Ds"};

// Particle columns sorted by how exposed they are: fewest particle neighbours
// within 1.1 nearest-neighbour distances, then topmost, then rightmost.
std::vector<std::size_t> exposed_particle_sites(const std::vector<AtomColumn>& cols, double nn) {
    std::vector<std::size_t> sites;
    std::vector<int> coordination(cols.size(), 0);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i].species != Species::particle) continue;
        sites.push_back(i);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (j != i && cols[j].species == Species::particle &&
                distance(cols[i].center, cols[j].center) <= 1.1 * nn) {
                ++coordination[i];
            }
        }
    }
    std::sort(sites.begin(), sites.end(), [&](std::size_t a, std::size_t b) {
        if (coordination[a] != coordination[b]) return coordination[a] < coordination[b];
        if (cols[a].center.y != cols[b].center.y) return cols[a].center.y < cols[b].center.y;
        return cols[a].center.x > cols[b].center.x;
    });
    return sites;
}

}  // namespace

std::string_view to_string(Species s) { return kSpeciesNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(Contrast c) { return kContrastNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(ParticleClass p) { return kParticleNames[static_cast<std::size_t>(p)]; }
std::string_view to_string(DefectClass d) { return kDefectNames[static_cast<std::size_t>(d)]; }

Contrast parse_contrast(std::string_view s) { return parse_enum<Contrast>(s, kContrastNames, "contrast"); }
ParticleClass parse_particle_class(std::string_view s) {
    return parse_enum<ParticleClass>(s, kParticleNames, "particle class");
}
DefectClass parse_defect_class(std::string_view s) {
    return parse_enum<DefectClass>(s, kDefectNames, "defect class");
}

GeometryConfig GeometryConfig::binned(double factor) const {
    if (!(factor > 0.0)) throw ParameterError("binning factor must be positive");
    GeometryConfig g = *this;
    g.width = static_cast<std::size_t>(std::lround(static_cast<double>(width) / factor));
    g.height = static_cast<std::size_t>(std::lround(static_cast<double>(height) / factor));
    g.support_spacing /= factor;
    g.particle_spacing /= factor;
    g.sigma /= factor;
    g.pixel_size_pm *= factor;
    if (particle_diameter_px) g.particle_diameter_px = *particle_diameter_px / factor;
    return g;
}

double GeometryConfig::particle_diameter(ParticleClass cls) const {
    if (particle_diameter_px) return *particle_diameter_px;
    double nm = 2.0;
    switch (cls) {
        case ParticleClass::PtNp1:
        case ParticleClass::PtNp2: nm = 2.0; break;
        case ParticleClass::PtNp3: nm = 1.0; break;
        case ParticleClass::PtNp4: nm = 3.0; break;
    }
    return nm * 1000.0 / pixel_size_pm;
}

void StructureModel::validate() const {
    if (!(vacuum_level > 0.0)) throw ValidationError("vacuum_level must be positive");
    if (!(amplitude > 0.0)) throw ValidationError("amplitude must be positive");
    if (width == 0 || height == 0) throw ValidationError("model canvas must be non-empty");
    for (const auto& c : columns) {
        if (!(c.occupancy >= 0.0 && c.occupancy <= 1.0)) throw ValidationError("column occupancy outside [0,1]");
        if (!(c.sigma > 0.0)) throw ValidationError("column sigma must be positive");
        if (!std::isfinite(c.center.x) || !std::isfinite(c.center.y))
            throw ValidationError("column center is not finite");
    }
}

StructureModel build_structure(ParticleClass particle, DefectClass defect, Contrast contrast,
                               const GeometryConfig& g) {
    if (g.width == 0 || g.height == 0) throw ParameterError("geometry canvas must be non-empty");
    if (!(g.support_spacing > 0.0 && g.particle_spacing > 0.0 && g.sigma > 0.0))
        throw ParameterError("lattice spacings and sigma must be positive");
    if (!(g.vacuum_level > 0.0 && g.amplitude > 0.0))
        throw ParameterError("vacuum level and amplitude must be positive");
    if (!(g.interface_fraction > 0.0 && g.interface_fraction < 1.0))
        throw ParameterError("interface_fraction must lie in (0, 1)");

    StructureModel m;
    m.contrast = contrast;
    m.vacuum_level = g.vacuum_level;
    m.amplitude = g.amplitude;
    m.particle_class = particle;
    m.defect_class = defect;
    m.width = g.width;
    m.height = g.height;
    m.pixel_size_pm = g.pixel_size_pm;
    m.shear = {std::tan(g.tilt_x_deg * kDegToRad), std::tan(g.tilt_y_deg * kDegToRad)};
    m.sigma_scale = {1.0 + 0.05 * g.tilt_x_deg, 1.0 + 0.05 * g.tilt_y_deg};

    const double w = static_cast<double>(g.width);
    const double h = static_cast<double>(g.height);
    const double cx = (w - 1.0) / 2.0;
    const double margin = 2.0 * g.sigma;

    // Centred-rectangular [110]-like particle lattice: in-row spacing a,
    // rows a*sqrt(2)/2 apart, alternate rows shifted by a/2.
    const double a = g.particle_spacing;
    const double row_pitch = a * std::numbers::sqrt2 / 2.0;
    const double interface_y = std::round(g.interface_fraction * h);
    const double bottom_row = interface_y - 2.0 * row_pitch;
    const double diameter = g.particle_diameter(particle);
    const double radius = diameter / 2.0;
    const Point envelope_center{cx, bottom_row - 0.7 * radius};

    if (!(diameter > 0.0) || diameter > w - 2.0 * margin || envelope_center.y - radius < margin) {
        throw ParameterError("particle diameter " + std::to_string(diameter) + " px exceeds the image extent");
    }

    m.column_height = std::max(2, static_cast<int>(std::lround(diameter * g.pixel_size_pm / kParticleRowSpacingPm)));

    // Support: rectangular lattice from the interface row down, aligned on cx.
    for (double y = interface_y; y <= h - 1.0 - margin; y += g.support_spacing) {
        const double first = cx - std::floor((cx - margin) / g.support_spacing) * g.support_spacing;
        for (double x = first; x <= w - 1.0 - margin; x += g.support_spacing) {
            m.columns.push_back({{x, y}, Species::support, 1.0, g.sigma});
        }
    }

    // Particle: lattice clipped to a disk whose lower part is truncated by a facet at bottom_row.
    const int rows = static_cast<int>(std::ceil(1.7 * radius / row_pitch)) + 1;
    const int half_span = static_cast<int>(std::ceil(radius / a)) + 1;
    for (int k = 0; k <= rows; ++k) {
        const double y = bottom_row - k * row_pitch;
        const double shift = (k % 2 != 0) ? a / 2.0 : 0.0;
        for (int j = -half_span; j <= half_span; ++j) {
            const Point p{cx + j * a + shift, y};
            if (distance(p, envelope_center) <= radius + 1e-9) {
                m.columns.push_back({p, Species::particle, 1.0, g.sigma});
            }
        }
    }

    // PtNp1 carries an extra column between the particle facet and the support.
    if (particle == ParticleClass::PtNp1) {
        m.columns.push_back({{cx + a / 2.0, bottom_row + row_pitch}, Species::particle, 1.0, g.sigma});
    }

    const double nn = std::hypot(a / 2.0, row_pitch);
    const auto sites = exposed_particle_sites(m.columns, nn);
    if (defect != DefectClass::D0 && sites.empty()) {
        throw ParameterError("particle has no columns to modify");
    }
    switch (defect) {
        case DefectClass::D0: break;
        case DefectClass::D1:
            m.columns.erase(m.columns.begin() + static_cast<std::ptrdiff_t>(sites.front()));
            break;
        case DefectClass::D2: {
            const std::size_t first = sites.front();
            std::size_t second = first;
            double best = 0.0;
            for (std::size_t s : sites) {
                if (s == first) continue;
                const double d = distance(m.columns[s].center, m.columns[first].center);
                if (second == first || d < best - 1e-9) {
                    best = d;
                    second = s;
                }
            }
            if (second == first) throw ParameterError("D2 needs at least two particle columns");
            m.columns.erase(m.columns.begin() + static_cast<std::ptrdiff_t>(std::max(first, second)));
            m.columns.erase(m.columns.begin() + static_cast<std::ptrdiff_t>(std::min(first, second)));
            break;
        }
        case DefectClass::Dh:
            m.columns[sites.front()].occupancy = 0.5;
            m.defect_site = sites.front();
            break;
        case DefectClass::Ds:
            m.columns[sites.front()].occupancy = 1.0 / m.column_height;
            m.defect_site = sites.front();
            break;
    }
    return m;
}

double column_weight(const StructureModel& model, const AtomColumn& column) {
    double sign = 1.0;
    switch (model.contrast) {
        case Contrast::white: sign = 1.0; break;
        case Contrast::black: sign = -1.0; break;
        case Contrast::intermediate: sign = column.species == Species::particle ? 1.0 : -0.5; break;
    }
    double amplitude = model.amplitude;
    if (sign < 0.0) {
        amplitude = std::min(amplitude, model.vacuum_level / -sign);
    }
    return sign * column.occupancy * amplitude;
}

Point transform_point(Point p, std::size_t width, std::size_t height, double rotation_deg, double scale) {
    const double cx = (static_cast<double>(width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(height) - 1.0) / 2.0;
    const double t = rotation_deg * kDegToRad;
    const double c = std::cos(t);
    const double s = std::sin(t);
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    return {cx + scale * (c * dx - s * dy), cy + scale * (s * dx + c * dy)};
}

Point project_point(const StructureModel& model, Point p, const ImagingParams& params) {
    const double cx = (static_cast<double>(params.width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(params.height) - 1.0) / 2.0;
    const Point sheared{p.x + model.shear.x * (p.y - cy), p.y + model.shear.y * (p.x - cx)};
    return transform_point(sheared, params.width, params.height, params.rotation_deg, params.scale);
}

Image render(const StructureModel& model, const ImagingParams& params) {
    model.validate();
    if (params.width == 0 || params.height == 0) throw ParameterError("render canvas must be non-empty");
    if (!(params.scale > 0.0)) throw ParameterError("render scale must be positive");

    // Each peak is an anisotropic Gaussian with axes sigma*sigma_scale, rotated
    // with the image; precompute the inverse covariance per column.
    struct Peak {
        Point c;
        double weight;
        double ixx, ixy, iyy;
        double reach;
    };
    const double t = params.rotation_deg * kDegToRad;
    const double ct = std::cos(t);
    const double st = std::sin(t);
    std::vector<Peak> peaks;
    peaks.reserve(model.columns.size());
    for (const auto& col : model.columns) {
        const double weight = column_weight(model, col);
        if (weight == 0.0) continue;
        const double sx = col.sigma * model.sigma_scale.x * params.scale;
        const double sy = col.sigma * model.sigma_scale.y * params.scale;
        // Sigma^-1 = R diag(1/sx^2, 1/sy^2) R^T
        const double ax = 1.0 / (sx * sx);
        const double ay = 1.0 / (sy * sy);
        peaks.push_back({project_point(model, col.center, params), weight, ax * ct * ct + ay * st * st,
                         (ax - ay) * ct * st, ax * st * st + ay * ct * ct, kRenderCutoff * std::max(sx, sy)});
    }

    Image img(params.width, params.height, model.vacuum_level, model.pixel_size_pm * (1.0 / params.scale));
    parallel_for(params.height, [&](std::size_t y) {
        auto row = img.row(y);
        const double fy = static_cast<double>(y);
        for (const auto& pk : peaks) {
            const double dy = fy - pk.c.y;
            if (std::abs(dy) > pk.reach) continue;
            const long x0 = std::max(0L, static_cast<long>(std::floor(pk.c.x - pk.reach)));
            const long x1 = std::min(static_cast<long>(params.width) - 1, static_cast<long>(std::ceil(pk.c.x + pk.reach)));
            for (long x = x0; x <= x1; ++x) {
                const double dx = static_cast<double>(x) - pk.c.x;
                const double q = pk.ixx * dx * dx + 2.0 * pk.ixy * dx * dy + pk.iyy * dy * dy;
                row[static_cast<std::size_t>(x)] += pk.weight * std::exp(-0.5 * q);
            }
        }
        for (double& v : row) v = std::max(v, 0.0);
    });
    return img;
}

Image transform(const Image& img, double rotation_deg, double scale) {
    if (!(scale >= 0.5 && scale <= 2.0)) {
        throw ParameterError("transform scale must lie in [0.5, 2]");
    }
    if (rotation_deg == 0.0 && scale == 1.0) {
        return img;
    }
    const std::size_t w = img.width();
    const std::size_t h = img.height();
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double t = rotation_deg * kDegToRad;
    const double c = std::cos(t) / scale;
    const double s = std::sin(t) / scale;
    const double max_x = static_cast<double>(w) - 1.0;
    const double max_y = static_cast<double>(h) - 1.0;

    Image out(w, h, 0.0, img.pixel_size() == 0.0 ? 0.0 : img.pixel_size() / scale);
    parallel_for(h, [&](std::size_t y) {
        const double dy = static_cast<double>(y) - cy;
        for (std::size_t x = 0; x < w; ++x) {
            const double dx = static_cast<double>(x) - cx;
            // Inverse map: rotate by -t, divide by scale.
            const double sx = std::clamp(cx + c * dx + s * dy, 0.0, max_x);
            const double sy = std::clamp(cy - s * dx + c * dy, 0.0, max_y);
            const auto x0 = static_cast<std::size_t>(std::floor(sx));
            const auto y0 = static_cast<std::size_t>(std::floor(sy));
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const std::size_t y1 = std::min(y0 + 1, h - 1);
            const double fx = sx - static_cast<double>(x0);
            const double fy = sy - static_cast<double>(y0);
            const double top = (1.0 - fx) * img(x0, y0) + fx * img(x1, y0);
            const double bottom = (1.0 - fx) * img(x0, y1) + fx * img(x1, y1);
            out(x, y) = (1.0 - fy) * top + fy * bottom;
        }
    });
    return out;
}

std::vector<TruthAtom> ground_truth(const StructureModel& model, const ImagingParams& render_params,
                                    double rotation_deg, double scale) {
    std::vector<TruthAtom> atoms;
    for (const auto& col : model.columns) {
        if (!(col.occupancy > 0.0)) continue;
        const Point rendered = project_point(model, col.center, render_params);
        const Point moved = transform_point(rendered, render_params.width, render_params.height, rotation_deg, scale);
        atoms.push_back({moved, col.species, col.occupancy, col.sigma * render_params.scale * scale,
                         column_weight(model, col)});
    }
    return atoms;
}

std::string structure_to_json(const StructureModel& m) {
    json cols = json::array();
    for (const auto& c : m.columns) {
        cols.push_back({{"x", c.center.x},
                        {"y", c.center.y},
                        {"species", to_string(c.species)},
                        {"occupancy", c.occupancy},
                        {"sigma", c.sigma}});
    }
    json j = {{"columns", cols},
              {"contrast", to_string(m.contrast)},
              {"vacuum_level", m.vacuum_level},
              {"amplitude", m.amplitude},
              {"particle_class", to_string(m.particle_class)},
              {"defect_class", to_string(m.defect_class)},
              {"shear", {m.shear.x, m.shear.y}},
              {"sigma_scale", {m.sigma_scale.x, m.sigma_scale.y}},
              {"width", m.width},
              {"height", m.height},
              {"pixel_size_pm", m.pixel_size_pm},
              {"column_height", m.column_height}};
    if (m.defect_site) j["defect_site"] = *m.defect_site;
    return j.dump(2);
}

StructureModel structure_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        StructureModel m;
        for (const auto& c : j.at("columns")) {
            m.columns.push_back({{c.at("x").get<double>(), c.at("y").get<double>()},
                                 parse_enum<Species>(c.at("species").get<std::string>(), kSpeciesNames, "species"),
                                 c.at("occupancy").get<double>(),
                                 c.at("sigma").get<double>()});
        }
        m.contrast = parse_contrast(j.at("contrast").get<std::string>());
        m.vacuum_level = j.at("vacuum_level").get<double>();
        m.amplitude = j.at("amplitude").get<double>();
        m.particle_class = parse_particle_class(j.at("particle_class").get<std::string>());
        m.defect_class = parse_defect_class(j.at("defect_class").get<std::string>());
        m.shear = {j.at("shear").at(0).get<double>(), j.at("shear").at(1).get<double>()};
        m.sigma_scale = {j.at("sigma_scale").at(0).get<double>(), j.at("sigma_scale").at(1).get<double>()};
        m.width = j.at("width").get<std::size_t>();
        m.height = j.at("height").get<std::size_t>();
        m.pixel_size_pm = j.value("pixel_size_pm", 0.0);
        m.column_height = j.value("column_height", 1);
        if (j.contains("defect_site")) m.defect_site = j.at("defect_site").get<std::size_t>();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid structure JSON: ") + e.what());
    }
}

}  // namespace sbd
