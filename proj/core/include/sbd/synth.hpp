#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbd/geometry.hpp"
#include "sbd/image.hpp"

namespace sbd {

enum class Species { support, particle };
enum class Contrast { white, intermediate, black };
enum class ParticleClass { PtNp1, PtNp2, PtNp3, PtNp4 };
enum class DefectClass { D0, D1, D2, Dh, Ds };

std::string_view to_string(Species s);
std::string_view to_string(Contrast c);
std::string_view to_string(ParticleClass p);
std::string_view to_string(DefectClass d);
Contrast parse_contrast(std::string_view s);
ParticleClass parse_particle_class(std::string_view s);
DefectClass parse_defect_class(std::string_view s);

/// One projected atomic column rendered as an isotropic Gaussian peak.
struct AtomColumn {
    Point center;
    Species species = Species::support;
    double occupancy = 1.0;  ///< fraction of the full column, in [0, 1]
    double sigma = 9.0;      ///< peak width in pixels
};

/// Lattice and intensity parameters for build_structure(). Lengths are pixels.
struct GeometryConfig {
    std::size_t width = 1024;
    std::size_t height = 1024;
    double support_spacing = 60.0;
    double particle_spacing = 52.0;  ///< in-row spacing of the particle lattice
    double sigma = 9.0;
    double vacuum_level = 0.45;
    double amplitude = 4.0;
    double interface_fraction = 0.75;  ///< support top row at this fraction of the height
    double pixel_size_pm = 277.5 / 52.0;
    std::optional<double> particle_diameter_px;  ///< overrides the class default
    double tilt_x_deg = 0.0;
    double tilt_y_deg = 0.0;

    /// Same physical layout sampled with `factor`-times coarser pixels.
    GeometryConfig binned(double factor) const;

    /// Nominal particle diameter in pixels for a class (1, 2 or 3 nm).
    double particle_diameter(ParticleClass cls) const;

    bool operator==(const GeometryConfig&) const = default;
};

struct StructureModel {
    std::vector<AtomColumn> columns;
    Contrast contrast = Contrast::white;
    double vacuum_level = 0.45;
    double amplitude = 4.0;
    ParticleClass particle_class = ParticleClass::PtNp2;
    DefectClass defect_class = DefectClass::D0;
    Point shear;                 ///< (sx, sy): x += sx*(y-cy), y += sy*(x-cx)
    Point sigma_scale{1.0, 1.0};  ///< per-axis peak-width factors from tilt
    std::size_t width = 1024;     ///< canvas the model was laid out on
    std::size_t height = 1024;
    double pixel_size_pm = 0.0;
    int column_height = 1;  ///< atoms per particle column (Ds keeps one)
    std::optional<std::size_t> defect_site;  ///< index of the modified column (Dh/Ds)

    /// Throws ValidationError on violated invariants.
    void validate() const;
};

struct ImagingParams {
    std::size_t width = 1024;
    std::size_t height = 1024;
    double rotation_deg = 0.0;
    double scale = 1.0;
    std::uint64_t seed = 0;
};

StructureModel build_structure(ParticleClass particle, DefectClass defect, Contrast contrast,
                               const GeometryConfig& geometry = {});

/// Signed peak weight for a column under the model's contrast polarity,
/// including the black-contrast amplitude clip.
double column_weight(const StructureModel& model, const AtomColumn& column);

/// Maps a model-space point through shear, then rotation and scale about the image center.
Point project_point(const StructureModel& model, Point p, const ImagingParams& params);

/// Rotation by rotation_deg and isotropic scale about the center of a width x height grid.
/// transform() samples its input at the inverse of this map.
Point transform_point(Point p, std::size_t width, std::size_t height, double rotation_deg, double scale);

Image render(const StructureModel& model, const ImagingParams& params);

/// Bilinear resampling about the image center with replicate borders.
/// scale must lie in [0.5, 2]; rotation 0 / scale 1 returns the input unchanged.
Image transform(const Image& img, double rotation_deg, double scale);

/// A ground-truth column position after all geometric transforms.
struct TruthAtom {
    Point center;
    Species species = Species::support;
    double occupancy = 1.0;
    double sigma = 9.0;
    double weight = 0.0;  ///< signed rendered peak excess
};

/// Post-transform centers of every column with occupancy > 0. `render_params`
/// is applied by render(); `rotation_deg`/`scale` by a subsequent transform().
std::vector<TruthAtom> ground_truth(const StructureModel& model, const ImagingParams& render_params,
                                    double rotation_deg = 0.0, double scale = 1.0);

std::string structure_to_json(const StructureModel& model);
StructureModel structure_from_json(std::string_view text);

}  // namespace sbd
