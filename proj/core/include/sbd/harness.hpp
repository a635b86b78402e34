#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbd/denoise.hpp"
#include "sbd/detect.hpp"
#include "sbd/image.hpp"
#include "sbd/likelihood.hpp"
#include "sbd/metrics.hpp"
#include "sbd/synth.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// Dataset generation

/// Grid of structures and imaging conditions; every combination of the list
/// fields becomes one dataset entry.
struct DatasetConfig {
    GeometryConfig geometry;  // after binning
    std::vector<ParticleClass> particle_classes{ParticleClass::PtNp2};
    std::vector<DefectClass> defects{DefectClass::D0};
    std::vector<Contrast> contrasts{Contrast::white};
    std::vector<double> rotations{0.0};
    std::vector<double> scales{1.0};
    std::vector<Point> tilts{{0.0, 0.0}};  // (tilt_x, tilt_y) in degrees
    std::vector<std::uint64_t> seeds{1};
    double vacuum_target = 0.45;
    bool noiseless = false;  // "noisy" files hold the clean image

    /// Keys: geometry{width,height,binning,support_spacing,particle_spacing,
    /// sigma,vacuum_level,amplitude,interface_fraction,pixel_size_pm,
    /// particle_diameter_px}, particle_classes, defects, contrasts, rotations,
    /// scales, tilts (or shears), seeds, vacuum_target, noiseless.
    static DatasetConfig from_json(std::string_view text);
    std::string to_json() const;
    std::size_t cardinality() const;
};

struct ManifestEntry {
    std::string id;
    std::filesystem::path clean;
    std::filesystem::path noisy;
    std::filesystem::path atoms;
    std::filesystem::path model;
    std::uint64_t seed = 0;
    std::uint64_t noise_seed = 0;
    std::string split;  // train, val or test
    ImagingParams imaging;
    double vacuum_target = 0.45;
    bool noiseless = false;
    double column_sigma = 0.0;      // rendered peak sigma in pixels
    double match_threshold = 0.0;   // half the support spacing, in rendered pixels
};

struct DatasetManifest {
    std::filesystem::path root;  // directory the entry paths are relative to
    std::string config_hash;
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }
};

/// FNV-1a 64 of the text, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Train/val/test tag (90/5/5) derived from the config hash and entry index.
std::string split_tag(std::string_view config_hash, std::size_t index);

struct Synthesized {
    Image clean;   // dose-calibrated, float32-representable
    Image noisy;
};

/// render -> transform(extra_rotation, extra_scale) -> dose -> float32 ->
/// Poisson. The dose mask selects pixels near the model's vacuum level.
Synthesized synthesize(const StructureModel& model, const ImagingParams& imaging, double vacuum_target,
                       std::uint64_t noise_seed, bool noiseless, double extra_rotation = 0.0, double extra_scale = 1.0);

/// Writes clean/noisy F32IMG, atoms CSV, model JSON per entry and
/// manifest.json into `out_dir`. On failure every file written so far is
/// removed and the error rethrown.
DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

std::vector<TruthAtom> read_truth_csv(const std::filesystem::path& path);
void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthAtom>& atoms);

// ---------------------------------------------------------------------------
// Benchmark

enum class TruthSource { generator, detect_clean };

struct BenchmarkConfig {
    TilingSpec tiling;
    std::optional<double> match_threshold;  // default: per-entry value
    std::optional<double> alpha;            // default: default_alpha per point set
    std::optional<std::string> split;       // restrict to one split tag
    TruthSource truth = TruthSource::generator;
    std::size_t max_threads = 0;            // 0: hardware concurrency
};

struct BenchmarkRow {
    std::string image_id;
    std::string denoiser;
    Scope scope = Scope::all;
    bool ok = true;
    std::string error;
    MetricsReport metrics;
    double runtime_ms = 0.0;
};

struct Aggregate {
    std::string denoiser;
    Scope scope = Scope::all;
    std::size_t n = 0;
    std::map<std::string, std::pair<double, double>> stats;  // metric -> (mean, sd)
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    std::vector<Aggregate> aggregates;
    std::size_t failed_rows = 0;
};

/// Polarity used to detect a contrast class.
Polarity detection_polarity(Contrast c);

/// Ground-truth atoms that appear with the detection polarity.
std::vector<TruthAtom> visible_truth(const StructureModel& model, const std::vector<TruthAtom>& truth);

BenchmarkReport run_benchmark(const DatasetManifest& manifest, const std::vector<DenoiserSpec>& denoisers,
                              const BenchmarkConfig& config = {});

std::vector<Aggregate> aggregate(const std::vector<BenchmarkRow>& rows);

/// results.csv, aggregates.csv, timings.csv and report.json in `dir`.
void write_report(const BenchmarkReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Geometry sweep

struct SweepPoint {
    std::string image_id;
    std::string axis;  // "scale" or "rotation"
    double rotation = 0.0;
    double scale = 1.0;
    double psnr = 0.0;
};

struct SweepReport {
    std::vector<SweepPoint> points;
};

/// Re-synthesizes every entry with an extra image transform (each scale at
/// rotation 0, each rotation at scale 1), denoises and scores PSNR against the
/// transformed clean image.
SweepReport sweep_geometry(const DatasetManifest& manifest, const DenoiserSpec& denoiser,
                           const std::vector<double>& scales, const std::vector<double>& rotations,
                           const BenchmarkConfig& config = {});

/// sweep.csv and sweep_summary.csv (axis,value,n,psnr_mean,psnr_sd).
void write_sweep(const SweepReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Likelihood-ratio distribution

enum class RegionClass { true_positive, false_positive, false_negative };
std::string_view to_string(RegionClass c);

struct ClassifiedRegion {
    std::string image_id;
    RegionClass cls = RegionClass::true_positive;
    RegionLlr region;
};

struct Quartiles {
    std::size_t n = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

/// Linear-interpolation quartiles; all zero for an empty sample.
Quartiles quartiles(std::vector<double> values);

struct LlrConfig {
    BenchmarkConfig bench;
    std::optional<double> dilation;  // default: rendered column sigma
};

struct LlrReport {
    std::vector<ClassifiedRegion> regions;
    std::map<RegionClass, Quartiles> summary;
    std::size_t surface_truth = 0;
};

/// Matches detections to truth; each surface truth atom yields a true
/// positive (at its matched detection) or a false negative (at the truth
/// centre), each unmatched surface detection a false positive.
LlrReport evaluate_llr_distribution(const DatasetManifest& manifest, const DenoiserSpec& denoiser,
                                    const LlrConfig& config = {});

/// llr_regions.csv and llr_summary.csv in `dir`.
void write_llr_report(const LlrReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Parameter search

struct GridSearchResult {
    DenoiserSpec best;
    double best_psnr = 0.0;
    std::vector<std::pair<DenoiserSpec, double>> tried;  // spec, mean PSNR
};

/// Exhaustive search over the Cartesian product of parameter values,
/// maximizing mean PSNR over the entries of `split` (default "val").
GridSearchResult grid_search(const DatasetManifest& manifest, DenoiserKind kind,
                             const std::map<std::string, std::vector<std::string>>& grid,
                             const BenchmarkConfig& config = {});

}  // namespace sbd
