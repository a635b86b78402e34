#include "sbd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sbd/csv.hpp"
#include "sbd/error.hpp"
#include "sbd/image_io.hpp"
#include "sbd/noise.hpp"
#include "sbd/parallel.hpp"
#include "sbd/rng.hpp"

namespace sbd {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const json& j, const char* key, Parse parse, std::vector<T> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.empty()) throw ConfigError(std::string("'") + key + "' must be a non-empty array");
    std::vector<T> out;
    for (const auto& item : v) out.push_back(parse(item));
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

DatasetConfig DatasetConfig::from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        if (!j.is_object()) throw ConfigError("dataset config must be a JSON object");
        DatasetConfig c;
        static const std::vector<std::string> known{"geometry", "particle_classes", "defects", "contrasts",
                                                    "rotations", "scales", "tilts", "shears", "seeds",
                                                    "vacuum_target", "noiseless"};
        for (const auto& [key, value] : j.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end())
                throw ConfigError("unknown dataset config key '" + key + "'");
        }
        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            GeometryConfig geo;
            geo.width = g.value("width", geo.width);
            geo.height = g.value("height", geo.height);
            geo.support_spacing = g.value("support_spacing", geo.support_spacing);
            geo.particle_spacing = g.value("particle_spacing", geo.particle_spacing);
            geo.sigma = g.value("sigma", geo.sigma);
            geo.vacuum_level = g.value("vacuum_level", geo.vacuum_level);
            geo.amplitude = g.value("amplitude", geo.amplitude);
            geo.interface_fraction = g.value("interface_fraction", geo.interface_fraction);
            geo.pixel_size_pm = g.value("pixel_size_pm", geo.pixel_size_pm);
            if (g.contains("particle_diameter_px")) geo.particle_diameter_px = g.at("particle_diameter_px").get<double>();
            const double binning = g.value("binning", 1.0);
            c.geometry = binning == 1.0 ? geo : geo.binned(binning);
        }
        c.particle_classes = parse_list<ParticleClass>(
            j, "particle_classes", [](const json& v) { return parse_particle_class(v.get<std::string>()); },
            c.particle_classes);
        c.defects = parse_list<DefectClass>(
            j, "defects", [](const json& v) { return parse_defect_class(v.get<std::string>()); }, c.defects);
        c.contrasts = parse_list<Contrast>(
            j, "contrasts", [](const json& v) { return parse_contrast(v.get<std::string>()); }, c.contrasts);
        c.rotations = parse_list<double>(j, "rotations", [](const json& v) { return v.get<double>(); }, c.rotations);
        c.scales = parse_list<double>(j, "scales", [](const json& v) { return v.get<double>(); }, c.scales);
        const char* tilt_key = j.contains("tilts") ? "tilts" : "shears";
        c.tilts = parse_list<Point>(
            j, tilt_key, [](const json& v) { return Point{v.at(0).get<double>(), v.at(1).get<double>()}; }, c.tilts);
        c.seeds = parse_list<std::uint64_t>(j, "seeds", [](const json& v) { return v.get<std::uint64_t>(); }, c.seeds);
        c.vacuum_target = j.value("vacuum_target", c.vacuum_target);
        c.noiseless = j.value("noiseless", c.noiseless);
        if (!(c.vacuum_target > 0.0)) throw ConfigError("vacuum_target must be positive");
        for (double s : c.scales)
            if (!(s > 0.0)) throw ConfigError("scales must be positive");
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid dataset config: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("invalid dataset config: ") + e.what());
    }
}

std::string DatasetConfig::to_json() const {
    ojson j;
    const auto& g = geometry;
    j["geometry"] = {{"width", g.width},
                     {"height", g.height},
                     {"support_spacing", g.support_spacing},
                     {"particle_spacing", g.particle_spacing},
                     {"sigma", g.sigma},
                     {"vacuum_level", g.vacuum_level},
                     {"amplitude", g.amplitude},
                     {"interface_fraction", g.interface_fraction},
                     {"pixel_size_pm", g.pixel_size_pm}};
    if (g.particle_diameter_px) j["geometry"]["particle_diameter_px"] = *g.particle_diameter_px;
    auto names = [](const auto& list) {
        std::vector<std::string> out;
        for (const auto& v : list) out.emplace_back(to_string(v));
        return out;
    };
    j["particle_classes"] = names(particle_classes);
    j["defects"] = names(defects);
    j["contrasts"] = names(contrasts);
    j["rotations"] = rotations;
    j["scales"] = scales;
    auto& t = j["tilts"];
    t = ojson::array();
    for (const auto& p : tilts) t.push_back({p.x, p.y});
    j["seeds"] = seeds;
    j["vacuum_target"] = vacuum_target;
    j["noiseless"] = noiseless;
    return j.dump();
}

std::size_t DatasetConfig::cardinality() const {
    return particle_classes.size() * defects.size() * contrasts.size() * tilts.size() * rotations.size() *
           scales.size() * seeds.size();
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

std::string split_tag(std::string_view config_hash, std::size_t index) {
    CounterRng rng(std::stoull(std::string(config_hash), nullptr, 16), index);
    const double u = rng.uniform();
    if (u < 0.90) return "train";
    if (u < 0.95) return "val";
    return "test";
}

// ---------------------------------------------------------------------------
// generation

Synthesized synthesize(const StructureModel& model, const ImagingParams& imaging, double vacuum_target,
                       std::uint64_t noise_seed, bool noiseless, double extra_rotation, double extra_scale) {
    Image rendered = render(model, imaging);
    if (extra_rotation != 0.0 || extra_scale != 1.0) rendered = transform(rendered, extra_rotation, extra_scale);
    const auto mask = vacuum_mask_near_level(rendered, model.vacuum_level);
    Synthesized out;
    out.clean = quantize_to_float(scale_to_dose(rendered, vacuum_target, mask));
    out.noisy = noiseless ? out.clean : poisson_corrupt(out.clean, noise_seed);
    return out;
}

std::vector<TruthAtom> read_truth_csv(const fs::path& path) {
    const auto table = read_csv(path);
    const auto cx = table.column("x"), cy = table.column("y"), cs = table.column("species"),
               co = table.column("occupancy"), cg = table.column("sigma"), cw = table.column("weight");
    std::vector<TruthAtom> out;
    for (const auto& r : table.rows) {
        TruthAtom a;
        a.center = {parse_double(r[cx]), parse_double(r[cy])};
        a.species = r[cs] == "particle" ? Species::particle : Species::support;
        a.occupancy = parse_double(r[co]);
        a.sigma = parse_double(r[cg]);
        a.weight = parse_double(r[cw]);
        out.push_back(a);
    }
    return out;
}

void write_truth_csv(const fs::path& path, const std::vector<TruthAtom>& atoms) {
    std::ostringstream out;
    out << "x,y,species,occupancy,sigma,weight\n";
    for (const auto& a : atoms) {
        out << format_number(a.center.x) << ',' << format_number(a.center.y) << ',' << to_string(a.species) << ','
            << format_number(a.occupancy) << ',' << format_number(a.sigma) << ',' << format_number(a.weight) << '\n';
    }
    write_text(path, out.str());
}

namespace {

struct GridPoint {
    ParticleClass particle;
    DefectClass defect;
    Contrast contrast;
    Point tilt;
    double rotation;
    double scale;
    std::uint64_t seed;
    std::size_t combo;  // index ignoring the seed axis
};

std::vector<GridPoint> expand(const DatasetConfig& c) {
    std::vector<GridPoint> grid;
    std::size_t combo = 0;
    for (auto p : c.particle_classes)
        for (auto d : c.defects)
            for (auto k : c.contrasts)
                for (auto t : c.tilts)
                    for (double r : c.rotations)
                        for (double s : c.scales) {
                            for (auto seed : c.seeds) grid.push_back({p, d, k, t, r, s, seed, combo});
                            ++combo;
                        }
    return grid;
}

std::string entry_id(std::size_t index, const GridPoint& g) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%05zu", index);
    return std::string(prefix) + "-" + std::string(to_string(g.particle)) + "-" + std::string(to_string(g.defect)) +
           "-" + std::string(to_string(g.contrast)) + "-r" + format_number(g.rotation) + "-s" +
           format_number(g.scale) + "-t" + format_number(g.tilt.x) + "_" + format_number(g.tilt.y) + "-seed" +
           std::to_string(g.seed);
}

ojson entry_json(const ManifestEntry& e) {
    return {{"id", e.id},
            {"clean", e.clean.generic_string()},
            {"noisy", e.noisy.generic_string()},
            {"atoms", e.atoms.generic_string()},
            {"model", e.model.generic_string()},
            {"seed", e.seed},
            {"noise_seed", e.noise_seed},
            {"split", e.split},
            {"width", e.imaging.width},
            {"height", e.imaging.height},
            {"rotation", e.imaging.rotation_deg},
            {"scale", e.imaging.scale},
            {"vacuum_target", e.vacuum_target},
            {"noiseless", e.noiseless},
            {"column_sigma", e.column_sigma},
            {"match_threshold", e.match_threshold}};
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
    ojson j;
    j["config_hash"] = manifest.config_hash;
    auto& entries = j["entries"];
    entries = ojson::array();
    for (const auto& e : manifest.entries) entries.push_back(entry_json(e));
    write_text(path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const fs::path& path) {
    const auto text = read_text(path);
    try {
        const json j = json::parse(text);
        DatasetManifest m;
        m.root = path.parent_path();
        m.config_hash = j.value("config_hash", std::string());
        std::vector<std::string> ids;
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.clean = e.at("clean").get<std::string>();
            entry.noisy = e.at("noisy").get<std::string>();
            entry.atoms = e.at("atoms").get<std::string>();
            entry.model = e.at("model").get<std::string>();
            entry.seed = e.value("seed", std::uint64_t{0});
            entry.noise_seed = e.value("noise_seed", entry.seed);
            entry.split = e.value("split", std::string("test"));
            entry.imaging.width = e.value("width", std::size_t{0});
            entry.imaging.height = e.value("height", std::size_t{0});
            entry.imaging.rotation_deg = e.value("rotation", 0.0);
            entry.imaging.scale = e.value("scale", 1.0);
            entry.imaging.seed = entry.seed;
            entry.vacuum_target = e.value("vacuum_target", kDefaultVacuumTarget);
            entry.noiseless = e.value("noiseless", false);
            entry.column_sigma = e.value("column_sigma", 9.0);
            entry.match_threshold = e.value("match_threshold", 30.0);
            ids.push_back(entry.id);
            m.entries.push_back(std::move(entry));
        }
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw ConfigError("manifest " + path.string() + " has duplicate ids");
        return m;
    } catch (const json::exception& e) {
        throw ConfigError("invalid manifest " + path.string() + ": " + e.what());
    }
}

DatasetManifest generate_dataset(const DatasetConfig& config, const fs::path& out_dir) {
    const auto grid = expand(config);
    DatasetManifest manifest;
    manifest.root = out_dir;
    manifest.config_hash = fnv1a_hex(config.to_json());

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& g = grid[i];
        ManifestEntry e;
        e.id = entry_id(i, g);
        e.clean = "clean/" + e.id + ".f32img";
        e.noisy = "noisy/" + e.id + ".f32img";
        e.atoms = "atoms/" + e.id + ".csv";
        e.model = "models/" + e.id + ".json";
        e.seed = g.seed;
        e.noise_seed = mix64(g.seed ^ mix64(0x5bd1e995ULL + g.combo));
        e.split = split_tag(manifest.config_hash, i);
        e.imaging = {config.geometry.width, config.geometry.height, g.rotation, g.scale, g.seed};
        e.vacuum_target = config.vacuum_target;
        e.noiseless = config.noiseless;
        e.column_sigma = config.geometry.sigma * g.scale;
        e.match_threshold = 0.5 * config.geometry.support_spacing * g.scale;
        manifest.entries.push_back(std::move(e));
    }

    const fs::path manifest_path = out_dir / "manifest.json";
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& e : manifest.entries)
            for (const auto* p : {&e.clean, &e.noisy, &e.atoms, &e.model}) fs::remove(out_dir / *p, ec);
        fs::remove(manifest_path, ec);
    };

    try {
        for (const char* sub : {"clean", "noisy", "atoms", "models"}) fs::create_directories(out_dir / sub);
        parallel_for(grid.size(), [&](std::size_t i) {
            const auto& g = grid[i];
            const auto& e = manifest.entries[i];
            GeometryConfig geo = config.geometry;
            geo.tilt_x_deg = g.tilt.x;
            geo.tilt_y_deg = g.tilt.y;
            const auto model = build_structure(g.particle, g.defect, g.contrast, geo);
            const auto data = synthesize(model, e.imaging, e.vacuum_target, e.noise_seed, e.noiseless);
            write_image(data.clean, out_dir / e.clean);
            write_image(data.noisy, out_dir / e.noisy);
            write_truth_csv(out_dir / e.atoms, ground_truth(model, e.imaging));
            write_text(out_dir / e.model, structure_to_json(model) + "\n");
        });
        write_manifest(manifest, manifest_path);
    } catch (...) {
        cleanup();
        throw;
    }
    return manifest;
}

// ---------------------------------------------------------------------------
// benchmark

Polarity detection_polarity(Contrast c) { return c == Contrast::black ? Polarity::dark : Polarity::bright; }

std::vector<TruthAtom> visible_truth(const StructureModel& model, const std::vector<TruthAtom>& truth) {
    const bool bright = detection_polarity(model.contrast) == Polarity::bright;
    std::vector<TruthAtom> out;
    for (const auto& a : truth)
        if (bright ? a.weight > 0.0 : a.weight < 0.0) out.push_back(a);
    return out;
}

namespace {

struct LoadedEntry {
    StructureModel model;
    Image clean;
    Image noisy;
    std::vector<TruthAtom> truth;  // visible only
};

LoadedEntry load_entry(const DatasetManifest& m, const ManifestEntry& e) {
    LoadedEntry out;
    out.model = structure_from_json(read_text(m.resolve(e.model)));
    out.clean = read_image(m.resolve(e.clean));
    out.noisy = read_image(m.resolve(e.noisy));
    require_same_shape(out.clean, out.noisy, "clean/noisy pair");
    out.truth = visible_truth(out.model, read_truth_csv(m.resolve(e.atoms)));
    return out;
}

// Full-occupancy column amplitude after dose scaling.
double visible_amplitude(const StructureModel& model, double vacuum_target) {
    AtomColumn probe;
    probe.species = model.contrast == Contrast::intermediate ? Species::particle : Species::support;
    return std::abs(column_weight(model, probe)) * vacuum_target / model.vacuum_level;
}

BlobParams blob_params_for(const ManifestEntry& e, const StructureModel& model) {
    return BlobParams::for_columns(e.column_sigma, visible_amplitude(model, e.vacuum_target),
                                   detection_polarity(model.contrast));
}

std::vector<const ManifestEntry*> select(const DatasetManifest& m, const std::optional<std::string>& split) {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : m.entries)
        if (!split || e.split == *split) out.push_back(&e);
    return out;
}

std::size_t worker_count(const BenchmarkConfig& config, const std::vector<DenoiserSpec>& specs) {
    std::size_t n = config.max_threads ? config.max_threads : default_concurrency();
    for (const auto& s : specs)
        if (s.kind == DenoiserKind::external) n = std::min<std::size_t>(n, 4);
    return n;
}

std::vector<Point> truth_points(const std::vector<TruthAtom>& truth) {
    std::vector<Point> out;
    for (const auto& a : truth) out.push_back(a.center);
    return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<bool>& flags, bool want) {
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (flags[i] == want) out.push_back(v[i]);
    return out;
}

}  // namespace

BenchmarkReport run_benchmark(const DatasetManifest& manifest, const std::vector<DenoiserSpec>& denoisers,
                              const BenchmarkConfig& config) {
    config.tiling.validate();
    for (const auto& d : denoisers) d.validate();
    const auto entries = select(manifest, config.split);
    const std::size_t per_entry = denoisers.size() * 3;
    std::vector<BenchmarkRow> rows(entries.size() * per_entry);

    parallel_for(
        entries.size(),
        [&](std::size_t ei) {
            const auto& e = *entries[ei];
            auto fail_all = [&](std::size_t di, const std::string& message) {
                for (std::size_t s = 0; s < 3; ++s) {
                    auto& row = rows[ei * per_entry + di * 3 + s];
                    row.image_id = e.id;
                    row.denoiser = denoisers[di].label();
                    row.scope = static_cast<Scope>(s);
                    row.ok = false;
                    row.error = message;
                }
            };
            LoadedEntry data;
            try {
                data = load_entry(manifest, e);
            } catch (const std::exception& ex) {
                for (std::size_t di = 0; di < denoisers.size(); ++di) fail_all(di, ex.what());
                return;
            }
            const auto bp = blob_params_for(e, data.model);
            const double threshold = config.match_threshold ? *config.match_threshold : e.match_threshold;

            std::vector<Point> truth = truth_points(data.truth);
            if (config.truth == TruthSource::detect_clean) truth = centers(detect_blobs(data.clean, bp));
            const auto truth_flags =
                surface_flags(truth, config.alpha ? *config.alpha : default_alpha(truth)).is_surface;

            for (std::size_t di = 0; di < denoisers.size(); ++di) {
                try {
                    const auto start = std::chrono::steady_clock::now();
                    const Image denoised = denoise_tiled(data.noisy, make_denoiser(denoisers[di]), config.tiling, 1);
                    const double ms =
                        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                    const double p = psnr(data.clean, denoised);
                    const double q = ssim(data.clean, denoised);
                    auto dets = detect_blobs(denoised, bp);
                    const auto det_pts = centers(dets);
                    const auto det_flags =
                        surface_flags(det_pts, config.alpha ? *config.alpha : default_alpha(det_pts)).is_surface;

                    for (std::size_t s = 0; s < 3; ++s) {
                        const auto scope = static_cast<Scope>(s);
                        std::vector<Point> a = det_pts, b = truth;
                        if (scope != Scope::all) {
                            const bool want = scope == Scope::surface;
                            a = pick(det_pts, det_flags, want);
                            b = pick(truth, truth_flags, want);
                        }
                        auto& row = rows[ei * per_entry + di * 3 + s];
                        row.image_id = e.id;
                        row.denoiser = denoisers[di].label();
                        row.scope = scope;
                        row.runtime_ms = ms;
                        row.metrics.scope = scope;
                        row.metrics.psnr = p;
                        row.metrics.ssim = q;
                        row.metrics.detection = detection_metrics(match_atoms(a, b, threshold), a.size(), b.size());
                    }
                } catch (const std::exception& ex) {
                    fail_all(di, ex.what());
                }
            }
        },
        worker_count(config, denoisers));

    BenchmarkReport report;
    report.rows = std::move(rows);
    for (const auto& r : report.rows)
        if (!r.ok) ++report.failed_rows;
    report.aggregates = aggregate(report.rows);
    return report;
}

namespace {

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"psnr", "ssim", "precision", "recall", "f1", "jaccard"};
    return names;
}

double metric_value(const MetricsReport& m, const std::string& name) {
    if (name == "psnr") return m.psnr;
    if (name == "ssim") return m.ssim;
    if (name == "precision") return m.detection.precision;
    if (name == "recall") return m.detection.recall;
    if (name == "f1") return m.detection.f1;
    return m.detection.jaccard;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::vector<Aggregate> aggregate(const std::vector<BenchmarkRow>& rows) {
    std::vector<Aggregate> out;
    std::vector<std::map<std::string, std::vector<double>>> samples;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const Aggregate& a) { return a.denoiser == r.denoiser && a.scope == r.scope; });
        if (it == out.end()) {
            out.push_back({r.denoiser, r.scope, 0, {}});
            samples.emplace_back();
            it = out.end() - 1;
        }
        if (!r.ok) continue;
        auto& s = samples[static_cast<std::size_t>(it - out.begin())];
        ++it->n;
        for (const auto& name : metric_names()) s[name].push_back(metric_value(r.metrics, name));
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        for (const auto& name : metric_names()) out[i].stats[name] = mean_sd(samples[i][name]);
    return out;
}

void write_report(const BenchmarkReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream results;
    results << "image_id,denoiser,scope,status,psnr,ssim,precision,recall,f1,jaccard,true_positives,"
               "false_positives,false_negatives,error\n";
    for (const auto& r : report.rows) {
        std::vector<std::string> f{r.image_id, r.denoiser, std::string(to_string(r.scope)), r.ok ? "ok" : "failed"};
        if (r.ok) {
            for (const auto& name : metric_names()) f.push_back(format_number(metric_value(r.metrics, name)));
            f.push_back(std::to_string(r.metrics.detection.true_positives));
            f.push_back(std::to_string(r.metrics.detection.false_positives));
            f.push_back(std::to_string(r.metrics.detection.false_negatives));
            f.emplace_back();
        } else {
            for (int k = 0; k < 9; ++k) f.emplace_back();
            f.push_back(r.error);
        }
        results << csv_row(f) << '\n';
    }
    write_text(dir / "results.csv", results.str());

    std::ostringstream agg;
    agg << "denoiser,scope,n";
    for (const auto& name : metric_names()) agg << ',' << name << "_mean," << name << "_sd";
    agg << '\n';
    for (const auto& a : report.aggregates) {
        std::vector<std::string> f{a.denoiser, std::string(to_string(a.scope)), std::to_string(a.n)};
        for (const auto& name : metric_names()) {
            f.push_back(format_number(a.stats.at(name).first));
            f.push_back(format_number(a.stats.at(name).second));
        }
        agg << csv_row(f) << '\n';
    }
    write_text(dir / "aggregates.csv", agg.str());

    std::ostringstream timings;
    timings << "image_id,denoiser,runtime_ms\n";
    for (const auto& r : report.rows)
        if (r.scope == Scope::all) timings << csv_row({r.image_id, r.denoiser, format_number(r.runtime_ms)}) << '\n';
    write_text(dir / "timings.csv", timings.str());

    ojson index;
    index["results"] = "results.csv";
    index["aggregates"] = "aggregates.csv";
    index["timings"] = "timings.csv";
    index["rows"] = report.rows.size();
    index["failed_rows"] = report.failed_rows;
    auto& denoisers = index["denoisers"];
    denoisers = ojson::array();
    for (const auto& a : report.aggregates)
        if (a.scope == Scope::all) denoisers.push_back(a.denoiser);
    write_text(dir / "report.json", index.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// sweep

SweepReport sweep_geometry(const DatasetManifest& manifest, const DenoiserSpec& denoiser,
                           const std::vector<double>& scales, const std::vector<double>& rotations,
                           const BenchmarkConfig& config) {
    denoiser.validate();
    config.tiling.validate();
    struct Task {
        const ManifestEntry* entry;
        std::string axis;
        double rotation, scale;
    };
    std::vector<Task> tasks;
    for (const auto* e : select(manifest, config.split)) {
        for (double s : scales) tasks.push_back({e, "scale", 0.0, s});
        for (double r : rotations) tasks.push_back({e, "rotation", r, 1.0});
    }
    SweepReport report;
    report.points.resize(tasks.size());
    const auto fn = make_denoiser(denoiser);
    parallel_for(
        tasks.size(),
        [&](std::size_t i) {
            const auto& t = tasks[i];
            const auto model = structure_from_json(read_text(manifest.resolve(t.entry->model)));
            const auto data = synthesize(model, t.entry->imaging, t.entry->vacuum_target, t.entry->noise_seed,
                                         t.entry->noiseless, t.rotation, t.scale);
            const Image denoised = denoise_tiled(data.noisy, fn, config.tiling, 1);
            report.points[i] = {t.entry->id, t.axis, t.rotation, t.scale, psnr(data.clean, denoised)};
        },
        worker_count(config, {denoiser}));
    return report;
}

void write_sweep(const SweepReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream rows;
    rows << "image_id,axis,rotation,scale,psnr\n";
    std::vector<std::pair<std::string, double>> keys;
    std::map<std::pair<std::string, double>, std::vector<double>> groups;
    for (const auto& p : report.points) {
        rows << csv_row({p.image_id, p.axis, format_number(p.rotation), format_number(p.scale), format_number(p.psnr)})
             << '\n';
        const std::pair<std::string, double> key{p.axis, p.axis == "scale" ? p.scale : p.rotation};
        if (!groups.contains(key)) keys.push_back(key);
        groups[key].push_back(p.psnr);
    }
    write_text(dir / "sweep.csv", rows.str());
    std::ostringstream summary;
    summary << "axis,value,n,psnr_mean,psnr_sd\n";
    for (const auto& key : keys) {
        const auto [mean, sd] = mean_sd(groups[key]);
        summary << csv_row({key.first, format_number(key.second), std::to_string(groups[key].size()),
                            format_number(mean), format_number(sd)})
                << '\n';
    }
    write_text(dir / "sweep_summary.csv", summary.str());
}

// ---------------------------------------------------------------------------
// likelihood distribution

std::string_view to_string(RegionClass c) {
    switch (c) {
        case RegionClass::true_positive: return "TP";
        case RegionClass::false_positive: return "FP";
        case RegionClass::false_negative: return "FN";
    }
    return "TP";
}

Quartiles quartiles(std::vector<double> v) {
    Quartiles q;
    q.n = v.size();
    if (v.empty()) return q;
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    q.min = v.front();
    q.q1 = at(0.25);
    q.median = at(0.5);
    q.q3 = at(0.75);
    q.max = v.back();
    return q;
}

LlrReport evaluate_llr_distribution(const DatasetManifest& manifest, const DenoiserSpec& denoiser,
                                    const LlrConfig& config) {
    denoiser.validate();
    const auto& bench = config.bench;
    const auto entries = select(manifest, bench.split);
    std::vector<std::vector<ClassifiedRegion>> per_entry(entries.size());
    std::vector<std::size_t> surface_counts(entries.size(), 0);
    const auto fn = make_denoiser(denoiser);

    parallel_for(
        entries.size(),
        [&](std::size_t ei) {
            const auto& e = *entries[ei];
            const auto data = load_entry(manifest, e);
            const auto bp = blob_params_for(e, data.model);
            const Image denoised = denoise_tiled(data.noisy, fn, bench.tiling, 1);
            auto dets = detect_blobs(denoised, bp);
            const auto det_pts = centers(dets);
            surface_partition(dets, bench.alpha ? *bench.alpha : default_alpha(det_pts));
            const auto truth = truth_points(data.truth);
            const auto truth_flags =
                surface_flags(truth, bench.alpha ? *bench.alpha : default_alpha(truth)).is_surface;
            const double threshold = bench.match_threshold ? *bench.match_threshold : e.match_threshold;
            const auto m = match_atoms(det_pts, truth, threshold);
            const double dilation = config.dilation ? *config.dilation : e.column_sigma;
            const double vacuum = estimate_vacuum(data.noisy, dets, dilation, bench.alpha).rate;

            std::vector<std::optional<std::size_t>> det_of_truth(truth.size());
            for (const auto& p : m.pairs) det_of_truth[p.b] = p.a;
            auto& out = per_entry[ei];
            for (std::size_t t = 0; t < truth.size(); ++t) {
                if (!truth_flags[t]) continue;
                ++surface_counts[ei];
                if (det_of_truth[t]) {
                    const auto& d = dets[*det_of_truth[t]];
                    out.push_back({e.id, RegionClass::true_positive,
                                   region_llr(data.noisy, denoised, d.center, std::sqrt(2.0) * d.scale, vacuum)});
                } else {
                    out.push_back({e.id, RegionClass::false_negative,
                                   region_llr(data.noisy, denoised, truth[t],
                                              std::sqrt(2.0) * data.truth[t].sigma, vacuum)});
                }
            }
            for (std::size_t a : m.unmatched_a) {
                if (!dets[a].is_surface) continue;
                out.push_back({e.id, RegionClass::false_positive,
                               region_llr(data.noisy, denoised, dets[a].center, std::sqrt(2.0) * dets[a].scale, vacuum)});
            }
        },
        worker_count(bench, {denoiser}));

    LlrReport report;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        report.surface_truth += surface_counts[i];
        for (auto& r : per_entry[i]) {
            r.region.id = report.regions.size();
            report.regions.push_back(std::move(r));
        }
    }
    for (auto cls : {RegionClass::true_positive, RegionClass::false_positive, RegionClass::false_negative}) {
        std::vector<double> values;
        for (const auto& r : report.regions)
            if (r.cls == cls) values.push_back(r.region.llr_per_pixel);
        report.summary[cls] = quartiles(std::move(values));
    }
    return report;
}

void write_llr_report(const LlrReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream rows;
    rows << "region_id,image_id,class,cx,cy,radius,n_pixels,fit_rate,vacuum_rate,llr_per_pixel\n";
    for (const auto& c : report.regions) {
        const auto& r = c.region;
        rows << csv_row({std::to_string(r.id), c.image_id, std::string(to_string(c.cls)), format_number(r.center.x),
                         format_number(r.center.y), format_number(r.radius), std::to_string(r.n_pixels),
                         format_number(r.fit_rate), format_number(r.vacuum_rate), format_number(r.llr_per_pixel)})
             << '\n';
    }
    write_text(dir / "llr_regions.csv", rows.str());
    std::ostringstream summary;
    summary << "class,n,min,q1,median,q3,max\n";
    for (const auto& [cls, q] : report.summary) {
        summary << csv_row({std::string(to_string(cls)), std::to_string(q.n), format_number(q.min), format_number(q.q1),
                            format_number(q.median), format_number(q.q3), format_number(q.max)})
                << '\n';
    }
    write_text(dir / "llr_summary.csv", summary.str());
}

// ---------------------------------------------------------------------------
// grid search

GridSearchResult grid_search(const DatasetManifest& manifest, DenoiserKind kind,
                             const std::map<std::string, std::vector<std::string>>& grid,
                             const BenchmarkConfig& config) {
    auto entries = select(manifest, config.split ? config.split : std::optional<std::string>("val"));
    if (entries.empty() && !config.split) entries = select(manifest, std::nullopt);
    if (entries.empty()) throw ConfigError("grid search has no entries to evaluate");

    std::vector<std::map<std::string, std::string>> combos{{}};
    for (const auto& [key, values] : grid) {
        if (values.empty()) throw ConfigError("grid for '" + key + "' is empty");
        std::vector<std::map<std::string, std::string>> next;
        for (const auto& c : combos)
            for (const auto& v : values) {
                auto n = c;
                n[key] = v;
                next.push_back(std::move(n));
            }
        combos = std::move(next);
    }

    std::vector<std::pair<Image, Image>> data;
    for (const auto* e : entries) data.emplace_back(read_image(manifest.resolve(e->clean)), read_image(manifest.resolve(e->noisy)));

    GridSearchResult result;
    bool first = true;
    for (const auto& params : combos) {
        DenoiserSpec spec{kind, params};
        spec.validate();
        const auto fn = make_denoiser(spec);
        std::vector<double> scores(data.size());
        parallel_for(data.size(), [&](std::size_t i) {
            scores[i] = psnr(data[i].first, denoise_tiled(data[i].second, fn, config.tiling, 1));
        });
        const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        result.tried.emplace_back(spec, mean);
        if (first || mean > result.best_psnr) {
            result.best = spec;
            result.best_psnr = mean;
            first = false;
        }
    }
    return result;
}

}  // namespace sbd
