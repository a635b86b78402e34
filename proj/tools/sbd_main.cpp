// sbd: command-line front end for generation, denoising, detection and
// evaluation of shot-noise-limited atomic-resolution images.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbd/csv.hpp"
#include "sbd/denoise.hpp"
#include "sbd/detect.hpp"
#include "sbd/error.hpp"
#include "sbd/harness.hpp"
#include "sbd/image_io.hpp"
#include "sbd/likelihood.hpp"
#include "sbd/noise.hpp"
#include "sbd/probe.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sbd::IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Splits a method list on top-level commas; quotes and parentheses nest.
std::vector<std::string> split_methods(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    bool quoted = false;
    for (char c : text) {
        if (c == '"') quoted = !quoted;
        else if (!quoted && c == '(') ++depth;
        else if (!quoted && c == ')') --depth;
        if (c == ',' && !quoted && depth == 0) {
            out.push_back(cur);
            cur.clear();
            continue;
        }
        cur += c;
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// "name", "name(k=v,k=v)" or "external:cmd".
sbd::DenoiserSpec parse_method(const std::string& token, const std::vector<std::string>& extra = {}) {
    if (token.starts_with("external:")) return sbd::DenoiserSpec::parse(token, extra);
    const auto open = token.find('(');
    if (open == std::string::npos) return sbd::DenoiserSpec::parse(token, extra);
    if (token.back() != ')') throw sbd::ParameterError("unbalanced parentheses in '" + token + "'");
    auto params = extra;
    for (auto& p : sbd::split_csv_line(token.substr(open + 1, token.size() - open - 2)))
        if (!p.empty()) params.push_back(p);
    return sbd::DenoiserSpec::parse(token.substr(0, open), params);
}

sbd::PixelIndex parse_pixel(const std::string& text) {
    const auto parts = sbd::split_csv_line(text);
    if (parts.size() != 2) throw sbd::ParameterError("expected X,Y but got '" + text + "'");
    return {static_cast<std::size_t>(std::stoul(parts[0])), static_cast<std::size_t>(std::stoul(parts[1]))};
}

std::vector<double> parse_numbers(const std::string& text) {
    std::vector<double> out;
    for (const auto& p : sbd::split_csv_line(text))
        if (!p.empty()) out.push_back(sbd::parse_double(p));
    return out;
}

void print_failures(const sbd::BenchmarkReport& report) {
    for (const auto& r : report.rows)
        if (!r.ok && r.scope == sbd::Scope::all)
            std::cerr << "failed: " << r.image_id << " " << r.denoiser << ": " << r.error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation-based denoising toolkit for shot-noise-limited atomic images"};
    app.require_subcommand(1);
    int exit_code = 0;

    // generate -------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset from a JSON grid config");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "Dataset config JSON")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->callback([&] {
        const auto config = sbd::DatasetConfig::from_json(slurp(gen_config));
        const auto manifest = sbd::generate_dataset(config, gen_out);
        std::cout << "wrote " << manifest.entries.size() << " entries to " << gen_out << "/manifest.json\n";
    });

    // corrupt --------------------------------------------------------------
    auto* cor = app.add_subcommand("corrupt", "Scale to dose and apply Poisson noise");
    std::string cor_in, cor_out;
    std::uint64_t cor_seed = 0;
    double cor_target = sbd::kDefaultVacuumTarget;
    std::optional<double> cor_level;
    bool cor_no_dose = false;
    cor->add_option("--in", cor_in)->required();
    cor->add_option("--out", cor_out)->required();
    cor->add_option("--seed", cor_seed)->required();
    cor->add_option("--vacuum-target", cor_target, "Mean counts per vacuum pixel");
    cor->add_option("--vacuum-level", cor_level, "Known vacuum intensity of the input (default: near-minimum mask)");
    cor->add_flag("--no-dose", cor_no_dose, "Use the input as Poisson rates unchanged");
    cor->callback([&] {
        auto img = sbd::read_image(cor_in);
        if (!cor_no_dose) {
            img = cor_level ? sbd::scale_to_dose(img, cor_target, sbd::vacuum_mask_near_level(img, *cor_level))
                            : sbd::scale_to_dose(img, cor_target);
        }
        sbd::write_image(sbd::poisson_corrupt(img, cor_seed), cor_out);
    });

    // denoise --------------------------------------------------------------
    auto* den = app.add_subcommand("denoise", "Apply a denoiser with overlapping tiles");
    std::string den_method, den_in, den_out;
    std::size_t den_tile = 400, den_overlap = 200;
    std::vector<std::string> den_params;
    den->add_option("--method", den_method, "identity|lowpass|wiener|vstnlm|external:<cmd>")->required();
    den->add_option("--in", den_in)->required();
    den->add_option("--out", den_out)->required();
    den->add_option("--tile", den_tile);
    den->add_option("--overlap", den_overlap);
    den->add_option("--param", den_params, "key=value denoiser parameter")->take_all();
    den->callback([&] {
        const auto spec = parse_method(den_method, den_params);
        const auto img = sbd::read_image(den_in);
        sbd::write_image(sbd::denoise_tiled(img, spec, {den_tile, den_overlap}), den_out);
    });

    // detect ---------------------------------------------------------------
    auto* det = app.add_subcommand("detect", "Detect atomic columns (LoG) and flag surface atoms");
    std::string det_in, det_out, det_polarity = "bright";
    double det_sigma = 9.0, det_amplitude = 4.0;
    std::optional<double> det_sigma_min, det_sigma_max, det_threshold, det_alpha;
    int det_scales = 6;
    det->add_option("--in", det_in)->required();
    det->add_option("--out", det_out, "Atom CSV")->required();
    det->add_option("--polarity", det_polarity, "bright or dark");
    det->add_option("--sigma", det_sigma, "Nominal column sigma in pixels");
    det->add_option("--amplitude", det_amplitude, "Nominal column amplitude in counts");
    det->add_option("--sigma-min", det_sigma_min);
    det->add_option("--sigma-max", det_sigma_max);
    det->add_option("--scales", det_scales);
    det->add_option("--threshold", det_threshold);
    det->add_option("--alpha", det_alpha, "Alpha-shape radius (default 1.5x median neighbour distance)");
    det->callback([&] {
        auto params = sbd::BlobParams::for_columns(det_sigma, det_amplitude, sbd::parse_polarity(det_polarity));
        if (det_sigma_min) params.sigma_min = *det_sigma_min;
        if (det_sigma_max) params.sigma_max = *det_sigma_max;
        if (det_threshold) params.threshold = *det_threshold;
        params.n_scales = det_scales;
        auto found = sbd::detect_blobs(sbd::read_image(det_in), params);
        const double alpha = det_alpha ? *det_alpha : sbd::default_alpha(sbd::centers(found));
        for (const auto& w : sbd::surface_partition(found, alpha)) std::cerr << "warning: " << w << "\n";
        sbd::write_detections_csv(det_out, found);
        std::cout << found.size() << " atoms\n";
    });

    // probe ----------------------------------------------------------------
    auto* prb = app.add_subcommand("probe", "Finite-difference receptive field of one output pixel");
    std::string prb_method, prb_in, prb_pixel, prb_out, prb_summary, prb_view;
    std::size_t prb_window = sbd::kDefaultProbeWindow;
    std::optional<double> prb_step;
    std::vector<std::string> prb_params;
    prb->add_option("--method", prb_method)->required();
    prb->add_option("--in", prb_in)->required();
    prb->add_option("--pixel", prb_pixel, "X,Y")->required();
    prb->add_option("--window", prb_window, "Half-width in pixels");
    prb->add_option("--step", prb_step);
    prb->add_option("--out", prb_out, "Gradient F32IMG")->required();
    prb->add_option("--summary", prb_summary, "Summary JSON");
    prb->add_option("--view", prb_view, "Signed colormap PPM normalized by max |value|");
    prb->add_option("--param", prb_params)->take_all();
    prb->callback([&] {
        const auto spec = parse_method(prb_method, prb_params);
        const auto img = sbd::read_image(prb_in);
        const auto g = sbd::gradient_map(spec, img, parse_pixel(prb_pixel), prb_window, prb_step);
        for (const auto& w : g.warnings) std::cerr << "warning: " << w << "\n";
        sbd::write_image(g.values, prb_out);
        const auto s = sbd::gradient_summary(g);
        if (!prb_summary.empty()) {
            std::ofstream(prb_summary) << sbd::to_json(g, s) << "\n";
        }
        if (!prb_view.empty()) sbd::export_signed_colormap(g.values, s.max_abs > 0 ? s.max_abs : 1.0, prb_view);
    });

    // bench ----------------------------------------------------------------
    auto* ben = app.add_subcommand("bench", "Benchmark denoisers over a dataset manifest");
    std::string ben_manifest, ben_methods, ben_out, ben_truth = "generator";
    std::size_t ben_tile = 400, ben_overlap = 200, ben_threads = 0;
    std::optional<double> ben_threshold, ben_alpha;
    std::optional<std::string> ben_split;
    ben->add_option("--manifest", ben_manifest)->required();
    ben->add_option("--methods", ben_methods, "Comma list, e.g. identity,lowpass(cutoff=0.3),wiener,vstnlm")
        ->required();
    ben->add_option("--out", ben_out, "Report directory")->required();
    ben->add_option("--tile", ben_tile);
    ben->add_option("--overlap", ben_overlap);
    ben->add_option("--threshold", ben_threshold, "Matching threshold in pixels");
    ben->add_option("--alpha", ben_alpha);
    ben->add_option("--split", ben_split, "train, val or test");
    ben->add_option("--truth", ben_truth, "generator or detect-clean");
    ben->add_option("--threads", ben_threads);
    ben->callback([&] {
        const auto manifest = sbd::load_manifest(ben_manifest);
        std::vector<sbd::DenoiserSpec> specs;
        for (const auto& m : split_methods(ben_methods)) specs.push_back(parse_method(m));
        sbd::BenchmarkConfig cfg;
        cfg.tiling = {ben_tile, ben_overlap};
        cfg.match_threshold = ben_threshold;
        cfg.alpha = ben_alpha;
        cfg.split = ben_split;
        cfg.max_threads = ben_threads;
        if (ben_truth == "detect-clean") cfg.truth = sbd::TruthSource::detect_clean;
        else if (ben_truth != "generator") throw sbd::ConfigError("unknown truth source '" + ben_truth + "'");
        const auto report = sbd::run_benchmark(manifest, specs, cfg);
        sbd::write_report(report, ben_out);
        print_failures(report);
        if (report.failed_rows > 0) exit_code = kExitPartial;
    });

    // sweep ----------------------------------------------------------------
    auto* swp = app.add_subcommand("sweep", "PSNR under extra scale and rotation of the clean images");
    std::string swp_manifest, swp_method, swp_out, swp_scales = "0.75,0.82,1,1.25", swp_rotations = "-45,0,45";
    std::size_t swp_tile = 400, swp_overlap = 200;
    std::optional<std::string> swp_split;
    swp->add_option("--manifest", swp_manifest)->required();
    swp->add_option("--method", swp_method)->required();
    swp->add_option("--out", swp_out)->required();
    swp->add_option("--scales", swp_scales, "Comma list of scale factors");
    swp->add_option("--rotations", swp_rotations, "Comma list of degrees");
    swp->add_option("--tile", swp_tile);
    swp->add_option("--overlap", swp_overlap);
    swp->add_option("--split", swp_split);
    swp->callback([&] {
        sbd::BenchmarkConfig cfg;
        cfg.tiling = {swp_tile, swp_overlap};
        cfg.split = swp_split;
        const auto report = sbd::sweep_geometry(sbd::load_manifest(swp_manifest), parse_method(swp_method),
                                                parse_numbers(swp_scales), parse_numbers(swp_rotations), cfg);
        sbd::write_sweep(report, swp_out);
    });

    // llr ------------------------------------------------------------------
    auto* llr = app.add_subcommand("llr", "Likelihood-ratio maps and their TP/FP/FN distribution");
    std::string llr_noisy, llr_denoised, llr_atoms, llr_out, llr_raster, llr_view, llr_manifest, llr_method;
    double llr_dilation = 9.0;
    std::optional<double> llr_vacuum, llr_alpha;
    std::size_t llr_tile = 400, llr_overlap = 200;
    std::optional<std::string> llr_split;
    llr->add_option("--manifest", llr_manifest, "Evaluate the distribution over a dataset");
    llr->add_option("--method", llr_method, "Denoiser for --manifest mode");
    llr->add_option("--noisy", llr_noisy, "Single-image mode: raw counts");
    llr->add_option("--denoised", llr_denoised);
    llr->add_option("--atoms", llr_atoms, "Detections CSV");
    llr->add_option("--out", llr_out, "Region CSV (single image) or report directory")->required();
    llr->add_option("--raster", llr_raster, "LLR raster F32IMG");
    llr->add_option("--view", llr_view, "Signed colormap PPM of the raster");
    llr->add_option("--vacuum-rate", llr_vacuum);
    llr->add_option("--dilation", llr_dilation);
    llr->add_option("--alpha", llr_alpha);
    llr->add_option("--tile", llr_tile);
    llr->add_option("--overlap", llr_overlap);
    llr->add_option("--split", llr_split);
    llr->callback([&] {
        if (!llr_manifest.empty()) {
            if (llr_method.empty()) throw sbd::ConfigError("--manifest needs --method");
            sbd::LlrConfig cfg;
            cfg.bench.tiling = {llr_tile, llr_overlap};
            cfg.bench.alpha = llr_alpha;
            cfg.bench.split = llr_split;
            const auto report =
                sbd::evaluate_llr_distribution(sbd::load_manifest(llr_manifest), parse_method(llr_method), cfg);
            sbd::write_llr_report(report, llr_out);
            return;
        }
        if (llr_noisy.empty() || llr_denoised.empty() || llr_atoms.empty())
            throw sbd::ConfigError("single-image mode needs --noisy, --denoised and --atoms");
        const auto noisy = sbd::read_image(llr_noisy);
        const auto denoised = sbd::read_image(llr_denoised);
        const auto atoms = sbd::read_detections_csv(llr_atoms);
        const double vacuum =
            llr_vacuum ? *llr_vacuum : sbd::estimate_vacuum(noisy, atoms, llr_dilation, llr_alpha).rate;
        const auto map = sbd::llr_map(noisy, denoised, atoms, vacuum);
        sbd::write_llr_csv(llr_out, map.per_region);
        if (!llr_raster.empty()) sbd::write_image(map.raster, llr_raster);
        if (!llr_view.empty()) {
            double scale = 0.0;
            for (double v : map.raster.pixels()) scale = std::max(scale, std::abs(v));
            sbd::export_signed_colormap(map.raster, scale > 0 ? scale : 1.0, llr_view);
        }
    });

    // export ---------------------------------------------------------------
    auto* exp = app.add_subcommand("export", "Write a 16-bit PGM view of an F32IMG");
    std::string exp_in, exp_out;
    std::optional<double> exp_lo, exp_hi;
    exp->add_option("--in", exp_in)->required();
    exp->add_option("--out", exp_out)->required();
    exp->add_option("--lo", exp_lo);
    exp->add_option("--hi", exp_hi);
    exp->callback([&] {
        const auto img = sbd::read_image(exp_in);
        sbd::export_view(img, exp_lo ? *exp_lo : img.min(), exp_hi ? *exp_hi : img.max(), exp_out);
    });

    // stats ----------------------------------------------------------------
    auto* sta = app.add_subcommand("stats", "Noise statistics over repeated noisy frames");
    std::vector<std::string> sta_frames;
    std::optional<std::string> sta_clean;
    double sta_level = sbd::kDefaultVacuumTarget;
    sta->add_option("--frames", sta_frames, "Noisy frames of one clean image")->required()->take_all();
    sta->add_option("--clean", sta_clean, "Clean image used to locate the vacuum");
    sta->add_option("--vacuum-level", sta_level, "Vacuum intensity of the clean image");
    sta->callback([&] {
        std::vector<sbd::Image> frames;
        for (const auto& f : sta_frames) frames.push_back(sbd::read_image(f));
        const auto mask = sta_clean ? sbd::vacuum_mask_near_level(sbd::read_image(*sta_clean), sta_level)
                                    : sbd::PixelMask(frames.front().size(), true);
        const auto r = sbd::noise_stats(frames, mask);
        nlohmann::ordered_json j{{"slope", r.slope},
                                 {"intercept", r.intercept},
                                 {"histogram_divergence", r.histogram_divergence},
                                 {"chi_square_dof", r.chi_square_dof},
                                 {"chi_square_p", r.chi_square_p},
                                 {"pooled_mean", r.pooled_mean},
                                 {"n_frames", r.n_frames},
                                 {"n_pixels", r.n_pixels}};
        std::cout << j.dump(2) << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    } catch (const sbd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const sbd::ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
