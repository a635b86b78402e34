// Acceptance checks. `sbd_acceptance N` runs criterion N, no argument runs all.
// Each prints one line "criterion N: PASS|FAIL (...)".

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "sbd/csv.hpp"
#include "sbd/denoise.hpp"
#include "sbd/detect.hpp"
#include "sbd/harness.hpp"
#include "sbd/likelihood.hpp"
#include "sbd/metrics.hpp"
#include "sbd/noise.hpp"
#include "sbd/probe.hpp"
#include "sbd/rng.hpp"
#include "sbd/synth.hpp"

using namespace sbd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("sbd-accept-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

StructureModel white_model(std::size_t binning) {
    return build_structure(ParticleClass::PtNp2, DefectClass::D0, Contrast::white,
                           GeometryConfig{}.binned(static_cast<double>(binning)));
}

// ---------------------------------------------------------------------------

Outcome noise_model() {
    const auto m = white_model(4);
    const Image rendered = render(m, {m.width, m.height, 0.0, 1.0, 0});
    const PixelMask vacuum = vacuum_mask_near_level(rendered, m.vacuum_level);
    const Image clean = scale_to_dose(rendered, kDefaultVacuumTarget, vacuum);

    std::vector<Image> frames;
    for (std::uint64_t s = 0; s < 40; ++s) frames.push_back(poisson_corrupt(clean, 1000 + s));
    const auto fit = noise_stats(frames, vacuum);

    int good = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const std::vector<Image> pair{poisson_corrupt(clean, 50000 + 2 * s), poisson_corrupt(clean, 50001 + 2 * s)};
        if (noise_stats(pair, vacuum).chi_square_p > 0.01) ++good;
    }
    const bool pass = fit.slope >= 0.9 && fit.slope <= 1.1 && std::abs(fit.intercept) < 0.05 && good >= 99;
    return {pass, "slope " + fmt(fit.slope) + ", intercept " + fmt(fit.intercept) + ", chi-square p > 0.01 in " +
                      std::to_string(good) + "/100 seeds"};
}

Outcome vst_stabilization() {
    bool pass = true;
    std::string detail = "variance";
    for (double rate : {4.0, 8.0, 20.0}) {
        double s = 0.0, s2 = 0.0;
        const std::size_t n = 1000000;
        for (std::size_t i = 0; i < n; ++i) {
            CounterRng rng(77, i);
            const double z = anscombe(static_cast<double>(sample_poisson(rate, rng)));
            s += z;
            s2 += z * z;
        }
        const double mean = s / n, var = s2 / n - mean * mean;
        pass = pass && var >= 0.95 && var <= 1.05;
        detail += " " + fmt(rate) + ":" + fmt(var);
    }
    detail += "; inverse error";
    for (double rate : {10.0, 20.0, 50.0, 100.0}) {
        const Image back = inv_anscombe(anscombe(Image(16, 16, rate)));
        const double rel = std::abs(back(0, 0) - rate) / rate;
        pass = pass && rel <= 0.005;
        detail += " " + fmt(rate) + ":" + fmt(100.0 * rel, 3) + "%";
    }
    return {pass, detail};
}

DatasetConfig baseline_config() {
    DatasetConfig c;
    c.geometry = GeometryConfig{}.binned(2);
    c.particle_classes = {ParticleClass::PtNp1, ParticleClass::PtNp2, ParticleClass::PtNp3};
    c.contrasts = {Contrast::white};
    c.seeds.clear();
    for (std::uint64_t s = 1; s <= 10; ++s) c.seeds.push_back(s);
    return c;
}

Outcome baseline_ordering() {
    TempDir dir("c3");
    const auto manifest = generate_dataset(baseline_config(), dir.path());
    const std::vector<DenoiserSpec> specs{DenoiserSpec::parse("identity"), DenoiserSpec::parse("lowpass"),
                                          DenoiserSpec::parse("wiener"), DenoiserSpec::parse("vstnlm")};
    BenchmarkConfig cfg;
    cfg.tiling = {400, 200};
    const auto report = run_benchmark(manifest, specs, cfg);
    std::map<std::string, double> mean;
    for (const auto& a : report.aggregates)
        if (a.scope == Scope::all) mean[a.denoiser] = a.stats.at("psnr").first;
    const double raw = mean["identity"], lp = mean["lowpass"], wi = mean["wiener"], vst = mean["vstnlm"];
    const double best = std::max({lp, wi, vst});
    const bool pass = report.failed_rows == 0 && manifest.entries.size() == 30 && raw < lp && raw < wi && vst > wi &&
                      best - raw >= 10.0;
    return {pass, "mean PSNR raw " + fmt(raw) + ", lowpass " + fmt(lp) + ", wiener " + fmt(wi) + ", vstnlm " +
                      fmt(vst) + " dB over " + std::to_string(manifest.entries.size()) + " images"};
}

Outcome detection_fidelity() {
    int ok = 0, total = 0;
    std::string failures;
    for (auto pc : {ParticleClass::PtNp1, ParticleClass::PtNp2, ParticleClass::PtNp3, ParticleClass::PtNp4})
        for (auto dc : {DefectClass::D0, DefectClass::D1, DefectClass::D2, DefectClass::Dh, DefectClass::Ds}) {
            ++total;
            const auto m = build_structure(pc, dc, Contrast::white, GeometryConfig{});
            const ImagingParams params{m.width, m.height, 0.0, 1.0, 0};
            const Image img = render(m, params);
            const auto truth = ground_truth(m, params);
            std::vector<Point> t;
            for (const auto& a : truth) t.push_back(a.center);
            AtomColumn probe;
            const auto bp = BlobParams::for_columns(m.columns.front().sigma, std::abs(column_weight(m, probe)));
            const auto det = detect_blobs(img, bp);
            const auto match = match_atoms(centers(det), t, 1.0);
            if (det.size() == t.size() && match.pairs.size() == t.size()) {
                ++ok;
            } else {
                failures += " " + std::string(to_string(pc)) + "/" + std::string(to_string(dc)) + "(" +
                            std::to_string(det.size()) + " vs " + std::to_string(t.size()) + ", " +
                            std::to_string(match.pairs.size()) + " within 1 px)";
            }
        }
    return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " configurations exact" + failures};
}

Outcome metric_sensitivity() {
    // 15 columns in a 5x3 block on the default canvas, denoised by vst_nlm.
    const GeometryConfig g;
    const double sigma = g.sigma, amp = g.amplitude;
    std::vector<Point> atoms;
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 5; ++i) atoms.push_back({392.0 + 60.0 * i, 452.0 + 60.0 * j});
    auto paint = [&](Image& img, Point c) {
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x) {
                const double d2 = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
                if (d2 < 100.0 * sigma * sigma) img(x, y) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    };
    Image clean(g.width, g.height, g.vacuum_level);
    for (const auto& a : atoms) paint(clean, a);
    const Image denoised = vst_nlm(poisson_corrupt(clean, 2024));
    Image spurious = denoised;
    const Point extra{200.0, 800.0};
    paint(spurious, extra);

    const double dpsnr = std::abs(psnr(clean, spurious) - psnr(clean, denoised));
    const double dssim = std::abs(ssim(clean, spurious) - ssim(clean, denoised));
    const auto bp = BlobParams::for_columns(sigma, amp);
    const auto d0 = centers(detect_blobs(denoised, bp));
    const auto d1 = centers(detect_blobs(spurious, bp));
    const double thr = 0.5 * g.support_spacing;
    const auto s0 = detection_metrics(match_atoms(d0, atoms, thr), d0.size(), atoms.size());
    const auto s1 = detection_metrics(match_atoms(d1, atoms, thr), d1.size(), atoms.size());
    const bool pass = dpsnr < 0.5 && dssim < 0.01 && s0.precision == 1.0 && s1.precision == 0.9375 &&
                      s1.jaccard == 0.9375;
    return {pass, "dPSNR " + fmt(dpsnr) + " dB, dSSIM " + fmt(dssim) + ", precision " + fmt(s0.precision) + " -> " +
                      fmt(s1.precision) + ", jaccard " + fmt(s0.jaccard) + " -> " + fmt(s1.jaccard)};
}

Outcome llr_separation() {
    const std::size_t n = 96;
    const Point c{48.0, 48.0};
    const double radius = 12.0;
    Image atom(n, n, 0.45);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            if (std::hypot(x - c.x, y - c.y) <= radius) atom(x, y) = 4.45;
    const Image vacuum(n, n, 0.45);
    const std::vector<AtomDetection> det{{c, radius / std::sqrt(2.0), 1.0, false}};

    std::vector<double> tp, fp;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const Image real = poisson_corrupt(atom, 10 * s);
        const auto vac_real = estimate_vacuum(real, det, 9.0);
        tp.push_back(llr_map(real, atom, det, vac_real.rate).per_region[0].llr_per_pixel);
        // Hallucinated atom: the denoiser shows a column over pure vacuum.
        const Image empty = poisson_corrupt(vacuum, 10 * s + 1);
        const auto vac_empty = estimate_vacuum(empty, det, 9.0);
        fp.push_back(llr_map(empty, atom, det, vac_empty.rate).per_region[0].llr_per_pixel);
    }
    const auto qt = quartiles(tp), qf = quartiles(fp);
    const auto positive = std::count_if(tp.begin(), tp.end(), [](double v) { return v > 0.0; });
    const bool pass = qt.median > 0.0 && qf.median < qt.median && positive >= 950;
    return {pass, "median llr TP " + fmt(qt.median) + ", FP " + fmt(qf.median) + ", TP > 0 in " +
                      std::to_string(positive) + "/1000"};
}

Outcome tiling() {
    Image img(600, 600, 0.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CounterRng rng(5, i);
        img.pixels()[i] = 7.0 * rng.uniform() / 3.0;
    }
    const DenoiserFn identity = [](const Image& i) { return i; };
    const std::vector<TilingSpec> grid{{400, 200}, {256, 128}, {128, 64}, {100, 0}, {333, 111}, {64, 32}};
    int exact = 0;
    for (const auto& t : grid) exact += denoise_tiled(img, identity, t, 2) == img;

    const TilingSpec t{400, 200};
    const Image tiled = denoise_tiled(img, DenoiserSpec::parse("lowpass"), t);
    const Image whole = lowpass(img, 0.25);
    // Interior: at least 64 px from any tile edge that is not an image edge.
    std::vector<std::size_t> seams;
    for (auto o : tile_origins(600, t)) {
        if (o > 0) seams.push_back(o);
        if (o + t.tile < 600) seams.push_back(o + t.tile);
    }
    auto interior = [&](std::size_t v) {
        for (auto s : seams)
            if (std::abs(static_cast<double>(v) - static_cast<double>(s)) < 64.0) return false;
        return true;
    };
    auto deep = [&](std::size_t v) { return interior(v) && v >= 64 && v + 64 < 600; };
    double err = 0.0, deep_err = 0.0;
    std::size_t checked = 0;
    for (std::size_t y = 0; y < 600; ++y)
        for (std::size_t x = 0; x < 600; ++x)
            if (interior(x) && interior(y)) {
                const double e = std::abs(tiled(x, y) - whole(x, y));
                err = std::max(err, e);
                if (deep(x) && deep(y)) deep_err = std::max(deep_err, e);
                ++checked;
            }
    const bool pass = exact == static_cast<int>(grid.size()) && checked > 0 && err <= 1e-6;
    return {pass, "identity bitwise " + std::to_string(exact) + "/" + std::to_string(grid.size()) +
                      "; lowpass interior max error " + fmt(err) + " over " + std::to_string(checked) +
                      " pixels, " + fmt(deep_err) + " away from image edges"};
}

Outcome probe_linearity() {
    const std::size_t n = 96;
    const PixelIndex target{40, 51};
    Image delta(n, n, 0.0);
    delta(target.x, target.y) = 1.0;
    const Image impulse = lowpass(delta, 0.25);
    const auto spec = DenoiserSpec::parse("lowpass");
    double worst = 0.0;
    for (std::uint64_t seed : {1u, 2u}) {
        Image base(n, n, 0.0);
        for (std::size_t i = 0; i < base.size(); ++i) {
            CounterRng rng(seed, i);
            base.pixels()[i] = (seed == 1 ? 1.0 : 9.0) * rng.uniform();
        }
        const auto g = gradient_map(spec, base, target, n);
        for (std::size_t i = 0; i < base.size(); ++i)
            worst = std::max(worst, std::abs(g.values.pixels()[i] - impulse.pixels()[i]));
    }
    const Image img = poisson_corrupt(Image(64, 64, 2.0), 3);
    const auto id = gradient_map([](const Image& i) { return i; }, img, {10, 20}, 64);
    bool exact = true;
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) exact = exact && id.values(x, y) == ((x == 10 && y == 20) ? 1.0 : 0.0);
    return {worst <= 1e-6 && exact,
            "lowpass max deviation " + fmt(worst) + "; identity delta " + (exact ? "exact" : "not exact")};
}

Outcome metric_properties() {
    int bad = 0;
    std::string first;
    auto fail = [&](int k, const std::string& what) {
        if (bad++ == 0) first = " first: instance " + std::to_string(k) + " " + what;
    };
    for (int k = 0; k < 500; ++k) {
        CounterRng rng(4242, static_cast<std::uint64_t>(k));
        const auto na = static_cast<std::size_t>(rng.uniform() * 40);
        const auto nb = static_cast<std::size_t>(rng.uniform() * 40);
        const double extent = 50.0 + 450.0 * rng.uniform();
        const double thr = 1.0 + 60.0 * rng.uniform();
        std::vector<Point> a, b;
        for (std::size_t i = 0; i < na; ++i) a.push_back({extent * rng.uniform(), extent * rng.uniform()});
        for (std::size_t i = 0; i < nb; ++i) b.push_back({extent * rng.uniform(), extent * rng.uniform()});
        // Occasional exact copies exercise zero distances and ties.
        if (!a.empty() && !b.empty() && rng.uniform() < 0.3) b[0] = a[0];

        const auto m = match_atoms(a, b, thr);
        const auto r = match_atoms(b, a, thr);
        std::set<std::size_t> ua, ub;
        for (const auto& p : m.pairs) {
            if (!ua.insert(p.a).second || !ub.insert(p.b).second) fail(k, "not one-to-one");
            if (p.distance > thr) fail(k, "threshold exceeded");
        }
        std::set<std::pair<std::size_t, std::size_t>> fwd, rev;
        for (const auto& p : m.pairs) fwd.insert({p.a, p.b});
        for (const auto& p : r.pairs) rev.insert({p.b, p.a});
        if (fwd != rev) fail(k, "swap asymmetry");
        if (m.pairs.size() + m.unmatched_a.size() != na || m.pairs.size() + m.unmatched_b.size() != nb)
            fail(k, "partition sizes");

        const auto s = detection_metrics(m, na, nb);
        const auto t = detection_metrics(r, nb, na);
        for (double v : {s.precision, s.recall, s.f1, s.jaccard})
            if (v < 0.0 || v > 1.0) fail(k, "metric out of bounds");
        if (s.precision != t.recall || s.recall != t.precision || std::abs(s.f1 - t.f1) > 1e-15 || s.jaccard != t.jaccard)
            fail(k, "swap did not exchange precision and recall");
        if (na > 0 && nb > 0 && s.jaccard > s.f1 + 1e-15) fail(k, "jaccard > F1");
    }
    return {bad == 0, "500 instances, " + std::to_string(bad) + " violations" + first};
}

Outcome reproducibility() {
#ifdef SBD_CLI_PATH
    TempDir dir("c10");
    {
        std::ofstream(dir.path() / "config.json") << baseline_config().to_json();
    }
    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(SBD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    const auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
    if (run("generate --config " + q(dir.path() / "config.json") + " --out " + q(dir.path() / "data")) != 0)
        return {false, "sbd generate failed"};
    const std::string bench = "bench --manifest " + q(dir.path() / "data" / "manifest.json") +
                              " --methods identity,lowpass,wiener,vstnlm --tile 400 --overlap 200 --out ";
    if (run(bench + q(dir.path() / "r1")) != 0 || run(bench + q(dir.path() / "r2")) != 0)
        return {false, "sbd bench failed"};
    std::vector<std::string> same, differ;
    for (const auto& entry : std::filesystem::directory_iterator(dir.path() / "r1")) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() != ".csv" || name == "timings.csv") continue;
        (slurp(entry.path()) == slurp(dir.path() / "r2" / name) ? same : differ).push_back(name);
    }
    std::sort(same.begin(), same.end());
    std::string detail = "identical:";
    for (const auto& s : same) detail += " " + s;
    for (const auto& d : differ) detail += " differs: " + d;
    detail += " (timings.csv holds wall-clock times and is excluded)";
    return {differ.empty() && same.size() >= 2, detail};
#else
    return {false, "sbd executable not built"};
#endif
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{noise_model,        vst_stabilization, baseline_ordering,
                                                         detection_fidelity, metric_sensitivity, llr_separation,
                                                         tiling,             probe_linearity,    metric_properties,
                                                         reproducibility};
    std::vector<int> which;
    if (argc > 1) {
        const int n = std::atoi(argv[1]);
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::cerr << "usage: sbd_acceptance [1-10]\n";
            return 2;
        }
        which.push_back(n);
    } else {
        for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) which.push_back(n);
    }
    bool all = true;
    for (int n : which) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[static_cast<std::size_t>(n - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << "; "
                  << fmt(secs, 3) << " s)" << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
