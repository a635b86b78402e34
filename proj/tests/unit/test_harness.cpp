#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sbd/csv.hpp"
#include "sbd/error.hpp"
#include "sbd/harness.hpp"
#include "sbd/image_io.hpp"
#include "test_support.hpp"

using namespace sbd;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

DatasetConfig small_config(std::vector<std::uint64_t> seeds, bool noiseless = false) {
    DatasetConfig c;
    c.geometry = GeometryConfig{}.binned(4);
    c.seeds = std::move(seeds);
    c.noiseless = noiseless;
    return c;
}

const BenchmarkRow* find_row(const BenchmarkReport& r, const std::string& id, const std::string& denoiser, Scope s) {
    for (const auto& row : r.rows)
        if (row.image_id == id && row.denoiser == denoiser && row.scope == s) return &row;
    return nullptr;
}

}  // namespace

TEST_CASE("dataset config") {
    const auto c = DatasetConfig::from_json(R"({"geometry": {"binning": 4}, "particle_classes": ["PtNp1", "PtNp3"],
        "defects": ["D0", "Dh"], "seeds": [1, 2], "rotations": [0, 15]})");
    CHECK(c.geometry.width == 256);
    CHECK(c.cardinality() == 16);
    const auto back = DatasetConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK_THROWS_AS(DatasetConfig::from_json(R"({"seed": [1]})"), ConfigError);
    CHECK_THROWS_AS(DatasetConfig::from_json(R"({"contrasts": ["grey"]})"), ConfigError);
    CHECK_THROWS_AS(DatasetConfig::from_json("[1, 2"), ConfigError);
    CHECK_THROWS_AS(DatasetConfig::from_json(R"({"vacuum_target": -1})"), ConfigError);
}

TEST_CASE("split tags") {
    CHECK(split_tag("abc", 7) == split_tag("abc", 7));
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i < 4000; ++i) ++counts[split_tag("0123456789abcdef", i)];
    CHECK(counts.size() == 3);
    CHECK(std::abs(counts["train"] - 3600) < 120);
    CHECK(std::abs(counts["val"] - 200) < 60);
    CHECK(std::abs(counts["test"] - 200) < 60);
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("generate_dataset") {
    test::ScratchDir dir("gen");
    const auto m = generate_dataset(small_config({1, 2, 3}), dir.path());
    REQUIRE(m.entries.size() == 3);
    std::set<std::string> ids;
    for (const auto& e : m.entries) {
        CHECK(ids.insert(e.id).second);
        for (const auto& p : {e.clean, e.noisy, e.atoms, e.model}) CHECK(std::filesystem::exists(m.resolve(p)));
        const Image noisy = read_image(m.resolve(e.noisy));
        CHECK(noisy.width() == 256);
        for (double v : noisy.pixels()) CHECK(v == std::round(v));
        CHECK(e.column_sigma == doctest::Approx(9.0 / 4.0));
        CHECK(e.match_threshold == doctest::Approx(0.5 * 60.0 / 4.0));
        CHECK_FALSE(read_truth_csv(m.resolve(e.atoms)).empty());
    }
    CHECK(std::filesystem::exists(dir / "manifest.json"));

    const auto loaded = load_manifest(dir / "manifest.json");
    REQUIRE(loaded.entries.size() == 3);
    CHECK(loaded.config_hash == m.config_hash);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded.entries[i].id == m.entries[i].id);
        CHECK(loaded.entries[i].noise_seed == m.entries[i].noise_seed);
        CHECK(loaded.entries[i].split == m.entries[i].split);
        CHECK(read_image(loaded.resolve(loaded.entries[i].noisy)) == read_image(m.resolve(m.entries[i].noisy)));
    }

    SUBCASE("regeneration is byte identical") {
        test::ScratchDir again("gen2");
        const auto m2 = generate_dataset(small_config({1, 2, 3}), again.path());
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(slurp(m2.resolve(m2.entries[i].noisy)) == slurp(m.resolve(m.entries[i].noisy)));
            CHECK(slurp(m2.resolve(m2.entries[i].atoms)) == slurp(m.resolve(m.entries[i].atoms)));
        }
    }
    SUBCASE("vacuum dose hits the target") {
        const auto& e = m.entries[0];
        const Image clean = read_image(m.resolve(e.clean));
        const auto model = structure_from_json(slurp(m.resolve(e.model)));
        const Image truth_render = render(model, e.imaging);
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < clean.size(); ++i)
            if (std::abs(truth_render.pixels()[i] - model.vacuum_level) < 0.02 * model.vacuum_level)
                sum += clean.pixels()[i], ++n;
        CHECK(sum / static_cast<double>(n) == doctest::Approx(0.45).epsilon(1e-3));
    }
    SUBCASE("duplicate ids are rejected") {
        auto dup = m;
        dup.entries[1].id = dup.entries[0].id;
        write_manifest(dup, dir / "dup.json");
        CHECK_THROWS_AS(load_manifest(dir / "dup.json"), ConfigError);
    }
}

TEST_CASE("generate_dataset failure leaves nothing behind") {
    test::ScratchDir dir("genfail");
    std::ofstream(dir / "clean") << "not a directory";
    CHECK_THROWS(generate_dataset(small_config({1}), dir.path()));
    CHECK_FALSE(std::filesystem::exists(dir / "manifest.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "noisy"));
}

TEST_CASE("benchmark on noiseless copies is perfect") {
    test::ScratchDir dir("noiseless");
    const auto m = generate_dataset(small_config({4, 5}, true), dir.path());
    const auto report = run_benchmark(m, {DenoiserSpec::parse("identity")});
    CHECK(report.failed_rows == 0);
    CHECK(report.rows.size() == 2 * 3);
    for (const auto& row : report.rows) {
        CAPTURE(row.image_id);
        CAPTURE(to_string(row.scope));
        CHECK(row.ok);
        CHECK(row.metrics.psnr == kPsnrCap);
        CHECK(row.metrics.ssim == doctest::Approx(1.0));
        CHECK(row.metrics.detection.precision == 1.0);
        CHECK(row.metrics.detection.recall == 1.0);
        CHECK(row.metrics.detection.jaccard == 1.0);
    }

}

TEST_CASE("llr classes with a perfect denoiser") {
    // The external command maps each noisy input back to its clean image.
    test::ScratchDir dir("llrperfect");
    const auto m = generate_dataset(small_config({6, 7}), dir.path());
    std::ofstream(dir / "oracle.sh") << "for f in " << (dir / "noisy").string() << "/*; do\n"
                                     << "  if cmp -s \"$f\" \"$1\"; then cp " << (dir / "clean").string()
                                     << "/$(basename \"$f\") \"$2\"; fi\n"
                                     << "done\n";
    const auto spec = DenoiserSpec::parse("external:sh " + (dir / "oracle.sh").string());
    const auto llr = evaluate_llr_distribution(m, spec);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& r : llr.regions) {
        tp += r.cls == RegionClass::true_positive;
        fp += r.cls == RegionClass::false_positive;
        fn += r.cls == RegionClass::false_negative;
    }
    CHECK(fp == 0);
    CHECK(fn == 0);
    CHECK(tp == llr.surface_truth);
    CHECK(tp > 0);
    CHECK(llr.summary.at(RegionClass::true_positive).median > 0.0);

    test::ScratchDir out("llrout");
    write_llr_report(llr, out.path());
    CHECK(read_csv(out / "llr_regions.csv").rows.size() == llr.regions.size());
    CHECK(std::filesystem::exists(out / "llr_summary.csv"));
}

TEST_CASE("benchmark on noisy data") {
    test::ScratchDir dir("bench");
    const auto m = generate_dataset(small_config({11, 12, 13}), dir.path());
    const std::vector<DenoiserSpec> specs{DenoiserSpec::parse("identity"), DenoiserSpec::parse("vstnlm"),
                                          DenoiserSpec::parse("external:exit 1")};
    const auto report = run_benchmark(m, specs);
    CHECK(report.rows.size() == 3 * 3 * 3);
    CHECK(report.failed_rows == 3 * 3);

    for (const auto& e : m.entries) {
        const auto* raw = find_row(report, e.id, "identity", Scope::all);
        const auto* vst = find_row(report, e.id, "vstnlm", Scope::all);
        REQUIRE(raw);
        REQUIRE(vst);
        CHECK(vst->metrics.psnr > raw->metrics.psnr);
        const auto* bad = find_row(report, e.id, "external:exit 1", Scope::all);
        REQUIRE(bad);
        CHECK_FALSE(bad->ok);
        CHECK_FALSE(bad->error.empty());
    }

    {
        INFO("aggregates are recomputable");
        for (const auto& a : report.aggregates) {
            std::vector<double> v;
            for (const auto& row : report.rows)
                if (row.ok && row.denoiser == a.denoiser && row.scope == a.scope) v.push_back(row.metrics.psnr);
            REQUIRE(v.size() == a.n);
            if (v.empty()) continue;
            double mean = 0.0, var = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            for (double x : v) var += (x - mean) * (x - mean);
            const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
            CHECK(a.stats.at("psnr").first == doctest::Approx(mean).epsilon(1e-12));
            CHECK(a.stats.at("psnr").second == doctest::Approx(sd).epsilon(1e-9));
        }
    }
    {
        INFO("reports are reproducible");
        test::ScratchDir out1("rep1"), out2("rep2");
        write_report(report, out1.path());
        const auto again = run_benchmark(load_manifest(dir / "manifest.json"), specs, BenchmarkConfig{{400, 200}, {}, {}, {}, TruthSource::generator, 1});
        write_report(again, out2.path());
        CHECK(slurp(out1 / "results.csv") == slurp(out2 / "results.csv"));
        CHECK(slurp(out1 / "aggregates.csv") == slurp(out2 / "aggregates.csv"));
        const auto table = read_csv(out1 / "results.csv");
        CHECK(table.header.front() == "image_id");
        CHECK(table.rows.size() == report.rows.size());
        CHECK(std::filesystem::exists(out1 / "timings.csv"));
        CHECK(std::filesystem::exists(out1 / "report.json"));
    }
    {
        INFO("split filter");
        BenchmarkConfig cfg;
        cfg.split = "no-such-split";
        CHECK(run_benchmark(m, {DenoiserSpec::parse("identity")}, cfg).rows.empty());
    }
}

TEST_CASE("geometry sweep") {
    test::ScratchDir dir("sweep");
    const auto m = generate_dataset(small_config({21}), dir.path());
    const auto spec = DenoiserSpec::parse("lowpass");
    const auto sweep = sweep_geometry(m, spec, {0.9, 1.0, 1.1}, {0.0, 30.0, 45.0});
    CHECK(sweep.points.size() == 6);
    const auto bench = run_benchmark(m, {spec});
    const auto* row = find_row(bench, m.entries[0].id, "lowpass", Scope::all);
    REQUIRE(row);
    double lo = 1e300, hi = -1e300;
    for (const auto& p : sweep.points) {
        if (p.rotation == 0.0 && p.scale == 1.0) CHECK(p.psnr == doctest::Approx(row->metrics.psnr).epsilon(1e-12));
        lo = std::min(lo, p.psnr);
        hi = std::max(hi, p.psnr);
    }
    CHECK(hi - lo < 1.0);
    test::ScratchDir out("sweepout");
    write_sweep(sweep, out.path());
    CHECK(read_csv(out / "sweep.csv").rows.size() == 6);
    CHECK(read_csv(out / "sweep_summary.csv").header ==
          std::vector<std::string>{"axis", "value", "n", "psnr_mean", "psnr_sd"});
}

TEST_CASE("quartiles") {
    const auto q = quartiles({4.0, 1.0, 3.0, 2.0});
    CHECK(q.n == 4);
    CHECK(q.min == 1.0);
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    CHECK(q.max == 4.0);
    CHECK(quartiles({}).n == 0);
    CHECK(quartiles({5.0}).median == 5.0);
}

TEST_CASE("grid search picks the best mean psnr") {
    test::ScratchDir dir("grid");
    const auto m = generate_dataset(small_config({31, 32}), dir.path());
    const auto r = grid_search(m, DenoiserKind::lowpass, {{"cutoff", {"0.1", "0.25", "0.9"}}});
    CHECK(r.tried.size() == 3);
    for (const auto& [spec, p] : r.tried) CHECK(p <= r.best_psnr);
    CHECK(r.best.kind == DenoiserKind::lowpass);
}
