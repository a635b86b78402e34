#include <benchmark/benchmark.h>

#include <map>

#include "sbd/denoise.hpp"
#include "sbd/detect.hpp"
#include "sbd/noise.hpp"
#include "sbd/synth.hpp"

namespace {

const sbd::Image& clean_image(std::size_t size) {
    static std::map<std::size_t, sbd::Image> cache;
    auto it = cache.find(size);
    if (it == cache.end()) {
        const auto geo = sbd::GeometryConfig{}.binned(1024.0 / static_cast<double>(size));
        const auto model = sbd::build_structure(sbd::ParticleClass::PtNp2, sbd::DefectClass::D0,
                                                sbd::Contrast::white, geo);
        it = cache.emplace(size, sbd::render(model, {geo.width, geo.height, 0.0, 1.0, 0})).first;
    }
    return it->second;
}

const sbd::Image& noisy_image(std::size_t size) {
    static std::map<std::size_t, sbd::Image> cache;
    auto it = cache.find(size);
    if (it == cache.end()) it = cache.emplace(size, sbd::poisson_corrupt(clean_image(size), 7)).first;
    return it->second;
}

void BM_PoissonCorrupt(benchmark::State& state) {
    const auto& clean = clean_image(static_cast<std::size_t>(state.range(0)));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sbd::poisson_corrupt(clean, ++seed));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(clean.size()));
}
BENCHMARK(BM_PoissonCorrupt)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Lowpass(benchmark::State& state) {
    const auto& img = noisy_image(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sbd::lowpass(img, 0.25));
}
BENCHMARK(BM_Lowpass)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Wiener(benchmark::State& state) {
    const auto& img = noisy_image(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sbd::wiener_adaptive(img, 13));
}
BENCHMARK(BM_Wiener)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_VstNlm(benchmark::State& state) {
    const auto& img = noisy_image(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(sbd::vst_nlm(img, {}));
}
BENCHMARK(BM_VstNlm)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DetectBlobs(benchmark::State& state) {
    const auto& img = clean_image(static_cast<std::size_t>(state.range(0)));
    const double sigma = 9.0 * static_cast<double>(state.range(0)) / 1024.0;
    const auto params = sbd::BlobParams::for_columns(sigma, 4.0);
    for (auto _ : state) benchmark::DoNotOptimize(sbd::detect_blobs(img, params));
}
BENCHMARK(BM_DetectBlobs)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
