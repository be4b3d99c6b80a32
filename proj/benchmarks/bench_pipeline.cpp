#include "gravekit/assemble.hpp"
#include "gravekit/geometry.hpp"
#include "gravekit/morpho.hpp"
#include "gravekit/synthkit.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace gravekit;

namespace {

const SynthPage& page() {
    static const SynthPage p = generate_page(7, 0);
    return p;
}

std::vector<Point2d> noisy_ellipse(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.8);
    std::vector<Point2d> pts;
    for (int i = 0; i < n; ++i) {
        const double t = 2 * std::numbers::pi * i / n;
        pts.push_back({300 * std::cos(t) + jitter(rng), 120 * std::sin(t) + jitter(rng)});
    }
    return pts;
}

}  // namespace

static void BM_BinarizeAndTrace(benchmark::State& state) {
    const GrayImage& raster = page().raster;
    for (auto _ : state) {
        auto contours = trace_outer_contours(binarize(raster));
        benchmark::DoNotOptimize(contours);
    }
    state.SetLabel(std::to_string(raster.width()) + "x" + std::to_string(raster.height()));
}
BENCHMARK(BM_BinarizeAndTrace)->Unit(benchmark::kMillisecond);

static void BM_MinAreaRect(benchmark::State& state) {
    const auto pts = noisy_ellipse(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(min_area_rect(pts));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MinAreaRect)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oNLogN);

static void BM_Efd(benchmark::State& state) {
    const auto pts = noisy_ellipse(256, 5);
    const int h = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(normalize_efd(efd(pts, h)));
}
BENCHMARK(BM_Efd)->Arg(15)->Arg(40);

static void BM_AssemblePage(benchmark::State& state) {
    const auto& dets = page().detections;
    for (auto _ : state) benchmark::DoNotOptimize(assemble_graves(dets));
    state.SetLabel(std::to_string(dets.size()) + " detections");
}
BENCHMARK(BM_AssemblePage);

static void BM_Pca(benchmark::State& state) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(state.range(0)), std::vector<double>(60));
    for (auto& r : rows) {
        for (auto& v : r) v = g(rng);
    }
    for (auto _ : state) benchmark::DoNotOptimize(pca_project(rows, 2));
}
BENCHMARK(BM_Pca)->Arg(100)->Arg(1000);
BENCHMARK_MAIN();
