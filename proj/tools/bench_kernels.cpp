// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "dircollapse/kernels.hpp"
#include "dircollapse/rng.hpp"

using namespace dircollapse;

namespace {

struct Fixture {
    RowMatrix x;
    std::vector<std::size_t> rows;
    std::vector<double> mean;
    std::vector<double> axis;
    RowMatrix centroids;
    std::vector<std::uint32_t> labels;

    Fixture(std::size_t n, std::size_t d) : x(n, d), rows(n), mean(d), axis(d, 1.0 / std::sqrt(double(d))) {
        auto rng = make_rng(1, "bench/fixture");
        std::normal_distribution<double> g;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) x(r, c) = g(rng);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        mean = kernels::mean_serial(x, rows);
        centroids = RowMatrix(10, d);
        for (std::size_t k = 0; k < 10; ++k)
            for (std::size_t c = 0; c < d; ++c) centroids(k, c) = g(rng);
        labels.resize(n);
        for (std::size_t r = 0; r < n; ++r) labels[r] = static_cast<std::uint32_t>(r % 10);
    }
};

const Fixture& fixture(std::size_t n, std::size_t d) {
    static std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::unique_ptr<Fixture>>> cache;
    for (const auto& [key, f] : cache)
        if (key.first == n && key.second == d) return *f;
    cache.emplace_back(std::pair{n, d}, std::make_unique<Fixture>(n, d));
    return *cache.back().second;
}

template <auto Fn>
void bm_mean(benchmark::State& state) {
    const auto& f = fixture(state.range(0), state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f.x, f.rows));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void bm_moments(benchmark::State& state) {
    const auto& f = fixture(state.range(0), state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f.x, f.rows, f.mean));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void bm_projected(benchmark::State& state) {
    const auto& f = fixture(state.range(0), state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f.x, f.rows, f.mean, f.axis));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void bm_pooled(benchmark::State& state) {
    const auto& f = fixture(state.range(0), state.range(1));
    const std::vector<std::vector<std::size_t>> parts{f.rows};
    const std::vector<std::vector<double>> means{f.mean};
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f.x, parts, means));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void bm_confusion(benchmark::State& state) {
    const auto& f = fixture(state.range(0), state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(f.centroids, f.x, f.labels));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void shapes(benchmark::internal::Benchmark* b) {
    b->Args({100000, 16})->Args({100000, 128})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(bm_mean<kernels::mean_serial>)->Name("mean/serial")->Apply(shapes);
BENCHMARK(bm_mean<kernels::mean_parallel>)->Name("mean/parallel")->Apply(shapes);
BENCHMARK(bm_moments<kernels::centered_moments_serial>)->Name("centered_moments/serial")->Apply(shapes);
BENCHMARK(bm_moments<kernels::centered_moments_parallel>)->Name("centered_moments/parallel")->Apply(shapes);
BENCHMARK(bm_projected<kernels::projected_second_moment_serial>)->Name("projected_moment/serial")->Apply(shapes);
BENCHMARK(bm_projected<kernels::projected_second_moment_parallel>)->Name("projected_moment/parallel")->Apply(shapes);
BENCHMARK(bm_pooled<kernels::pooled_covariance_serial>)->Name("pooled_covariance/serial")->Apply(shapes);
BENCHMARK(bm_pooled<kernels::pooled_covariance_parallel>)->Name("pooled_covariance/parallel")->Apply(shapes);
BENCHMARK(bm_confusion<kernels::ncc_confusion_serial>)->Name("ncc_confusion/serial")->Apply(shapes);
BENCHMARK(bm_confusion<kernels::ncc_confusion_parallel>)->Name("ncc_confusion/parallel")->Apply(shapes);

BENCHMARK_MAIN();
