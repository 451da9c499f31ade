// Serial reference vs OpenMP kernels, plus query-parallel retrieval.
#include <benchmark/benchmark.h>

#include "divrank/kernels.hpp"
#include "divrank/pipeline.hpp"
#include "divrank/rng.hpp"
#include "divrank/synthetic.hpp"

namespace {

using namespace divrank;

std::vector<double> random_block(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed, "bench");
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

template <void (*Gemm)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t)>
void BM_gemm(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)),
               n = static_cast<std::size_t>(state.range(2));
    const auto a = random_block(m * k, 1), b = random_block(k * n, 2);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        Gemm(a.data(), b.data(), c.data(), m, k, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

void gemm_args(benchmark::internal::Benchmark* b) {
    b->Args({97, 64, 64})->Args({97, 64, 128})->Args({256, 256, 256})->Args({1024, 256, 256});
}

BENCHMARK(BM_gemm<kernels::gemm_nn_serial>)->Apply(gemm_args)->Name("gemm_nn/serial");
BENCHMARK(BM_gemm<kernels::gemm_nn_parallel>)->Apply(gemm_args)->Name("gemm_nn/parallel");
BENCHMARK(BM_gemm<kernels::gemm_tn_serial>)->Apply(gemm_args)->Name("gemm_tn/serial");
BENCHMARK(BM_gemm<kernels::gemm_tn_parallel>)->Apply(gemm_args)->Name("gemm_tn/parallel");
BENCHMARK(BM_gemm<kernels::gemm_nt_serial>)->Apply(gemm_args)->Name("gemm_nt/serial");
BENCHMARK(BM_gemm<kernels::gemm_nt_parallel>)->Apply(gemm_args)->Name("gemm_nt/parallel");

template <void (*Cos)(const double*, std::size_t, std::size_t, std::span<const double>, double*)>
void BM_cosine(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t d = 64;
    const auto rows = random_block(n * d, 3), q = random_block(d, 4);
    std::vector<double> out(n);
    for (auto _ : state) {
        Cos(rows.data(), n, d, q, out.data());
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_cosine<kernels::cosine_rows_serial>)->Arg(200)->Arg(100000)->Name("cosine/serial");
BENCHMARK(BM_cosine<kernels::cosine_rows_parallel>)->Arg(200)->Arg(100000)->Name("cosine/parallel");

void BM_retrieve(benchmark::State& state, bool parallel) {
    GeneratorConfig g;
    g.queries = 64;
    const EmbeddingCorpus corpus = generate_synthetic(g, 7);
    ExperimentConfig cfg;
    cfg.skip_scl = cfg.skip_ttc = true;
    const TrainedSystem sys = train_system(corpus, cfg);
    const RetrieveOptions opt{"mmr", 20, false};
    for (auto _ : state) {
        auto runs = parallel ? run_strategy(corpus, sys, cfg, opt) : run_strategy_serial(corpus, sys, cfg, opt);
        benchmark::DoNotOptimize(runs.data());
    }
}
BENCHMARK_CAPTURE(BM_retrieve, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_retrieve, parallel, true)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
