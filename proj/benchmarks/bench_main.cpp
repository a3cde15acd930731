#include <benchmark/benchmark.h>

#include <random>

#include "expo/exp3.hpp"
#include "expo/mlp.hpp"
#include "expo/environment.hpp"

namespace {

std::vector<expo::TrainRow> make_rows(size_t n, size_t dim, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<expo::TrainRow> rows;
    for (size_t i = 0; i < n; ++i) {
        expo::EmbeddingVector x;
        x.values.resize(dim);
        for (auto& v : x.values) v = u(rng);
        rows.emplace_back(std::move(x), u(rng));
    }
    return rows;
}

void BM_ExpWeights(benchmark::State& state) {
    const size_t k = static_cast<size_t>(state.range(0));
    expo::CumulativeScores cs(k);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5, 5);
    for (auto& s : cs.s_hat) s = u(rng);
    for (auto _ : state) benchmark::DoNotOptimize(expo::distribution(cs, 100.0));
}
BENCHMARK(BM_ExpWeights)->Arg(64)->Arg(10201);

void BM_MlpTrainEpoch(benchmark::State& state) {
    const size_t dim = static_cast<size_t>(state.range(0));
    auto rows = make_rows(50, dim, 11);
    expo::TrainConfig cfg;
    cfg.hidden_width = 32;
    cfg.epochs = 1;
    cfg.seed = 3;
    std::optional<expo::MlpParams> params;
    for (auto _ : state) {
        auto res = expo::train(rows, cfg, params);
        params = std::move(res.params);
        benchmark::DoNotOptimize(params);
    }
}
BENCHMARK(BM_MlpTrainEpoch)->Arg(64)->Arg(512);

void BM_TspOracle(benchmark::State& state) {
    expo::TspConfig cfg;
    cfg.n_nodes = static_cast<int>(state.range(0));
    cfg.seed = 5;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-100, 100);
    std::vector<expo::Point> nodes;
    for (int i = 0; i < cfg.n_nodes; ++i) nodes.push_back({u(rng), u(rng)});
    for (auto _ : state) benchmark::DoNotOptimize(expo::tsp_oracle(nodes));
}
BENCHMARK(BM_TspOracle)->Arg(8)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
