// Serial reference vs tiled OpenMP similarity kernel, plus end-to-end
// streaming throughput.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "clipscope/kernels.hpp"
#include "clipscope/mining.hpp"
#include "clipscope/scorer.hpp"

using namespace clipscope;

namespace {

std::vector<double> unit_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> out(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    double n2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      out[i * dim + d] = gauss(eng);
      n2 += out[i * dim + d] * out[i * dim + d];
    }
    for (std::size_t d = 0; d < dim; ++d) out[i * dim + d] /= std::sqrt(n2);
  }
  return out;
}

EmbeddingTable table(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("l" + std::to_string(i));
  return EmbeddingTable(dim, std::move(labels), unit_rows(n, dim, seed));
}

// args: labels, dim, queries
void BM_SerialSimilarities(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto nq = static_cast<std::size_t>(state.range(2));
  auto rows = unit_rows(n, dim, 1);
  auto queries = unit_rows(nq, dim, 2);
  std::vector<double> out(n * nq);
  for (auto _ : state) {
    kernels::serial::similarities(queries, rows, dim, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(nq));
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * dim * nq * state.iterations() / 1e9,
                                                 benchmark::Counter::kIsRate);
}

// args: labels, dim, queries, threads (0 keeps the default)
void BM_BankSimilarities(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto nq = static_cast<std::size_t>(state.range(2));
  const int saved = kernels::max_threads();
  kernels::set_max_threads(static_cast<int>(state.range(3)));
  kernels::SimilarityBank bank(unit_rows(n, dim, 1), dim);
  auto queries = unit_rows(nq, dim, 2);
  std::vector<double> out(n * nq);
  for (auto _ : state) {
    bank.compute(queries, out);
    benchmark::DoNotOptimize(out.data());
  }
  kernels::set_max_threads(saved);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(nq));
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * dim * nq * state.iterations() / 1e9,
                                                 benchmark::Counter::kIsRate);
}

// args: M (|Y-| = 2M), threads; N = 1000, D = 512
void BM_ScoreStream(benchmark::State& state) {
  const std::size_t dim = 512;
  const auto m = static_cast<std::size_t>(state.range(0));
  const int saved = kernels::max_threads();
  kernels::set_max_threads(static_cast<int>(state.range(1)));
  auto id = table(1000, dim, 3);
  MinedLabelSet neg;
  neg.table = table(2 * m, dim, 4);
  neg.distances.assign(2 * m, 0.0);
  neg.sides.assign(2 * m, Side::Nearest);
  for (std::size_t i = 0; i < 2 * m; ++i) neg.candidate_index.push_back(i);
  auto stream = table(512, dim, 5);
  StreamScorer scorer(id, neg, ScorerConfig{});
  for (auto _ : state) {
    ClassHistogram hist(id.size());
    benchmark::DoNotOptimize(scorer.score_stream(stream, hist));
  }
  kernels::set_max_threads(saved);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}

}  // namespace

BENCHMARK(BM_SerialSimilarities)->Args({1000, 512, 64})->Args({11000, 512, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BankSimilarities)
    ->Args({1000, 512, 64, 1})
    ->Args({11000, 512, 64, 1})
    ->Args({11000, 512, 64, 0})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreStream)->Args({2500, 1})->Args({5000, 1})->Args({10000, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
