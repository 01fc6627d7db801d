#include <benchmark/benchmark.h>

#include "nsgmoe/hgnn.hpp"
#include "nsgmoe/nsg.hpp"
#include "nsgmoe/sparsifier.hpp"

using namespace nsgmoe;

namespace {

MultimodalGraph random_graph(int n, int m, double p, std::uint64_t seed) {
  Rng rng(seed);
  MultimodalGraph g;
  g.num_nodes = n;
  for (int t = 0; t < m; ++t) g.modalities.push_back({"m" + std::to_string(t), 1});
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.edges.push_back({u, v});
  return g;
}

void bm_build_nsg(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  MultimodalGraph g = random_graph(n, m, 0.05, 7);
  for (auto _ : state) {
    NsgGraph nsg = build_nsg(g, EdgeVariant::Hybrid);
    benchmark::DoNotOptimize(nsg.edges.data());
  }
  state.counters["edges"] = static_cast<double>(
      expected_edge_count(n, m, static_cast<long>(g.edges.size()),
                          EdgeVariant::Hybrid));
}
BENCHMARK(bm_build_nsg)->Args({200, 3})->Args({1000, 3})->Args({1000, 5});

void bm_mst(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const bool exact = state.range(1) != 0;
  Rng rng(11);
  Mat f(m, 16);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < 16; ++j) f(i, j) = rng.normal();
  MstConfig cfg;
  cfg.mode = exact ? MstConfig::Mode::Exact : MstConfig::Mode::Approximate;
  for (auto _ : state) {
    SpanningTree t = exact ? exact_max_spanning_tree(cosine_similarity(f))
                           : approx_max_spanning_tree(f, cfg);
    benchmark::DoNotOptimize(t.total_weight);
  }
}
BENCHMARK(bm_mst)->Args({8, 1})->Args({32, 1})->Args({32, 0})->Args({128, 0});

void bm_message_pass(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  MultimodalGraph g = random_graph(n, 2, 0.02, 13);
  NsgGraph nsg = build_nsg(g, EdgeVariant::Hybrid);
  const int d = 32;
  Rng rng(17);
  HgnnLayerParams params = make_layer(d, 3, rng);
  Mat h(nsg.num_sub_nodes(), d);
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < d; ++j) h(i, j) = rng.normal();
  LayerConfig cfg;
  for (auto _ : state) {
    Mat out = relation_message_pass(h, nsg, params, cfg);
    benchmark::DoNotOptimize(out(0, 0));
  }
}
BENCHMARK(bm_message_pass)->Arg(200)->Arg(800);

}  // namespace

BENCHMARK_MAIN();
