#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "nsgmoe/rng.hpp"
#include "nsgmoe/sparsifier.hpp"

using namespace nsgmoe;

namespace {

Mat random_similarity(int m, Rng& rng) {
  Mat s(m, m);
  for (int i = 0; i < m; ++i) {
    s(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      double w = 2.0 * rng.uniform() - 1.0;
      s(i, j) = w;
      s(j, i) = w;
    }
  }
  return s;
}

bool spans(const std::vector<std::pair<int, int>>& edges, int m) {
  std::vector<int> parent(static_cast<std::size_t>(m));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int comps = m;
  for (auto [a, b] : edges) {
    int ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[static_cast<std::size_t>(ra)] = rb;
      --comps;
    }
  }
  return comps == 1;
}

// Exhaustive maximum over all spanning trees: every (m-1)-subset of pairs
// that connects the vertices. Feasible up to m=6 (C(15,5) = 3003 subsets).
double brute_force_max_tree(const Mat& s) {
  const int m = s.rows();
  if (m <= 1) return 0.0;
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) pairs.push_back({i, j});
  const int p = static_cast<int>(pairs.size());
  const int need = m - 1;
  double best = -1e300;
  std::vector<int> pick(static_cast<std::size_t>(need));
  std::iota(pick.begin(), pick.end(), 0);
  for (;;) {
    std::vector<std::pair<int, int>> edges;
    double w = 0;
    for (int idx : pick) {
      edges.push_back(pairs[static_cast<std::size_t>(idx)]);
      w += s(pairs[static_cast<std::size_t>(idx)].first,
             pairs[static_cast<std::size_t>(idx)].second);
    }
    if (spans(edges, m)) best = std::max(best, w);
    // next combination
    int i = need - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == p - need + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < need; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

}  // namespace

TEST_CASE("cosine_similarity hand values and zero rows") {
  Mat f(3, 2);
  f(0, 0) = 1; f(0, 1) = 0;
  f(1, 0) = 1; f(1, 1) = 1;
  // row 2 stays zero
  Mat s = cosine_similarity(f);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s(1, 0) == doctest::Approx(s(0, 1)));
  CHECK(s(0, 2) == 0.0);
  CHECK(s(2, 2) == 0.0);  // zero-norm rows produce 0 even on the diagonal
}

TEST_CASE("exact tree picks the heaviest acyclic pairs") {
  Mat s(3, 3, 1.0);
  s(0, 1) = s(1, 0) = 0.9;
  s(0, 2) = s(2, 0) = 0.5;
  s(1, 2) = s(2, 1) = 0.8;
  SpanningTree t = exact_max_spanning_tree(s);
  CHECK(t.total_weight == doctest::Approx(1.7));
  CHECK(t.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
}

TEST_CASE("ties resolve toward lexicographically smaller pairs") {
  Mat s(3, 3, 0.5);
  SpanningTree t = exact_max_spanning_tree(s);
  CHECK(t.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
  CHECK(t.total_weight == doctest::Approx(1.0));
}

TEST_CASE("m=1 and m=2 degenerate trees") {
  Mat s1(1, 1, 1.0);
  SpanningTree t1 = exact_max_spanning_tree(s1);
  CHECK(t1.edges.empty());
  CHECK(t1.total_weight == 0.0);

  Mat s2(2, 2, 1.0);
  s2(0, 1) = s2(1, 0) = -0.3;
  SpanningTree t2 = exact_max_spanning_tree(s2);
  CHECK(t2.edges == std::vector<std::pair<int, int>>{{0, 1}});
  CHECK(t2.total_weight == doctest::Approx(-0.3));
}

TEST_CASE("exact mode matches exhaustive enumeration") {
  Rng rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    int m = 2 + static_cast<int>(rng.below(5));  // 2..6
    Mat s = random_similarity(m, rng);
    SpanningTree t = exact_max_spanning_tree(s);
    CHECK(static_cast<int>(t.edges.size()) == m - 1);
    CHECK(spans(t.edges, m));
    double w = 0;
    for (auto [a, b] : t.edges) w += s(a, b);
    CHECK(t.total_weight == doctest::Approx(w).epsilon(1e-12));
    CHECK(t.total_weight ==
          doctest::Approx(brute_force_max_tree(s)).epsilon(1e-12));
  }
}

TEST_CASE("approximate mode with a covering batch equals exact") {
  Rng rng(42);
  for (int trial = 0; trial < 8; ++trial) {
    int m = 3 + static_cast<int>(rng.below(6));  // 3..8
    Mat f(m, 5);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 5; ++j) f(i, j) = rng.normal();
    MstConfig cfg;
    cfg.mode = MstConfig::Mode::Approximate;
    cfg.c0 = 4;
    cfg.c1 = m;  // whole set in one batch
    cfg.seed = 1000 + static_cast<std::uint64_t>(trial);
    SpanningTree approx = approx_max_spanning_tree(f, cfg);
    SpanningTree exact = exact_max_spanning_tree(cosine_similarity(f));
    CHECK(approx.total_weight ==
          doctest::Approx(exact.total_weight).epsilon(1e-12));
  }
}

TEST_CASE("approximate mode always returns a valid deterministic tree") {
  Rng rng(43);
  for (int m : {10, 33, 64}) {
    Mat f(m, 8);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 8; ++j) f(i, j) = rng.normal();
    MstConfig cfg;
    cfg.mode = MstConfig::Mode::Approximate;
    cfg.c0 = 4;
    cfg.c1 = 8;
    cfg.seed = 7;
    SpanningTree t = approx_max_spanning_tree(f, cfg);
    CHECK(static_cast<int>(t.edges.size()) == m - 1);
    CHECK(spans(t.edges, m));
    for (auto [a, b] : t.edges) {
      CHECK(a < b);
      CHECK(b < m);
      CHECK(a >= 0);
    }
    SpanningTree again = approx_max_spanning_tree(f, cfg);
    CHECK(t.edges == again.edges);
    // the accumulated-candidate weight never beats the true optimum
    SpanningTree exact = exact_max_spanning_tree(cosine_similarity(f));
    CHECK(t.total_weight <= exact.total_weight + 1e-12);
  }
}

TEST_CASE("tree_adjacency lists one-hop modality neighborhoods") {
  SpanningTree star;
  star.edges = {{0, 1}, {0, 2}, {0, 3}};
  auto adj = tree_adjacency(star, 4);
  REQUIRE(adj.size() == 4);
  CHECK(adj[0] == std::vector<int>{1, 2, 3});
  CHECK(adj[1] == std::vector<int>{0});
  CHECK(adj[3] == std::vector<int>{0});
}

TEST_CASE("build_trees derives one tree per node") {
  Rng rng(44);
  const int n = 5, m = 4, d = 6;
  Mat flat(n * m, d);
  for (int i = 0; i < n * m; ++i)
    for (int j = 0; j < d; ++j) flat(i, j) = rng.normal();

  MstConfig exact_cfg;
  exact_cfg.mode = MstConfig::Mode::Exact;
  std::vector<SpanningTree> trees = build_trees(flat, n, m, exact_cfg);
  REQUIRE(static_cast<int>(trees.size()) == n);
  for (int u = 0; u < n; ++u) {
    CHECK(trees[static_cast<std::size_t>(u)].node == u);
    CHECK(static_cast<int>(trees[static_cast<std::size_t>(u)].edges.size()) ==
          m - 1);
    CHECK(spans(trees[static_cast<std::size_t>(u)].edges, m));
  }

  // exact mode ignores the seed
  MstConfig other = exact_cfg;
  other.seed = 999;
  std::vector<SpanningTree> trees2 = build_trees(flat, n, m, other);
  for (int u = 0; u < n; ++u)
    CHECK(trees[static_cast<std::size_t>(u)].edges ==
          trees2[static_cast<std::size_t>(u)].edges);

  // per-node approximate streams are deterministic
  MstConfig approx_cfg;
  approx_cfg.mode = MstConfig::Mode::Approximate;
  approx_cfg.c0 = 2;
  approx_cfg.c1 = 2;
  approx_cfg.seed = 5;
  std::vector<SpanningTree> a1 = build_trees(flat, n, m, approx_cfg);
  std::vector<SpanningTree> a2 = build_trees(flat, n, m, approx_cfg);
  for (int u = 0; u < n; ++u) {
    CHECK(a1[static_cast<std::size_t>(u)].edges ==
          a2[static_cast<std::size_t>(u)].edges);
    CHECK(spans(a1[static_cast<std::size_t>(u)].edges, m));
  }

  CHECK_THROWS(build_trees(Mat(n * m + 1, d), n, m, exact_cfg));
}

TEST_CASE("sparse inter-cross construction from explicit trees") {
  // two nodes joined by one edge, m=3, path trees 0-1-2
  std::vector<SpanningTree> trees(2);
  trees[0].node = 0;
  trees[0].edges = {{0, 1}, {1, 2}};
  trees[1].node = 1;
  trees[1].edges = {{0, 1}, {1, 2}};
  auto pairs = build_sparse_inter_cross({{0, 1}}, trees, 3);
  // <0,i>-<1,j> with j one-hop from i in node 1's tree, plus symmetric
  // flat ids: node*3+modality
  std::set<std::pair<int, int>> got(pairs.begin(), pairs.end());
  std::set<std::pair<int, int>> want = {
      {0, 4},  // <0,0>-<1,1>
      {1, 3},  // <0,1>-<1,0>
      {1, 5},  // <0,1>-<1,2>
      {2, 4},  // <0,2>-<1,1>
  };
  CHECK(got == want);
  CHECK(std::is_sorted(pairs.begin(), pairs.end()));
}
