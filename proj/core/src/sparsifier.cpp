#include "nsgmoe/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace nsgmoe {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(b)] = a;
    return true;
  }
};

struct WeightedEdge {
  double w;
  int i, j;  // i < j
};

// Kruskal over descending weight with lexicographic tie-break. Accepts a
// node count and an edge list; returns the chosen edges.
std::vector<WeightedEdge> kruskal_max(int n, std::vector<WeightedEdge> edges) {
  std::sort(edges.begin(), edges.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) {
              if (a.w != b.w) return a.w > b.w;
              if (a.i != b.i) return a.i < b.i;
              return a.j < b.j;
            });
  UnionFind uf(n);
  std::vector<WeightedEdge> chosen;
  chosen.reserve(static_cast<std::size_t>(n > 0 ? n - 1 : 0));
  for (const WeightedEdge& e : edges) {
    if (uf.unite(e.i, e.j)) {
      chosen.push_back(e);
      if (static_cast<int>(chosen.size()) == n - 1) break;
    }
  }
  return chosen;
}

SpanningTree tree_from_edges(std::vector<WeightedEdge> chosen) {
  SpanningTree t;
  for (const WeightedEdge& e : chosen) {
    t.edges.emplace_back(e.i, e.j);
    t.total_weight += e.w;
  }
  std::sort(t.edges.begin(), t.edges.end());
  return t;
}

double cosine(const Mat& f, int i, int j, const std::vector<double>& norms) {
  const double ni = norms[static_cast<std::size_t>(i)];
  const double nj = norms[static_cast<std::size_t>(j)];
  if (ni == 0.0 || nj == 0.0) return 0.0;
  return dot_rows(f, i, f, j) / (ni * nj);
}

std::vector<double> row_norms(const Mat& f) {
  std::vector<double> norms(static_cast<std::size_t>(f.rows()));
  for (int i = 0; i < f.rows(); ++i)
    norms[static_cast<std::size_t>(i)] = std::sqrt(dot_rows(f, i, f, i));
  return norms;
}

}  // namespace

Mat cosine_similarity(const Mat& features) {
  const int m = features.rows();
  if (features.cols() < 1)
    throw std::invalid_argument("cosine_similarity: need at least one column");
  const std::vector<double> norms = row_norms(features);
  Mat s(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double v = cosine(features, i, j, norms);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

SpanningTree exact_max_spanning_tree(const Mat& similarity) {
  const int m = similarity.rows();
  if (m != similarity.cols())
    throw std::invalid_argument("exact_max_spanning_tree: matrix not square");
  std::vector<WeightedEdge> edges;
  edges.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      edges.push_back({similarity(i, j), i, j});
  return tree_from_edges(kruskal_max(m, std::move(edges)));
}

SpanningTree approx_max_spanning_tree(const Mat& features,
                                      const MstConfig& cfg) {
  if (cfg.c0 < 1 || cfg.c1 < 1)
    throw std::invalid_argument("approx_max_spanning_tree: c0, c1 must be >= 1");
  const int m = features.rows();
  if (cfg.mode == MstConfig::Mode::Exact || cfg.c0 >= m)
    return exact_max_spanning_tree(cosine_similarity(features));

  const std::vector<double> norms = row_norms(features);
  Rng rng(cfg.seed);

  // Anchor reservoir and the pool of unprocessed nodes, both kept sorted so
  // subset draws depend only on the rng stream.
  std::vector<int> anchors = rng.sample_without_replacement(m, cfg.c0);
  std::sort(anchors.begin(), anchors.end());
  std::vector<int> pending;
  {
    std::set<int> a(anchors.begin(), anchors.end());
    for (int i = 0; i < m; ++i)
      if (!a.count(i)) pending.push_back(i);
  }

  std::set<std::pair<int, int>> accumulated;
  while (!pending.empty()) {
    std::vector<int> subset;  // A_t
    {
      const int take = std::min<int>(cfg.c0, static_cast<int>(anchors.size()));
      std::vector<int> picks = rng.sample_without_replacement(
          static_cast<int>(anchors.size()), take);
      for (int p : picks) subset.push_back(anchors[static_cast<std::size_t>(p)]);
    }
    std::vector<int> batch;  // V_t
    {
      const int take = std::min<int>(cfg.c1, static_cast<int>(pending.size()));
      std::vector<int> picks = rng.sample_without_replacement(
          static_cast<int>(pending.size()), take);
      std::sort(picks.begin(), picks.end());
      for (int p : picks) batch.push_back(pending[static_cast<std::size_t>(p)]);
      // Remove the batch from the pending pool (picks ascending).
      for (auto it = picks.rbegin(); it != picks.rend(); ++it)
        pending.erase(pending.begin() + *it);
    }

    std::vector<int> local(subset);
    local.insert(local.end(), batch.begin(), batch.end());
    std::sort(local.begin(), local.end());

    const int s = static_cast<int>(local.size());
    std::vector<WeightedEdge> local_edges;
    local_edges.reserve(static_cast<std::size_t>(s) * (s - 1) / 2);
    for (int a = 0; a < s; ++a)
      for (int b = a + 1; b < s; ++b) {
        const int i = local[static_cast<std::size_t>(a)];
        const int j = local[static_cast<std::size_t>(b)];
        local_edges.push_back({cosine(features, i, j, norms), i, j});
      }
    for (const WeightedEdge& e :
         kruskal_max(m, std::move(local_edges)))
      accumulated.emplace(e.i, e.j);

    anchors.insert(anchors.end(), batch.begin(), batch.end());
    std::sort(anchors.begin(), anchors.end());
  }

  std::vector<WeightedEdge> h_edges;
  h_edges.reserve(accumulated.size());
  for (const auto& [i, j] : accumulated)
    h_edges.push_back({cosine(features, i, j, norms), i, j});
  SpanningTree t = tree_from_edges(kruskal_max(m, std::move(h_edges)));
  if (static_cast<int>(t.edges.size()) != m - 1)
    throw std::logic_error(
        "approx_max_spanning_tree: accumulated graph was not connected");
  return t;
}

std::vector<std::vector<int>> tree_adjacency(const SpanningTree& tree, int m) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
  for (const auto& [i, j] : tree.edges) {
    if (i < 0 || j < 0 || i >= m || j >= m)
      throw std::invalid_argument("tree_adjacency: modality index out of range");
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());
  return adj;
}

std::vector<SpanningTree> build_trees(const Mat& flat_features, int n, int m,
                                      const MstConfig& cfg) {
  if (n < 0 || m < 1 ||
      flat_features.rows() != n * m)
    throw std::invalid_argument(
        "build_trees: features must have n*m rows for m >= 1");
  std::vector<SpanningTree> trees;
  trees.reserve(static_cast<std::size_t>(n));
  Mat node_feats(m, flat_features.cols());
  for (int u = 0; u < n; ++u) {
    for (int t = 0; t < m; ++t)
      for (int j = 0; j < flat_features.cols(); ++j)
        node_feats(t, j) = flat_features(u * m + t, j);
    SpanningTree tree;
    if (cfg.mode == MstConfig::Mode::Exact) {
      tree = exact_max_spanning_tree(cosine_similarity(node_feats));
    } else {
      MstConfig per_node = cfg;
      std::uint64_t s = cfg.seed ^ (0x9E3779B97F4A7C15ULL *
                                    (static_cast<std::uint64_t>(u) + 1));
      per_node.seed = Rng::splitmix64(s);
      tree = approx_max_spanning_tree(node_feats, per_node);
    }
    tree.node = u;
    trees.push_back(std::move(tree));
  }
  return trees;
}

std::vector<std::pair<int, int>> build_sparse_inter_cross(
    const std::vector<std::pair<int, int>>& original_edges,
    const std::vector<SpanningTree>& trees, int m) {
  // Tree adjacencies cached per node (each tree is consulted once per
  // incident edge otherwise).
  std::vector<std::vector<std::vector<int>>> adj_cache(trees.size());
  std::vector<char> cached(trees.size(), 0);
  auto adj = [&](int v) -> const std::vector<std::vector<int>>& {
    if (v < 0 || v >= static_cast<int>(trees.size()) ||
        trees[static_cast<std::size_t>(v)].node != v)
      throw std::invalid_argument(
          "build_sparse_inter_cross: missing tree for node " +
          std::to_string(v));
    if (!cached[static_cast<std::size_t>(v)]) {
      adj_cache[static_cast<std::size_t>(v)] =
          tree_adjacency(trees[static_cast<std::size_t>(v)], m);
      cached[static_cast<std::size_t>(v)] = 1;
    }
    return adj_cache[static_cast<std::size_t>(v)];
  };

  std::set<std::pair<int, int>> out;
  for (const auto& [u, v] : original_edges) {
    const auto& tv = adj(v);
    const auto& tu = adj(u);
    for (int i = 0; i < m; ++i) {
      for (int j : tv[static_cast<std::size_t>(i)]) {
        const int a = u * m + i, b = v * m + j;
        out.emplace(std::min(a, b), std::max(a, b));
      }
      for (int j : tu[static_cast<std::size_t>(i)]) {
        const int a = v * m + i, b = u * m + j;
        out.emplace(std::min(a, b), std::max(a, b));
      }
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace nsgmoe
