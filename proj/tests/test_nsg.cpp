#include <algorithm>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "nsgmoe/graphdata.hpp"
#include "nsgmoe/nsg.hpp"
#include "nsgmoe/rng.hpp"

using namespace nsgmoe;

namespace {

// Structure-only graph: features are irrelevant to the transform.
MultimodalGraph skeleton(int n, int m,
                         std::vector<std::pair<int, int>> edges) {
  MultimodalGraph g;
  g.num_nodes = n;
  g.edges = std::move(edges);
  for (int t = 0; t < m; ++t)
    g.modalities.push_back({"m" + std::to_string(t), 1});
  return g;
}

std::set<std::pair<int, int>> edge_set(const NsgGraph& nsg, RelationType rel) {
  std::set<std::pair<int, int>> s;
  for (const NsgEdge& e : nsg.edges)
    if (e.rel == rel) s.insert({e.src, e.dst});
  return s;
}

}  // namespace

TEST_CASE("expected_edge_count formula hand values") {
  // n=5, m=3, e=4: intra 5*3=15; inter k = 3 / 6 / 9
  CHECK(expected_edge_count(5, 3, 4, EdgeVariant::SelfType) == 15 + 12);
  CHECK(expected_edge_count(5, 3, 4, EdgeVariant::CrossType) == 15 + 24);
  CHECK(expected_edge_count(5, 3, 4, EdgeVariant::Hybrid) == 15 + 36);
  // m=1: no intra clique, self keeps the edges, cross has none
  CHECK(expected_edge_count(9, 1, 6, EdgeVariant::SelfType) == 6);
  CHECK(expected_edge_count(9, 1, 6, EdgeVariant::CrossType) == 0);
  CHECK(expected_edge_count(9, 1, 6, EdgeVariant::Hybrid) == 6);
  // m=2: cross and self each contribute 2 per edge
  CHECK(expected_edge_count(4, 2, 3, EdgeVariant::SelfType) == 4 + 6);
  CHECK(expected_edge_count(4, 2, 3, EdgeVariant::CrossType) == 4 + 6);
  CHECK(expected_edge_count(4, 2, 3, EdgeVariant::Hybrid) == 4 + 12);
}

TEST_CASE("build_nsg enumerates the exact edge sets on a hand example") {
  // 3 nodes, one original edge (0,1), m=2; flat id = node*2 + modality
  MultimodalGraph g = skeleton(3, 2, {{0, 1}});

  NsgGraph self = build_nsg(g, EdgeVariant::SelfType);
  CHECK(self.num_sub_nodes() == 6);
  CHECK(edge_set(self, RelationType::IntraNode) ==
        std::set<std::pair<int, int>>{{0, 1}, {2, 3}, {4, 5}});
  CHECK(edge_set(self, RelationType::InterSelf) ==
        std::set<std::pair<int, int>>{{0, 2}, {1, 3}});
  CHECK(edge_set(self, RelationType::InterCross).empty());

  NsgGraph cross = build_nsg(g, EdgeVariant::CrossType);
  CHECK(edge_set(cross, RelationType::InterCross) ==
        std::set<std::pair<int, int>>{{0, 3}, {1, 2}});
  CHECK(edge_set(cross, RelationType::InterSelf).empty());

  NsgGraph hybrid = build_nsg(g, EdgeVariant::Hybrid);
  CHECK(edge_set(hybrid, RelationType::InterSelf) ==
        std::set<std::pair<int, int>>{{0, 2}, {1, 3}});
  CHECK(edge_set(hybrid, RelationType::InterCross) ==
        std::set<std::pair<int, int>>{{0, 3}, {1, 2}});
  CHECK(hybrid.count(RelationType::IntraNode) == 3);
  CHECK(static_cast<long>(hybrid.edges.size()) ==
        expected_edge_count(3, 2, 1, EdgeVariant::Hybrid));

  // bookkeeping arrays
  for (int u = 0; u < 3; ++u)
    for (int t = 0; t < 2; ++t) {
      int f = hybrid.flat(u, t);
      CHECK(hybrid.node_type[static_cast<std::size_t>(f)] == t);
      CHECK(hybrid.origin[static_cast<std::size_t>(f)] == u);
      CHECK(hybrid.sub_node(f).node == u);
      CHECK(hybrid.sub_node(f).modality == t);
    }
}

TEST_CASE("edges are canonical and sorted") {
  Rng rng(31);
  MultimodalGraph g = skeleton(8, 3, {});
  for (int u = 0; u < 8; ++u)
    for (int v = u + 1; v < 8; ++v)
      if (rng.uniform() < 0.4) g.edges.push_back({u, v});
  NsgGraph nsg = build_nsg(g, EdgeVariant::Hybrid);
  for (std::size_t i = 0; i < nsg.edges.size(); ++i) {
    CHECK(nsg.edges[i].src < nsg.edges[i].dst);
    if (i > 0) {
      const NsgEdge& p = nsg.edges[i - 1];
      const NsgEdge& e = nsg.edges[i];
      CHECK((p.src < e.src ||
             (p.src == e.src &&
              (p.dst < e.dst || (p.dst == e.dst && p.rel <= e.rel)))));
    }
  }
  CHECK(static_cast<long>(nsg.edges.size()) ==
        expected_edge_count(8, 3, static_cast<long>(g.edges.size()),
                            EdgeVariant::Hybrid));
}

TEST_CASE("transform is equivariant under original-node relabeling") {
  Rng rng(32);
  const int n = 7, m = 3;
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < 0.35) edges.push_back({u, v});
  MultimodalGraph g = skeleton(n, m, edges);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);
  std::vector<std::pair<int, int>> relabeled;
  for (auto [u, v] : edges) {
    int a = perm[static_cast<std::size_t>(u)];
    int b = perm[static_cast<std::size_t>(v)];
    relabeled.push_back({std::min(a, b), std::max(a, b)});
  }
  MultimodalGraph gp = skeleton(n, m, relabeled);

  for (EdgeVariant variant :
       {EdgeVariant::SelfType, EdgeVariant::CrossType, EdgeVariant::Hybrid}) {
    NsgGraph a = build_nsg(g, variant);
    NsgGraph b = build_nsg(gp, variant);
    // map sub-node <u,t> -> <perm(u),t> and compare edge sets per relation
    auto mapped = [&](RelationType rel) {
      std::set<std::pair<int, int>> s;
      for (const NsgEdge& e : a.edges) {
        if (e.rel != rel) continue;
        SubNodeId su = a.sub_node(e.src), sv = a.sub_node(e.dst);
        int fu = b.flat(perm[static_cast<std::size_t>(su.node)], su.modality);
        int fv = b.flat(perm[static_cast<std::size_t>(sv.node)], sv.modality);
        s.insert({std::min(fu, fv), std::max(fu, fv)});
      }
      return s;
    };
    for (RelationType rel : {RelationType::IntraNode, RelationType::InterSelf,
                             RelationType::InterCross})
      CHECK(mapped(rel) == edge_set(b, rel));
  }
}

TEST_CASE("m=1 self and hybrid variants reproduce the original graph") {
  Rng rng(33);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < 10; ++u)
    for (int v = u + 1; v < 10; ++v)
      if (rng.uniform() < 0.3) edges.push_back({u, v});
  MultimodalGraph g = skeleton(10, 1, edges);
  for (EdgeVariant variant : {EdgeVariant::SelfType, EdgeVariant::Hybrid}) {
    NsgGraph nsg = build_nsg(g, variant);
    CHECK(nsg.num_sub_nodes() == 10);
    CHECK(edge_set(nsg, RelationType::InterSelf) ==
          std::set<std::pair<int, int>>(edges.begin(), edges.end()));
    CHECK(nsg.count(RelationType::IntraNode) == 0);
    CHECK(nsg.count(RelationType::InterCross) == 0);
  }
  NsgGraph cross = build_nsg(g, EdgeVariant::CrossType);
  CHECK(cross.edges.empty());
}

TEST_CASE("merge_view reshapes flat sub-node rows per node") {
  MultimodalGraph g = skeleton(3, 2, {});
  NsgGraph nsg = build_nsg(g, EdgeVariant::SelfType);
  Mat sub(6, 2);
  for (int f = 0; f < 6; ++f)
    for (int j = 0; j < 2; ++j) sub(f, j) = 10 * f + j;
  Mat merged = merge_view(nsg, sub);
  CHECK(merged.rows() == 3);
  CHECK(merged.cols() == 4);
  for (int u = 0; u < 3; ++u)
    for (int t = 0; t < 2; ++t)
      for (int j = 0; j < 2; ++j)
        CHECK(merged(u, 2 * t + j) == 10 * (2 * u + t) + j);
}

TEST_CASE("slice_features returns the column partition") {
  SyntheticSpec s;
  s.n = 12;
  s.m = 2;
  s.dims = {3, 4};
  MultimodalGraph g = generate_synthetic(s);
  std::vector<Mat> sliced = slice_features(g);
  REQUIRE(sliced.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(sliced[t].rows() == g.features[t].rows());
    CHECK(sliced[t].cols() == g.features[t].cols());
    for (int i = 0; i < sliced[t].rows(); ++i)
      for (int j = 0; j < sliced[t].cols(); ++j)
        CHECK(sliced[t](i, j) == g.features[t](i, j));
  }
}

TEST_CASE("relation_adjacency is symmetric with matching degree sums") {
  Rng rng(34);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < 6; ++u)
    for (int v = u + 1; v < 6; ++v)
      if (rng.uniform() < 0.5) edges.push_back({u, v});
  MultimodalGraph g = skeleton(6, 3, edges);
  NsgGraph nsg = build_nsg(g, EdgeVariant::Hybrid);
  for (RelationType rel : {RelationType::IntraNode, RelationType::InterSelf,
                           RelationType::InterCross}) {
    Csr adj = relation_adjacency(nsg, rel);
    CHECK(adj.out_rows() == nsg.num_sub_nodes());
    CHECK(static_cast<long>(adj.indices.size()) == 2 * nsg.count(rel));
    // symmetry: i in N(j) iff j in N(i)
    for (int i = 0; i < adj.out_rows(); ++i)
      for (int p = adj.offsets[static_cast<std::size_t>(i)];
           p < adj.offsets[static_cast<std::size_t>(i) + 1]; ++p) {
        int j = adj.indices[static_cast<std::size_t>(p)];
        bool found = false;
        for (int q = adj.offsets[static_cast<std::size_t>(j)];
             q < adj.offsets[static_cast<std::size_t>(j) + 1]; ++q)
          found |= adj.indices[static_cast<std::size_t>(q)] == i;
        CHECK(found);
      }
  }
}

TEST_CASE("tree-sparsified cross edges obey the per-edge bounds") {
  const int n = 6, m = 5;
  Rng rng(35);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < 0.5) edges.push_back({u, v});
  REQUIRE(!edges.empty());
  MultimodalGraph g = skeleton(n, m, edges);

  // star trees centered at modality 0
  std::vector<SpanningTree> trees(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    trees[static_cast<std::size_t>(u)].node = u;
    for (int t = 1; t < m; ++t)
      trees[static_cast<std::size_t>(u)].edges.push_back({0, t});
  }
  NsgGraph nsg = build_nsg(g, EdgeVariant::CrossType, &trees);
  CHECK(nsg.sparsified);

  // count sparse cross edges per original edge
  for (auto [u, v] : edges) {
    long cnt = 0;
    for (const NsgEdge& e : nsg.edges) {
      if (e.rel != RelationType::InterCross) continue;
      int a = nsg.origin[static_cast<std::size_t>(e.src)];
      int b = nsg.origin[static_cast<std::size_t>(e.dst)];
      if ((a == u && b == v) || (a == v && b == u)) ++cnt;
    }
    CHECK(cnt >= 2 * (m - 1));
    CHECK(cnt <= 4 * (m - 1));
  }

  // full cross for comparison is strictly larger at m=5
  NsgGraph full = build_nsg(g, EdgeVariant::CrossType);
  CHECK(nsg.count(RelationType::InterCross) <
        full.count(RelationType::InterCross));
}

TEST_CASE("m=2 tree sparsification equals the full cross set") {
  Rng rng(36);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < 7; ++u)
    for (int v = u + 1; v < 7; ++v)
      if (rng.uniform() < 0.4) edges.push_back({u, v});
  MultimodalGraph g = skeleton(7, 2, edges);
  std::vector<SpanningTree> trees(7);
  for (int u = 0; u < 7; ++u) {
    trees[static_cast<std::size_t>(u)].node = u;
    trees[static_cast<std::size_t>(u)].edges.push_back({0, 1});
  }
  NsgGraph sparse = build_nsg(g, EdgeVariant::CrossType, &trees);
  NsgGraph full = build_nsg(g, EdgeVariant::CrossType);
  CHECK(edge_set(sparse, RelationType::InterCross) ==
        edge_set(full, RelationType::InterCross));
}

TEST_CASE("variant and relation names round-trip") {
  CHECK(parse_variant("self") == EdgeVariant::SelfType);
  CHECK(parse_variant("cross") == EdgeVariant::CrossType);
  CHECK(parse_variant("hybrid") == EdgeVariant::Hybrid);
  CHECK(variant_name(EdgeVariant::SelfType) == "self");
  CHECK(variant_name(EdgeVariant::CrossType) == "cross");
  CHECK(variant_name(EdgeVariant::Hybrid) == "hybrid");
  CHECK_THROWS(parse_variant("bogus"));
  CHECK(relation_name(RelationType::IntraNode) == "intra");
  CHECK(relation_name(RelationType::InterSelf) == "self");
  CHECK(relation_name(RelationType::InterCross) == "cross");
}
