#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nsgmoe/mat.hpp"
#include "nsgmoe/rng.hpp"

namespace nsgmoe {

// Maximum spanning tree over a node's modality sub-nodes. Edges are
// modality-index pairs stored as (min,max), sorted lexicographically.
struct SpanningTree {
  int node = -1;
  std::vector<std::pair<int, int>> edges;
  double total_weight = 0.0;
};

struct MstConfig {
  enum class Mode { Exact, Approximate };
  int c0 = 4;  // anchor count
  int c1 = 8;  // batch size
  std::uint64_t seed = 0;
  Mode mode = Mode::Exact;
};

// Pairwise cosine similarity between rows; rows with zero norm yield 0.
Mat cosine_similarity(const Mat& features);

// Kruskal over descending similarity; ties prefer the lexicographically
// smaller (i,j) pair. m=1 yields an empty tree.
SpanningTree exact_max_spanning_tree(const Mat& similarity);

// Anchor-batched approximate maximum spanning tree: seed an anchor
// reservoir, repeatedly solve exact local trees on (anchor subset) x
// (unprocessed batch), accumulate their edges, and prune the accumulated
// graph with one final exact pass. Exact when the whole node set fits in one
// batch. Always returns a valid spanning tree; deterministic given cfg.seed.
SpanningTree approx_max_spanning_tree(const Mat& features,
                                      const MstConfig& cfg);

// Neighbor lists of tree edges over modality indices [0, m).
std::vector<std::vector<int>> tree_adjacency(const SpanningTree& tree, int m);

// One tree per node from flat sub-node features ((n*m) x d, row u*m+t =
// node u's modality-t vector). Exact mode ignores the seed; approximate mode
// derives an independent substream per node from cfg.seed.
std::vector<SpanningTree> build_trees(const Mat& flat_features, int n, int m,
                                      const MstConfig& cfg);

// Sparse inter-cross edges: for original edge (u,v) and modality i, connect
// sub-node <u,i> to <v,j> for every j adjacent to i in v's tree, and
// symmetrically from v's side through u's tree. Returned pairs are flat
// sub-node ids (node*m + modality), canonical (min,max), deduplicated and
// sorted. `trees` must hold the tree for node id v at index v.
std::vector<std::pair<int, int>> build_sparse_inter_cross(
    const std::vector<std::pair<int, int>>& original_edges,
    const std::vector<SpanningTree>& trees, int m);

}  // namespace nsgmoe
