#pragma once

#include <string>
#include <vector>

#include "nsgmoe/autodiff.hpp"
#include "nsgmoe/graphdata.hpp"
#include "nsgmoe/sparsifier.hpp"

namespace nsgmoe {

enum class RelationType { IntraNode, InterSelf, InterCross };
enum class EdgeVariant { SelfType, CrossType, Hybrid };

// Sub-node <node, modality>; its flat index is node*m + modality.
struct SubNodeId {
  int node = 0;
  int modality = 0;
};

struct NsgEdge {
  int src = 0;  // flat sub-node ids, src < dst
  int dst = 0;
  RelationType rel = RelationType::IntraNode;
};

// Heterogeneous graph of unimodal sub-nodes. Edges are undirected, stored
// once as (flat_min, flat_max), sorted by (src, dst, rel).
struct NsgGraph {
  int n = 0;  // original node count
  int m = 0;  // modality count
  EdgeVariant variant = EdgeVariant::Hybrid;
  bool sparsified = false;
  std::vector<NsgEdge> edges;
  std::vector<int> node_type;  // modality of each sub-node
  std::vector<int> origin;     // original node of each sub-node

  int num_sub_nodes() const { return n * m; }
  int flat(int node, int modality) const { return node * m + modality; }
  SubNodeId sub_node(int flat_id) const {
    return {flat_id / m, flat_id % m};
  }
  long count(RelationType rel) const;
};

// Splits each node into m sub-nodes, adds the per-node modality clique, and
// adds inter-node edges per the variant: same-modality pairs (SelfType),
// differing-modality pairs (CrossType), or both (Hybrid). When `sparse_trees`
// is given, inter-cross edges are restricted to one-hop tree neighborhoods
// (see build_sparse_inter_cross).
NsgGraph build_nsg(const MultimodalGraph& g, EdgeVariant variant,
                   const std::vector<SpanningTree>* sparse_trees = nullptr);

// n*binom(m,2) intra edges plus k*e inter edges, k = m (SelfType),
// m^2-m (CrossType) or m^2 (Hybrid).
long expected_edge_count(long n, long m, long e, EdgeVariant variant);

// Per-modality feature matrices of g (the column partition of the
// concatenated feature matrix).
std::vector<Mat> slice_features(const MultimodalGraph& g);

// Reshape sub-node embeddings (flat order, (n*m) x d) into per-node
// concatenations over modalities, n x (m*d). Pure reshaping, no parameters.
Mat merge_view(const NsgGraph& nsg, const Mat& sub_embeddings);

// Symmetric adjacency of one relation over the n*m sub-nodes, as CSR
// neighbor lists (both directions of every stored edge).
Csr relation_adjacency(const NsgGraph& nsg, RelationType rel);

std::string relation_name(RelationType rel);
std::string variant_name(EdgeVariant variant);
EdgeVariant parse_variant(const std::string& name);

// Writes nsg_edges.csv (src,dst,relation) and nsg_manifest.json (n, m,
// variant, per-relation counts) into dir.
void save_nsg(const NsgGraph& nsg, const std::string& dir);

}  // namespace nsgmoe
