#pragma once

#include <vector>

#include "nsgmoe/autodiff.hpp"
#include "nsgmoe/graphdata.hpp"
#include "nsgmoe/nsg.hpp"
#include "nsgmoe/rng.hpp"

namespace nsgmoe {

// Per-modality linear maps W_t (d_t x d) into the shared latent space.
struct ModalityProjection {
  std::vector<Mat> weights;
};

struct LayerConfig {
  bool relu = true;
  bool residual = true;
  bool graph_norm = true;
  Agg agg = Agg::Mean;
};

// One relation-typed message-passing layer: per-relation aggregation and
// transform, plus a self transform; then nonlinearity, residual and
// per-graph column normalization (mean-subtraction with learnable
// scale/shift), each optional.
struct HgnnLayerParams {
  std::vector<Mat> relation_weights;  // d x d, aligned with relations_of()
  Mat self_weight;                    // d x d
  Mat norm_scale;                     // 1 x d
  Mat norm_shift;                     // 1 x d
};

// Post-concatenation linear map for merged sub-nodes: (m*d) x d_out + bias.
struct MergeParams {
  Mat weight;
  Mat bias;
};

// Relations present in each NSG variant, in relation_weights order.
std::vector<RelationType> relations_of(EdgeVariant variant);

Mat glorot(int rows, int cols, Rng& rng);
ModalityProjection make_projection(const std::vector<int>& dims, int d,
                                   Rng& rng);
HgnnLayerParams make_layer(int d, int num_relations, Rng& rng);
MergeParams make_merge(int m, int d, int d_out, Rng& rng);

// Row <u,t> = X_t[u] * W_t, rows in flat sub-node order.
Mat modality_project(const MultimodalGraph& g, const ModalityProjection& proj);

// One layer applied outside any training tape (reference/oracle path).
Mat relation_message_pass(const Mat& h, const NsgGraph& nsg,
                          const HgnnLayerParams& params,
                          const LayerConfig& cfg);

// Concat sub-node embeddings per node (merge_view) then apply the linear map.
Mat merge_subnodes(const Mat& sub_emb, const NsgGraph& nsg,
                   const MergeParams& merge);

// Z = sum_{l=0..L} P^l X W^(l) for the block propagation matrix P;
// weights[l] pairs with P^l.
Mat coalesced_linear_forward(const Mat& x, const Mat& block_prop,
                             const std::vector<Mat>& weights);

// --- tape-side building blocks ---

struct LayerVars {
  std::vector<Var> relation_weights;
  Var self_weight, norm_scale, norm_shift;
};

// Creates differentiable leaves for the layer parameters in declaration
// order, appending them to *order when given (the order used by the
// optimizer and checkpoints).
LayerVars bind_layer(Tape& tape, const HgnnLayerParams& p,
                     std::vector<Var>* order = nullptr);

Var layer_forward(Tape& tape, Var h, const LayerVars& v,
                  const std::vector<Csr>& rels, const LayerConfig& cfg);

// CSR adjacency per relation of the variant, aligned with relations_of().
std::vector<Csr> relation_adjacencies(const NsgGraph& nsg);

// Dense symmetric 0/1 adjacency of one relation over sub-nodes (flat order).
Mat relation_dense_adjacency(const NsgGraph& nsg, RelationType rel);

// Block-diagonal feature layout: row u*m+t carries X_t[u] inside modality
// t's column block (zeros elsewhere). matmul with vertically stacked
// projection weights yields the flat projected features in one step.
Mat block_feature_matrix(const MultimodalGraph& g);

// Vertical stack of the per-modality projection weights as a tape
// expression: transpose(concat_cols(transpose(W_0), ..., transpose(W_m-1))).
Var stack_projection(Tape& tape, const std::vector<Var>& weights);

}  // namespace nsgmoe
