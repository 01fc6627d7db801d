#pragma once

#include <vector>

#include "nsgmoe/hgnn.hpp"

namespace nsgmoe {

// Noisy top-k gate. Scores are x*w_gate plus, during training, Gaussian
// noise with per-element stddev softplus(x*w_noise) clamped to >= 1e-6.
// Each row keeps its top_k scores (ties resolved toward the lower expert
// index) and softmax-normalizes over them; everything else gets weight 0.
struct GateParams {
  Mat w_gate;   // d x E, zero-initialized
  Mat w_noise;  // d x E, zero-initialized
  int top_k = 2;
};

// One expert: a message-passing stack that runs on either the self-type or
// the cross-type view of the split graph.
struct ExpertParams {
  EdgeVariant variant;
  std::vector<HgnnLayerParams> layers;
};

struct MoeParams {
  std::vector<ExpertParams> experts;  // self-branch experts first
  GateParams gate;

  int num_experts() const { return static_cast<int>(experts.size()); }
};

MoeParams make_moe(int n_self, int n_cross, int d, int layers, int top_k,
                   Rng& rng);

// Appends every trainable matrix in the order used by bind_moe (and hence
// by the optimizer and checkpoints).
void collect_params(MoeParams& p, std::vector<Mat*>& out);

// 0/1 selection of the k largest entries per row; ties keep lower columns.
Mat top_k_mask(const Mat& scores, int k);

// P[row r re-enters the top k when expert e's noise is redrawn]:
// Phi((clean - kth largest realized score among the other experts) / scale).
// With fewer than k competitors the probability is 1.
Mat load_probability(const Mat& clean, const Mat& noise_scale,
                     const Mat& realized, int k);

// (population variance) / mean^2; 0 for fewer than two values or zero mean.
double cv_squared_value(const std::vector<double>& xs);

Mat standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

struct GateVars {
  Var w_gate, w_noise;
};

struct GateResult {
  Var gates;     // N x E rows summing to 1 over the selected experts
  Var clean;     // N x E
  Var realized;  // equals clean when the noise path is off
  Var scale;     // valid only when noisy
  Mat mask;      // N x E selection (not differentiated through)
  bool noisy = false;
};

// eps must be an N x E standard-normal draw when noisy, else may be null.
GateResult gate_forward(Tape& tape, Var x, const GateVars& gv, int top_k,
                        bool noisy, const Mat* eps);

struct MoeVars {
  std::vector<std::vector<LayerVars>> experts;
  GateVars gate;
};

MoeVars bind_moe(Tape& tape, const MoeParams& p,
                 std::vector<Var>* order = nullptr);

struct MoeForward {
  Var mixture;  // N x d gate-weighted sum of expert outputs
  GateResult gate;
  Var importance;  // 1 x E column sums of the gates
  Var load;        // 1 x E expected selection counts; valid when noisy
  std::vector<char> expert_used;
};

// x doubles as the gate input and every expert's input; experts whose gate
// column is identically zero are never evaluated.
MoeForward moe_forward(Tape& tape, Var x, const MoeVars& vars,
                       const MoeParams& params,
                       const std::vector<Csr>& self_rels,
                       const std::vector<Csr>& cross_rels,
                       const LayerConfig& cfg, bool noisy, const Mat* eps);

Var importance_loss(Tape& tape, const MoeForward& fwd);
Var load_loss(Tape& tape, const MoeForward& fwd);

struct GateDiagnostics {
  std::vector<double> importance;
  std::vector<double> load;            // empty when the noise path was off
  std::vector<double> selection_rate;  // fraction of rows picking each expert
  std::vector<std::vector<double>> modality_mean_gate;  // [modality][expert]
};

// Rows are in flat sub-node order, so row i belongs to modality i % m.
// load_row, when given, is the 1 x E expected-load vector.
GateDiagnostics gate_diagnostics(const Mat& gates, const Mat& mask,
                                 const Mat* load_row, int num_modalities);

}  // namespace nsgmoe
