#include "nsgmoe/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nsgmoe {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

MoeParams make_moe(int n_self, int n_cross, int d, int layers, int top_k,
                   Rng& rng) {
  require(n_self >= 0 && n_cross >= 0 && n_self + n_cross >= 1,
          "make_moe: need at least one expert");
  require(top_k >= 1 && top_k <= n_self + n_cross,
          "make_moe: top_k must be in [1, num experts]");
  require(layers >= 1, "make_moe: need at least one layer");
  MoeParams p;
  for (int e = 0; e < n_self + n_cross; ++e) {
    ExpertParams ex;
    ex.variant = e < n_self ? EdgeVariant::SelfType : EdgeVariant::CrossType;
    const int num_rel = static_cast<int>(relations_of(ex.variant).size());
    for (int l = 0; l < layers; ++l)
      ex.layers.push_back(make_layer(d, num_rel, rng));
    p.experts.push_back(std::move(ex));
  }
  p.gate.w_gate = Mat(d, n_self + n_cross, 0.0);
  p.gate.w_noise = Mat(d, n_self + n_cross, 0.0);
  p.gate.top_k = top_k;
  return p;
}

void collect_params(MoeParams& p, std::vector<Mat*>& out) {
  for (ExpertParams& ex : p.experts)
    for (HgnnLayerParams& l : ex.layers) {
      for (Mat& w : l.relation_weights) out.push_back(&w);
      out.push_back(&l.self_weight);
      out.push_back(&l.norm_scale);
      out.push_back(&l.norm_shift);
    }
  out.push_back(&p.gate.w_gate);
  out.push_back(&p.gate.w_noise);
}

Mat top_k_mask(const Mat& scores, int k) {
  const int cols = static_cast<int>(scores.cols());
  require(k >= 1 && k <= cols, "top_k_mask: k out of range");
  Mat mask(scores.rows(), scores.cols());
  std::vector<int> idx(cols);
  for (int i = 0; i < scores.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                      [&](int a, int b) {
                        if (scores(i, a) != scores(i, b))
                          return scores(i, a) > scores(i, b);
                        return a < b;
                      });
    for (int j = 0; j < k; ++j) mask(i, idx[j]) = 1.0;
  }
  return mask;
}

Mat load_probability(const Mat& clean, const Mat& noise_scale,
                     const Mat& realized, int k) {
  require(clean.same_shape(noise_scale) && clean.same_shape(realized),
          "load_probability: shape mismatch");
  const int cols = static_cast<int>(clean.cols());
  require(k >= 1, "load_probability: k must be positive");
  Mat p(clean.rows(), clean.cols());
  std::vector<double> others;
  for (int i = 0; i < clean.rows(); ++i)
    for (int e = 0; e < cols; ++e) {
      if (cols - 1 < k) {
        p(i, e) = 1.0;
        continue;
      }
      others.clear();
      for (int j = 0; j < cols; ++j)
        if (j != e) others.push_back(realized(i, j));
      std::nth_element(others.begin(), others.begin() + (k - 1), others.end(),
                       std::greater<double>());
      const double thr = others[k - 1];
      const double s = std::max(noise_scale(i, e), 1e-6);
      p(i, e) = normal_cdf((clean(i, e) - thr) / s);
    }
  return p;
}

double cv_squared_value(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;
  return var / (mean * mean);
}

Mat standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.raw()[i] = rng.normal();
  return m;
}

GateResult gate_forward(Tape& tape, Var x, const GateVars& gv, int top_k,
                        bool noisy, const Mat* eps) {
  GateResult r;
  r.noisy = noisy;
  r.clean = tape.matmul(x, gv.w_gate);
  if (noisy) {
    require(eps != nullptr, "gate_forward: noisy mode needs a noise draw");
    require(eps->same_shape(tape.value(r.clean)),
            "gate_forward: noise draw has wrong shape");
    r.scale = tape.clamp_min(tape.softplus(tape.matmul(x, gv.w_noise)), 1e-6);
    r.realized = tape.add(r.clean, tape.mul(tape.constant(*eps), r.scale));
  } else {
    r.realized = r.clean;
  }
  r.mask = top_k_mask(tape.value(r.realized), top_k);
  r.gates = tape.masked_row_softmax(r.realized, r.mask);
  return r;
}

MoeVars bind_moe(Tape& tape, const MoeParams& p, std::vector<Var>* order) {
  MoeVars v;
  for (const ExpertParams& ex : p.experts) {
    std::vector<LayerVars> layers;
    for (const HgnnLayerParams& l : ex.layers)
      layers.push_back(bind_layer(tape, l, order));
    v.experts.push_back(std::move(layers));
  }
  v.gate.w_gate = tape.input(p.gate.w_gate);
  v.gate.w_noise = tape.input(p.gate.w_noise);
  if (order) {
    order->push_back(v.gate.w_gate);
    order->push_back(v.gate.w_noise);
  }
  return v;
}

MoeForward moe_forward(Tape& tape, Var x, const MoeVars& vars,
                       const MoeParams& params,
                       const std::vector<Csr>& self_rels,
                       const std::vector<Csr>& cross_rels,
                       const LayerConfig& cfg, bool noisy, const Mat* eps) {
  require(vars.experts.size() == params.experts.size(),
          "moe_forward: vars/params expert count mismatch");
  MoeForward fwd;
  fwd.gate =
      gate_forward(tape, x, vars.gate, params.gate.top_k, noisy, eps);
  const Mat& mask = fwd.gate.mask;
  const int num_e = params.num_experts();
  fwd.expert_used.assign(num_e, 0);
  for (int e = 0; e < num_e; ++e)
    for (int i = 0; i < mask.rows() && !fwd.expert_used[e]; ++i)
      if (mask(i, e) != 0.0) fwd.expert_used[e] = 1;

  bool have_mix = false;
  for (int e = 0; e < num_e; ++e) {
    if (!fwd.expert_used[e]) continue;
    const std::vector<Csr>& rels =
        params.experts[e].variant == EdgeVariant::SelfType ? self_rels
                                                           : cross_rels;
    Var h = x;
    for (const LayerVars& lv : vars.experts[e])
      h = layer_forward(tape, h, lv, rels, cfg);
    Var weighted =
        tape.mul(tape.slice_cols(fwd.gate.gates, e, e + 1), h);
    fwd.mixture = have_mix ? tape.add(fwd.mixture, weighted) : weighted;
    have_mix = true;
  }
  require(have_mix, "moe_forward: no expert selected");

  Var ones = tape.constant(Mat(1, mask.rows(), 1.0));
  fwd.importance = tape.matmul(ones, fwd.gate.gates);
  if (noisy)
    fwd.load = tape.topk_load(fwd.gate.clean, fwd.gate.scale,
                              fwd.gate.realized, params.gate.top_k);
  return fwd;
}

Var importance_loss(Tape& tape, const MoeForward& fwd) {
  return tape.cv_squared(fwd.importance);
}

Var load_loss(Tape& tape, const MoeForward& fwd) {
  if (!fwd.gate.noisy)
    throw std::invalid_argument("load_loss: needs the noisy gate path");
  return tape.cv_squared(fwd.load);
}

GateDiagnostics gate_diagnostics(const Mat& gates, const Mat& mask,
                                 const Mat* load_row, int num_modalities) {
  require(gates.same_shape(mask), "gate_diagnostics: shape mismatch");
  require(num_modalities >= 1, "gate_diagnostics: bad modality count");
  require(gates.rows() % num_modalities == 0,
          "gate_diagnostics: rows not divisible by modality count");
  const int num_e = static_cast<int>(gates.cols());
  const std::size_t rows = gates.rows();
  GateDiagnostics d;
  d.importance.assign(num_e, 0.0);
  d.selection_rate.assign(num_e, 0.0);
  d.modality_mean_gate.assign(num_modalities,
                              std::vector<double>(num_e, 0.0));
  for (std::size_t i = 0; i < rows; ++i)
    for (int e = 0; e < num_e; ++e) {
      d.importance[e] += gates(i, e);
      d.selection_rate[e] += mask(i, e) != 0.0 ? 1.0 : 0.0;
      d.modality_mean_gate[static_cast<int>(i) % num_modalities][e] +=
          gates(i, e);
    }
  const double rows_per_mod = static_cast<double>(rows) / num_modalities;
  for (int e = 0; e < num_e; ++e) {
    d.selection_rate[e] /= static_cast<double>(rows);
    for (int t = 0; t < num_modalities; ++t)
      d.modality_mean_gate[t][e] /= rows_per_mod;
  }
  if (load_row) {
    require(load_row->rows() == 1 &&
                static_cast<int>(load_row->cols()) == num_e,
            "gate_diagnostics: load row shape mismatch");
    d.load.assign(num_e, 0.0);
    for (int e = 0; e < num_e; ++e) d.load[e] = (*load_row)(0, e);
  }
  return d;
}

}  // namespace nsgmoe
