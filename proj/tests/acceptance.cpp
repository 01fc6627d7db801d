// Acceptance gate: ten end-to-end checks against independent oracles and
// frozen regression thresholds. Prints one PASS/FAIL line per criterion and
// exits with the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nsgmoe/hgnn.hpp"
#include "nsgmoe/moe.hpp"
#include "nsgmoe/nsg.hpp"
#include "nsgmoe/optim.hpp"
#include "nsgmoe/sparsifier.hpp"
#include "nsgmoe/spectral.hpp"
#include "nsgmoe/trainkit.hpp"

using namespace nsgmoe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

MultimodalGraph skeleton(int n, int m, double p, Rng& rng) {
  MultimodalGraph g;
  g.num_nodes = n;
  for (int t = 0; t < m; ++t) g.modalities.push_back({"m" + std::to_string(t), 1});
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.edges.push_back({u, v});
  return g;
}

int count_components(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int comps = n;
  for (auto [a, b] : edges) {
    int ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[static_cast<std::size_t>(ra)] = rb;
      --comps;
    }
  }
  return comps;
}

bool spans(const std::vector<std::pair<int, int>>& edges, int m) {
  if (static_cast<int>(edges.size()) != m - 1) return false;
  return count_components(m, edges) == 1;
}

// ---------------------------------------------------------------- 1
Outcome edge_count_law() {
  Rng rng(1001);
  long graphs = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + static_cast<int>(rng.below(50));
    int m = 1 + static_cast<int>(rng.below(5));
    MultimodalGraph g = skeleton(n, m, rng.uniform() * 0.5, rng);
    long e = static_cast<long>(g.edges.size());
    for (EdgeVariant variant : {EdgeVariant::SelfType, EdgeVariant::CrossType,
                                EdgeVariant::Hybrid}) {
      NsgGraph nsg = build_nsg(g, variant);
      if (static_cast<long>(nsg.edges.size()) !=
          expected_edge_count(n, m, e, variant))
        return {false, "count mismatch at n=" + std::to_string(n) +
                           " m=" + std::to_string(m)};
    }
    ++graphs;
  }
  return {true, std::to_string(graphs) + " graphs x 3 variants exact"};
}

// ---------------------------------------------------------------- 2
Outcome degeneracy_isomorphism() {
  Rng rng(1002);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(rng.below(11));  // 2..12
    int m = 1 + static_cast<int>(rng.below(5));
    MultimodalGraph g = skeleton(n, m, 0.15 + 0.5 * rng.uniform(), rng);
    NsgGraph nsg = build_nsg(g, EdgeVariant::SelfType);

    std::set<std::pair<int, int>> original(g.edges.begin(), g.edges.end());
    std::vector<std::set<std::pair<int, int>>> per_modality(
        static_cast<std::size_t>(m));
    std::vector<std::pair<int, int>> stripped;
    for (const NsgEdge& e : nsg.edges) {
      if (e.rel == RelationType::IntraNode) continue;
      stripped.push_back({e.src, e.dst});
      SubNodeId a = nsg.sub_node(e.src), b = nsg.sub_node(e.dst);
      // removing the intra clique must leave modalities disconnected
      if (a.modality != b.modality)
        return {false, "cross-modality edge survived the strip"};
      per_modality[static_cast<std::size_t>(a.modality)].insert(
          {std::min(a.node, b.node), std::max(a.node, b.node)});
    }
    // witness isomorphism u -> <u,t>: each copy carries exactly the
    // original edge set
    for (int t = 0; t < m; ++t)
      if (per_modality[static_cast<std::size_t>(t)] != original)
        return {false, "modality copy differs from the original edge set"};
    // structural cross-check without the witness: component counts
    int orig_comps = count_components(n, g.edges);
    int stripped_comps = count_components(n * m, stripped);
    if (stripped_comps != m * orig_comps)
      return {false, "component count " + std::to_string(stripped_comps) +
                         " != m * " + std::to_string(orig_comps)};
  }
  return {true, "20 instances split into m disjoint originals"};
}

// ---------------------------------------------------------------- 3
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
    if (count_components(m, edges) == 1) best = std::max(best, w);
    int i = need - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == p - need + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < need; ++j)
      pick[static_cast<std::size_t>(j)] =
          pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

Outcome mst_correctness() {
  Rng rng(1003);
  // exact vs exhaustive enumeration, and approx-with-covering-batch vs exact
  for (int trial = 0; trial < 50; ++trial) {
    int m = 2 + static_cast<int>(rng.below(5));  // 2..6
    Mat f(m, 4);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 4; ++j) f(i, j) = rng.normal();
    Mat s = cosine_similarity(f);
    SpanningTree exact = exact_max_spanning_tree(s);
    if (!spans(exact.edges, m)) return {false, "exact output not a tree"};
    double best = brute_force_max_tree(s);
    if (std::abs(exact.total_weight - best) > 1e-12)
      return {false, "exact weight " + std::to_string(exact.total_weight) +
                         " != brute force " + std::to_string(best)};
    MstConfig cfg;
    cfg.mode = MstConfig::Mode::Approximate;
    cfg.c0 = 3;
    cfg.c1 = m;  // covering batch
    cfg.seed = 2000 + static_cast<std::uint64_t>(trial);
    SpanningTree approx = approx_max_spanning_tree(f, cfg);
    if (std::abs(approx.total_weight - exact.total_weight) > 1e-12)
      return {false, "covering-batch approx missed the exact weight"};
  }
  // validity of the batched approximation up to m = 64
  for (int m : {2, 5, 16, 33, 64}) {
    Mat f(m, 8);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < 8; ++j) f(i, j) = rng.normal();
    MstConfig cfg;
    cfg.mode = MstConfig::Mode::Approximate;
    cfg.c0 = 4;
    cfg.c1 = 8;
    cfg.seed = 77;
    SpanningTree t = approx_max_spanning_tree(f, cfg);
    if (!spans(t.edges, m))
      return {false, "approx output invalid at m=" + std::to_string(m)};
  }
  return {true, "50 exhaustive matches; trees valid through m=64"};
}

// ---------------------------------------------------------------- 4
Outcome coalesced_equivalence() {
  Rng rng(1004);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 3 + static_cast<int>(rng.below(6));
    EdgeVariant variant = trial % 3 == 0   ? EdgeVariant::SelfType
                          : trial % 3 == 1 ? EdgeVariant::CrossType
                                           : EdgeVariant::Hybrid;
    MultimodalGraph g = skeleton(n, 2, 0.5, rng);
    NsgGraph nsg = build_nsg(g, variant);
    const int d = 3;
    Mat w = scale(glorot(d, d, rng), 0.8);
    Mat x(nsg.num_sub_nodes(), d);
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < d; ++j) x(i, j) = rng.normal();

    const int L = 1 + trial % 3;
    // shared-weight linear stack through the real layer path
    HgnnLayerParams params;
    for (std::size_t r = 0; r < relations_of(variant).size(); ++r)
      params.relation_weights.push_back(w);
    params.self_weight = w;
    params.norm_scale = Mat(1, d, 1.0);
    params.norm_shift = Mat(1, d);
    LayerConfig cfg;
    cfg.relu = false;
    cfg.residual = false;
    cfg.graph_norm = false;
    cfg.agg = Agg::Sum;
    Mat h = x;
    for (int l = 0; l < L; ++l) h = relation_message_pass(h, nsg, params, cfg);

    // closed form sum_k binom(L,k) P^k X W^L
    Mat p(nsg.num_sub_nodes(), nsg.num_sub_nodes());
    for (RelationType rel : relations_of(variant))
      p = add(p, relation_dense_adjacency(nsg, rel));
    Mat wl = Mat::identity(d);
    for (int l = 0; l < L; ++l) wl = matmul(wl, w);
    std::vector<Mat> coeffs;
    long binom = 1;
    for (int k = 0; k <= L; ++k) {
      coeffs.push_back(scale(wl, static_cast<double>(binom)));
      binom = binom * (L - k) / (k + 1);
    }
    Mat closed = coalesced_linear_forward(x, p, coeffs);
    for (int i = 0; i < h.rows(); ++i)
      for (int j = 0; j < h.cols(); ++j)
        worst = std::max(worst, std::abs(h(i, j) - closed(i, j)));
  }
  std::ostringstream ss;
  ss << "max |stack - closed form| = " << worst;
  return {worst < 1e-10, ss.str()};
}

// ---------------------------------------------------------------- 5
Outcome spectral_verification() {
  Rng rng(1005);
  double worst_resid = 0, worst_gap = 0;
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng.below(29));  // 2..30
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.3) {
          a(i, j) = 1;
          a(j, i) = 1;
        }
    Mat b = trial % 2 == 0 ? Mat::identity(n) : add(Mat::identity(n), a);
    SpectralConfig cfg;
    cfg.alpha = 2 * rng.uniform() - 1;
    cfg.beta = 2 * rng.uniform() - 1;
    cfg.normalization = trial % 3 == 0
                            ? SpectralConfig::Normalization::None
                            : SpectralConfig::Normalization::SymmetricDegree;
    SpectralReport rep = analyze_spectrum(a, b, cfg);
    worst_resid = std::max({worst_resid, rep.spectrum_match_error,
                            rep.block_form_residual, rep.assembled_residual,
                            rep.filter_residual});
    worst_gap = std::max(worst_gap, rep.response_gap_error);
  }
  std::ostringstream ss;
  ss << "max residual " << worst_resid << ", max gap error " << worst_gap;
  return {worst_resid < 1e-8 && worst_gap < 1e-12, ss.str()};
}

// ---------------------------------------------------------------- 6
Outcome gradient_integrity() {
  SyntheticSpec spec;
  spec.n = 6;
  spec.m = 2;
  spec.num_classes = 2;
  spec.dims = {3, 3};
  spec.intra_class_edge_prob = 0.7;
  spec.inter_class_edge_prob = 0.4;
  spec.seed = 60;
  MultimodalGraph g = generate_synthetic(spec);

  ModelConfig arch;
  arch.d = 4;
  arch.layers = 2;
  arch.n_self = 2;
  arch.n_cross = 2;
  arch.top_k = 2;
  Rng rng(1006);
  Model model = make_model(g, Task::NodeClassification, arch, rng);

  TaskConfig cfg;
  cfg.lambda = 1e4;
  cfg.seed = 61;
  ForwardPlan plan = make_plan(g, model, cfg);
  plan.noisy = true;
  Rng noise(1007);
  plan.eps = standard_normal(
      static_cast<std::size_t>(g.num_nodes * 2),
      static_cast<std::size_t>(model.moe.num_experts()), noise);

  StepOutput step = model_step(model, plan, true);
  std::vector<Mat*> params = collect_params(model);
  FdCheckResult res = finite_difference_check(
      [&] { return model_step(model, plan, false).total; }, params,
      step.grads);
  std::ostringstream ss;
  ss << "max rel err " << res.max_rel_err << " over " << res.coords_checked
     << " coordinates";
  return {res.max_rel_err < 1e-4, ss.str()};
}

// ---------------------------------------------------------------- 7
Outcome gating_contracts() {
  // (a) exactly k positive gates summing to 1
  {
    Rng rng(1008);
    const int n = 300, d = 5, e = 6;
    for (int k : {1, 2, 3}) {
      Tape t;
      Mat x(n, d), wg(d, e), wn(d, e);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < e; ++j) {
          wg(i, j) = rng.normal();
          wn(i, j) = rng.normal();
        }
      GateVars gv{t.input(wg), t.input(wn)};
      Mat eps = standard_normal(n, e, rng);
      GateResult res = gate_forward(t, t.input(x), gv, k, true, &eps);
      const Mat& gates = t.value(res.gates);
      for (int i = 0; i < n; ++i) {
        int positive = 0;
        double sum = 0;
        for (int j = 0; j < e; ++j) {
          if (gates(i, j) > 0) ++positive;
          sum += gates(i, j);
        }
        if (positive != k) return {false, "row with wrong support size"};
        if (std::abs(sum - 1.0) > 1e-12)
          return {false, "gate row sum off by " + std::to_string(sum - 1.0)};
      }
    }
  }
  // (b) zero-initialized selection is uniform within 3 sigma over 1e4 rows
  {
    Rng rng(1009);
    const int n = 10000, d = 3, e = 5;
    Tape t;
    Mat x(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
    GateVars gv{t.input(Mat(d, e)), t.input(Mat(d, e))};
    Mat eps = standard_normal(n, e, rng);
    GateResult res = gate_forward(t, t.input(x), gv, 1, true, &eps);
    const double expect = static_cast<double>(n) / e;
    const double sigma = std::sqrt(n * (1.0 / e) * (1.0 - 1.0 / e));
    for (int j = 0; j < e; ++j) {
      double count = 0;
      for (int i = 0; i < n; ++i) count += res.mask(i, j);
      if (std::abs(count - expect) > 3 * sigma)
        return {false, "expert " + std::to_string(j) + " selected " +
                           std::to_string(count) + " times (expect " +
                           std::to_string(expect) + " +- " +
                           std::to_string(3 * sigma) + ")"};
    }
  }
  // (c) load_probability against Monte Carlo resampling at 1e5
  {
    Rng rng(1010);
    const int e = 4, k = 2;
    Mat clean(1, e), scl(1, e), realized(1, e);
    for (int j = 0; j < e; ++j) {
      clean(0, j) = rng.normal();
      scl(0, j) = 0.5 + rng.uniform();
      realized(0, j) = clean(0, j) + scl(0, j) * rng.normal();
    }
    Mat p = load_probability(clean, scl, realized, k);
    const int trials = 100000;
    for (int j = 0; j < e; ++j) {
      std::vector<double> others;
      for (int o = 0; o < e; ++o)
        if (o != j) others.push_back(realized(0, o));
      std::sort(others.begin(), others.end(), std::greater<double>());
      const double thr = others[k - 1];
      long hits = 0;
      for (int s = 0; s < trials; ++s)
        if (clean(0, j) + scl(0, j) * rng.normal() >= thr) ++hits;
      const double mc = static_cast<double>(hits) / trials;
      const double sigma =
          std::sqrt(std::max(p(0, j) * (1 - p(0, j)), 1e-12) / trials);
      if (std::abs(mc - p(0, j)) > 3 * sigma + 1e-6)
        return {false, "expert " + std::to_string(j) + ": model " +
                           std::to_string(p(0, j)) + " vs MC " +
                           std::to_string(mc)};
    }
  }
  return {true, "support/sum, uniformity, and load all within bounds"};
}

// ---------------------------------------------------------------- 8
Outcome balancing_trend() {
  // Anti-correlated features make the cross-branch experts genuinely worse,
  // so an unregularized gate has a task reason to starve them.
  SyntheticSpec spec;
  spec.n = 120;
  spec.m = 2;
  spec.num_classes = 3;
  spec.dims = {8, 8};
  spec.mode = SyntheticSpec::Mode::AntiCorrelated;
  spec.seed = 80;
  MultimodalGraph g = generate_synthetic(spec);

  ModelConfig arch;
  arch.d = 16;
  arch.layers = 2;
  arch.n_self = 3;
  arch.n_cross = 3;
  arch.top_k = 2;

  TaskConfig cfg;
  cfg.lr = 5e-2;
  cfg.epochs = 300;
  cfg.patience = 300;
  cfg.seed = 81;

  cfg.lambda = 1e4;
  TrainResult balanced = train(g, cfg, arch);
  cfg.lambda = 0.0;
  TrainResult collapsed = train(g, cfg, arch);

  auto final_cv = [](const TrainResult& r) {
    return std::sqrt(cv_squared_value(r.history.back().gate.importance));
  };
  const double cv_bal = final_cv(balanced);
  const double cv_col = final_cv(collapsed);
  double min_share = 1.0;
  for (double s : collapsed.history.back().gate.selection_rate)
    min_share = std::min(min_share, s / arch.top_k);
  std::ostringstream ss;
  ss << "importance CV " << cv_bal << " (lambda=1e4) vs " << cv_col
     << " (lambda=0); min unbalanced share " << min_share;
  return {cv_bal < cv_col && min_share < 0.05, ss.str()};
}

// ---------------------------------------------------------------- 9
Outcome modality_confusion_trend() {
  // Sparse, noisy graph with mirrored class means across modalities: the
  // concatenated model must learn to unmix them through a 16->6 bottleneck
  // while the
  // split models keep modalities apart, and the cross-branch experts add
  // independent neighborhoods worth ensembling. Mean test accuracies from
  // the first oracle run of this binary, frozen as regression thresholds:
  //   concat 0.5900, split single 0.6000, split mixture 0.6200.
  const double kBaselineMargin = 0.0100 - 1e-9;
  const double kMoeMargin = 0.0200 - 1e-9;

  SyntheticSpec spec;
  spec.n = 200;
  spec.m = 2;
  spec.num_classes = 4;
  spec.dims = {8, 8};
  spec.mode = SyntheticSpec::Mode::AntiCorrelated;
  spec.noise_std = 2.5;
  spec.intra_class_edge_prob = 0.08;
  spec.inter_class_edge_prob = 0.02;

  ModelConfig nsg_single;
  nsg_single.d = 6;
  nsg_single.layers = 2;
  nsg_single.n_self = 1;
  nsg_single.n_cross = 0;
  nsg_single.top_k = 1;

  ModelConfig nsg_moe = nsg_single;
  nsg_moe.n_self = 2;
  nsg_moe.n_cross = 2;
  nsg_moe.top_k = 2;

  TaskConfig cfg;
  cfg.lr = 1e-2;
  cfg.epochs = 150;
  cfg.patience = 150;

  double acc_base = 0, acc_single = 0, acc_moe = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = 900 + seed;
    MultimodalGraph g = generate_synthetic(spec);
    cfg.seed = seed;
    acc_base += baseline_concat_gcn(g, cfg, nsg_single).test_metrics.accuracy;
    acc_single += train(g, cfg, nsg_single).test_metrics.accuracy;
    acc_moe += train(g, cfg, nsg_moe).test_metrics.accuracy;
  }
  acc_base /= 5;
  acc_single /= 5;
  acc_moe /= 5;
  std::ostringstream ss;
  ss << "concat " << acc_base << ", split single " << acc_single
     << ", split mixture " << acc_moe;
  return {acc_single >= acc_base + kBaselineMargin &&
              acc_moe >= acc_single + kMoeMargin,
          ss.str()};
}

// ---------------------------------------------------------------- 10
std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  SyntheticSpec spec;
  spec.n = 40;
  spec.m = 2;
  spec.dims = {5, 5};
  spec.seed = 100;
  MultimodalGraph g = generate_synthetic(spec);
  MultimodalGraph g2 = generate_synthetic(spec);
  if (graph_hash(g) != graph_hash(g2))
    return {false, "generator not reproducible"};

  TaskConfig cfg;
  cfg.epochs = 4;
  cfg.lr = 1e-3;
  cfg.seed = 101;
  ModelConfig arch;
  arch.d = 8;
  arch.layers = 1;
  const std::string d1 = (fs::temp_directory_path() / "nsgmoe_acc_a").string();
  const std::string d2 = (fs::temp_directory_path() / "nsgmoe_acc_b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  train(g, cfg, arch, d1);
  train(g, cfg, arch, d2);
  bool same_metrics = slurp(d1 + "/metrics.jsonl") == slurp(d2 + "/metrics.jsonl");
  bool same_ckpt = slurp(d1 + "/best.ckpt") == slurp(d2 + "/best.ckpt");
  bool same_manifest = slurp(d1 + "/manifest.json") == slurp(d2 + "/manifest.json");
  fs::remove_all(d1);
  fs::remove_all(d2);

  // the transform writes identical artifacts too
  const std::string t1 = (fs::temp_directory_path() / "nsgmoe_acc_t1").string();
  const std::string t2 = (fs::temp_directory_path() / "nsgmoe_acc_t2").string();
  fs::remove_all(t1);
  fs::remove_all(t2);
  save_nsg(build_nsg(g, EdgeVariant::Hybrid), t1);
  save_nsg(build_nsg(g, EdgeVariant::Hybrid), t2);
  bool same_nsg = slurp(t1 + "/nsg_edges.csv") == slurp(t2 + "/nsg_edges.csv");
  fs::remove_all(t1);
  fs::remove_all(t2);

  if (!same_metrics) return {false, "metrics.jsonl differs between runs"};
  if (!same_ckpt) return {false, "checkpoints differ between runs"};
  if (!same_manifest) return {false, "manifests differ between runs"};
  if (!same_nsg) return {false, "transform artifacts differ between runs"};
  return {true, "byte-identical metrics, checkpoints, and transforms"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;  // 0 = untimed
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"edge-count law", 5.0, edge_count_law},
      {"degeneracy into disjoint modality copies", 0, degeneracy_isomorphism},
      {"maximum spanning tree correctness", 30.0, mst_correctness},
      {"coalesced linear equivalence", 0, coalesced_equivalence},
      {"block-spectral verification", 0, spectral_verification},
      {"whole-model gradient integrity", 60.0, gradient_integrity},
      {"noisy top-k gating contracts", 0, gating_contracts},
      {"load-balancing trend", 0, balancing_trend},
      {"modality-confusion trend", 300.0, modality_confusion_trend},
      {"end-to-end determinism", 0, determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    bool in_budget = criteria[i].budget_s == 0 || secs <= criteria[i].budget_s;
    const bool pass = out.pass && in_budget;
    std::printf("[%s] %zu) %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, out.detail.c_str(), secs,
                in_budget ? "" : ", over budget");
    if (!pass) ++failures;
  }
  if (failures == 0)
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures;
}
