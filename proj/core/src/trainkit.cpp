#include "nsgmoe/trainkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace nsgmoe {
namespace {

constexpr char kCkptMagic[4] = {'N', 'S', 'G', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_io(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    int c = is.get();
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void write_f64(std::ostream& os, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  write_u64(os, u);
}

double read_f64(std::istream& is) {
  std::uint64_t u = read_u64(is);
  double d;
  std::memcpy(&d, &u, sizeof d);
  return d;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << v;
  return ss.str();
}

// RNG substreams of the run seed. Fixed assignments keep every consumer
// independent of the others' draw counts.
enum Stream : std::uint64_t {
  kInit = 1,
  kSplits = 2,
  kNoise = 3,
  kTrainNeg = 4,
  kEvalNeg = 5,
};

Splits derive_node_splits(int n, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  rng.shuffle(perm);
  Splits s;
  s.kind = Splits::Kind::Node;
  const int n_train = n * 6 / 10, n_val = n * 2 / 10;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  return s;
}

ordered_json metrics_json(Task task, const Metrics& m) {
  ordered_json j;
  if (task == Task::NodeClassification) {
    j["accuracy"] = m.accuracy;
  } else {
    j["hits@1"] = m.hits1;
    j["hits@3"] = m.hits3;
    j["hits@10"] = m.hits10;
    j["mrr"] = m.mrr;
  }
  return j;
}

ordered_json epoch_json(const EpochRecord& r) {
  ordered_json j;
  j["epoch"] = r.epoch;
  j["total_loss"] = r.total_loss;
  j["task_loss"] = r.task_loss;
  j["importance_loss"] = r.importance_loss;
  j["load_loss"] = r.load_loss;
  j["val_metric"] = r.val_metric;
  ordered_json gate;
  gate["importance"] = r.gate.importance;
  gate["load"] = r.gate.load;
  gate["selection_rate"] = r.gate.selection_rate;
  gate["modality_mean_gate"] = r.gate.modality_mean_gate;
  j["gate"] = gate;
  return j;
}

std::string mst_mode_name(MstConfig::Mode m) {
  return m == MstConfig::Mode::Exact ? "exact" : "approx";
}

std::vector<std::pair<int, int>> sample_train_negatives(
    std::size_t count, const std::vector<std::vector<int>>& train_adj,
    int num_nodes, Rng& rng) {
  std::size_t edge_count = 0;
  for (const std::vector<int>& a : train_adj) edge_count += a.size();
  edge_count /= 2;
  require(static_cast<std::size_t>(num_nodes) *
                  static_cast<std::size_t>(num_nodes - 1) / 2 >
              edge_count,
          "sample_train_negatives: graph has no non-edges");
  std::vector<std::pair<int, int>> out;
  out.reserve(count);
  while (out.size() < count) {
    int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_nodes)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_nodes)));
    if (a == b) continue;
    const std::vector<int>& na = train_adj[static_cast<std::size_t>(a)];
    if (std::binary_search(na.begin(), na.end(), b)) continue;
    out.emplace_back(std::min(a, b), std::max(a, b));
  }
  return out;
}

}  // namespace

std::string task_name(Task t) {
  return t == Task::NodeClassification ? "nc" : "lp";
}

Task parse_task(const std::string& s) {
  if (s == "nc") return Task::NodeClassification;
  if (s == "lp") return Task::LinkPrediction;
  throw std::invalid_argument("unknown task '" + s + "' (expected nc or lp)");
}

Model make_model(const MultimodalGraph& g, Task task, const ModelConfig& cfg,
                 Rng& rng) {
  require(g.num_modalities() >= 1, "make_model: graph has no modalities");
  require(cfg.d >= 1 && cfg.layers >= 1, "make_model: bad d or layer count");
  Model m;
  m.task = task;
  m.cfg = cfg;
  for (const Mat& f : g.features)
    m.modality_dims.push_back(static_cast<int>(f.cols()));
  if (task == Task::NodeClassification) {
    require(g.num_classes >= 2 &&
                g.labels.size() == static_cast<std::size_t>(g.num_nodes),
            "make_model: node classification needs labels and >= 2 classes");
    m.num_classes = g.num_classes;
  }
  m.projection = make_projection(m.modality_dims, cfg.d, rng);
  m.moe = make_moe(cfg.n_self, cfg.n_cross, cfg.d, cfg.layers, cfg.top_k, rng);
  m.merge = make_merge(g.num_modalities(), cfg.d, m.d_out(), rng);
  return m;
}

std::vector<Mat*> collect_params(Model& m) {
  std::vector<Mat*> out;
  for (Mat& w : m.projection.weights) out.push_back(&w);
  collect_params(m.moe, out);
  out.push_back(&m.merge.weight);
  out.push_back(&m.merge.bias);
  return out;
}

Splits derive_edge_splits(std::size_t num_edges, Rng& rng) {
  std::vector<int> perm(num_edges);
  for (std::size_t i = 0; i < num_edges; ++i) perm[i] = static_cast<int>(i);
  rng.shuffle(perm);
  Splits s;
  s.kind = Splits::Kind::Edge;
  const std::size_t n_train = num_edges * 6 / 10,
                    n_val = num_edges * 2 / 10;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  return s;
}

std::vector<std::vector<int>> sample_eval_negatives(
    const std::vector<std::pair<int, int>>& positives,
    const std::vector<std::vector<int>>& neighbors, int num_nodes, Rng& rng,
    int num_negatives) {
  std::vector<std::vector<int>> out;
  out.reserve(positives.size());
  for (const auto& [u, v] : positives) {
    (void)v;
    std::vector<int> candidates;
    const std::vector<int>& nu = neighbors[static_cast<std::size_t>(u)];
    for (int w = 0; w < num_nodes; ++w) {
      if (w == u) continue;
      if (std::binary_search(nu.begin(), nu.end(), w)) continue;
      candidates.push_back(w);
    }
    std::vector<int> picks = rng.sample_without_replacement(
        static_cast<int>(candidates.size()), num_negatives);
    std::vector<int> negs;
    negs.reserve(picks.size());
    for (int p : picks) negs.push_back(candidates[static_cast<std::size_t>(p)]);
    out.push_back(std::move(negs));
  }
  return out;
}

ForwardPlan make_plan(const MultimodalGraph& g, const Model& model,
                      const TaskConfig& cfg) {
  require(static_cast<int>(model.modality_dims.size()) == g.num_modalities(),
          "make_plan: model/dataset modality count mismatch");
  for (int t = 0; t < g.num_modalities(); ++t)
    require(model.modality_dims[static_cast<std::size_t>(t)] ==
                static_cast<int>(g.features[static_cast<std::size_t>(t)].cols()),
            "make_plan: model/dataset feature width mismatch for modality " +
                g.modalities[static_cast<std::size_t>(t)].name);

  const int m = g.num_modalities();
  ForwardPlan plan;
  plan.g = &g;
  plan.lambda = cfg.lambda;

  Rng root(cfg.seed);
  Rng rng_split = root.split(kSplits);

  if (model.task == Task::NodeClassification) {
    require(g.labels.size() == static_cast<std::size_t>(g.num_nodes) &&
                g.num_classes >= 2,
            "make_plan: node classification needs labels");
    Splits splits =
        (g.splits && g.splits->kind == Splits::Kind::Node)
            ? *g.splits
            : derive_node_splits(g.num_nodes, rng_split);
    require(!splits.train.empty() && !splits.val.empty() &&
                !splits.test.empty(),
            "make_plan: empty node split");
    plan.train_nodes = splits.train;
    plan.val_nodes = splits.val;
    plan.test_nodes = splits.test;
    plan.graph_edges = g.edges;
  } else {
    require(g.num_edges() >= 5,
            "make_plan: link prediction needs at least 5 edges");
    Splits splits =
        (g.splits && g.splits->kind == Splits::Kind::Edge)
            ? *g.splits
            : derive_edge_splits(g.edges.size(), rng_split);
    require(!splits.train.empty() && !splits.val.empty() &&
                !splits.test.empty(),
            "make_plan: empty edge split");
    for (int i : splits.train)
      plan.graph_edges.push_back(g.edges[static_cast<std::size_t>(i)]);
    plan.train_pos = plan.graph_edges;
    for (int i : splits.val)
      plan.val_pos.push_back(g.edges[static_cast<std::size_t>(i)]);
    for (int i : splits.test)
      plan.test_pos.push_back(g.edges[static_cast<std::size_t>(i)]);
    std::vector<std::vector<int>> full_adj =
        adjacency_lists(g.num_nodes, g.edges);
    Rng rng_eval = root.split(kEvalNeg);
    plan.val_negatives =
        sample_eval_negatives(plan.val_pos, full_adj, g.num_nodes, rng_eval);
    plan.test_negatives =
        sample_eval_negatives(plan.test_pos, full_adj, g.num_nodes, rng_eval);
    // A fresh plan must be steppable without a training loop (eval-only
    // paths); the trainer redraws these each epoch.
    Rng rng_neg = root.split(kTrainNeg);
    plan.train_neg = sample_train_negatives(
        plan.train_pos.size(), adjacency_lists(g.num_nodes, plan.graph_edges),
        g.num_nodes, rng_neg);
  }

  MultimodalGraph view = g;
  view.edges = plan.graph_edges;
  if (m > model.cfg.sparsify_threshold) {
    Mat projected = modality_project(g, model.projection);
    plan.trees = build_trees(projected, g.num_nodes, m, model.cfg.mst);
    plan.cross_nsg = build_nsg(view, EdgeVariant::CrossType, &plan.trees);
  } else {
    plan.cross_nsg = build_nsg(view, EdgeVariant::CrossType);
  }
  plan.self_nsg = build_nsg(view, EdgeVariant::SelfType);
  plan.self_rels = relation_adjacencies(plan.self_nsg);
  plan.cross_rels = relation_adjacencies(plan.cross_nsg);
  plan.x_block = block_feature_matrix(g);
  return plan;
}

StepOutput model_step(Model& model, const ForwardPlan& plan, bool want_grads) {
  const MultimodalGraph& g = *plan.g;
  const int n = g.num_nodes, m = g.num_modalities();

  Tape tape;
  std::vector<Var> order;
  std::vector<Var> proj_vars;
  for (Mat& w : model.projection.weights) {
    Var v = tape.input(w);
    proj_vars.push_back(v);
    order.push_back(v);
  }
  MoeVars moe_vars = bind_moe(tape, model.moe, &order);
  Var w_merge = tape.input(model.merge.weight);
  Var b_merge = tape.input(model.merge.bias);
  order.push_back(w_merge);
  order.push_back(b_merge);

  Var x_block = tape.constant(plan.x_block);
  Var e_flat = tape.matmul(x_block, stack_projection(tape, proj_vars));

  LayerConfig lcfg;
  MoeForward fwd =
      moe_forward(tape, e_flat, moe_vars, model.moe, plan.self_rels,
                  plan.cross_rels, lcfg, plan.noisy,
                  plan.noisy ? &plan.eps : nullptr);

  // Merge: per-node concat of the m sub-node rows, then the linear head.
  std::vector<int> rows(static_cast<std::size_t>(n));
  Var view{};
  for (int t = 0; t < m; ++t) {
    for (int u = 0; u < n; ++u) rows[static_cast<std::size_t>(u)] = u * m + t;
    Var part = tape.row_gather(fwd.mixture, rows);
    view = t == 0 ? part : tape.concat_cols(view, part);
  }
  Var out = tape.add(tape.matmul(view, w_merge), b_merge);

  Var task_loss{};
  if (model.task == Task::NodeClassification) {
    require(!plan.train_nodes.empty(), "model_step: empty training node set");
    task_loss = tape.cross_entropy_rows(out, g.labels, plan.train_nodes);
  } else {
    require(!plan.train_pos.empty() && !plan.train_neg.empty(),
            "model_step: link task needs positive and negative pairs");
    Var ones_col = tape.constant(Mat(static_cast<std::size_t>(model.d_out()),
                                     1, 1.0));
    auto pair_scores = [&](const std::vector<std::pair<int, int>>& pairs) {
      std::vector<int> us, vs;
      us.reserve(pairs.size());
      vs.reserve(pairs.size());
      for (const auto& [a, b] : pairs) {
        us.push_back(a);
        vs.push_back(b);
      }
      Var zu = tape.row_gather(out, us);
      Var zv = tape.row_gather(out, vs);
      return tape.matmul(tape.mul(zu, zv), ones_col);
    };
    Var s_pos = pair_scores(plan.train_pos);
    Var s_neg = pair_scores(plan.train_neg);
    // -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s)
    Var total = tape.add(tape.reduce_sum(tape.softplus(tape.scale(s_pos, -1.0))),
                         tape.reduce_sum(tape.softplus(s_neg)));
    task_loss = tape.scale(
        total, 1.0 / static_cast<double>(plan.train_pos.size() +
                                         plan.train_neg.size()));
  }

  Var imp_loss = importance_loss(tape, fwd);
  Var loss = task_loss;
  Var ld_loss{};
  if (plan.noisy) ld_loss = load_loss(tape, fwd);
  if (plan.lambda != 0.0) {
    Var aux = plan.noisy ? tape.add(imp_loss, ld_loss) : imp_loss;
    loss = tape.add(loss, tape.scale(aux, plan.lambda));
  }

  StepOutput so;
  so.task = tape.value(task_loss)(0, 0);
  so.importance = tape.value(imp_loss)(0, 0);
  so.load = plan.noisy ? tape.value(ld_loss)(0, 0) : 0.0;
  so.total = tape.value(loss)(0, 0);
  so.output = tape.value(out);
  so.gates = tape.value(fwd.gate.gates);
  so.mask = fwd.gate.mask;
  if (plan.noisy) so.load_row = tape.value(fwd.load);
  so.expert_used = fwd.expert_used;
  if (want_grads) {
    tape.backward(loss);
    so.grads.reserve(order.size());
    for (Var v : order) so.grads.push_back(tape.grad(v));
  }
  return so;
}

double cross_entropy_nc(const Mat& z, const std::vector<int>& labels,
                        const std::vector<int>& mask) {
  require(!mask.empty(), "cross_entropy_nc: empty mask");
  require(static_cast<int>(labels.size()) == z.rows(),
          "cross_entropy_nc: label count mismatch");
  double total = 0.0;
  for (int r : mask) {
    require(0 <= r && r < static_cast<int>(z.rows()),
            "cross_entropy_nc: node out of range");
    const int y = labels[static_cast<std::size_t>(r)];
    require(0 <= y && y < static_cast<int>(z.cols()),
            "cross_entropy_nc: label out of range");
    double mx = z(r, 0);
    for (int j = 1; j < z.cols(); ++j) mx = std::max(mx, z(r, j));
    double lse = 0.0;
    for (int j = 0; j < z.cols(); ++j) lse += std::exp(z(r, j) - mx);
    total += mx + std::log(lse) - z(r, y);
  }
  return total / static_cast<double>(mask.size());
}

std::vector<double> link_scores(const Mat& z,
                                const std::vector<std::pair<int, int>>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [u, v] : pairs) out.push_back(sigmoid(dot_rows(z, u, z, v)));
  return out;
}

double bce_link_loss(const std::vector<double>& pos_scores,
                     const std::vector<double>& neg_scores) {
  require(!pos_scores.empty(), "bce_link_loss: need at least one positive");
  double total = 0.0;
  for (double s : pos_scores) total -= std::log(std::max(s, 1e-300));
  for (double s : neg_scores) total -= std::log(std::max(1.0 - s, 1e-300));
  return total / static_cast<double>(pos_scores.size() + neg_scores.size());
}

Metrics evaluate_nc(const Mat& logits, const std::vector<int>& labels,
                    const std::vector<int>& split) {
  require(!split.empty(), "evaluate_nc: empty split");
  int correct = 0;
  for (int r : split) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j)
      if (logits(r, j) > logits(r, best)) best = static_cast<int>(j);
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
  return m;
}

Metrics evaluate_lp(const Mat& z,
                    const std::vector<std::pair<int, int>>& positives,
                    const std::vector<std::vector<int>>& negatives) {
  require(!positives.empty(), "evaluate_lp: empty split");
  require(positives.size() == negatives.size(),
          "evaluate_lp: one negative list per positive required");
  Metrics m;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& [u, v] = positives[i];
    const double pos = sigmoid(dot_rows(z, u, z, v));
    int rank = 1;
    for (int w : negatives[i])
      if (sigmoid(dot_rows(z, u, z, w)) >= pos) ++rank;
    if (rank <= 1) m.hits1 += 1.0;
    if (rank <= 3) m.hits3 += 1.0;
    if (rank <= 10) m.hits10 += 1.0;
    m.mrr += 1.0 / static_cast<double>(rank);
  }
  const double n = static_cast<double>(positives.size());
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  m.mrr /= n;
  return m;
}

MultimodalGraph concat_view(const MultimodalGraph& g) {
  MultimodalGraph c;
  c.num_nodes = g.num_nodes;
  c.edges = g.edges;
  Mat all = concat_features(g);
  c.modalities = {{"concat", static_cast<int>(all.cols())}};
  c.features = {std::move(all)};
  c.labels = g.labels;
  c.num_classes = g.num_classes;
  c.splits = g.splits;
  c.seed = g.seed;
  return c;
}

namespace {

Metrics eval_split(Model& model, ForwardPlan& plan, bool test) {
  plan.noisy = false;
  StepOutput ev = model_step(model, plan, false);
  if (model.task == Task::NodeClassification)
    return evaluate_nc(ev.output, plan.g->labels,
                       test ? plan.test_nodes : plan.val_nodes);
  return evaluate_lp(ev.output, test ? plan.test_pos : plan.val_pos,
                     test ? plan.test_negatives : plan.val_negatives);
}

void write_run_artifacts(const std::string& run_dir,
                         const MultimodalGraph& g, const TaskConfig& cfg,
                         const ModelConfig& arch, const TrainResult& res) {
  fs::create_directories(run_dir);
  {
    std::ofstream out(run_dir + "/metrics.jsonl");
    require_io(out.good(), "cannot write " + run_dir + "/metrics.jsonl");
    for (const EpochRecord& r : res.history)
      out << epoch_json(r).dump() << "\n";
  }
  save_checkpoint(res.model, run_dir + "/best.ckpt");
  ordered_json j;
  j["task"] = task_name(cfg.task);
  j["seed"] = cfg.seed;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["epochs"] = cfg.epochs;
  j["patience"] = cfg.patience;
  j["lambda"] = cfg.lambda;
  ordered_json a;
  a["d"] = arch.d;
  a["layers"] = arch.layers;
  a["n_self"] = arch.n_self;
  a["n_cross"] = arch.n_cross;
  a["top_k"] = arch.top_k;
  a["sparsify_threshold"] = arch.sparsify_threshold;
  ordered_json mst;
  mst["mode"] = mst_mode_name(arch.mst.mode);
  mst["c0"] = arch.mst.c0;
  mst["c1"] = arch.mst.c1;
  mst["seed"] = arch.mst.seed;
  a["mst"] = mst;
  j["arch"] = a;
  j["dataset_hash"] = hex64(graph_hash(g));
  ordered_json neg;
  neg["eval_negatives_per_positive"] = 100;
  neg["protocol"] =
      "uniform non-neighbors per positive source node; ties ranked "
      "pessimistically (true edge after equal scores)";
  neg["train_negatives"] = "one uniform non-edge per training positive";
  j["negative_sampling"] = neg;
  j["epochs_run"] = static_cast<int>(res.history.size());
  j["best_epoch"] = res.best_epoch;
  j["best_val"] = res.best_val;
  j["val_metrics"] = metrics_json(cfg.task, res.val_metrics);
  j["test_metrics"] = metrics_json(cfg.task, res.test_metrics);
  std::ofstream out(run_dir + "/manifest.json");
  require_io(out.good(), "cannot write " + run_dir + "/manifest.json");
  out << j.dump(2) << "\n";
}

}  // namespace

TrainResult train(const MultimodalGraph& g, const TaskConfig& cfg,
                  const ModelConfig& arch, const std::string& run_dir) {
  require(cfg.lr >= 0.0, "train: lr must be nonnegative");
  require(cfg.epochs >= 1, "train: epochs must be >= 1");
  require(cfg.lambda >= 0.0, "train: lambda must be nonnegative");

  Rng root(cfg.seed);
  Rng rng_init = root.split(kInit);
  Model model = make_model(g, cfg.task, arch, rng_init);
  ForwardPlan plan = make_plan(g, model, cfg);

  std::vector<Mat*> params = collect_params(model);
  Adam opt(params, cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay);
  Rng rng_noise = root.split(kNoise);
  Rng rng_neg = root.split(kTrainNeg);

  std::vector<std::vector<int>> train_adj;
  if (cfg.task == Task::LinkPrediction)
    train_adj = adjacency_lists(g.num_nodes, plan.graph_edges);

  const std::size_t nm = static_cast<std::size_t>(g.num_nodes) *
                         static_cast<std::size_t>(g.num_modalities());
  const std::size_t num_e = static_cast<std::size_t>(model.moe.num_experts());

  TrainResult res;
  Model best = model;
  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = -1, since = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    plan.noisy = true;
    plan.eps = standard_normal(nm, num_e, rng_noise);
    if (cfg.task == Task::LinkPrediction)
      plan.train_neg = sample_train_negatives(plan.train_pos.size(), train_adj,
                                              g.num_nodes, rng_neg);
    StepOutput step = model_step(model, plan, true);
    opt.step(step.grads);

    Metrics val = eval_split(model, plan, false);
    const double val_metric =
        cfg.task == Task::NodeClassification ? val.accuracy : val.mrr;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.total_loss = step.total;
    rec.task_loss = step.task;
    rec.importance_loss = step.importance;
    rec.load_loss = step.load;
    rec.val_metric = val_metric;
    rec.gate = gate_diagnostics(step.gates, step.mask,
                                step.load_row.empty() ? nullptr : &step.load_row,
                                g.num_modalities());
    res.history.push_back(std::move(rec));

    if (val_metric > best_val) {
      best_val = val_metric;
      best_epoch = epoch;
      best = model;
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
  }

  res.model = std::move(best);
  res.best_epoch = best_epoch;
  res.best_val = best_val;
  res.val_metrics = eval_split(res.model, plan, false);
  res.test_metrics = eval_split(res.model, plan, true);
  if (!run_dir.empty()) write_run_artifacts(run_dir, g, cfg, arch, res);
  return res;
}

TrainResult baseline_concat_gcn(const MultimodalGraph& g,
                                const TaskConfig& cfg, const ModelConfig& arch,
                                const std::string& run_dir) {
  MultimodalGraph cg = concat_view(g);
  ModelConfig base = arch;
  base.n_self = 1;
  base.n_cross = 0;
  base.top_k = 1;
  return train(cg, cfg, base, run_dir);
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::uint64_t hash_value(std::uint64_t h, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  return fnv1a64(b, 8, h);
}

std::uint64_t hash_double(std::uint64_t h, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof u);
  return hash_value(h, u);
}

}  // namespace

std::uint64_t graph_hash(const MultimodalGraph& g) {
  std::uint64_t h = fnv1a64(nullptr, 0);
  h = hash_value(h, static_cast<std::uint64_t>(g.num_nodes));
  h = hash_value(h, static_cast<std::uint64_t>(g.num_classes));
  for (const auto& [u, v] : g.edges) {
    h = hash_value(h, static_cast<std::uint64_t>(u));
    h = hash_value(h, static_cast<std::uint64_t>(v));
  }
  for (int y : g.labels) h = hash_value(h, static_cast<std::uint64_t>(y));
  for (std::size_t t = 0; t < g.features.size(); ++t) {
    const std::string& name = g.modalities[t].name;
    h = fnv1a64(name.data(), name.size(), h);
    const Mat& f = g.features[t];
    h = hash_value(h, f.rows());
    h = hash_value(h, f.cols());
    for (std::size_t i = 0; i < f.size(); ++i) h = hash_double(h, f.raw()[i]);
  }
  if (g.splits) {
    h = hash_value(h, g.splits->kind == Splits::Kind::Node ? 1 : 2);
    for (const std::vector<int>* part :
         {&g.splits->train, &g.splits->val, &g.splits->test})
      for (int i : *part) h = hash_value(h, static_cast<std::uint64_t>(i));
  }
  return h;
}

std::uint64_t arch_hash(const Model& m) {
  std::ostringstream ss;
  ss << task_name(m.task) << "|d=" << m.cfg.d << "|layers=" << m.cfg.layers
     << "|self=" << m.cfg.n_self << "|cross=" << m.cfg.n_cross
     << "|topk=" << m.cfg.top_k << "|classes=" << m.num_classes << "|dims=";
  for (int dt : m.modality_dims) ss << dt << ",";
  const std::string s = ss.str();
  return fnv1a64(s.data(), s.size());
}

void save_checkpoint(const Model& m, const std::string& path) {
  std::vector<Mat*> params = collect_params(const_cast<Model&>(m));
  std::ofstream out(path, std::ios::binary);
  require_io(out.good(), "cannot write checkpoint " + path);
  out.write(kCkptMagic, 4);
  write_u32(out, kCkptVersion);
  write_u64(out, arch_hash(m));
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Mat* p : params) {
    write_u32(out, static_cast<std::uint32_t>(p->rows()));
    write_u32(out, static_cast<std::uint32_t>(p->cols()));
  }
  for (const Mat* p : params)
    for (std::size_t i = 0; i < p->size(); ++i) write_f64(out, p->raw()[i]);
  require_io(out.good(), "write failed for checkpoint " + path);

  ordered_json j;
  j["format"] = "NSGC";
  j["version"] = kCkptVersion;
  j["arch_hash"] = hex64(arch_hash(m));
  j["task"] = task_name(m.task);
  j["d"] = m.cfg.d;
  j["layers"] = m.cfg.layers;
  j["n_self"] = m.cfg.n_self;
  j["n_cross"] = m.cfg.n_cross;
  j["top_k"] = m.cfg.top_k;
  j["num_classes"] = m.num_classes;
  j["modality_dims"] = m.modality_dims;
  j["sparsify_threshold"] = m.cfg.sparsify_threshold;
  ordered_json mst;
  mst["mode"] = mst_mode_name(m.cfg.mst.mode);
  mst["c0"] = m.cfg.mst.c0;
  mst["c1"] = m.cfg.mst.c1;
  mst["seed"] = m.cfg.mst.seed;
  j["mst"] = mst;
  ordered_json shapes = ordered_json::array();
  for (const Mat* p : params) {
    ordered_json s;
    s["rows"] = p->rows();
    s["cols"] = p->cols();
    shapes.push_back(s);
  }
  j["params"] = shapes;
  std::ofstream desc(path + ".json");
  require_io(desc.good(), "cannot write checkpoint descriptor " + path +
                              ".json");
  desc << j.dump(2) << "\n";
}

Model load_checkpoint(const std::string& path) {
  std::ifstream desc_in(path + ".json");
  require_io(desc_in.good(), "checkpoint descriptor not found: " + path +
                                 ".json");
  ordered_json j;
  try {
    desc_in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("bad checkpoint descriptor " + path +
                             ".json: " + e.what());
  }

  Model m;
  m.task = parse_task(j.at("task").get<std::string>());
  m.cfg.d = j.at("d").get<int>();
  m.cfg.layers = j.at("layers").get<int>();
  m.cfg.n_self = j.at("n_self").get<int>();
  m.cfg.n_cross = j.at("n_cross").get<int>();
  m.cfg.top_k = j.at("top_k").get<int>();
  m.cfg.sparsify_threshold = j.at("sparsify_threshold").get<int>();
  const auto& mst = j.at("mst");
  m.cfg.mst.mode = mst.at("mode").get<std::string>() == "approx"
                       ? MstConfig::Mode::Approximate
                       : MstConfig::Mode::Exact;
  m.cfg.mst.c0 = mst.at("c0").get<int>();
  m.cfg.mst.c1 = mst.at("c1").get<int>();
  m.cfg.mst.seed = mst.at("seed").get<std::uint64_t>();
  m.num_classes = j.at("num_classes").get<int>();
  m.modality_dims = j.at("modality_dims").get<std::vector<int>>();

  Rng scratch(0);
  m.projection = make_projection(m.modality_dims, m.cfg.d, scratch);
  m.moe = make_moe(m.cfg.n_self, m.cfg.n_cross, m.cfg.d, m.cfg.layers,
                   m.cfg.top_k, scratch);
  m.merge = make_merge(static_cast<int>(m.modality_dims.size()), m.cfg.d,
                       m.d_out(), scratch);

  std::vector<Mat*> params = collect_params(m);
  std::ifstream in(path, std::ios::binary);
  require_io(in.good(), "cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  require_io(in.good() && std::memcmp(magic, kCkptMagic, 4) == 0,
             "not a checkpoint file: " + path);
  require_io(read_u32(in) == kCkptVersion,
             "unsupported checkpoint version in " + path);
  require_io(read_u64(in) == arch_hash(m),
             "checkpoint/architecture mismatch for " + path);
  require_io(read_u32(in) == params.size(),
             "checkpoint parameter count mismatch for " + path);
  for (const Mat* p : params) {
    const std::uint32_t r = read_u32(in), c = read_u32(in);
    require_io(static_cast<int>(r) == p->rows() && static_cast<int>(c) == p->cols(),
               "checkpoint parameter shape mismatch for " + path);
  }
  for (Mat* p : params)
    for (std::size_t i = 0; i < p->size(); ++i) p->raw()[i] = read_f64(in);
  require_io(in.good(), "truncated checkpoint " + path);
  return m;
}

}  // namespace nsgmoe
