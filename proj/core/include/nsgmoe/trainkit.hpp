#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nsgmoe/moe.hpp"
#include "nsgmoe/optim.hpp"
#include "nsgmoe/sparsifier.hpp"

namespace nsgmoe {

enum class Task { NodeClassification, LinkPrediction };

std::string task_name(Task t);
Task parse_task(const std::string& s);

struct TaskConfig {
  Task task = Task::NodeClassification;
  double lr = 1e-4;
  double weight_decay = 0.0;
  int epochs = 200;
  int patience = 30;  // early stop after this many epochs without val gain
  double lambda = 1e4;
  std::uint64_t seed = 0;
};

struct ModelConfig {
  int d = 64;
  int layers = 2;
  int n_self = 2;
  int n_cross = 2;
  int top_k = 2;
  // Cross-type edges switch to tree-derived sparse form when m exceeds this.
  int sparsify_threshold = 3;
  MstConfig mst;
};

// Full model: per-modality projections, expert mixture over the self- and
// cross-type split graphs, and the merge head (whose output width is the
// class count for node tasks and d for link tasks).
struct Model {
  Task task = Task::NodeClassification;
  ModelConfig cfg;
  std::vector<int> modality_dims;
  int num_classes = 0;  // 0 for link prediction
  ModalityProjection projection;
  MoeParams moe;
  MergeParams merge;

  int d_out() const {
    return task == Task::NodeClassification ? num_classes : cfg.d;
  }
};

Model make_model(const MultimodalGraph& g, Task task, const ModelConfig& cfg,
                 Rng& rng);

// Every trainable matrix in a fixed declaration order shared by the
// optimizer, gradients, and checkpoints: projections, experts, gate, merge.
std::vector<Mat*> collect_params(Model& m);

// Precomputed per-run forward context. The training loop mutates the noise
// draw and (for link tasks) the sampled negatives between steps.
struct ForwardPlan {
  const MultimodalGraph* g = nullptr;
  std::vector<std::pair<int, int>> graph_edges;  // edges the NSGs were built on
  NsgGraph self_nsg, cross_nsg;
  std::vector<Csr> self_rels, cross_rels;
  std::vector<SpanningTree> trees;  // nonempty when the cross NSG is sparse
  Mat x_block;                      // block-diagonal raw features
  double lambda = 0.0;
  bool noisy = false;
  Mat eps;  // (n*m) x E standard-normal draw, used when noisy

  // node classification
  std::vector<int> train_nodes, val_nodes, test_nodes;

  // link prediction
  std::vector<std::pair<int, int>> train_pos, train_neg, val_pos, test_pos;
  std::vector<std::vector<int>> val_negatives, test_negatives;
};

ForwardPlan make_plan(const MultimodalGraph& g, const Model& model,
                      const TaskConfig& cfg);

struct StepOutput {
  double total = 0, task = 0, importance = 0, load = 0;
  Mat output;    // n x d_out
  Mat gates;     // (n*m) x E
  Mat mask;      // (n*m) x E top-k selection
  Mat load_row;  // 1 x E expected load; empty when the noise path was off
  std::vector<char> expert_used;
  std::vector<Mat> grads;  // aligned with collect_params when requested
};

StepOutput model_step(Model& model, const ForwardPlan& plan, bool want_grads);

// --- task losses and metrics (reference implementations on plain Mats) ---

double cross_entropy_nc(const Mat& z, const std::vector<int>& labels,
                        const std::vector<int>& mask);
std::vector<double> link_scores(const Mat& z,
                                const std::vector<std::pair<int, int>>& pairs);
double bce_link_loss(const std::vector<double>& pos_scores,
                     const std::vector<double>& neg_scores);

struct Metrics {
  double accuracy = 0;
  double hits1 = 0, hits3 = 0, hits10 = 0, mrr = 0;
};

Metrics evaluate_nc(const Mat& logits, const std::vector<int>& labels,
                    const std::vector<int>& split);

// Ranks each positive against its own negative candidate list; ties rank
// the positive after every equal-scoring negative.
Metrics evaluate_lp(const Mat& z,
                    const std::vector<std::pair<int, int>>& positives,
                    const std::vector<std::vector<int>>& negatives);

// Draws num_negatives distinct non-neighbors of u per positive (u,v).
std::vector<std::vector<int>> sample_eval_negatives(
    const std::vector<std::pair<int, int>>& positives,
    const std::vector<std::vector<int>>& neighbors, int num_nodes, Rng& rng,
    int num_negatives = 100);

struct EpochRecord {
  int epoch = 0;
  double total_loss = 0, task_loss = 0, importance_loss = 0, load_loss = 0;
  double val_metric = 0;
  GateDiagnostics gate;
};

struct TrainResult {
  Model model;  // best-validation parameters
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val = 0;
  Metrics val_metrics, test_metrics;
};

// Full-graph training; writes run artifacts (metrics.jsonl, best.ckpt,
// manifest.json) into run_dir when nonempty. Deterministic given
// (dataset, cfg, arch).
TrainResult train(const MultimodalGraph& g, const TaskConfig& cfg,
                  const ModelConfig& arch, const std::string& run_dir = "");

// Comparator: the same trainer on the original (unsplit) graph with all
// modalities concatenated into one, a single self-branch expert, top_k=1.
TrainResult baseline_concat_gcn(const MultimodalGraph& g,
                                const TaskConfig& cfg,
                                const ModelConfig& arch,
                                const std::string& run_dir = "");

MultimodalGraph concat_view(const MultimodalGraph& g);

// Deterministic 60/20/20 split over edge indices.
Splits derive_edge_splits(std::size_t num_edges, Rng& rng);

// --- checkpoints ---

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);
std::uint64_t arch_hash(const Model& m);

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t h = 14695981039346656037ULL);
std::uint64_t graph_hash(const MultimodalGraph& g);

}  // namespace nsgmoe
