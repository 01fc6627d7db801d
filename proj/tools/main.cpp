#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nsgmoe/graphdata.hpp"
#include "nsgmoe/nsg.hpp"
#include "nsgmoe/sparsifier.hpp"
#include "nsgmoe/spectral.hpp"
#include "nsgmoe/trainkit.hpp"

using nsgmoe::Mat;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError(std::string(what) + ": bad integer '" +
                                 item + "'");
    }
  }
  if (out.empty())
    throw CLI::ValidationError(std::string(what) + ": empty list");
  return out;
}

ordered_json mst_json(const nsgmoe::MstConfig& c) {
  ordered_json j;
  j["mode"] = c.mode == nsgmoe::MstConfig::Mode::Exact ? "exact" : "approx";
  j["c0"] = c.c0;
  j["c1"] = c.c1;
  j["seed"] = c.seed;
  return j;
}

ordered_json metrics_json(nsgmoe::Task task, const nsgmoe::Metrics& m) {
  ordered_json j;
  if (task == nsgmoe::Task::NodeClassification) {
    j["accuracy"] = m.accuracy;
  } else {
    j["hits@1"] = m.hits1;
    j["hits@3"] = m.hits3;
    j["hits@10"] = m.hits10;
    j["mrr"] = m.mrr;
  }
  return j;
}

// Flat (n*m) x d matrix of raw per-modality rows; requires equal widths.
Mat flat_raw_features(const nsgmoe::MultimodalGraph& g) {
  const int m = g.num_modalities();
  const int d = g.features[0].cols();
  for (const Mat& f : g.features)
    if (f.cols() != d)
      throw std::invalid_argument(
          "sparsification on raw features needs equal modality widths");
  Mat flat(g.num_nodes * m, d);
  for (int t = 0; t < m; ++t)
    for (int u = 0; u < g.num_nodes; ++u)
      for (int j = 0; j < d; ++j)
        flat(u * m + t, j) = g.features[static_cast<std::size_t>(t)](u, j);
  return flat;
}

struct GenSynthArgs {
  int nodes = 300, modalities = 2, classes = 3, dim = 16;
  std::string dims_list, mode = "aligned", out;
  double intra_p = 0.1, inter_p = 0.02, noise_std = 1.0;
  std::uint64_t seed = 0;
};

int cmd_gen_synth(const GenSynthArgs& a) {
  nsgmoe::SyntheticSpec spec;
  spec.n = a.nodes;
  spec.m = a.modalities;
  spec.num_classes = a.classes;
  spec.dims = a.dims_list.empty()
                  ? std::vector<int>(static_cast<std::size_t>(a.modalities),
                                     a.dim)
                  : parse_int_list(a.dims_list, "--dims");
  spec.intra_class_edge_prob = a.intra_p;
  spec.inter_class_edge_prob = a.inter_p;
  spec.mode = a.mode == "anti" ? nsgmoe::SyntheticSpec::Mode::AntiCorrelated
                               : nsgmoe::SyntheticSpec::Mode::Aligned;
  spec.noise_std = a.noise_std;
  spec.seed = a.seed;

  nsgmoe::MultimodalGraph g = nsgmoe::generate_synthetic(spec);
  nsgmoe::save_dataset(g, a.out);

  ordered_json j;
  j["command"] = "gen-synth";
  ordered_json cfg;
  cfg["nodes"] = spec.n;
  cfg["modalities"] = spec.m;
  cfg["classes"] = spec.num_classes;
  cfg["dims"] = spec.dims;
  cfg["mode"] = a.mode;
  cfg["intra_class_edge_prob"] = spec.intra_class_edge_prob;
  cfg["inter_class_edge_prob"] = spec.inter_class_edge_prob;
  cfg["noise_std"] = spec.noise_std;
  cfg["seed"] = spec.seed;
  j["config"] = cfg;
  j["out"] = a.out;
  j["num_edges"] = g.num_edges();
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct TransformArgs {
  std::string in, out, variant = "hybrid", sparsify;
  int c0 = 4, c1 = 8;
  std::uint64_t seed = 0;
};

int cmd_transform(const TransformArgs& a) {
  nsgmoe::MultimodalGraph g = nsgmoe::load_dataset(a.in);
  nsgmoe::EdgeVariant variant = nsgmoe::parse_variant(a.variant);

  std::vector<nsgmoe::SpanningTree> trees;
  const bool sparsify = !a.sparsify.empty();
  nsgmoe::MstConfig mst;
  if (sparsify) {
    if (g.num_modalities() < 2)
      throw std::invalid_argument(
          "sparsification needs at least 2 modalities");
    if (a.sparsify != "exact" && a.sparsify != "approx")
      throw CLI::ValidationError("--sparsify must be exact or approx");
    mst.mode = a.sparsify == "exact" ? nsgmoe::MstConfig::Mode::Exact
                                     : nsgmoe::MstConfig::Mode::Approximate;
    mst.c0 = a.c0;
    mst.c1 = a.c1;
    mst.seed = a.seed;
    trees = nsgmoe::build_trees(flat_raw_features(g), g.num_nodes,
                                g.num_modalities(), mst);
  }
  nsgmoe::NsgGraph nsg =
      nsgmoe::build_nsg(g, variant, sparsify ? &trees : nullptr);
  nsgmoe::save_nsg(nsg, a.out);

  if (sparsify) {
    ordered_json tj;
    ordered_json cfg = mst_json(mst);
    cfg["similarity_source"] = "raw-features";
    tj["cfg"] = cfg;
    ordered_json list = ordered_json::array();
    for (const nsgmoe::SpanningTree& t : trees) {
      ordered_json e;
      e["node"] = t.node;
      e["edges"] = t.edges;
      e["total_weight"] = t.total_weight;
      list.push_back(e);
    }
    tj["trees"] = list;
    std::ofstream out(a.out + "/trees.json");
    if (!out.good())
      throw std::runtime_error("cannot write " + a.out + "/trees.json");
    out << tj.dump(2) << "\n";
  }

  ordered_json j;
  j["command"] = "transform";
  ordered_json cfg;
  cfg["in"] = a.in;
  cfg["variant"] = a.variant;
  cfg["sparsify"] = sparsify ? a.sparsify : "off";
  if (sparsify) {
    cfg["c0"] = a.c0;
    cfg["c1"] = a.c1;
    cfg["seed"] = a.seed;
  }
  j["config"] = cfg;
  j["out"] = a.out;
  j["num_sub_nodes"] = nsg.num_sub_nodes();
  j["num_edges"] = static_cast<long>(nsg.edges.size());
  j["sparsified"] = nsg.sparsified;
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct SpectrumArgs {
  std::string in, out, b = "identity", norm = "sym";
  double alpha = 1.0, beta = 1.0;
};

int cmd_spectrum(const SpectrumArgs& a) {
  nsgmoe::MultimodalGraph g = nsgmoe::load_dataset(a.in);
  if (g.num_modalities() != 2)
    throw std::invalid_argument(
        "spectrum analysis needs the symmetric two-modality structure "
        "(dataset has " +
        std::to_string(g.num_modalities()) + " modalities)");
  const int n = g.num_nodes;
  Mat adj(n, n);
  for (const auto& [u, v] : g.edges) {
    adj(u, v) = 1.0;
    adj(v, u) = 1.0;
  }
  Mat b = Mat::identity(n);
  if (a.b == "identity-plus-a")
    b = nsgmoe::add(b, adj);
  else if (a.b != "identity")
    throw CLI::ValidationError("--b must be identity or identity-plus-a");

  nsgmoe::SpectralConfig cfg;
  cfg.alpha = a.alpha;
  cfg.beta = a.beta;
  if (a.norm == "none")
    cfg.normalization = nsgmoe::SpectralConfig::Normalization::None;
  else if (a.norm != "sym")
    throw CLI::ValidationError("--norm must be sym or none");

  nsgmoe::SpectralReport rep = nsgmoe::analyze_spectrum(adj, b, cfg);

  std::filesystem::create_directories(a.out);
  ordered_json j;
  j["command"] = "spectrum";
  ordered_json c;
  c["in"] = a.in;
  c["b"] = a.b;
  c["alpha"] = a.alpha;
  c["beta"] = a.beta;
  c["normalization"] = a.norm == "sym" ? "symmetric-degree" : "none";
  j["config"] = c;
  j["n"] = n;
  j["lambda1"] = rep.lambda1;
  j["lambda2"] = rep.lambda2;
  j["spectrum_match_error"] = rep.spectrum_match_error;
  j["block_form_residual"] = rep.block_form_residual;
  j["assembled_residual"] = rep.assembled_residual;
  j["filter_residual"] = rep.filter_residual;
  j["response_gap_error"] = rep.response_gap_error;
  {
    std::ofstream out(a.out + "/report.json");
    if (!out.good())
      throw std::runtime_error("cannot write " + a.out + "/report.json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(a.out + "/response.csv");
    if (!out.good())
      throw std::runtime_error("cannot write " + a.out + "/response.csv");
    out << "subspace,lambda,response\n";
    for (double l : rep.lambda1)
      out << "F1," << l << ","
          << nsgmoe::frequency_response(l, nsgmoe::Subspace::F1, cfg) << "\n";
    for (double l : rep.lambda2)
      out << "F2," << l << ","
          << nsgmoe::frequency_response(l, nsgmoe::Subspace::F2, cfg) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct TrainArgs {
  std::string in, out = "run", task = "nc", experts = "2,2",
              mst_mode = "exact";
  int topk = 2, d = 64, layers = 2, epochs = 200, patience = 30;
  int c0 = 4, c1 = 8, sparsify_threshold = 3;
  double lambda = 1e4, lr = 1e-4, weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool baseline = false;
};

int cmd_train(const TrainArgs& a) {
  nsgmoe::MultimodalGraph g = nsgmoe::load_dataset(a.in);
  nsgmoe::TaskConfig cfg;
  cfg.task = nsgmoe::parse_task(a.task);
  cfg.lr = a.lr;
  cfg.weight_decay = a.weight_decay;
  cfg.epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.lambda = a.lambda;
  cfg.seed = a.seed;

  std::vector<int> experts = parse_int_list(a.experts, "--experts");
  if (experts.size() != 2)
    throw CLI::ValidationError("--experts expects 'n_self,n_cross'");
  nsgmoe::ModelConfig arch;
  arch.d = a.d;
  arch.layers = a.layers;
  arch.n_self = experts[0];
  arch.n_cross = experts[1];
  arch.top_k = a.topk;
  arch.sparsify_threshold = a.sparsify_threshold;
  arch.mst.mode = a.mst_mode == "approx" ? nsgmoe::MstConfig::Mode::Approximate
                                         : nsgmoe::MstConfig::Mode::Exact;
  arch.mst.c0 = a.c0;
  arch.mst.c1 = a.c1;
  arch.mst.seed = a.seed;

  nsgmoe::TrainResult res = a.baseline
                                ? nsgmoe::baseline_concat_gcn(g, cfg, arch, a.out)
                                : nsgmoe::train(g, cfg, arch, a.out);

  ordered_json j;
  j["command"] = "train";
  ordered_json c;
  c["in"] = a.in;
  c["task"] = a.task;
  c["baseline"] = a.baseline;
  c["experts"] = {arch.n_self, arch.n_cross};
  c["topk"] = arch.top_k;
  c["d"] = arch.d;
  c["layers"] = arch.layers;
  c["lambda"] = cfg.lambda;
  c["lr"] = cfg.lr;
  c["weight_decay"] = cfg.weight_decay;
  c["epochs"] = cfg.epochs;
  c["patience"] = cfg.patience;
  c["seed"] = cfg.seed;
  c["sparsify_threshold"] = arch.sparsify_threshold;
  c["mst"] = mst_json(arch.mst);
  j["config"] = c;
  j["run_dir"] = a.out;
  j["epochs_run"] = static_cast<int>(res.history.size());
  j["best_epoch"] = res.best_epoch;
  j["best_val"] = res.best_val;
  j["val_metrics"] = metrics_json(cfg.task, res.val_metrics);
  j["test_metrics"] = metrics_json(cfg.task, res.test_metrics);
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct EvalArgs {
  std::string model, in;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  nsgmoe::MultimodalGraph g = nsgmoe::load_dataset(a.in);
  nsgmoe::Model model = nsgmoe::load_checkpoint(a.model);
  nsgmoe::TaskConfig cfg;
  cfg.task = model.task;
  cfg.seed = a.seed;
  nsgmoe::ForwardPlan plan = nsgmoe::make_plan(g, model, cfg);
  plan.noisy = false;
  nsgmoe::StepOutput out = nsgmoe::model_step(model, plan, false);
  nsgmoe::Metrics metrics =
      model.task == nsgmoe::Task::NodeClassification
          ? nsgmoe::evaluate_nc(out.output, g.labels, plan.test_nodes)
          : nsgmoe::evaluate_lp(out.output, plan.test_pos,
                                plan.test_negatives);

  ordered_json j;
  j["command"] = "eval";
  ordered_json c;
  c["model"] = a.model;
  c["in"] = a.in;
  c["seed"] = a.seed;
  j["config"] = c;
  j["task"] = nsgmoe::task_name(model.task);
  j["test_metrics"] = metrics_json(model.task, metrics);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Node-splitting multimodal graph toolkit"};
  app.require_subcommand(1);

  GenSynthArgs ga;
  CLI::App* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  gen->add_option("--nodes", ga.nodes)->check(CLI::PositiveNumber);
  gen->add_option("--modalities", ga.modalities)->check(CLI::PositiveNumber);
  gen->add_option("--classes", ga.classes)->check(CLI::PositiveNumber);
  gen->add_option("--dim", ga.dim, "Feature width per modality")
      ->check(CLI::PositiveNumber);
  gen->add_option("--dims", ga.dims_list,
                  "Comma-separated per-modality widths (overrides --dim)");
  gen->add_option("--mode", ga.mode)
      ->check(CLI::IsMember({"aligned", "anti"}));
  gen->add_option("--intra-p", ga.intra_p)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--inter-p", ga.inter_p)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--noise-std", ga.noise_std)->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", ga.seed);
  gen->add_option("--out", ga.out)->required();

  TransformArgs ta;
  CLI::App* tr = app.add_subcommand("transform", "Build the split-node graph");
  tr->add_option("--in", ta.in)->required();
  tr->add_option("--variant", ta.variant)
      ->check(CLI::IsMember({"self", "cross", "hybrid"}));
  tr->add_option("--sparsify", ta.sparsify,
                 "Tree-sparsified cross edges: exact or approx")
      ->check(CLI::IsMember({"exact", "approx"}));
  tr->add_option("--c0", ta.c0)->check(CLI::PositiveNumber);
  tr->add_option("--c1", ta.c1)->check(CLI::PositiveNumber);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--out", ta.out)->required();

  SpectrumArgs sa;
  CLI::App* sp = app.add_subcommand("spectrum", "Block-spectral analysis");
  sp->add_option("--in", sa.in)->required();
  sp->add_option("--b", sa.b)->check(CLI::IsMember({"identity", "identity-plus-a"}));
  sp->add_option("--alpha", sa.alpha);
  sp->add_option("--beta", sa.beta);
  sp->add_option("--norm", sa.norm)->check(CLI::IsMember({"sym", "none"}));
  sp->add_option("--out", sa.out)->required();

  TrainArgs tra;
  CLI::App* trn = app.add_subcommand("train", "Train the expert mixture");
  trn->add_option("--in", tra.in)->required();
  trn->add_option("--task", tra.task)->check(CLI::IsMember({"nc", "lp"}));
  trn->add_option("--experts", tra.experts, "n_self,n_cross");
  trn->add_option("--topk", tra.topk)->check(CLI::PositiveNumber);
  trn->add_option("--d", tra.d)->check(CLI::PositiveNumber);
  trn->add_option("--layers", tra.layers)->check(CLI::PositiveNumber);
  trn->add_option("--lambda", tra.lambda)->check(CLI::NonNegativeNumber);
  trn->add_option("--lr", tra.lr)->check(CLI::NonNegativeNumber);
  trn->add_option("--wd", tra.weight_decay)->check(CLI::NonNegativeNumber);
  trn->add_option("--epochs", tra.epochs)->check(CLI::PositiveNumber);
  trn->add_option("--patience", tra.patience)->check(CLI::PositiveNumber);
  trn->add_option("--seed", tra.seed);
  trn->add_option("--sparsify-threshold", tra.sparsify_threshold);
  trn->add_option("--mst", tra.mst_mode)->check(CLI::IsMember({"exact", "approx"}));
  trn->add_option("--c0", tra.c0)->check(CLI::PositiveNumber);
  trn->add_option("--c1", tra.c1)->check(CLI::PositiveNumber);
  trn->add_flag("--baseline", tra.baseline,
                "Train the concatenated-features comparator instead");
  trn->add_option("--out", tra.out);

  EvalArgs ea;
  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--model", ea.model)->required();
  ev->add_option("--in", ea.in)->required();
  ev->add_option("--seed", ea.seed,
                 "Split-derivation seed (match the training run)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_synth(ga);
    if (tr->parsed()) return cmd_transform(ta);
    if (sp->parsed()) return cmd_spectrum(sa);
    if (trn->parsed()) return cmd_train(tra);
    if (ev->parsed()) return cmd_eval(ea);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
