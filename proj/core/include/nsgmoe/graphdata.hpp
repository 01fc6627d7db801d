#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsgmoe/mat.hpp"
#include "nsgmoe/rng.hpp"

namespace nsgmoe {

struct Modality {
  std::string name;
  int dim = 0;
};

struct Splits {
  enum class Kind { Node, Edge };
  Kind kind = Kind::Node;
  std::vector<int> train, val, test;
};

// Undirected multimodal graph: every node carries one feature vector per
// modality. Edges are stored once, canonicalized as (min,max).
struct MultimodalGraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<Modality> modalities;
  std::vector<Mat> features;  // features[t] is num_nodes x modalities[t].dim
  std::vector<int> labels;    // empty when the dataset is unlabeled
  int num_classes = 0;        // 0 when unlabeled
  std::optional<Splits> splits;
  std::optional<std::uint64_t> seed;  // generator seed, when known

  int num_modalities() const { return static_cast<int>(modalities.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int feature_width() const;  // sum of modality dims
};

struct SyntheticSpec {
  enum class Mode { Aligned, AntiCorrelated };
  int n = 300;
  int m = 2;
  int num_classes = 3;
  std::vector<int> dims;  // per-modality feature dims (size m)
  double intra_class_edge_prob = 0.1;
  double inter_class_edge_prob = 0.02;
  Mode mode = Mode::Aligned;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument describing the first violated invariant.
void validate(const MultimodalGraph& g);

MultimodalGraph load_dataset(const std::string& dir);
void save_dataset(const MultimodalGraph& g, const std::string& dir);

// Stochastic-block-model graph with class-conditional Gaussian features and
// a 60/20/20 node split. Labels are assigned round-robin (node i gets class
// i mod C). In anti-correlated mode all modalities share one pool of class
// means and modality t assigns class c the mean of class (c + t*s) mod C
// with s = max(1, C/2), so any processing that pools modality channels
// position-blind collapses classes s apart; aligned mode draws independent
// means per modality. Features are rounded through 32-bit floats so that
// save/load reproduces the graph bit-exactly. Deterministic given the seed.
MultimodalGraph generate_synthetic(const SyntheticSpec& spec);

// Horizontal concatenation of all modality matrices, n x sum(dims).
Mat concat_features(const MultimodalGraph& g);

// Symmetrized adjacency lists (each edge appears in both endpoint lists),
// neighbor lists sorted ascending.
std::vector<std::vector<int>> adjacency_lists(int num_nodes,
                                              const std::vector<std::pair<int, int>>& edges);

}  // namespace nsgmoe
