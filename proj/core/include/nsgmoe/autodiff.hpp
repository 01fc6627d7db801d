#pragma once

#include <functional>
#include <vector>

#include "nsgmoe/mat.hpp"

namespace nsgmoe {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

// Row-compressed adjacency used by the fused aggregation op: output row i
// collects input rows indices[offsets[i] .. offsets[i+1]).
struct Csr {
  std::vector<int> offsets;
  std::vector<int> indices;

  int out_rows() const { return static_cast<int>(offsets.size()) - 1; }
};

enum class Agg { Sum, Mean };

// Reverse-mode autodiff over dense double matrices. One tape per forward
// pass; build the graph, call backward(loss) once, read grads, discard.
//
// add/mul broadcast shapes 1x1, 1xC and Rx1 against RxC operands; gradients
// are reduced back to the operand's shape.
class Tape {
 public:
  Var input(Mat value);     // differentiable leaf
  Var constant(Mat value);  // non-differentiable leaf

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var clamp_min(Var a, double lo);
  Var row_softmax(Var a);
  // Softmax per row restricted to entries where mask != 0; masked entries
  // produce exactly 0. An all-masked row yields a zero row.
  Var masked_row_softmax(Var a, Mat mask);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int begin, int end);  // columns [begin, end)
  Var row_gather(Var a, std::vector<int> rows);
  Var reduce_sum(Var a);  // 1x1 sum of all entries
  Var aggregate(Var h, const Csr& adj, Agg kind);

  // Squared coefficient of variation of all entries (population std over
  // mean, squared). Returns 0 with zero gradient when the input has a single
  // entry or zero mean.
  Var cv_squared(Var a);

  // Expected expert load for noisy top-k routing. For batch row b and
  // expert e, the probability that resampling only e's noise keeps/puts it
  // among the top k of the scores is
  //   Phi((clean[b,e] - kth_excluding_e(realized[b,:])) / scale[b,e]).
  // Returns the 1 x E column sums of those probabilities. Gradients flow
  // into clean, scale, and the realized entry serving as each threshold.
  // k >= number of experts makes every probability 1 with zero gradient.
  Var topk_load(Var clean, Var scale, Var realized, int k);

  // Mean negative log softmax likelihood over the given rows.
  Var cross_entropy_rows(Var logits, const std::vector<int>& labels,
                         const std::vector<int>& rows);

  const Mat& value(Var v) const;
  // Gradient of the last backward()'s loss w.r.t. v (zeros if v does not
  // influence the loss).
  const Mat& grad(Var v);
  void backward(Var loss);  // loss must be 1x1

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool active = false;  // grad-carrying ancestor of the current loss
    std::vector<int> parents;
    std::function<void(Tape&, int)> backprop;
  };

  Var make(Mat value, std::vector<int> parents,
           std::function<void(Tape&, int)> backprop);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const {
    return nodes_[static_cast<std::size_t>(id)];
  }
  int checked(Var v) const;
  bool wants(int id) const { return node(id).active; }
  void add_grad(int id, const Mat& g);

  std::vector<Node> nodes_;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }

}  // namespace nsgmoe
