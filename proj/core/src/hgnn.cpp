#include "nsgmoe/hgnn.hpp"

#include <cmath>
#include <stdexcept>

namespace nsgmoe {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

std::vector<RelationType> relations_of(EdgeVariant variant) {
  switch (variant) {
    case EdgeVariant::SelfType:
      return {RelationType::IntraNode, RelationType::InterSelf};
    case EdgeVariant::CrossType:
      return {RelationType::IntraNode, RelationType::InterCross};
    case EdgeVariant::Hybrid:
      return {RelationType::IntraNode, RelationType::InterSelf,
              RelationType::InterCross};
  }
  throw std::invalid_argument("unknown edge variant");
}

Mat glorot(int rows, int cols, Rng& rng) {
  require(rows > 0 && cols > 0, "glorot: dims must be positive");
  const double bound = std::sqrt(6.0 / (rows + cols));
  Mat w(rows, cols);
  for (std::size_t i = 0; i < w.size(); ++i)
    w.raw()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  return w;
}

ModalityProjection make_projection(const std::vector<int>& dims, int d,
                                   Rng& rng) {
  require(!dims.empty(), "make_projection: need at least one modality");
  ModalityProjection p;
  for (int dt : dims) p.weights.push_back(glorot(dt, d, rng));
  return p;
}

HgnnLayerParams make_layer(int d, int num_relations, Rng& rng) {
  require(num_relations > 0, "make_layer: need at least one relation");
  HgnnLayerParams p;
  for (int r = 0; r < num_relations; ++r)
    p.relation_weights.push_back(glorot(d, d, rng));
  p.self_weight = glorot(d, d, rng);
  p.norm_scale = Mat(1, d, 1.0);
  p.norm_shift = Mat(1, d, 0.0);
  return p;
}

MergeParams make_merge(int m, int d, int d_out, Rng& rng) {
  MergeParams p;
  p.weight = glorot(m * d, d_out, rng);
  p.bias = Mat(1, d_out, 0.0);
  return p;
}

Mat modality_project(const MultimodalGraph& g, const ModalityProjection& proj) {
  require(proj.weights.size() == g.features.size(),
          "modality_project: weight/modality count mismatch");
  const int m = g.num_modalities();
  require(m > 0, "modality_project: no modalities");
  const int d = static_cast<int>(proj.weights[0].cols());
  for (int t = 0; t < m; ++t) {
    require(proj.weights[t].rows() == g.features[t].cols(),
            "modality_project: weight rows != feature dim for modality " +
                g.modalities[t].name);
    require(static_cast<int>(proj.weights[t].cols()) == d,
            "modality_project: all weights must share output width");
  }
  Mat out(g.num_nodes * m, d);
  for (int t = 0; t < m; ++t) {
    Mat pt = matmul(g.features[t], proj.weights[t]);
    for (int u = 0; u < g.num_nodes; ++u)
      for (int j = 0; j < d; ++j) out(u * m + t, j) = pt(u, j);
  }
  return out;
}

std::vector<Csr> relation_adjacencies(const NsgGraph& nsg) {
  std::vector<Csr> out;
  for (RelationType r : relations_of(nsg.variant))
    out.push_back(relation_adjacency(nsg, r));
  return out;
}

Mat relation_dense_adjacency(const NsgGraph& nsg, RelationType rel) {
  const int nm = nsg.num_sub_nodes();
  Mat a(nm, nm);
  for (const NsgEdge& e : nsg.edges) {
    if (e.rel != rel) continue;
    a(e.src, e.dst) = 1.0;
    a(e.dst, e.src) = 1.0;
  }
  return a;
}

Mat block_feature_matrix(const MultimodalGraph& g) {
  const int m = g.num_modalities();
  require(m > 0, "block_feature_matrix: no modalities");
  int total = 0;
  for (const Mat& f : g.features) total += static_cast<int>(f.cols());
  Mat x(g.num_nodes * m, total);
  int off = 0;
  for (int t = 0; t < m; ++t) {
    const Mat& f = g.features[t];
    for (int u = 0; u < g.num_nodes; ++u)
      for (int j = 0; j < f.cols(); ++j)
        x(u * m + t, off + static_cast<int>(j)) = f(u, j);
    off += static_cast<int>(f.cols());
  }
  return x;
}

Var stack_projection(Tape& tape, const std::vector<Var>& weights) {
  if (weights.empty())
    throw std::invalid_argument("stack_projection: no weights");
  Var joined = tape.transpose(weights[0]);
  for (std::size_t t = 1; t < weights.size(); ++t)
    joined = tape.concat_cols(joined, tape.transpose(weights[t]));
  return tape.transpose(joined);
}

LayerVars bind_layer(Tape& tape, const HgnnLayerParams& p,
                     std::vector<Var>* order) {
  LayerVars v;
  auto bind = [&](const Mat& m) {
    Var var = tape.input(m);
    if (order) order->push_back(var);
    return var;
  };
  for (const Mat& w : p.relation_weights) v.relation_weights.push_back(bind(w));
  v.self_weight = bind(p.self_weight);
  v.norm_scale = bind(p.norm_scale);
  v.norm_shift = bind(p.norm_shift);
  return v;
}

Var layer_forward(Tape& tape, Var h, const LayerVars& v,
                  const std::vector<Csr>& rels, const LayerConfig& cfg) {
  if (rels.size() != v.relation_weights.size())
    throw std::invalid_argument(
        "layer_forward: adjacency/weight count mismatch");
  Var acc = tape.matmul(h, v.self_weight);
  for (std::size_t r = 0; r < rels.size(); ++r) {
    Var msg = tape.aggregate(h, rels[r], cfg.agg);
    acc = tape.add(acc, tape.matmul(msg, v.relation_weights[r]));
  }
  if (cfg.relu) acc = tape.relu(acc);
  if (cfg.residual) acc = tape.add(acc, h);
  if (cfg.graph_norm) {
    const std::size_t rows = tape.value(acc).rows();
    Var ones = tape.constant(Mat(1, rows, 1.0));
    Var mean = tape.scale(tape.matmul(ones, acc), 1.0 / static_cast<double>(rows));
    Var centered = tape.sub(acc, mean);
    acc = tape.add(tape.mul(centered, v.norm_scale), v.norm_shift);
  }
  return acc;
}

Mat relation_message_pass(const Mat& h, const NsgGraph& nsg,
                          const HgnnLayerParams& params,
                          const LayerConfig& cfg) {
  require(static_cast<int>(h.rows()) == nsg.num_sub_nodes(),
          "relation_message_pass: h rows must equal sub-node count");
  Tape tape;
  Var hv = tape.constant(h);
  LayerVars v;
  for (const Mat& w : params.relation_weights)
    v.relation_weights.push_back(tape.constant(w));
  v.self_weight = tape.constant(params.self_weight);
  v.norm_scale = tape.constant(params.norm_scale);
  v.norm_shift = tape.constant(params.norm_shift);
  Var out = layer_forward(tape, hv, v, relation_adjacencies(nsg), cfg);
  return tape.value(out);
}

Mat merge_subnodes(const Mat& sub_emb, const NsgGraph& nsg,
                   const MergeParams& merge) {
  Mat view = merge_view(nsg, sub_emb);
  require(view.cols() == merge.weight.rows(),
          "merge_subnodes: weight rows must equal m*d");
  Mat z = matmul(view, merge.weight);
  for (int i = 0; i < z.rows(); ++i)
    for (int j = 0; j < z.cols(); ++j) z(i, j) += merge.bias(0, j);
  return z;
}

Mat coalesced_linear_forward(const Mat& x, const Mat& block_prop,
                             const std::vector<Mat>& weights) {
  require(block_prop.rows() == block_prop.cols(),
          "coalesced_linear_forward: propagation matrix must be square");
  require(x.rows() == block_prop.rows(),
          "coalesced_linear_forward: x rows must match propagation size");
  require(!weights.empty(), "coalesced_linear_forward: need weights");
  Mat acc(x.rows(), weights[0].cols());
  Mat px = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (l > 0) px = matmul(block_prop, px);
    require(weights[l].rows() == x.cols() &&
                weights[l].cols() == weights[0].cols(),
            "coalesced_linear_forward: weight shape mismatch at power " +
                std::to_string(l));
    acc = add(acc, matmul(px, weights[l]));
  }
  return acc;
}

}  // namespace nsgmoe
