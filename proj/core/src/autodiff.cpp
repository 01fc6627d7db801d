#include "nsgmoe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace nsgmoe {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

int pick(int idx, int dim) { return dim == 1 ? 0 : idx; }

void require_broadcast(const Mat& a, const Mat& b, const char* op) {
  const bool rows_ok =
      a.rows() == b.rows() || a.rows() == 1 || b.rows() == 1;
  const bool cols_ok =
      a.cols() == b.cols() || a.cols() == 1 || b.cols() == 1;
  require(rows_ok && cols_ok, std::string(op) + ": shapes " + shape_string(a) +
                                  " and " + shape_string(b) +
                                  " do not broadcast");
}

// Sum g down to rows x cols (collapsing broadcast dimensions).
Mat reduce_to(const Mat& g, int rows, int cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Mat out(rows, cols);
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j)
      out(pick(i, rows), pick(j, cols)) += g(i, j);
  return out;
}

// Index of the k-th largest entry of row r excluding column skip; ties go to
// the lower column index. Returns -1 when fewer than k candidates exist.
int kth_largest_excluding(const Mat& m, int r, int skip, int k) {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(m.cols()));
  for (int j = 0; j < m.cols(); ++j)
    if (j != skip) order.push_back(j);
  if (static_cast<int>(order.size()) < k) return -1;
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                   [&](int x, int y) {
                     if (m(r, x) != m(r, y)) return m(r, x) > m(r, y);
                     return x < y;
                   });
  return order[static_cast<std::size_t>(k - 1)];
}

}  // namespace

int Tape::checked(Var v) const {
  require(v.tape == this, "autodiff: Var belongs to a different tape");
  require(v.id >= 0 && v.id < size(), "autodiff: Var id out of range");
  return v.id;
}

Var Tape::make(Mat value, std::vector<int> parents,
               std::function<void(Tape&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents)
    if (node(p).requires_grad) {
      n.requires_grad = true;
      break;
    }
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, size() - 1};
}

void Tape::add_grad(int id, const Mat& g) {
  Mat& acc = node(id).grad;
  require(acc.same_shape(g), "autodiff: gradient shape mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc.raw()[i] += g.raw()[i];
}

Var Tape::input(Mat value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, size() - 1};
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, size() - 1};
}

const Mat& Tape::value(Var v) const { return node(checked(v)).value; }

const Mat& Tape::grad(Var v) {
  Node& n = node(checked(v));
  if (!n.grad.same_shape(n.value)) n.grad = Mat(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  const int root = checked(loss);
  require(node(root).value.rows() == 1 && node(root).value.cols() == 1,
          "backward: loss must be 1x1");
  for (Node& n : nodes_) {
    n.active = false;
    n.grad = Mat();
  }
  if (!node(root).requires_grad) return;

  // Mark grad-carrying ancestors of the loss.
  std::vector<int> stack{root};
  node(root).active = true;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (int p : node(id).parents) {
      Node& pn = node(p);
      if (pn.requires_grad && !pn.active) {
        pn.active = true;
        stack.push_back(p);
      }
    }
  }
  for (Node& n : nodes_)
    if (n.active) n.grad = Mat(n.value.rows(), n.value.cols());

  node(root).grad(0, 0) = 1.0;
  for (int id = root; id >= 0; --id) {
    Node& n = node(id);
    if (n.active && n.backprop) n.backprop(*this, id);
  }
}

Var Tape::add(Var a, Var b) {
  const int ia = checked(a), ib = checked(b);
  const Mat& va = node(ia).value;
  const Mat& vb = node(ib).value;
  require_broadcast(va, vb, "add");
  const int R = std::max(va.rows(), vb.rows());
  const int C = std::max(va.cols(), vb.cols());
  Mat out(R, C);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j)
      out(i, j) = va(pick(i, va.rows()), pick(j, va.cols())) +
                  vb(pick(i, vb.rows()), pick(j, vb.cols()));
  return make(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    if (t.wants(ia))
      t.add_grad(ia,
                 reduce_to(g, t.node(ia).value.rows(), t.node(ia).value.cols()));
    if (t.wants(ib))
      t.add_grad(ib,
                 reduce_to(g, t.node(ib).value.rows(), t.node(ib).value.cols()));
  });
}

Var Tape::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Tape::mul(Var a, Var b) {
  const int ia = checked(a), ib = checked(b);
  const Mat& va = node(ia).value;
  const Mat& vb = node(ib).value;
  require_broadcast(va, vb, "mul");
  const int R = std::max(va.rows(), vb.rows());
  const int C = std::max(va.cols(), vb.cols());
  Mat out(R, C);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j)
      out(i, j) = va(pick(i, va.rows()), pick(j, va.cols())) *
                  vb(pick(i, vb.rows()), pick(j, vb.cols()));
  return make(std::move(out), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.node(self).grad;
    const Mat& va = t.node(ia).value;
    const Mat& vb = t.node(ib).value;
    if (t.wants(ia)) {
      Mat ga(g.rows(), g.cols());
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j)
          ga(i, j) = g(i, j) * vb(pick(i, vb.rows()), pick(j, vb.cols()));
      t.add_grad(ia, reduce_to(ga, va.rows(), va.cols()));
    }
    if (t.wants(ib)) {
      Mat gb(g.rows(), g.cols());
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j)
          gb(i, j) = g(i, j) * va(pick(i, va.rows()), pick(j, va.cols()));
      t.add_grad(ib, reduce_to(gb, vb.rows(), vb.cols()));
    }
  });
}

Var Tape::scale(Var a, double s) {
  const int ia = checked(a);
  return make(nsgmoe::scale(node(ia).value, s), {ia},
              [ia, s](Tape& t, int self) {
                if (t.wants(ia))
                  t.add_grad(ia, nsgmoe::scale(t.node(self).grad, s));
              });
}

Var Tape::matmul(Var a, Var b) {
  const int ia = checked(a), ib = checked(b);
  return make(nsgmoe::matmul(node(ia).value, node(ib).value), {ia, ib},
              [ia, ib](Tape& t, int self) {
                const Mat& g = t.node(self).grad;
                if (t.wants(ia))
                  t.add_grad(ia,
                             nsgmoe::matmul(g, nsgmoe::transpose(t.node(ib).value)));
                if (t.wants(ib))
                  t.add_grad(ib,
                             nsgmoe::matmul(nsgmoe::transpose(t.node(ia).value), g));
              });
}

Var Tape::transpose(Var a) {
  const int ia = checked(a);
  return make(nsgmoe::transpose(node(ia).value), {ia},
              [ia](Tape& t, int self) {
                if (t.wants(ia))
                  t.add_grad(ia, nsgmoe::transpose(t.node(self).grad));
              });
}

Var Tape::relu(Var a) {
  const int ia = checked(a);
  Mat out = node(ia).value;
  for (double& v : out.raw()) v = v > 0.0 ? v : 0.0;
  return make(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    const Mat& x = t.node(ia).value;
    Mat gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx.raw()[i] = x.raw()[i] > 0.0 ? g.raw()[i] : 0.0;
    t.add_grad(ia, gx);
  });
}

Var Tape::sigmoid(Var a) {
  const int ia = checked(a);
  Mat out = node(ia).value;
  for (double& v : out.raw()) v = nsgmoe::sigmoid(v);
  return make(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    const Mat& y = t.node(self).value;
    Mat gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx.raw()[i] = g.raw()[i] * y.raw()[i] * (1.0 - y.raw()[i]);
    t.add_grad(ia, gx);
  });
}

Var Tape::softplus(Var a) {
  const int ia = checked(a);
  Mat out = node(ia).value;
  for (double& v : out.raw()) v = nsgmoe::softplus(v);
  return make(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    const Mat& x = t.node(ia).value;
    Mat gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx.raw()[i] = g.raw()[i] * nsgmoe::sigmoid(x.raw()[i]);
    t.add_grad(ia, gx);
  });
}

Var Tape::clamp_min(Var a, double lo) {
  const int ia = checked(a);
  Mat out = node(ia).value;
  for (double& v : out.raw()) v = v < lo ? lo : v;
  return make(std::move(out), {ia}, [ia, lo](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    const Mat& x = t.node(ia).value;
    Mat gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx.raw()[i] = x.raw()[i] < lo ? 0.0 : g.raw()[i];
    t.add_grad(ia, gx);
  });
}

Var Tape::row_softmax(Var a) {
  const int ia = checked(a);
  const Mat& x = node(ia).value;
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      out(i, j) = std::exp(x(i, j) - mx);
      z += out(i, j);
    }
    for (int j = 0; j < x.cols(); ++j) out(i, j) /= z;
  }
  return make(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    const Mat& y = t.node(self).value;
    Mat gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
      for (int j = 0; j < g.cols(); ++j)
        gx(i, j) = y(i, j) * (g(i, j) - dot);
    }
    t.add_grad(ia, gx);
  });
}

Var Tape::masked_row_softmax(Var a, Mat mask) {
  const int ia = checked(a);
  const Mat& x = node(ia).value;
  require(x.same_shape(mask), "masked_row_softmax: mask shape mismatch");
  Mat out(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < x.cols(); ++j)
      if (mask(i, j) != 0.0) mx = std::max(mx, x(i, j));
    if (!std::isfinite(mx)) continue;  // fully masked row stays zero
    double z = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
      if (mask(i, j) == 0.0) continue;
      out(i, j) = std::exp(x(i, j) - mx);
      z += out(i, j);
    }
    for (int j = 0; j < x.cols(); ++j) out(i, j) /= z;
  }
  return make(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    const Mat& y = t.node(self).value;  // zero at masked entries
    Mat gx(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
      for (int j = 0; j < g.cols(); ++j)
        gx(i, j) = y(i, j) * (g(i, j) - dot);
    }
    t.add_grad(ia, gx);
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const int ia = checked(a), ib = checked(b);
  const int ca = node(ia).value.cols();
  return make(nsgmoe::concat_cols(node(ia).value, node(ib).value), {ia, ib},
              [ia, ib, ca](Tape& t, int self) {
                const Mat& g = t.node(self).grad;
                if (t.wants(ia)) {
                  Mat ga(g.rows(), ca);
                  for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < ca; ++j) ga(i, j) = g(i, j);
                  t.add_grad(ia, ga);
                }
                if (t.wants(ib)) {
                  Mat gb(g.rows(), g.cols() - ca);
                  for (int i = 0; i < g.rows(); ++i)
                    for (int j = ca; j < g.cols(); ++j)
                      gb(i, j - ca) = g(i, j);
                  t.add_grad(ib, gb);
                }
              });
}

Var Tape::slice_cols(Var a, int begin, int end) {
  const int ia = checked(a);
  const Mat& x = node(ia).value;
  require(0 <= begin && begin <= end && end <= x.cols(),
          "slice_cols: bad range");
  Mat out(x.rows(), end - begin);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = begin; j < end; ++j) out(i, j - begin) = x(i, j);
  return make(std::move(out), {ia}, [ia, begin](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const Mat& g = t.node(self).grad;
    Mat gx(t.node(ia).value.rows(), t.node(ia).value.cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) gx(i, begin + j) = g(i, j);
    t.add_grad(ia, gx);
  });
}

Var Tape::row_gather(Var a, std::vector<int> rows) {
  const int ia = checked(a);
  const Mat& x = node(ia).value;
  for (int r : rows)
    require(0 <= r && r < x.rows(), "row_gather: row index out of range");
  Mat out(static_cast<int>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < x.cols(); ++j)
      out(static_cast<int>(i), j) = x(rows[i], j);
  return make(std::move(out), {ia},
              [ia, rows = std::move(rows)](Tape& t, int self) {
                if (!t.wants(ia)) return;
                const Mat& g = t.node(self).grad;
                Mat gx(t.node(ia).value.rows(), t.node(ia).value.cols());
                for (std::size_t i = 0; i < rows.size(); ++i)
                  for (int j = 0; j < g.cols(); ++j)
                    gx(rows[i], j) += g(static_cast<int>(i), j);
                t.add_grad(ia, gx);
              });
}

Var Tape::reduce_sum(Var a) {
  const int ia = checked(a);
  Mat out(1, 1);
  for (double v : node(ia).value.raw()) out(0, 0) += v;
  return make(std::move(out), {ia}, [ia](Tape& t, int self) {
    if (!t.wants(ia)) return;
    const double g = t.node(self).grad(0, 0);
    Mat gx(t.node(ia).value.rows(), t.node(ia).value.cols(), g);
    t.add_grad(ia, gx);
  });
}

Var Tape::aggregate(Var h, const Csr& adj, Agg kind) {
  const int ih = checked(h);
  const Mat& x = node(ih).value;
  require(adj.out_rows() >= 0, "aggregate: empty offsets");
  require(adj.offsets.front() == 0 &&
              adj.offsets.back() == static_cast<int>(adj.indices.size()),
          "aggregate: inconsistent offsets");
  for (int idx : adj.indices)
    require(0 <= idx && idx < x.rows(), "aggregate: index out of range");
  const int R = adj.out_rows();
  Mat out(R, x.cols());
  for (int i = 0; i < R; ++i) {
    const int lo = adj.offsets[static_cast<std::size_t>(i)];
    const int hi = adj.offsets[static_cast<std::size_t>(i) + 1];
    if (hi == lo) continue;
    for (int p = lo; p < hi; ++p) {
      const int src = adj.indices[static_cast<std::size_t>(p)];
      for (int j = 0; j < x.cols(); ++j) out(i, j) += x(src, j);
    }
    if (kind == Agg::Mean) {
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (int j = 0; j < x.cols(); ++j) out(i, j) *= inv;
    }
  }
  return make(std::move(out), {ih},
              [ih, offsets = adj.offsets, indices = adj.indices,
               kind](Tape& t, int self) {
                if (!t.wants(ih)) return;
                const Mat& g = t.node(self).grad;
                Mat gx(t.node(ih).value.rows(), t.node(ih).value.cols());
                const int R = static_cast<int>(offsets.size()) - 1;
                for (int i = 0; i < R; ++i) {
                  const int lo = offsets[static_cast<std::size_t>(i)];
                  const int hi = offsets[static_cast<std::size_t>(i) + 1];
                  if (hi == lo) continue;
                  const double w =
                      kind == Agg::Mean ? 1.0 / static_cast<double>(hi - lo)
                                        : 1.0;
                  for (int p = lo; p < hi; ++p) {
                    const int src = indices[static_cast<std::size_t>(p)];
                    for (int j = 0; j < g.cols(); ++j)
                      gx(src, j) += w * g(i, j);
                  }
                }
                t.add_grad(ih, gx);
              });
}

Var Tape::cv_squared(Var a) {
  const int ia = checked(a);
  const Mat& x = node(ia).value;
  const int n = static_cast<int>(x.size());
  Mat out(1, 1);
  double sum = 0.0;
  for (double v : x.raw()) sum += v;
  bool degenerate = n <= 1 || sum == 0.0;
  if (!degenerate) {
    const double mean = sum / n;
    double d2 = 0.0;
    for (double v : x.raw()) d2 += (v - mean) * (v - mean);
    // CV^2 = ((1/n) * d2) / mean^2 = n * d2 / sum^2.
    out(0, 0) = static_cast<double>(n) * d2 / (sum * sum);
  }
  return make(std::move(out), {ia}, [ia, degenerate](Tape& t, int self) {
    if (!t.wants(ia) || degenerate) return;
    const double g = t.node(self).grad(0, 0);
    const Mat& x = t.node(ia).value;
    const int n = static_cast<int>(x.size());
    double sum = 0.0;
    for (double v : x.raw()) sum += v;
    const double mean = sum / n;
    double d2 = 0.0;
    for (double v : x.raw()) d2 += (v - mean) * (v - mean);
    Mat gx(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x.raw()[i];
      gx.raw()[i] = g * (2.0 * n * (xi - mean) / (sum * sum) -
                         2.0 * n * d2 / (sum * sum * sum));
    }
    t.add_grad(ia, gx);
  });
}

Var Tape::topk_load(Var clean, Var scale, Var realized, int k) {
  const int ic = checked(clean), is = checked(scale), ir = checked(realized);
  const Mat& c = node(ic).value;
  const Mat& s = node(is).value;
  const Mat& r = node(ir).value;
  require(c.same_shape(s) && c.same_shape(r),
          "topk_load: clean/scale/realized shapes differ");
  require(k >= 1, "topk_load: k must be positive");
  const int B = c.rows(), E = c.cols();
  Mat out(1, E);
  std::vector<int> thresholds(static_cast<std::size_t>(B) *
                              static_cast<std::size_t>(E));
  if (k >= E) {
    for (int e = 0; e < E; ++e) out(0, e) = static_cast<double>(B);
    return make(std::move(out), {ic, is, ir},
                [](Tape&, int) { /* constant in this regime */ });
  }
  for (int b = 0; b < B; ++b) {
    for (int e = 0; e < E; ++e) {
      const int jt = kth_largest_excluding(r, b, e, k);
      thresholds[static_cast<std::size_t>(b) * E + e] = jt;
      const double z = (c(b, e) - r(b, jt)) / s(b, e);
      out(0, e) += normal_cdf(z);
    }
  }
  return make(std::move(out), {ic, is, ir},
              [ic, is, ir, k, thresholds = std::move(thresholds)](Tape& t,
                                                                  int self) {
                const Mat& g = t.node(self).grad;
                const Mat& c = t.node(ic).value;
                const Mat& s = t.node(is).value;
                const Mat& r = t.node(ir).value;
                const int B = c.rows(), E = c.cols();
                Mat gc(B, E), gs(B, E), gr(B, E);
                for (int b = 0; b < B; ++b) {
                  for (int e = 0; e < E; ++e) {
                    const int jt =
                        thresholds[static_cast<std::size_t>(b) * E + e];
                    const double z = (c(b, e) - r(b, jt)) / s(b, e);
                    const double w = g(0, e) * normal_pdf(z) / s(b, e);
                    gc(b, e) += w;
                    gr(b, jt) -= w;
                    gs(b, e) -= w * z;
                  }
                }
                if (t.wants(ic)) t.add_grad(ic, gc);
                if (t.wants(is)) t.add_grad(is, gs);
                if (t.wants(ir)) t.add_grad(ir, gr);
              });
}

Var Tape::cross_entropy_rows(Var logits, const std::vector<int>& labels,
                             const std::vector<int>& rows) {
  const int il = checked(logits);
  const Mat& z = node(il).value;
  require(!rows.empty(), "cross_entropy_rows: empty row set");
  require(static_cast<int>(labels.size()) == z.rows(),
          "cross_entropy_rows: one label per logit row required");
  for (int r : rows) {
    require(0 <= r && r < z.rows(), "cross_entropy_rows: row out of range");
    require(0 <= labels[static_cast<std::size_t>(r)] &&
                labels[static_cast<std::size_t>(r)] < z.cols(),
            "cross_entropy_rows: label out of range");
  }
  Mat out(1, 1);
  for (int r : rows) {
    double mx = z(r, 0);
    for (int j = 1; j < z.cols(); ++j) mx = std::max(mx, z(r, j));
    double lse = 0.0;
    for (int j = 0; j < z.cols(); ++j) lse += std::exp(z(r, j) - mx);
    lse = mx + std::log(lse);
    out(0, 0) += lse - z(r, labels[static_cast<std::size_t>(r)]);
  }
  out(0, 0) /= static_cast<double>(rows.size());
  return make(std::move(out), {il},
              [il, labels, rows](Tape& t, int self) {
                if (!t.wants(il)) return;
                const double g =
                    t.node(self).grad(0, 0) / static_cast<double>(rows.size());
                const Mat& z = t.node(il).value;
                Mat gz(z.rows(), z.cols());
                for (int r : rows) {
                  double mx = z(r, 0);
                  for (int j = 1; j < z.cols(); ++j) mx = std::max(mx, z(r, j));
                  double total = 0.0;
                  for (int j = 0; j < z.cols(); ++j)
                    total += std::exp(z(r, j) - mx);
                  for (int j = 0; j < z.cols(); ++j)
                    gz(r, j) += g * std::exp(z(r, j) - mx) / total;
                  gz(r, labels[static_cast<std::size_t>(r)]) -= g;
                }
                t.add_grad(il, gz);
              });
}

}  // namespace nsgmoe
