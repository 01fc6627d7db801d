#include "nsgmoe/mat.hpp"

#include <cmath>
#include <stdexcept>

namespace nsgmoe {

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}
}  // namespace

Mat matmul(const Mat& a, const Mat& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" +
                                    shape_string(a) + " x " + shape_string(b) +
                                    ")");
  Mat out(a.rows(), b.cols());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.data() + static_cast<std::size_t>(i) * k;
    double* orow = out.data() + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Mat add(const Mat& a, const Mat& b) {
  require(a.same_shape(b), "add: shape mismatch");
  Mat out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] += b.raw()[i];
  return out;
}

Mat sub(const Mat& a, const Mat& b) {
  require(a.same_shape(b), "sub: shape mismatch");
  Mat out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] -= b.raw()[i];
  return out;
}

Mat scale(const Mat& a, double c) {
  Mat out = a;
  for (double& v : out.raw()) v *= c;
  return out;
}

Mat hadamard(const Mat& a, const Mat& b) {
  require(a.same_shape(b), "hadamard: shape mismatch");
  Mat out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] *= b.raw()[i];
  return out;
}

Mat concat_cols(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  Mat out(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.raw()) m = std::max(m, std::fabs(v));
  return m;
}

double frobenius_norm(const Mat& a) {
  double s = 0.0;
  for (double v : a.raw()) s += v * v;
  return std::sqrt(s);
}

double dot_rows(const Mat& a, int i, const Mat& b, int j) {
  double s = 0.0;
  for (int c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

std::string shape_string(const Mat& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 40.0) return x;
  if (x < -40.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

}  // namespace nsgmoe
