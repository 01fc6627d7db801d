#include "nsgmoe/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nsgmoe {

namespace {

double off_diagonal_norm(const Mat& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

EigResult sym_eig(const Mat& input, double symmetry_tol) {
  if (input.rows() != input.cols())
    throw std::invalid_argument("sym_eig: matrix is not square");
  const int n = input.rows();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(input(i, j) - input(j, i)) > symmetry_tol)
        throw std::invalid_argument("sym_eig: matrix is not symmetric");

  Mat a = input;
  // Symmetrize exactly so rotations preserve symmetry bit-for-bit.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }

  Mat u = Mat::identity(n);
  const double scale = std::max(1.0, frobenius_norm(a));
  const double tol = 1e-14 * scale;
  const int max_sweeps = 100;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= tol) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0)
                             ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                             : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double ukp = u(k, p);
          const double ukq = u(k, q);
          u(k, p) = c * ukp - s * ukq;
          u(k, q) = s * ukp + c * ukq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) < a(j, j); });

  EigResult result;
  result.values.resize(static_cast<std::size_t>(n));
  result.vectors = Mat(n, n);
  for (int j = 0; j < n; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    result.values[static_cast<std::size_t>(j)] = a(src, src);
    for (int i = 0; i < n; ++i) result.vectors(i, j) = u(i, src);
  }
  return result;
}

}  // namespace nsgmoe
