#include "nsgmoe/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsgmoe {

namespace {

void require_symmetric(const Mat& x, const char* what) {
  if (x.rows() != x.cols())
    throw std::invalid_argument(std::string(what) + ": matrix not square");
  for (int i = 0; i < x.rows(); ++i)
    for (int j = i + 1; j < x.cols(); ++j)
      if (std::fabs(x(i, j) - x(j, i)) > 1e-10)
        throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
}

// ||M v - lambda v||_max for a column vector v given as a Mat column.
double eigen_residual(const Mat& m, const Mat& vecs, int col, double lambda) {
  double worst = 0.0;
  for (int i = 0; i < m.rows(); ++i) {
    double mv = 0.0;
    for (int j = 0; j < m.cols(); ++j) mv += m(i, j) * vecs(j, col);
    worst = std::max(worst, std::fabs(mv - lambda * vecs(i, col)));
  }
  return worst;
}

}  // namespace

BlockLaplacian build_block_laplacian(const Mat& a, const Mat& b,
                                     const SpectralConfig& cfg) {
  require_symmetric(a, "build_block_laplacian(a)");
  require_symmetric(b, "build_block_laplacian(b)");
  if (a.rows() != b.rows())
    throw std::invalid_argument("build_block_laplacian: a and b sizes differ");
  const int n = a.rows();

  BlockLaplacian bl;
  bl.n = n;
  if (cfg.normalization == SpectralConfig::Normalization::SymmetricDegree) {
    // Degree over the full 2n adjacency [[A,B],[B,A]]: both halves of a
    // modality pair share the same degree rowsum(A)+rowsum(B).
    std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double deg = 0.0;
      for (int j = 0; j < n; ++j) deg += a(i, j) + b(i, j);
      if (deg <= 0.0)
        throw std::invalid_argument(
            "build_block_laplacian: sub-node " + std::to_string(i) +
            " is isolated; symmetric-degree normalization undefined");
      inv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(deg);
    }
    bl.a_hat = Mat(n, n);
    bl.b_hat = Mat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double s = inv_sqrt[static_cast<std::size_t>(i)] *
                         inv_sqrt[static_cast<std::size_t>(j)];
        bl.a_hat(i, j) = a(i, j) * s;
        bl.b_hat(i, j) = b(i, j) * s;
      }
  } else {
    bl.a_hat = a;
    bl.b_hat = b;
  }

  bl.laplacian = Mat(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      bl.laplacian(i, j) = -bl.a_hat(i, j);
      bl.laplacian(n + i, n + j) = -bl.a_hat(i, j);
      bl.laplacian(i, n + j) = -bl.b_hat(i, j);
      bl.laplacian(n + i, j) = -bl.b_hat(i, j);
    }
  for (int i = 0; i < 2 * n; ++i) bl.laplacian(i, i) += 1.0;
  return bl;
}

BlockEig block_diagonalize(const BlockLaplacian& bl) {
  const int n = bl.n;
  Mat f1(n, n), f2(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      f1(i, j) = -bl.a_hat(i, j) - bl.b_hat(i, j);
      f2(i, j) = -bl.a_hat(i, j) + bl.b_hat(i, j);
    }
  for (int i = 0; i < n; ++i) {
    f1(i, i) += 1.0;
    f2(i, i) += 1.0;
  }
  const EigResult e1 = sym_eig(f1);
  const EigResult e2 = sym_eig(f2);
  BlockEig be;
  be.lambda1 = e1.values;
  be.lambda2 = e2.values;
  be.u1 = e1.vectors;
  be.u2 = e2.vectors;
  return be;
}

double frequency_response(double lambda, Subspace subspace,
                          const SpectralConfig& cfg) {
  return subspace == Subspace::F1 ? cfg.alpha + cfg.beta + 1.0 - lambda
                                  : cfg.alpha - cfg.beta + 1.0 - lambda;
}

Mat assemble_eigenvectors(const BlockEig& be) {
  const int n = be.u1.rows();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Mat u(2 * n, 2 * n);
  for (int c = 0; c < n; ++c)
    for (int i = 0; i < n; ++i) {
      u(i, c) = inv_sqrt2 * be.u1(i, c);
      u(n + i, c) = inv_sqrt2 * be.u1(i, c);
      u(i, n + c) = inv_sqrt2 * be.u2(i, c);
      u(n + i, n + c) = -inv_sqrt2 * be.u2(i, c);
    }
  return u;
}

double verify_filter(const BlockLaplacian& bl, const SpectralConfig& cfg) {
  const int n = bl.n;
  Mat g(2 * n, 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      g(i, j) = bl.a_hat(i, j);
      g(n + i, n + j) = bl.a_hat(i, j);
      g(i, n + j) = bl.b_hat(i, j);
      g(n + i, j) = bl.b_hat(i, j);
    }
  for (int i = 0; i < n; ++i) {
    g(i, i) += cfg.alpha;
    g(n + i, n + i) += cfg.alpha;
    g(i, n + i) += cfg.beta;
    g(n + i, i) += cfg.beta;
  }
  const BlockEig be = block_diagonalize(bl);
  const Mat u = assemble_eigenvectors(be);
  double worst = 0.0;
  for (int c = 0; c < 2 * n; ++c) {
    const bool in_f1 = c < n;
    const double lambda =
        in_f1 ? be.lambda1[static_cast<std::size_t>(c)]
              : be.lambda2[static_cast<std::size_t>(c - n)];
    const double h =
        frequency_response(lambda, in_f1 ? Subspace::F1 : Subspace::F2, cfg);
    worst = std::max(worst, eigen_residual(g, u, c, h));
  }
  return worst;
}

SpectralReport analyze_spectrum(const Mat& a, const Mat& b,
                                const SpectralConfig& cfg) {
  const BlockLaplacian bl = build_block_laplacian(a, b, cfg);
  const BlockEig be = block_diagonalize(bl);
  const int n = bl.n;

  SpectralReport rep;
  rep.lambda1 = be.lambda1;
  rep.lambda2 = be.lambda2;

  const EigResult full = sym_eig(bl.laplacian);
  rep.full_spectrum = full.values;

  std::vector<double> merged = be.lambda1;
  merged.insert(merged.end(), be.lambda2.begin(), be.lambda2.end());
  std::sort(merged.begin(), merged.end());
  for (int i = 0; i < 2 * n; ++i)
    rep.spectrum_match_error =
        std::max(rep.spectrum_match_error,
                 std::fabs(merged[static_cast<std::size_t>(i)] -
                           full.values[static_cast<std::size_t>(i)]));

  // Each computed eigenvector of L splits into a [v;v] and a [v;-v]
  // component; both must themselves satisfy the eigen-equation (they can
  // both be nonzero only when the blocks share that eigenvalue).
  for (int c = 0; c < 2 * n; ++c) {
    const double lambda = full.values[static_cast<std::size_t>(c)];
    Mat shared(2 * n, 1), differ(2 * n, 1);
    double ns = 0.0, nd = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = 0.5 * (full.vectors(i, c) + full.vectors(n + i, c));
      const double d = 0.5 * (full.vectors(i, c) - full.vectors(n + i, c));
      shared(i, 0) = s;
      shared(n + i, 0) = s;
      differ(i, 0) = d;
      differ(n + i, 0) = -d;
      ns += 2.0 * s * s;
      nd += 2.0 * d * d;
    }
    auto component_residual = [&](const Mat& comp, double norm2) {
      if (norm2 < 1e-20) return;
      const double inv = 1.0 / std::sqrt(norm2);
      double worst = 0.0;
      for (int i = 0; i < 2 * n; ++i) {
        double mv = 0.0;
        for (int j = 0; j < 2 * n; ++j)
          mv += bl.laplacian(i, j) * comp(j, 0);
        worst = std::max(worst, std::fabs(mv - lambda * comp(i, 0)) * inv);
      }
      rep.block_form_residual = std::max(rep.block_form_residual, worst);
    };
    component_residual(shared, ns);
    component_residual(differ, nd);
  }

  const Mat u = assemble_eigenvectors(be);
  for (int c = 0; c < 2 * n; ++c) {
    const double lambda =
        c < n ? be.lambda1[static_cast<std::size_t>(c)]
              : be.lambda2[static_cast<std::size_t>(c - n)];
    rep.assembled_residual = std::max(
        rep.assembled_residual, eigen_residual(bl.laplacian, u, c, lambda));
  }

  rep.filter_residual = verify_filter(bl, cfg);

  for (double lambda : merged) {
    const double gap = frequency_response(lambda, Subspace::F1, cfg) -
                       frequency_response(lambda, Subspace::F2, cfg);
    rep.response_gap_error =
        std::max(rep.response_gap_error, std::fabs(gap - 2.0 * cfg.beta));
  }
  return rep;
}

}  // namespace nsgmoe
