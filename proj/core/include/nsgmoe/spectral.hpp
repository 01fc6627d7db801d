#pragma once

#include <vector>

#include "nsgmoe/eig.hpp"
#include "nsgmoe/mat.hpp"

namespace nsgmoe {

struct SpectralConfig {
  enum class Normalization { SymmetricDegree, None };
  double alpha = 0.0;  // self-loop coefficient
  double beta = 0.0;   // intra-node flow scale
  Normalization normalization = Normalization::SymmetricDegree;
};

enum class Subspace { F1, F2 };

// Two-block Laplacian of the symmetric two-modality construction: each
// modality holds n nodes, A couples nodes within a modality, B couples the
// two modality copies. L = I_2n - [[A_hat,B_hat],[B_hat,A_hat]].
struct BlockLaplacian {
  int n = 0;
  Mat a_hat;
  Mat b_hat;
  Mat laplacian;  // 2n x 2n
};

// Eigendecompositions of the two diagonalized blocks I-A_hat-B_hat (F1,
// eigenvectors extend to [v;v]/sqrt(2)) and I-A_hat+B_hat (F2, [v;-v]).
struct BlockEig {
  std::vector<double> lambda1, lambda2;  // ascending per block
  Mat u1, u2;                            // orthonormal block eigenvectors
};

struct SpectralReport {
  std::vector<double> lambda1, lambda2;
  std::vector<double> full_spectrum;  // direct eigendecomposition of L
  // max |sorted(lambda1 + lambda2) - full_spectrum| entrywise
  double spectrum_match_error = 0.0;
  // max eigen-residual of the [v;v]/[v;-v] projections of L's computed
  // eigenvectors (projection handles eigenvalues shared by both blocks)
  double block_form_residual = 0.0;
  // max ||L u - lambda u||_max over the assembled eigenbasis Q diag(U1,U2)
  double assembled_residual = 0.0;
  // max ||G u - h(lambda;u) u||_max over the assembled eigenbasis
  double filter_residual = 0.0;
  // max |(h_F1 - h_F2)(lambda) - 2 beta| over both block spectra
  double response_gap_error = 0.0;
};

// Degree normalization (when selected) uses the FULL 2n x 2n adjacency:
// node degrees sum both blocks. Throws on asymmetric input or, under degree
// normalization, on an isolated sub-node (zero total degree).
BlockLaplacian build_block_laplacian(const Mat& a, const Mat& b,
                                     const SpectralConfig& cfg);

BlockEig block_diagonalize(const BlockLaplacian& bl);

// alpha+beta+1-lambda on F1, alpha-beta+1-lambda on F2.
double frequency_response(double lambda, Subspace subspace,
                          const SpectralConfig& cfg);

// Builds the filter [[aI+A_hat, bI+B_hat],[bI+B_hat, aI+A_hat]], applies it
// to every assembled eigenvector and returns the max deviation from
// h(lambda;u) * u.
double verify_filter(const BlockLaplacian& bl, const SpectralConfig& cfg);

// Full verification pipeline over one instance.
SpectralReport analyze_spectrum(const Mat& a, const Mat& b,
                                const SpectralConfig& cfg);

// Assembled eigenvector for block column i: [v;v]/sqrt(2) for F1,
// [v;-v]/sqrt(2) for F2, where v is that block's eigenvector column.
Mat assemble_eigenvectors(const BlockEig& be);

}  // namespace nsgmoe
