#pragma once

#include "nsgmoe/mat.hpp"

#include <vector>

namespace nsgmoe {

struct EigResult {
  std::vector<double> values;  // ascending
  Mat vectors;                 // orthonormal, column i pairs with values[i]
};

// Symmetric eigendecomposition via cyclic Jacobi rotations. Input must be
// symmetric within `symmetry_tol`; throws std::invalid_argument otherwise.
EigResult sym_eig(const Mat& a, double symmetry_tol = 1e-10);

}  // namespace nsgmoe
