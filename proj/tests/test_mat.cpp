#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "nsgmoe/eig.hpp"
#include "nsgmoe/mat.hpp"
#include "nsgmoe/rng.hpp"

using namespace nsgmoe;

TEST_CASE("matmul and transpose hand values") {
  Mat a(2, 3);
  a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
  a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
  Mat b(3, 2);
  b(0, 0) = 7; b(0, 1) = 8;
  b(1, 0) = 9; b(1, 1) = 10;
  b(2, 0) = 11; b(2, 1) = 12;
  Mat c = matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == doctest::Approx(58));
  CHECK(c(0, 1) == doctest::Approx(64));
  CHECK(c(1, 0) == doctest::Approx(139));
  CHECK(c(1, 1) == doctest::Approx(154));

  Mat at = transpose(a);
  CHECK(at.rows() == 3);
  CHECK(at.cols() == 2);
  CHECK(at(2, 1) == 6);
}

TEST_CASE("elementwise ops and identity") {
  Mat a(2, 2, 1.5);
  Mat b(2, 2, 2.0);
  CHECK(add(a, b)(0, 0) == doctest::Approx(3.5));
  CHECK(sub(a, b)(1, 1) == doctest::Approx(-0.5));
  CHECK(hadamard(a, b)(0, 1) == doctest::Approx(3.0));
  CHECK(scale(a, 2.0)(1, 0) == doctest::Approx(3.0));
  Mat i = Mat::identity(3);
  CHECK(i(0, 0) == 1.0);
  CHECK(i(0, 1) == 0.0);
  Mat prod = matmul(i, i);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(prod(r, c) == doctest::Approx(i(r, c)));
}

TEST_CASE("scalar helpers match frozen references") {
  CHECK(softplus(0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  // derivative of sigmoid at 0 is 1/4; probe via central difference
  const double h = 1e-6;
  CHECK((sigmoid(h) - sigmoid(-h)) / (2 * h) ==
        doctest::Approx(0.25).epsilon(1e-8));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.96) ==
        doctest::Approx(0.9750021048517795).epsilon(1e-12));
  CHECK(normal_cdf(0.4) == doctest::Approx(0.6554217416103242).epsilon(1e-12));
  CHECK(normal_cdf(2.0) + normal_cdf(-2.0) == doctest::Approx(1.0));
  // density integrates the cdf: central difference of Phi equals phi
  CHECK((normal_cdf(0.7 + h) - normal_cdf(0.7 - h)) / (2 * h) ==
        doctest::Approx(normal_pdf(0.7)).epsilon(1e-8));
  // softplus stays finite and sane at extremes
  CHECK(softplus(-745.0) >= 0.0);
  CHECK(softplus(-745.0) < 1e-300);
  CHECK(softplus(800.0) == doctest::Approx(800.0));
}

TEST_CASE("sym_eig two by two hand case") {
  Mat a(2, 2);
  a(0, 0) = 2; a(0, 1) = 1;
  a(1, 0) = 1; a(1, 1) = 2;
  EigResult e = sym_eig(a);
  REQUIRE(e.values.size() == 2);
  CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));
  // eigenvector residual A v = lambda v
  for (int k = 0; k < 2; ++k) {
    for (int r = 0; r < 2; ++r) {
      double av = 0;
      for (int c = 0; c < 2; ++c) av += a(r, c) * e.vectors(c, k);
      CHECK(av == doctest::Approx(e.values[static_cast<std::size_t>(k)] *
                                  e.vectors(r, k))
                      .epsilon(1e-10));
    }
  }
}

TEST_CASE("sym_eig random reconstruction and orthonormality") {
  Rng rng(11);
  const int n = 16;
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double x = rng.normal();
      a(i, j) = x;
      a(j, i) = x;
    }
  EigResult e = sym_eig(a);
  for (std::size_t i = 1; i < e.values.size(); ++i)
    CHECK(e.values[i] >= e.values[i - 1]);
  // V^T V = I
  Mat vtv = matmul(transpose(e.vectors), e.vectors);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(vtv(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
  // V diag(w) V^T = A
  Mat vd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      vd(i, j) = e.vectors(i, j) * e.values[static_cast<std::size_t>(j)];
  Mat rec = matmul(vd, transpose(e.vectors));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      CHECK(rec(i, j) == doctest::Approx(a(i, j)).epsilon(1e-9));
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Mat a(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(sym_eig(a), std::invalid_argument);
}
