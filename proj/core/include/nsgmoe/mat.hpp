#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nsgmoe {

// Dense row-major matrix of doubles. All in-memory numerics run in double
// precision; 32-bit floats appear only in on-disk feature files.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
              fill) {}

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool operator==(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double c);
Mat hadamard(const Mat& a, const Mat& b);
Mat concat_cols(const Mat& a, const Mat& b);

double max_abs(const Mat& a);
double frobenius_norm(const Mat& a);
double dot_rows(const Mat& a, int i, const Mat& b, int j);

std::string shape_string(const Mat& a);

// Scalar helpers shared across modules.
double sigmoid(double x);
double softplus(double x);

// Standard normal CDF and PDF (erfc-based; |error| well under 1e-12).
double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace nsgmoe
