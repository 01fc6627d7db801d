#include "nsgmoe/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace nsgmoe {

Adam::Adam(std::vector<Mat*> params, double lr, double beta1, double beta2,
           double eps, double weight_decay)
    : params_(std::move(params)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Mat* p : params_) {
    m_.emplace_back(p->rows(), p->cols());
    v_.emplace_back(p->rows(), p->cols());
  }
}

void Adam::step(const std::vector<Mat>& grads) {
  if (grads.size() != params_.size())
    throw std::invalid_argument("adam: gradient count mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Mat& p = *params_[i];
    const Mat& g = grads[i];
    if (!p.same_shape(g))
      throw std::invalid_argument("adam: gradient shape mismatch");
    Mat& m = m_[i];
    Mat& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g.raw()[j];
      m.raw()[j] = beta1_ * m.raw()[j] + (1.0 - beta1_) * gj;
      v.raw()[j] = beta2_ * v.raw()[j] + (1.0 - beta2_) * gj * gj;
      const double mhat = m.raw()[j] / bc1;
      const double vhat = v.raw()[j] / bc2;
      double upd = lr_ * mhat / (std::sqrt(vhat) + eps_);
      if (weight_decay_ != 0.0) upd += lr_ * weight_decay_ * p.raw()[j];
      p.raw()[j] -= upd;
    }
  }
}

FdCheckResult finite_difference_check(const std::function<double()>& value_fn,
                                      const std::vector<Mat*>& params,
                                      const std::vector<Mat>& analytic_grads,
                                      double step, int max_coords_per_param,
                                      Rng* rng) {
  if (analytic_grads.size() != params.size())
    throw std::invalid_argument("fd_check: gradient count mismatch");
  if (max_coords_per_param >= 0 && rng == nullptr)
    throw std::invalid_argument("fd_check: sampling requires an rng");
  FdCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Mat& p = *params[pi];
    const Mat& a = analytic_grads[pi];
    if (!p.same_shape(a))
      throw std::invalid_argument("fd_check: gradient shape mismatch");
    std::vector<int> coords;
    const int total = static_cast<int>(p.size());
    if (max_coords_per_param < 0 || max_coords_per_param >= total) {
      coords.resize(static_cast<std::size_t>(total));
      for (int j = 0; j < total; ++j) coords[static_cast<std::size_t>(j)] = j;
    } else {
      coords = rng->sample_without_replacement(total, max_coords_per_param);
    }
    for (int j : coords) {
      const double saved = p.raw()[static_cast<std::size_t>(j)];
      p.raw()[static_cast<std::size_t>(j)] = saved + step;
      const double up = value_fn();
      p.raw()[static_cast<std::size_t>(j)] = saved - step;
      const double down = value_fn();
      p.raw()[static_cast<std::size_t>(j)] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = a.raw()[static_cast<std::size_t>(j)];
      const double denom = std::max(
          {std::fabs(analytic), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(analytic - numeric) / denom;
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = static_cast<int>(pi);
        res.worst_coord = j;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace nsgmoe
