#pragma once

#include <functional>
#include <vector>

#include "nsgmoe/mat.hpp"
#include "nsgmoe/rng.hpp"

namespace nsgmoe {

// Bias-corrected Adam with optional decoupled weight decay. Parameters are
// borrowed: the optimizer updates them in place each step.
class Adam {
 public:
  explicit Adam(std::vector<Mat*> params, double lr = 1e-3,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                double weight_decay = 0.0);

  void step(const std::vector<Mat>& grads);
  long steps_taken() const { return t_; }

 private:
  std::vector<Mat*> params_;
  std::vector<Mat> m_, v_;
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

struct FdCheckResult {
  double max_rel_err = 0.0;
  long coords_checked = 0;
  int worst_param = -1;
  int worst_coord = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference gradient verification. `value_fn` must recompute the
// scalar objective from the current contents of `params` (deterministically:
// any noise must be frozen). Each sampled coordinate is perturbed by ±step
// and the numeric slope compared against `analytic_grads`; relative error
// uses denominator max(|analytic|, |numeric|, 1e-8).
//
// `max_coords_per_param` < 0 checks every coordinate; otherwise that many
// coordinates are sampled per parameter using `rng` (required when capped).
FdCheckResult finite_difference_check(
    const std::function<double()>& value_fn, const std::vector<Mat*>& params,
    const std::vector<Mat>& analytic_grads, double step = 1e-5,
    int max_coords_per_param = -1, Rng* rng = nullptr);

}  // namespace nsgmoe
