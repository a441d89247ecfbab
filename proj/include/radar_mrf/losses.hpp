#pragma once

#include <functional>
#include <span>
#include <vector>

#include "radar_mrf/core.hpp"

namespace radar_mrf {

struct LossWeights {
  double beta_bbox = 2.0;
  double beta_cls = 1.0;
  double beta_dir = 0.2;
  std::vector<double> alpha;  // per class
  double gamma = 2.0;

  void validate() const;
};

struct LossValue {
  double value = 0;
  Matrix grad;  // same shape as the prediction
};

double smooth_l1(double x);
/// x inside the quadratic zone, sign(x) outside; at |x| = 1 both agree.
double smooth_l1_grad(double x);

/// Mean over positives of the summed SmoothL1 residuals. pred and target are
/// N_pos x 7. N_pos = 0 gives 0 with an empty gradient.
LossValue loss_bbox(const Matrix& pred, const Matrix& target);

/// Focal loss over per-class probabilities; only the true class of each
/// positive contributes. probs is N_pos x N_cls with entries in (0, 1].
LossValue loss_cls(const Matrix& probs, std::span<const int> true_class, const LossWeights& weights);

/// Mean two-bin softmax cross-entropy. logits is N_pos x 2.
LossValue loss_dir(const Matrix& logits, std::span<const int> dir_targets);

struct LossReport {
  double l_bbox = 0;
  double l_cls = 0;
  double l_dir = 0;
  double l_total = 0;
  // Gradients of l_total with respect to each prediction block.
  Matrix grad_bbox;
  Matrix grad_cls;
  Matrix grad_dir;
};

LossReport loss_total(const LossValue& bbox, const LossValue& cls, const LossValue& dir, const LossWeights& weights);

/// Central finite-difference gradient of `f` at `x`.
Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double step = 1e-6);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|); entries where both are exactly zero
/// contribute 0.
double max_relative_error(const Matrix& a, const Matrix& b);

}  // namespace radar_mrf
