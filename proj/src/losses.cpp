#include "radar_mrf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radar_mrf {

void LossWeights::validate() const {
  if (beta_bbox < 0 || beta_cls < 0 || beta_dir < 0 || gamma < 0) throw ArgumentError("loss weights must be >= 0");
  for (double a : alpha) {
    if (a < 0) throw ArgumentError("focal alpha must be >= 0");
  }
}

double smooth_l1(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0 ? 1.0 : -1.0;
}

LossValue loss_bbox(const Matrix& pred, const Matrix& target) {
  if (pred.rows != target.rows || pred.cols != target.cols) throw ArgumentError("bbox prediction/target shape mismatch");
  if (pred.rows > 0 && pred.cols != 7) throw ArgumentError("bbox residuals must have 7 columns");
  LossValue out{0.0, Matrix(pred.rows, pred.cols)};
  if (pred.rows == 0) return out;
  const double inv = 1.0 / static_cast<double>(pred.rows);
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.data.size(); ++k) {
    const double r = pred.data[k] - target.data[k];
    sum += smooth_l1(r);
    out.grad.data[k] = smooth_l1_grad(r) * inv;
  }
  out.value = sum * inv;
  return out;
}

LossValue loss_cls(const Matrix& probs, std::span<const int> true_class, const LossWeights& weights) {
  if (true_class.size() != probs.rows) throw ArgumentError("one true class per positive is required");
  LossValue out{0.0, Matrix(probs.rows, probs.cols)};
  if (probs.rows == 0) return out;
  const double gamma = weights.gamma;
  const double inv = 1.0 / static_cast<double>(probs.rows);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    for (std::size_t j = 0; j < probs.cols; ++j) {
      const double p = probs(i, j);
      if (!(p > 0.0 && p <= 1.0)) {
        throw ArgumentError("probability out of range (0, 1] at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
    const int c = true_class[i];
    if (c < 0 || static_cast<std::size_t>(c) >= probs.cols) throw ArgumentError("true class index out of range");
    const auto col = static_cast<std::size_t>(c);
    const double alpha = weights.alpha.empty() ? 1.0 : weights.alpha.at(col);
    const double p = probs(i, col);
    const double q = 1.0 - p;
    const double logp = std::log(p);
    const double mod = std::pow(q, gamma);
    sum += -alpha * mod * logp;
    // d/dp of -alpha (1-p)^g ln p
    double dmod = 0.0;
    if (gamma != 0.0 && q > 0.0) dmod = -gamma * std::pow(q, gamma - 1.0);
    out.grad(i, col) = -alpha * (dmod * logp + mod / p) * inv;
  }
  out.value = sum * inv;
  return out;
}

LossValue loss_dir(const Matrix& logits, std::span<const int> dir_targets) {
  if (dir_targets.size() != logits.rows) throw ArgumentError("one direction target per positive is required");
  if (logits.rows > 0 && logits.cols != 2) throw ArgumentError("direction logits must have 2 columns");
  LossValue out{0.0, Matrix(logits.rows, logits.cols)};
  if (logits.rows == 0) return out;
  const double inv = 1.0 / static_cast<double>(logits.rows);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int t = dir_targets[i];
    if (t != 0 && t != 1) throw ArgumentError("direction target must be 0 or 1");
    const double a = logits(i, 0);
    const double b = logits(i, 1);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    sum += lse - logits(i, static_cast<std::size_t>(t));
    for (std::size_t k = 0; k < 2; ++k) {
      const double soft = std::exp(logits(i, k) - lse);
      out.grad(i, k) = (soft - (static_cast<int>(k) == t ? 1.0 : 0.0)) * inv;
    }
  }
  out.value = sum * inv;
  return out;
}

LossReport loss_total(const LossValue& bbox, const LossValue& cls, const LossValue& dir, const LossWeights& weights) {
  weights.validate();
  LossReport r;
  r.l_bbox = bbox.value;
  r.l_cls = cls.value;
  r.l_dir = dir.value;
  r.l_total = weights.beta_bbox * bbox.value + weights.beta_cls * cls.value + weights.beta_dir * dir.value;
  auto scaled = [](const Matrix& g, double s) {
    Matrix out = g;
    for (double& v : out.data) v *= s;
    return out;
  };
  r.grad_bbox = scaled(bbox.grad, weights.beta_bbox);
  r.grad_cls = scaled(cls.grad, weights.beta_cls);
  r.grad_dir = scaled(dir.grad, weights.beta_dir);
  return r;
}

Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x, double step) {
  Matrix g(x.rows, x.cols);
  Matrix probe = x;
  for (std::size_t k = 0; k < x.data.size(); ++k) {
    const double orig = x.data[k];
    probe.data[k] = orig + step;
    const double up = f(probe);
    probe.data[k] = orig - step;
    const double down = f(probe);
    probe.data[k] = orig;
    g.data[k] = (up - down) / (2.0 * step);
  }
  return g;
}

double max_relative_error(const Matrix& a, const Matrix& b) {
  if (a.data.size() != b.data.size()) throw ArgumentError("gradient shape mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    const double scale = std::max(std::abs(a.data[k]), std::abs(b.data[k]));
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(a.data[k] - b.data[k]) / scale);
  }
  return worst;
}

}  // namespace radar_mrf
