#pragma once

#include "ssdial/core/params.hpp"

#include <cmath>
#include <map>
#include <string>

namespace ssdial {

/// Adaptive first/second-moment optimizer with bias correction. Performs gradient
/// *descent*; callers maximizing an objective back-propagate its negation.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                double clip_norm = 0.0)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), clip_norm_(clip_norm) {}

  void step(ParamSet& ps) {
    ++t_;
    double scale = 1.0;
    if (clip_norm_ > 0.0) {
      double sq = 0.0;
      for (const auto& [_, p] : ps.entries()) sq += p.grad.squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > clip_norm_) scale = clip_norm_ / norm;
    }
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : ps.entries()) {
      auto& [m, v] = moments_[name];
      if (m.size() == 0) {
        m = Matrix::Zero(p.value.rows(), p.value.cols());
        v = Matrix::Zero(p.value.rows(), p.value.cols());
      }
      const Matrix g = p.grad * scale;
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
      p.value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }
  }

  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, clip_norm_;
  long t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

}  // namespace ssdial
