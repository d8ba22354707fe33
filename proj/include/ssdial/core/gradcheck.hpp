#pragma once

#include "ssdial/core/params.hpp"
#include "ssdial/core/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace ssdial {

/// Scalar objective evaluated on a fresh tape; must be deterministic given the parameters.
using Objective = std::function<Var(Tape&, ParamSet&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries = 0;
};

/// Central finite differences against the tape gradient for every parameter entry.
/// Error per entry: |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline GradCheckResult grad_check_detailed(const Objective& objective, ParamSet& params, double epsilon = 1e-5) {
  params.zero_grad();
  {
    Tape tape;
    Var out = objective(tape, params);
    tape.backward(out);
  }
  GradCheckResult res;
  auto eval = [&]() {
    Tape tape;
    return objective(tape, params).scalar();
  };
  for (auto& [name, p] : params.entries()) {
    const Matrix analytic = p.grad;
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + epsilon;
      const double fp = eval();
      x = saved - epsilon;
      const double fm = eval();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic.data()[k];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++res.entries;
      if (err > res.max_rel_err || res.worst_index < 0) {
        if (err >= res.max_rel_err) {
          res.max_rel_err = err;
          res.worst_param = name;
          res.worst_index = k;
          res.analytic = a;
          res.numeric = numeric;
        }
      }
    }
  }
  return res;
}

inline double grad_check(const Objective& objective, ParamSet& params, double epsilon = 1e-5) {
  return grad_check_detailed(objective, params, epsilon).max_rel_err;
}

}  // namespace ssdial
