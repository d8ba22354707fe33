#pragma once

#include "ssdial/core/errors.hpp"
#include "ssdial/core/params.hpp"
#include "ssdial/core/rng.hpp"
#include "ssdial/core/tape.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ssdial {

enum class Activation { identity, tanh, sigmoid };

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;

/// Glorot-uniform weights, zero bias. Weights are stored input-major: y = x W + b.
inline void register_dense(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                           double gain = 1.0) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (Eigen::Index i = 0; i < in; ++i)
    for (Eigen::Index j = 0; j < out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
  ps.add(name + ".W", std::move(w));
  ps.add(name + ".b", Matrix::Zero(1, out));
}

inline Var apply_activation(Var x, Activation act) {
  switch (act) {
    case Activation::tanh:
      return tanh(x);
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::identity:
      break;
  }
  return x;
}

/// x W + b followed by `act`. Input is batch x in.
inline Var dense_forward(Tape& tape, ParamSet& ps, const std::string& name, Var input,
                         Activation act = Activation::identity) {
  Parameter& w = ps.at(name + ".W");
  Parameter& b = ps.at(name + ".b");
  if (input.cols() != w.value.rows())
    throw DimensionError("dense layer '" + name + "': expects input width " + std::to_string(w.value.rows()) +
                         ", got " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()));
  Var y = add_row(matmul(input, tape.param(w)), tape.param(b));
  return apply_activation(y, act);
}

/// Gated recurrent cell: reset r, update u, candidate n;
///   h' = (1 - u) * n + u * h,  n = tanh(x Wi_n + bi_n + r * (h Wh_n + bh_n)).
/// Gate blocks are packed [r | u | n] along the columns.
inline void register_gru(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  const double li = std::sqrt(6.0 / static_cast<double>(in + hidden));
  const double lh = std::sqrt(6.0 / static_cast<double>(2 * hidden));
  Matrix wi(in, 3 * hidden), wh(hidden, 3 * hidden);
  for (Eigen::Index i = 0; i < wi.size(); ++i) wi.data()[i] = (2.0 * rng.uniform() - 1.0) * li;
  for (Eigen::Index i = 0; i < wh.size(); ++i) wh.data()[i] = (2.0 * rng.uniform() - 1.0) * lh;
  ps.add(name + ".Wi", std::move(wi));
  ps.add(name + ".Wh", std::move(wh));
  ps.add(name + ".bi", Matrix::Zero(1, 3 * hidden));
  ps.add(name + ".bh", Matrix::Zero(1, 3 * hidden));
}

inline Var gru_step(Tape& tape, ParamSet& ps, const std::string& name, Var input, Var hidden) {
  Parameter& wi = ps.at(name + ".Wi");
  Parameter& wh = ps.at(name + ".Wh");
  const Eigen::Index h = wh.value.rows();
  if (input.cols() != wi.value.rows() || hidden.cols() != h || input.rows() != hidden.rows())
    throw DimensionError("gru cell '" + name + "': expects input width " + std::to_string(wi.value.rows()) +
                         " and hidden width " + std::to_string(h) + ", got " + std::to_string(input.rows()) + "x" +
                         std::to_string(input.cols()) + " and " + std::to_string(hidden.rows()) + "x" +
                         std::to_string(hidden.cols()));
  Var gi = add_row(matmul(input, tape.param(wi)), tape.param(ps.at(name + ".bi")));
  Var gh = add_row(matmul(hidden, tape.param(wh)), tape.param(ps.at(name + ".bh")));
  Var r = sigmoid(add(slice_cols(gi, 0, h), slice_cols(gh, 0, h)));
  Var u = sigmoid(add(slice_cols(gi, h, h), slice_cols(gh, h, h)));
  Var n = tanh(add(slice_cols(gi, 2 * h, h), mul(r, slice_cols(gh, 2 * h, h))));
  // (1 - u) * n + u * h == n + u * (h - n)
  return add(n, mul(u, sub(hidden, n)));
}

/// Diagonal Gaussian over rows (one distribution per row).
struct Gaussian {
  Var mean;
  Var log_variance;
};

/// Builds a Gaussian, clamping the log-variance into [-20, 20].
inline Gaussian make_gaussian(Var mean, Var raw_log_variance) {
  detail::require_same_shape("make_gaussian", mean, raw_log_variance);
  return {mean, clamp(raw_log_variance, kLogVarMin, kLogVarMax)};
}

/// Head of width 2k split into (mean, log-variance).
inline Gaussian gaussian_from_head(Var head) {
  const Eigen::Index k = head.cols() / 2;
  if (head.cols() != 2 * k) throw DimensionError("gaussian head must have even width");
  return make_gaussian(slice_cols(head, 0, k), slice_cols(head, k, k));
}

inline Gaussian standard_normal(Tape& tape, Eigen::Index rows, Eigen::Index dim) {
  return {tape.constant(Matrix::Zero(rows, dim)), tape.constant(Matrix::Zero(rows, dim))};
}

/// Closed-form KL(q || p) per row, n x 1.
inline Var gaussian_kl(const Gaussian& q, const Gaussian& p) {
  detail::require_same_shape("gaussian_kl", q.mean, p.mean);
  detail::require_same_shape("gaussian_kl", q.log_variance, p.log_variance);
  // 0.5 * sum(lv_p - lv_q + (exp(lv_q) + (mu_q - mu_p)^2) / exp(lv_p) - 1)
  Var diff = sub(q.mean, p.mean);
  Var inv_var_p = exp(neg(p.log_variance));
  Var ratio = mul(add(exp(q.log_variance), square(diff)), inv_var_p);
  Var terms = add_scalar(add(sub(p.log_variance, q.log_variance), ratio), -1.0);
  return scale(row_sum(terms), 0.5);
}

/// KL(q || N(0, I)) per row.
inline Var standard_normal_kl(const Gaussian& q) {
  Var terms = add_scalar(sub(add(exp(q.log_variance), square(q.mean)), q.log_variance), -1.0);
  return scale(row_sum(terms), 0.5);
}

/// mean + exp(log_variance / 2) * noise, noise supplied by the caller.
inline Var reparam_sample(const Gaussian& g, const Matrix& noise) {
  if (noise.rows() != g.mean.rows() || noise.cols() != g.mean.cols())
    throw DimensionError("reparam_sample: noise " + detail::shape_str(noise) + " vs mean " +
                         detail::shape_str(g.mean.value()));
  return add(g.mean, mul_const(exp(scale(g.log_variance, 0.5)), noise));
}

/// log N(x; mean, diag(exp(log_variance))) per row, n x 1.
inline Var gaussian_log_density(const Gaussian& g, Var x) {
  detail::require_same_shape("gaussian_log_density", g.mean, x);
  const double d = static_cast<double>(x.cols());
  Var maha = mul(square(sub(x, g.mean)), exp(neg(g.log_variance)));
  Var s = row_sum(add(maha, g.log_variance));
  return add_scalar(scale(s, -0.5), -0.5 * d * std::log(2.0 * std::numbers::pi));
}

/// sum_j [x_j * l_j - softplus(l_j)] per row for binary targets x.
inline Var bernoulli_log_likelihood(Var logits, const Matrix& targets) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
    throw DimensionError("bernoulli_log_likelihood: targets " + detail::shape_str(targets) + " vs logits " +
                         detail::shape_str(logits.value()));
  return row_sum(sub(mul_const(logits, targets), softplus(logits)));
}

/// Row-wise entropy of a probability matrix given its log-probabilities, n x 1.
inline Var entropy_rows(Var log_probs) { return neg(row_sum(mul(exp(log_probs), log_probs))); }

/// Boltzmann distribution over logits at temperature `temperature` (rows are independent).
inline Var softmax_logits(Var logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_logits: temperature must be positive");
  if (!logits.value().allFinite()) throw NumericError("softmax_logits: non-finite logit");
  return softmax_rows(scale(logits, 1.0 / temperature));
}

// Value-level conveniences (no tape exposed to the caller).

struct GaussianParams {
  Vector mean;
  Vector log_variance;
};

inline GaussianParams clamp_gaussian(GaussianParams g) {
  g.log_variance = g.log_variance.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return g;
}

inline double gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
  if (q.mean.size() != p.mean.size() || q.log_variance.size() != q.mean.size() ||
      p.log_variance.size() != p.mean.size())
    throw DimensionError("gaussian_kl: dimension mismatch " + std::to_string(q.mean.size()) + " vs " +
                         std::to_string(p.mean.size()));
  const GaussianParams qc = clamp_gaussian(q), pc = clamp_gaussian(p);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < qc.mean.size(); ++i) {
    const double d = qc.mean[i] - pc.mean[i];
    kl += pc.log_variance[i] - qc.log_variance[i] +
          (std::exp(qc.log_variance[i]) + d * d) * std::exp(-pc.log_variance[i]) - 1.0;
  }
  return 0.5 * kl;
}

inline Vector reparam_sample(const GaussianParams& g, const Vector& noise) {
  if (noise.size() != g.mean.size()) throw DimensionError("reparam_sample: noise/mean size mismatch");
  const GaussianParams c = clamp_gaussian(g);
  return c.mean + ((0.5 * c.log_variance.array()).exp() * noise.array()).matrix();
}

inline double gaussian_log_density(const GaussianParams& g, const Vector& x) {
  const GaussianParams c = clamp_gaussian(g);
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - c.mean[i];
    s += d * d * std::exp(-c.log_variance[i]) + c.log_variance[i];
  }
  return -0.5 * s - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

inline Matrix apply_activation(Matrix x, Activation act) {
  switch (act) {
    case Activation::tanh:
      return x.array().tanh().matrix();
    case Activation::sigmoid:
      return x.unaryExpr([](double v) { return detail::sigmoid(v); });
    case Activation::identity:
      break;
  }
  return x;
}

/// Tape-free dense layer for read-only scoring.
inline Matrix dense_value(const ParamSet& ps, const std::string& name, const Matrix& input,
                          Activation act = Activation::identity) {
  const Matrix& w = ps.at(name + ".W").value;
  if (input.cols() != w.rows())
    throw DimensionError("dense layer '" + name + "': expects input width " + std::to_string(w.rows()) + ", got " +
                         std::to_string(input.cols()));
  Matrix y = input * w;
  y.rowwise() += ps.at(name + ".b").value.row(0);
  return apply_activation(std::move(y), act);
}

/// Tape-free gated recurrent step, same packing as gru_step.
inline Matrix gru_value(const ParamSet& ps, const std::string& name, const Matrix& input, const Matrix& hidden) {
  const Matrix& wi = ps.at(name + ".Wi").value;
  const Matrix& wh = ps.at(name + ".Wh").value;
  const Eigen::Index h = wh.rows();
  if (input.cols() != wi.rows() || hidden.cols() != h || input.rows() != hidden.rows())
    throw DimensionError("gru cell '" + name + "': input/hidden shape mismatch");
  Matrix gi = input * wi, gh = hidden * wh;
  gi.rowwise() += ps.at(name + ".bi").value.row(0);
  gh.rowwise() += ps.at(name + ".bh").value.row(0);
  const auto sig = [](double v) { return detail::sigmoid(v); };
  const Matrix r = (gi.leftCols(h) + gh.leftCols(h)).unaryExpr(sig);
  const Matrix u = (gi.middleCols(h, h) + gh.middleCols(h, h)).unaryExpr(sig);
  const Matrix n = (gi.rightCols(h).array() + r.array() * gh.rightCols(h).array()).tanh().matrix();
  return n + u.cwiseProduct(hidden - n);
}

inline Vector softmax_logits(const Vector& logits, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_logits: temperature must be positive");
  if (!logits.allFinite()) throw NumericError("softmax_logits: non-finite logit");
  if (logits.size() == 0) return logits;
  const Vector z = logits / temperature;
  const double m = z.maxCoeff();
  Vector e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

inline Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

}  // namespace ssdial
