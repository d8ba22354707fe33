#pragma once

// Action prediction f_A, action embeddings f_E, and the two semi-supervised VAEs that share
// the inference network: one over state transitions, one over system responses.

#include "ssdial/core/errors.hpp"
#include "ssdial/core/layers.hpp"
#include "ssdial/core/rng.hpp"
#include "ssdial/core/tape.hpp"
#include "ssdial/env/render.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace ssdial {

struct ActionModelConfig {
  int embed_dim = 16;
  int latent_dim = 8;
  int hidden = 32;
  int token_dim = 16;
  int utterance_hidden = 16;
  double temperature = 1.0;
  double alpha = 1.0;         // classification-loss weight
  double entropy_sign = 1.0;  // +1 adds H(f_A) to the unlabeled bound, -1 subtracts it
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.1;  // learning rate decays linearly to this fraction by the last epoch
  double clip_norm = 5.0;
  int max_enumeration = 512;
  int placeholder_hidden = 64;
  int placeholder_epochs = 15;
  bool soft_enrichment = false;
  std::uint64_t seed = 1;
};

struct ActionModelDims {
  int vocab = 0;
  int state_width = 0;
  int num_actions = 0;
};

class ActionModel {
 public:
  ActionModel(ActionModelDims dims, ActionModelConfig cfg) : dims_(dims), cfg_(cfg), ps_(cfg.seed) {
    if (dims.vocab < 2 || dims.state_width < 1 || dims.num_actions < 1) throw ConfigError("ActionModel: bad dimensions");
    if (!(cfg.temperature > 0.0)) throw ConfigError("ActionModel: temperature must be positive");
    Rng rng(cfg.seed);
    const int d = cfg.embed_dim, z = cfg.latent_dim, h = cfg.hidden, uh = cfg.utterance_hidden;
    ps_.add("tok.emb", rng.normal_matrix(dims.vocab, cfg.token_dim) * 0.3);
    register_gru(ps_, "utt.gru", cfg.token_dim, uh, rng);
    ps_.add("embed.table", rng.normal_matrix(dims.num_actions, d) * 0.3);
    register_dense(ps_, "cls.h", uh + 2 * dims.state_width, h, rng);
    register_dense(ps_, "cls.out", h, d, rng);
    register_dense(ps_, "txt.h", 3 * uh, h, rng);
    register_dense(ps_, "txt.out", h, d, rng);
    register_dense(ps_, "inf.h", uh + d, h, rng);
    register_dense(ps_, "inf.out", h, 2 * z, rng, 0.1);
    register_dense(ps_, "dec.h", dims.state_width + z, h, rng);
    register_dense(ps_, "dec.out", h, dims.state_width, rng);
    register_dense(ps_, "rdec.h", z + 2 * uh, h, rng);
    register_dense(ps_, "rdec.out", h, dims.vocab, rng);
  }

  const ActionModelDims& dims() const { return dims_; }
  const ActionModelConfig& config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  /// Action embedding table, one row per action id.
  Matrix embedding_table() const { return ps_.at("embed.table").value; }

  /// Final hidden state of the token GRU for every utterance (empty ones read as "<none>").
  Var encode(Tape& tape, const std::vector<Utterance>& utts) {
    const auto n = static_cast<Eigen::Index>(utts.size());
    const Eigen::Index uh = cfg_.utterance_hidden;
    Var table = tape.param(ps_.at("tok.emb"));
    Var h = tape.constant(Matrix::Zero(n, uh));
    std::size_t longest = 1;
    for (const auto& u : utts) longest = std::max(longest, u.size());
    for (std::size_t p = 0; p < longest; ++p) {
      std::vector<int> ids(utts.size());
      Matrix mask = Matrix::Zero(n, uh);
      for (std::size_t i = 0; i < utts.size(); ++i) {
        const Utterance& u = utts[i];
        if (u.empty()) {
          ids[i] = Vocabulary::none;
          if (p == 0) mask.row(static_cast<Eigen::Index>(i)).setOnes();
        } else if (p < u.size()) {
          const int id = u[p];
          if (id < 0 || id >= dims_.vocab) throw DimensionError("encode: token id " + std::to_string(id) + " outside vocabulary");
          ids[i] = id;
          mask.row(static_cast<Eigen::Index>(i)).setOnes();
        } else {
          ids[i] = Vocabulary::pad;
        }
      }
      Var hn = gru_step(tape, ps_, "utt.gru", gather_rows(table, ids), h);
      h = add(h, mul_const(sub(hn, h), mask));
    }
    return h;
  }

  Var table(Tape& tape) { return tape.param(ps_.at("embed.table")); }

  /// Boltzmann log-probabilities log f_A(a | .) from a feature row g: e(a)^T g / gamma.
  Var action_log_probs(Tape& tape, Var g) {
    return log_softmax_rows(scale(matmul(g, transpose(table(tape))), 1.0 / cfg_.temperature));
  }

  /// g(u_t, s_t, s_{t+1}).
  Var context_features(Tape& tape, Var enc_u, Var s, Var s_next) {
    Var hcat = dense_forward(tape, ps_, "cls.h", concat_cols({enc_u, s, s_next}), Activation::tanh);
    return dense_forward(tape, ps_, "cls.out", hcat, Activation::identity);
  }

  /// Text-mode features from (u_{t-1}, u_t, u_{t+1}).
  Var text_features(Tape& tape, Var enc_prev, Var enc_u, Var enc_next) {
    Var hcat = dense_forward(tape, ps_, "txt.h", concat_cols({enc_prev, enc_u, enc_next}), Activation::tanh);
    return dense_forward(tape, ps_, "txt.out", hcat, Activation::identity);
  }

  /// q(z | u_t, e(a)).
  Gaussian infer(Tape& tape, Var enc_u, Var e_a) {
    Var hcat = dense_forward(tape, ps_, "inf.h", concat_cols({enc_u, e_a}), Activation::tanh);
    return gaussian_from_head(dense_forward(tape, ps_, "inf.out", hcat, Activation::identity));
  }

  /// Per-bit Bernoulli logits of p(s_{t+1} | s_t, z).
  Var transition_logits(Tape& tape, Var s, Var z) {
    Var hcat = dense_forward(tape, ps_, "dec.h", concat_cols({s, z}), Activation::tanh);
    return dense_forward(tape, ps_, "dec.out", hcat, Activation::identity);
  }

  /// Token log-probabilities of p(u_t | z, u_{t-1}, u_{t+1}); every position shares one categorical.
  Var response_log_probs(Tape& tape, Var z, Var enc_prev, Var enc_next) {
    Var hcat = dense_forward(tape, ps_, "rdec.h", concat_cols({z, enc_prev, enc_next}), Activation::tanh);
    return log_softmax_rows(dense_forward(tape, ps_, "rdec.out", hcat, Activation::identity));
  }

 private:
  ActionModelDims dims_;
  ActionModelConfig cfg_;
  ParamSet ps_;
};

/// Per-row bound pieces, each n x 1: bound = reconstruction - kl.
struct BoundRows {
  Var bound;
  Var reconstruction;
  Var kl;
};

namespace detail {

inline void require_enumerable(const ActionModel& m) {
  if (m.dims().num_actions > m.config().max_enumeration)
    throw ConfigError("exact enumeration over " + std::to_string(m.dims().num_actions) +
                      " actions refused (limit " + std::to_string(m.config().max_enumeration) + ")");
}

/// Row r of the B*A enumeration is (turn r / A, action r % A).
inline std::pair<std::vector<int>, std::vector<int>> enumeration_index(Eigen::Index batch, int actions) {
  std::vector<int> turn, action;
  turn.reserve(static_cast<std::size_t>(batch * actions));
  action.reserve(turn.capacity());
  for (Eigen::Index b = 0; b < batch; ++b)
    for (int a = 0; a < actions; ++a) {
      turn.push_back(static_cast<int>(b));
      action.push_back(a);
    }
  return {turn, action};
}

inline Matrix repeat_rows(const Matrix& m, int times) {
  Matrix out(m.rows() * times, m.cols());
  for (Eigen::Index b = 0; b < m.rows(); ++b)
    for (int k = 0; k < times; ++k) out.row(b * times + k) = m.row(b);
  return out;
}

/// sum_a p(a) L_a + sign * H(p), rows of `bounds` laid out as the enumeration above.
inline Var expect_over_actions(Var bounds_flat, Var log_probs, double entropy_sign) {
  const Eigen::Index b = log_probs.rows(), a = log_probs.cols();
  Var table = reshape(bounds_flat, b, a);
  Var expectation = row_sum(mul(exp(log_probs), table));
  return add(expectation, scale(entropy_rows(log_probs), entropy_sign));
}

}  // namespace detail

/// Transition bound L(s_{t+1}, s_t, a) with one reparameterized sample per row.
inline BoundRows labeled_bound_rows(Tape& tape, ActionModel& m, Var enc_u, Var e_a, const Matrix& s, const Matrix& s_next,
                                    const Matrix& noise) {
  Gaussian q = m.infer(tape, enc_u, e_a);
  Var z = reparam_sample(q, noise);
  Var rec = bernoulli_log_likelihood(m.transition_logits(tape, tape.constant(s), z), s_next);
  Var kl = standard_normal_kl(q);
  return {sub(rec, kl), rec, kl};
}

/// Unlabeled transition bound: exact expectation over A under `log_probs` plus the entropy term.
/// `noise` holds one sample per turn, shared by all enumerated actions of that turn.
inline Var unlabeled_bound_rows(Tape& tape, ActionModel& m, Var enc_u, Var log_probs, const Matrix& s,
                                const Matrix& s_next, const Matrix& noise) {
  detail::require_enumerable(m);
  const int a = m.dims().num_actions;
  const auto [turn, action] = detail::enumeration_index(enc_u.rows(), a);
  BoundRows rows = labeled_bound_rows(tape, m, gather_rows(enc_u, turn), gather_rows(m.table(tape), action),
                                      detail::repeat_rows(s, a), detail::repeat_rows(s_next, a),
                                      detail::repeat_rows(noise, a));
  return detail::expect_over_actions(rows.bound, log_probs, m.config().entropy_sign);
}

/// Bag of token counts of each utterance, n x V.
inline Matrix token_counts(const std::vector<Utterance>& utts, int vocab) {
  Matrix c = Matrix::Zero(static_cast<Eigen::Index>(utts.size()), vocab);
  for (std::size_t i = 0; i < utts.size(); ++i)
    for (int id : utts[i]) c(static_cast<Eigen::Index>(i), id) += 1.0;
  return c;
}

/// Response bound: token log-likelihood of u_t given (z, u_{t-1}, u_{t+1}) minus KL.
inline BoundRows response_labeled_bound_rows(Tape& tape, ActionModel& m, Var enc_u, Var enc_prev, Var enc_next, Var e_a,
                                             const Matrix& counts, const Matrix& noise) {
  Gaussian q = m.infer(tape, enc_u, e_a);
  Var z = reparam_sample(q, noise);
  Var rec = row_sum(mul_const(m.response_log_probs(tape, z, enc_prev, enc_next), counts));
  Var kl = standard_normal_kl(q);
  return {sub(rec, kl), rec, kl};
}

inline Var response_unlabeled_bound_rows(Tape& tape, ActionModel& m, Var enc_u, Var enc_prev, Var enc_next,
                                         Var log_probs, const Matrix& counts, const Matrix& noise) {
  detail::require_enumerable(m);
  const int a = m.dims().num_actions;
  const auto [turn, action] = detail::enumeration_index(enc_u.rows(), a);
  BoundRows rows = response_labeled_bound_rows(tape, m, gather_rows(enc_u, turn), gather_rows(enc_prev, turn),
                                               gather_rows(enc_next, turn), gather_rows(m.table(tape), action),
                                               detail::repeat_rows(counts, a), detail::repeat_rows(noise, a));
  return detail::expect_over_actions(rows.bound, log_probs, m.config().entropy_sign);
}

/// Mean negative log-probability of the labelled actions.
inline Var classification_loss(Var log_probs, const std::vector<int>& actions) {
  Matrix onehot = Matrix::Zero(log_probs.rows(), log_probs.cols());
  for (std::size_t i = 0; i < actions.size(); ++i) onehot(static_cast<Eigen::Index>(i), actions[i]) = 1.0;
  return scale(sum(mul_const(log_probs, onehot)), -1.0 / static_cast<double>(actions.size()));
}

}  // namespace ssdial
