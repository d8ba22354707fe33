#pragma once

// Variational recurrent dynamics model over action embeddings and the per-turn reward it induces.

#include "ssdial/action/train.hpp"
#include "ssdial/core/errors.hpp"
#include "ssdial/core/layers.hpp"
#include "ssdial/core/optim.hpp"
#include "ssdial/core/serialize.hpp"

#include <json.hpp>

#include <algorithm>
#include <string>
#include <vector>

namespace ssdial {

enum class VrnnMode { full, deterministic_only, stochastic_only };
enum class VrnnInput { embedding, one_hot };

inline std::string vrnn_mode_name(VrnnMode m) {
  switch (m) {
    case VrnnMode::deterministic_only:
      return "deterministic-only";
    case VrnnMode::stochastic_only:
      return "stochastic-only";
    case VrnnMode::full:
      break;
  }
  return "full";
}

inline VrnnMode vrnn_mode_from_name(const std::string& s) {
  if (s == "full") return VrnnMode::full;
  if (s == "deterministic-only") return VrnnMode::deterministic_only;
  if (s == "stochastic-only") return VrnnMode::stochastic_only;
  throw ConfigError("unknown vrnn mode '" + s + "' (full, deterministic-only, stochastic-only)");
}

struct VrnnConfig {
  int latent_dim = 8;
  int hidden_dim = 32;
  int mlp_hidden = 32;
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 3e-3;
  double final_lr_fraction = 0.1;
  double clip_norm = 5.0;
  int samples = 1;
  double decoder_min_log_variance = -2.0;  // soft floor; a zero head still means unit variance
  VrnnMode mode = VrnnMode::full;
  VrnnInput input = VrnnInput::embedding;
  std::uint64_t seed = 1;
};

/// Which z the running state last carried.
enum class LatentTag { none, prior, posterior };

struct VrnnState {
  Vector h;
  GaussianParams z;
  LatentTag tag = LatentTag::none;
  int steps = 0;
  bool initialized = false;
};

/// One trajectory as the model consumes it: states s_t, inputs x_t (embedding or one-hot row) and action ids.
struct VrnnSequence {
  Matrix states;
  Matrix inputs;
  std::vector<int> actions;
  Eigen::Index size() const { return states.rows(); }
};

/// phi_prior(h), phi_enc(h, x), phi_dec(z, h, s) and a GRU over [x, z, s]. The action table
/// (embeddings, or the identity for one-hot inputs) is fixed and only read.
class Vrnn {
 public:
  Vrnn(Matrix table, int state_width, VrnnConfig cfg)
      : table_(std::move(table)), state_width_(state_width), cfg_(cfg), ps_(cfg.seed) {
    if (table_.rows() < 1 || table_.cols() < 1 || state_width < 1) throw ConfigError("Vrnn: bad dimensions");
    if (cfg.latent_dim < 1 || cfg.hidden_dim < 1 || cfg.mlp_hidden < 1 || cfg.samples < 1)
      throw ConfigError("Vrnn: widths and samples must be positive");
    if (!(cfg.decoder_min_log_variance < 0.0)) throw ConfigError("Vrnn: decoder log-variance floor must be negative");
    Rng rng(cfg.seed);
    const Eigen::Index d = table_.cols(), z = cfg.latent_dim, h = cfg.hidden_dim, m = cfg.mlp_hidden;
    register_dense(ps_, "prior.h", h, m, rng);
    register_dense(ps_, "prior.out", m, 2 * z, rng, 0.1);
    register_dense(ps_, "enc.h", h + d, m, rng);
    register_dense(ps_, "enc.out", m, 2 * z, rng, 0.1);
    register_dense(ps_, "dec.h", z + h + state_width, m, rng);
    register_dense(ps_, "dec.out", m, 2 * d, rng, 0.1);
    register_gru(ps_, "rnn", d + z + state_width, h, rng);
  }

  const Matrix& table() const { return table_; }
  int num_actions() const { return static_cast<int>(table_.rows()); }
  int input_dim() const { return static_cast<int>(table_.cols()); }
  int state_width() const { return state_width_; }
  const VrnnConfig& config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  Gaussian prior(Tape& tape, Var h) {
    return gaussian_from_head(dense_forward(tape, ps_, "prior.out", dense_forward(tape, ps_, "prior.h", h, Activation::tanh)));
  }
  Gaussian posterior(Tape& tape, Var h, Var x) {
    Var hid = dense_forward(tape, ps_, "enc.h", concat_cols({h, x}), Activation::tanh);
    return gaussian_from_head(dense_forward(tape, ps_, "enc.out", hid));
  }
  Gaussian decode(Tape& tape, Var z, Var h, Var s) {
    Var hid = dense_forward(tape, ps_, "dec.h", concat_cols({z, h, s}), Activation::tanh);
    Var head = dense_forward(tape, ps_, "dec.out", hid);
    const Eigen::Index d = head.cols() / 2;
    const double floor = cfg_.decoder_min_log_variance;
    Var lv = add_scalar(softplus(add_scalar(slice_cols(head, d, d), floor_shift())), floor);
    return make_gaussian(slice_cols(head, 0, d), lv);
  }
  Var recur(Tape& tape, Var x, Var z, Var h, Var s) { return gru_step(tape, ps_, "rnn", concat_cols({x, z, s}), h); }

  // Tape-free counterparts used for scoring.
  GaussianParams prior_step(const Vector& h) const {
    return split_head(dense_value(ps_, "prior.out", dense_value(ps_, "prior.h", h.transpose(), Activation::tanh)));
  }
  GaussianParams posterior_step(const Vector& h, const Vector& x) const {
    RowVector in(h.size() + x.size());
    in << h.transpose(), x.transpose();
    return split_head(dense_value(ps_, "enc.out", dense_value(ps_, "enc.h", in, Activation::tanh)));
  }
  GaussianParams decode_step(const Vector& z, const Vector& h, const Vector& s) const {
    RowVector in(z.size() + h.size() + s.size());
    in << z.transpose(), h.transpose(), s.transpose();
    Matrix head = dense_value(ps_, "dec.out", dense_value(ps_, "dec.h", in, Activation::tanh));
    const Eigen::Index d = head.cols() / 2;
    const double floor = cfg_.decoder_min_log_variance, shift = floor_shift();
    head.rightCols(d) = head.rightCols(d).unaryExpr([=](double v) { return floor + detail::softplus(v + shift); });
    return split_head(head);
  }
  Vector recur_step(const Vector& x, const Vector& z, const Vector& h, const Vector& s) const {
    RowVector in(x.size() + z.size() + s.size());
    in << x.transpose(), z.transpose(), s.transpose();
    return gru_value(ps_, "rnn", in, h.transpose()).row(0).transpose();
  }

 private:
  // Decoder log-variance is floor + softplus(raw + shift), with the shift chosen so raw 0 maps to 0.
  double floor_shift() const { return std::log(std::expm1(-cfg_.decoder_min_log_variance)); }

  static GaussianParams split_head(const Matrix& head) {
    const Eigen::Index k = head.cols() / 2;
    return clamp_gaussian({head.row(0).head(k).transpose(), head.row(0).tail(k).transpose()});
  }

  Matrix table_;
  int state_width_;
  VrnnConfig cfg_;
  ParamSet ps_;
};

/// Turns enriched dialogues into model sequences; one-hot inputs use the (predicted) action id.
inline std::vector<VrnnSequence> vrnn_sequences(const EnrichedCorpus& corpus, VrnnInput input, int num_actions) {
  std::vector<VrnnSequence> out;
  for (const auto& d : corpus) {
    if (d.turns.empty()) continue;
    const auto n = static_cast<Eigen::Index>(d.turns.size());
    const Eigen::Index sw = d.turns.front().state.size();
    const Eigen::Index iw = input == VrnnInput::one_hot ? num_actions : d.turns.front().embedding.size();
    VrnnSequence seq{Matrix(n, sw), Matrix::Zero(n, iw), {}};
    for (Eigen::Index t = 0; t < n; ++t) {
      const EnrichedTurn& et = d.turns[static_cast<std::size_t>(t)];
      if (et.state.size() != sw) throw DimensionError("vrnn_sequences: inconsistent state width");
      seq.states.row(t) = et.state.transpose();
      if (input == VrnnInput::one_hot) {
        if (et.action < 0 || et.action >= num_actions) throw DimensionError("vrnn_sequences: action id out of range");
        seq.inputs(t, et.action) = 1.0;
      } else {
        if (et.embedding.size() != iw) throw DimensionError("vrnn_sequences: inconsistent embedding width");
        seq.inputs.row(t) = et.embedding.transpose();
      }
      seq.actions.push_back(et.action);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

/// Action table the model reads: the learned embeddings, or the identity for one-hot inputs.
inline Matrix vrnn_table(const Matrix& embeddings, VrnnInput input) {
  if (input == VrnnInput::one_hot) return Matrix::Identity(embeddings.rows(), embeddings.rows());
  return embeddings;
}

struct ElboTerms {
  Var elbo;  // mean over sequences of sum_t (reconstruction - kl)
  double reconstruction = 0;
  double kl = 0;
  std::vector<double> step_kl;  // every unmasked per-step KL, in (step, row) order
};

/// Batched ELBO with one frozen noise matrix per step (rows = sequences, cols = latent width).
inline ElboTerms elbo_terms(Tape& tape, Vrnn& m, const std::vector<const VrnnSequence*>& batch,
                            const std::vector<Matrix>& noise) {
  if (batch.empty()) throw ConfigError("elbo: empty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  Eigen::Index longest = 0;
  for (const auto* s : batch) {
    if (s->size() == 0) throw ConfigError("elbo: empty trajectory");
    if (s->inputs.cols() != m.input_dim() || s->states.cols() != m.state_width())
      throw DimensionError("elbo: sequence widths do not match the model");
    longest = std::max(longest, s->size());
  }
  const VrnnMode mode = m.config().mode;
  const bool needs_noise = mode != VrnnMode::deterministic_only;
  if (needs_noise && static_cast<Eigen::Index>(noise.size()) < longest)
    throw DimensionError("elbo: need one noise matrix per step");

  ElboTerms out;
  Var h = tape.constant(Matrix::Zero(b, m.config().hidden_dim));
  Var total = tape.scalar_constant(0.0);
  double rec_total = 0, kl_total = 0;
  for (Eigen::Index t = 0; t < longest; ++t) {
    Matrix x = Matrix::Zero(b, m.input_dim()), s = Matrix::Zero(b, m.state_width()), mask = Matrix::Zero(b, 1);
    for (Eigen::Index i = 0; i < b; ++i) {
      const VrnnSequence& q = *batch[static_cast<std::size_t>(i)];
      if (t >= q.size()) continue;
      x.row(i) = q.inputs.row(t);
      s.row(i) = q.states.row(t);
      mask(i, 0) = 1.0;
    }
    Var xv = tape.constant(x), sv = tape.constant(s);
    Gaussian prior = m.prior(tape, h);
    Var z, kl;
    if (mode == VrnnMode::deterministic_only) {
      z = prior.mean;
    } else {
      const Matrix& eps = noise[static_cast<std::size_t>(t)];
      if (eps.rows() != b || eps.cols() != m.config().latent_dim) throw DimensionError("elbo: noise shape mismatch");
      Gaussian post = m.posterior(tape, h, xv);
      z = reparam_sample(post, eps);
      kl = mul_const(gaussian_kl(post, prior), mask);
    }
    Var rec = mul_const(gaussian_log_density(m.decode(tape, z, h, sv), xv), mask);
    Var step = kl.valid() ? sub(rec, kl) : rec;
    total = add(total, sum(step));
    rec_total += rec.value().sum();
    if (kl.valid()) {
      kl_total += kl.value().sum();
      for (Eigen::Index i = 0; i < b; ++i)
        if (mask(i, 0) > 0) out.step_kl.push_back(kl.value()(i, 0));
    }
    if (mode != VrnnMode::stochastic_only) {
      Var hn = m.recur(tape, xv, z, h, sv);
      h = add(h, mul_const(sub(hn, h), mask.replicate(1, m.config().hidden_dim)));
    }
  }
  const double inv = 1.0 / static_cast<double>(b);
  out.elbo = scale(total, inv);
  out.reconstruction = rec_total * inv;
  out.kl = kl_total * inv;
  return out;
}

/// ELBO of a single trajectory; `noise` is steps x latent.
inline double elbo(Vrnn& m, const VrnnSequence& seq, const Matrix& noise) {
  std::vector<Matrix> per_step;
  for (Eigen::Index t = 0; t < noise.rows(); ++t) per_step.push_back(noise.row(t));
  Tape tape;
  return elbo_terms(tape, m, {&seq}, per_step).elbo.scalar();
}

inline std::vector<Matrix> draw_step_noise(Eigen::Index steps, Eigen::Index rows, int latent, Rng& rng) {
  std::vector<Matrix> out;
  for (Eigen::Index t = 0; t < steps; ++t) out.push_back(rng.normal_matrix(rows, latent));
  return out;
}

struct VrnnEpochLog {
  int epoch = 0;
  double elbo = 0, reconstruction = 0, kl = 0;  // per sequence, on the fixed monitor sample
  double train_elbo = 0;                        // mean minibatch value during the epoch
};

struct TrainedVrnn {
  Vrnn model;
  double initial_elbo = 0;
  std::vector<VrnnEpochLog> log;
};

inline constexpr std::size_t kVrnnMonitorSequences = 128;

/// Maximizes the mean per-trajectory ELBO; `samples` reparameterized draws are averaged per step.
inline TrainedVrnn train_vrnn(const std::vector<VrnnSequence>& data, Matrix table, int state_width,
                              const VrnnConfig& cfg) {
  if (data.empty()) throw ConfigError("train_vrnn: empty corpus");
  TrainedVrnn out{Vrnn(std::move(table), state_width, cfg), 0.0, {}};
  Vrnn& m = out.model;
  Rng rng(derive_seed(cfg.seed, 301));
  Adam opt(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip_norm);

  auto longest = [](const std::vector<const VrnnSequence*>& b) {
    Eigen::Index n = 0;
    for (const auto* s : b) n = std::max(n, s->size());
    return n;
  };
  auto evaluate = [&](Tape& tape, const std::vector<const VrnnSequence*>& b, const std::vector<std::vector<Matrix>>& noise) {
    ElboTerms acc;
    Var total;
    for (const auto& draw : noise) {
      ElboTerms t = elbo_terms(tape, m, b, draw);
      total = total.valid() ? add(total, t.elbo) : t.elbo;
      acc.reconstruction += t.reconstruction / static_cast<double>(noise.size());
      acc.kl += t.kl / static_cast<double>(noise.size());
    }
    acc.elbo = scale(total, 1.0 / static_cast<double>(noise.size()));
    return acc;
  };
  auto draw = [&](const std::vector<const VrnnSequence*>& b, Rng& r) {
    std::vector<std::vector<Matrix>> noise;
    for (int k = 0; k < cfg.samples; ++k)
      noise.push_back(draw_step_noise(longest(b), static_cast<Eigen::Index>(b.size()), cfg.latent_dim, r));
    return noise;
  };

  std::vector<const VrnnSequence*> monitor;
  std::vector<std::vector<Matrix>> monitor_noise;
  {
    Rng mrng(derive_seed(cfg.seed, 302));
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    mrng.shuffle(idx.begin(), idx.end());
    for (std::size_t i = 0; i < std::min(idx.size(), kVrnnMonitorSequences); ++i) monitor.push_back(&data[idx[i]]);
    monitor_noise = draw(monitor, mrng);
    Tape tape;
    out.initial_elbo = evaluate(tape, monitor, monitor_noise).elbo.scalar();
  }

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  for (int e = 0; e < cfg.epochs; ++e) {
    const double progress = cfg.epochs > 1 ? static_cast<double>(e) / (cfg.epochs - 1) : 0.0;
    opt.set_learning_rate(cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * progress));
    rng.shuffle(order.begin(), order.end());
    VrnnEpochLog log;
    log.epoch = e + 1;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<const VrnnSequence*> b;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) b.push_back(&data[order[i]]);
      Tape tape;
      ElboTerms t = evaluate(tape, b, draw(b, rng));
      tape.backward(t.elbo, -1.0);
      opt.step(m.params());
      m.params().zero_grad();
      log.train_elbo += t.elbo.scalar();
      ++steps;
    }
    log.train_elbo /= steps;
    Tape tape;
    const ElboTerms t = evaluate(tape, monitor, monitor_noise);
    log.elbo = t.elbo.scalar();
    log.reconstruction = t.reconstruction;
    log.kl = t.kl;
    out.log.push_back(log);
  }
  if (!m.params().all_finite()) throw NumericError("vrnn diverged (non-finite parameters)");
  return out;
}

// ------------------------------------------------------------------ reward

inline VrnnState initial_state(const Vrnn& m) {
  VrnnState s;
  s.h = Vector::Zero(m.config().hidden_dim);
  s.initialized = true;
  return s;
}

/// log p(a' | h, s) for every action: decoder log-density of each table row, normalized over the table.
/// The scored step uses the prior mean of z, so the action being scored is never seen.
inline Vector action_log_probs(const Vrnn& m, const VrnnState& st, const Vector& s) {
  if (!st.initialized) throw StateError("vrnn state used before initial_state()");
  if (s.size() != m.state_width()) throw DimensionError("vrnn reward: state width mismatch");
  const GaussianParams prior = m.prior_step(st.h);
  const GaussianParams dec = m.decode_step(prior.mean, st.h, s);
  Vector scores(m.num_actions());
  for (int a = 0; a < m.num_actions(); ++a) scores[a] = gaussian_log_density(dec, m.table().row(a).transpose());
  return log_softmax(scores);
}

/// Advances the filter with an observed input row x (posterior mean, or prior mean when z is deterministic).
inline void advance(const Vrnn& m, VrnnState& st, const Vector& x, const Vector& s) {
  if (!st.initialized) throw StateError("vrnn state used before initial_state()");
  const VrnnMode mode = m.config().mode;
  if (mode == VrnnMode::deterministic_only) {
    st.z = m.prior_step(st.h);
    st.tag = LatentTag::prior;
  } else {
    st.z = m.posterior_step(st.h, x);
    st.tag = LatentTag::posterior;
  }
  if (mode != VrnnMode::stochastic_only) st.h = m.recur_step(x, st.z.mean, st.h, s);
  ++st.steps;
}

struct RewardStep {
  double reward = 0;
  Vector log_probs;
};

/// Reward of taking `action` in state `s`, then moves the state past that action.
inline RewardStep estimate_reward(const Vrnn& m, VrnnState& st, const Vector& s, int action) {
  if (action < 0 || action >= m.num_actions()) throw DimensionError("vrnn reward: action id out of range");
  RewardStep r;
  r.log_probs = action_log_probs(m, st, s);
  r.reward = r.log_probs[action];
  if (!std::isfinite(r.reward)) throw NumericError("vrnn reward is not finite");
  advance(m, st, m.table().row(action).transpose(), s);
  return r;
}

/// Per-turn rewards of a whole trajectory given its states and actions.
inline std::vector<double> score_trajectory(const Vrnn& m, const std::vector<Vector>& states,
                                            const std::vector<int>& actions) {
  if (states.size() != actions.size()) throw DimensionError("score_trajectory: states/actions length mismatch");
  VrnnState st = initial_state(m);
  std::vector<double> out;
  for (std::size_t t = 0; t < states.size(); ++t) out.push_back(estimate_reward(m, st, states[t], actions[t]).reward);
  return out;
}

// ------------------------------------------------------------------ persistence

inline constexpr int kVrnnCheckpointVersion = 1;

inline nlohmann::json vrnn_config_to_json(const VrnnConfig& c) {
  return {{"latent_dim", c.latent_dim},       {"hidden_dim", c.hidden_dim},
          {"mlp_hidden", c.mlp_hidden},       {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"clip_norm", c.clip_norm},         {"samples", c.samples},
          {"decoder_min_log_variance", c.decoder_min_log_variance},
          {"mode", vrnn_mode_name(c.mode)},   {"input", c.input == VrnnInput::one_hot ? "one-hot" : "embedding"},
          {"seed", c.seed}};
}

inline VrnnConfig vrnn_config_from_json(const nlohmann::json& j) {
  VrnnConfig c;
  c.latent_dim = j.at("latent_dim");
  c.hidden_dim = j.at("hidden_dim");
  c.mlp_hidden = j.at("mlp_hidden");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.final_lr_fraction = j.at("final_lr_fraction");
  c.clip_norm = j.at("clip_norm");
  c.samples = j.at("samples");
  c.decoder_min_log_variance = j.at("decoder_min_log_variance");
  c.mode = vrnn_mode_from_name(j.at("mode"));
  c.input = j.at("input") == "one-hot" ? VrnnInput::one_hot : VrnnInput::embedding;
  c.seed = j.at("seed");
  return c;
}

inline nlohmann::json vrnn_to_json(const TrainedVrnn& t, const std::string& config_hash) {
  nlohmann::json j;
  j["format"] = "ssdial-vrnn";
  j["version"] = kVrnnCheckpointVersion;
  j["config_hash"] = config_hash;
  j["state_width"] = t.model.state_width();
  j["config"] = vrnn_config_to_json(t.model.config());
  j["table"] = matrix_to_json(t.model.table());
  j["params"] = params_to_json(t.model.params());
  j["initial_elbo"] = t.initial_elbo;
  j["log"] = nlohmann::json::array();
  for (const auto& e : t.log)
    j["log"].push_back({{"epoch", e.epoch}, {"elbo", e.elbo}, {"reconstruction", e.reconstruction}, {"kl", e.kl},
                        {"train_elbo", e.train_elbo}});
  return j;
}

inline TrainedVrnn vrnn_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ssdial-vrnn") throw ParseError("not a vrnn checkpoint");
  if (j.at("version").get<int>() != kVrnnCheckpointVersion) throw VersionError("vrnn checkpoint version mismatch");
  TrainedVrnn t{Vrnn(matrix_from_json(j.at("table")), j.at("state_width"), vrnn_config_from_json(j.at("config"))),
                j.at("initial_elbo"), {}};
  load_params(t.model.params(), j.at("params"));
  for (const auto& e : j.at("log"))
    t.log.push_back({e.at("epoch"), e.at("elbo"), e.at("reconstruction"), e.at("kl"), e.at("train_elbo")});
  return t;
}

}  // namespace ssdial
