#pragma once

// Dialogue policy pi(a|s) with a value baseline, trained by policy gradient against any reward handle.

#include "ssdial/core/layers.hpp"
#include "ssdial/core/optim.hpp"
#include "ssdial/core/serialize.hpp"
#include "ssdial/env/environment.hpp"
#include "ssdial/reward/handle.hpp"

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace ssdial {

enum class PolicyAlgorithm { reinforce, ppo };

inline std::string algorithm_name(PolicyAlgorithm a) { return a == PolicyAlgorithm::ppo ? "ppo" : "reinforce"; }

inline PolicyAlgorithm algorithm_from_name(const std::string& s) {
  if (s == "reinforce") return PolicyAlgorithm::reinforce;
  if (s == "ppo") return PolicyAlgorithm::ppo;
  throw ConfigError("unknown policy algorithm '" + s + "' (reinforce, ppo)");
}

struct PolicyConfig {
  int hidden = 64;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  double discount = 0.99;
  double entropy_weight = 0.01;
  double value_weight = 0.5;
  int episodes = 5000;
  int batch_episodes = 16;
  PolicyAlgorithm algorithm = PolicyAlgorithm::ppo;
  double ppo_clip = 0.2;
  int ppo_epochs = 4;
  bool success_bonus = false;  // adds +1 on successful final turns on top of a learned reward
  int max_turns = kDefaultMaxTurns;
  int warm_start_epochs = 0;  // behavior cloning on labelled turns before policy learning; 0 disables
  int warm_start_batch = 32;
  double warm_start_learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

class PolicyNet {
 public:
  PolicyNet(int state_width, int num_actions, int hidden, std::uint64_t seed)
      : state_width_(state_width), num_actions_(num_actions), ps_(seed) {
    if (state_width < 1 || num_actions < 1 || hidden < 1) throw ConfigError("PolicyNet: bad dimensions");
    Rng rng(seed);
    register_dense(ps_, "pi.h", state_width, hidden, rng);
    register_dense(ps_, "pi.out", hidden, num_actions, rng, 0.1);
    register_dense(ps_, "v.h", state_width, hidden, rng);
    register_dense(ps_, "v.out", hidden, 1, rng);
  }

  int state_width() const { return state_width_; }
  int num_actions() const { return num_actions_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  Var logits(Tape& tape, const Matrix& states) {
    return dense_forward(tape, ps_, "pi.out", dense_forward(tape, ps_, "pi.h", tape.constant(states), Activation::tanh));
  }
  Var value(Tape& tape, const Matrix& states) {
    return dense_forward(tape, ps_, "v.out", dense_forward(tape, ps_, "v.h", tape.constant(states), Activation::tanh));
  }

  Vector log_probs(const Vector& s) const {
    if (s.size() != state_width_) throw DimensionError("policy: state width mismatch");
    const Matrix l = dense_value(ps_, "pi.out", dense_value(ps_, "pi.h", s.transpose(), Activation::tanh));
    return log_softmax(Vector(l.row(0).transpose()));
  }
  double value_of(const Vector& s) const {
    return dense_value(ps_, "v.out", dense_value(ps_, "v.h", s.transpose(), Activation::tanh))(0, 0);
  }

 private:
  int state_width_;
  int num_actions_;
  ParamSet ps_;
};

struct ActResult {
  int action = 0;
  double log_prob = 0;
};

/// Samples from the softmax when exploring, otherwise takes the argmax (lowest id on ties).
inline ActResult act(const PolicyNet& net, const Vector& s, Rng& rng, bool explore) {
  const Vector lp = net.log_probs(s);
  int a = 0;
  if (explore) {
    const Vector p = lp.array().exp().matrix();
    a = static_cast<int>(rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))));
  } else {
    for (int k = 1; k < lp.size(); ++k)
      if (lp[k] > lp[a]) a = k;
  }
  return {a, lp[a]};
}

struct PolicyStep {
  Vector state;
  int action = 0;
  double log_prob = 0;
  double reward = 0;
};

struct Trajectory {
  std::vector<PolicyStep> steps;
  bool success = false;
  EntityCounts counts;
  int turns() const { return static_cast<int>(steps.size()); }
  double total_reward() const {
    double r = 0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }
};

/// Plays one episode from the environment's current goal, scoring every turn with the handle.
inline Trajectory rollout(DialogueEnv& env, const PolicyNet& net, const RewardHandle& reward, Rng& rng,
                          bool explore = true) {
  if (!env.started()) throw StateError("rollout: environment not reset");
  Trajectory tr;
  auto scorer = reward.begin_episode();
  while (!env.done()) {
    const Vector s = env.observation();
    const ActResult a = act(net, s, rng, explore);
    env.step(a.action);
    const bool done = env.done();
    const bool success = done && env.judge().success;
    tr.steps.push_back({s, a.action, a.log_prob, scorer->score(s, a.action, done, success)});
  }
  const SuccessReport rep = env.judge();
  tr.success = rep.success;
  tr.counts = rep.counts;
  return tr;
}

/// G_t = r_t + gamma * G_{t+1}.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

/// Zero-mean, unit-variance rewards across every turn of the batch (centered only if constant).
inline void standardize_rewards(std::vector<Trajectory>& batch) {
  double n = 0, mean = 0, sq = 0;
  for (const auto& t : batch)
    for (const auto& s : t.steps) {
      ++n;
      mean += s.reward;
    }
  if (n == 0) return;
  mean /= n;
  for (const auto& t : batch)
    for (const auto& s : t.steps) sq += (s.reward - mean) * (s.reward - mean);
  const double sd = std::sqrt(sq / n);
  for (auto& t : batch)
    for (auto& s : t.steps) s.reward = sd > 1e-12 ? (s.reward - mean) / sd : s.reward - mean;
}

/// Flattened batch with returns and advantages against the current value estimate.
struct PolicyBatch {
  Matrix states;
  std::vector<int> actions;
  Vector returns, advantages, old_log_probs;
};

inline PolicyBatch make_batch(const PolicyNet& net, const std::vector<Trajectory>& batch, double gamma) {
  std::size_t n = 0;
  for (const auto& t : batch) n += t.steps.size();
  if (n == 0) throw ConfigError("policy update needs at least one step");
  const auto rows = static_cast<Eigen::Index>(n);
  PolicyBatch b{Matrix(rows, net.state_width()), {}, Vector(rows), Vector(rows), Vector(rows)};
  Eigen::Index r = 0;
  for (const auto& t : batch) {
    std::vector<double> rewards;
    for (const auto& s : t.steps) rewards.push_back(s.reward);
    const auto g = discounted_returns(rewards, gamma);
    for (std::size_t i = 0; i < t.steps.size(); ++i, ++r) {
      const PolicyStep& s = t.steps[i];
      b.states.row(r) = s.state.transpose();
      b.actions.push_back(s.action);
      b.returns[r] = g[i];
      b.advantages[r] = g[i] - net.value_of(s.state);
      b.old_log_probs[r] = s.log_prob;
    }
  }
  return b;
}

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clipped_fraction = 0;
};

namespace detail {

inline Matrix one_hot_rows(const std::vector<int>& actions, Eigen::Index width) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), width);
  for (std::size_t i = 0; i < actions.size(); ++i) m(static_cast<Eigen::Index>(i), actions[i]) = 1.0;
  return m;
}

struct SurrogateParts {
  Var total, policy, value, entropy;
};

inline SurrogateParts finish(Tape& tape, PolicyNet& net, const PolicyBatch& b, Var policy_term, Var log_probs,
                             const PolicyConfig& cfg) {
  Var ent = mean(entropy_rows(log_probs));
  Var v = net.value(tape, b.states);
  Var vloss = mean(square(sub(v, tape.constant(b.returns))));
  Var total = add(sub(policy_term, scale(ent, cfg.entropy_weight)), scale(vloss, cfg.value_weight));
  return {total, policy_term, vloss, ent};
}

}  // namespace detail

/// -mean(log pi(a|s) * A) - beta * H + c_v * mean (V - G)^2; advantages are held fixed.
inline detail::SurrogateParts reinforce_loss(Tape& tape, PolicyNet& net, const PolicyBatch& b, const PolicyConfig& cfg) {
  Var lp = log_softmax_rows(net.logits(tape, b.states));
  Var taken = row_sum(mul_const(lp, detail::one_hot_rows(b.actions, net.num_actions())));
  Var pg = neg(mean(mul_const(taken, b.advantages)));
  return detail::finish(tape, net, b, pg, lp, cfg);
}

/// Clipped surrogate: -mean min(r A, clip(r, 1 - eps, 1 + eps) A), r = pi / pi_old.
inline detail::SurrogateParts ppo_loss(Tape& tape, PolicyNet& net, const PolicyBatch& b, const PolicyConfig& cfg,
                                       double* clipped_fraction = nullptr) {
  Var lp = log_softmax_rows(net.logits(tape, b.states));
  Var taken = row_sum(mul_const(lp, detail::one_hot_rows(b.actions, net.num_actions())));
  Var ratio = exp(sub(taken, tape.constant(b.old_log_probs)));
  Var unclipped = mul_const(ratio, b.advantages);
  Var clipped = mul_const(clamp(ratio, 1.0 - cfg.ppo_clip, 1.0 + cfg.ppo_clip), b.advantages);
  Matrix pick(b.advantages.size(), 1);
  double nclip = 0;
  for (Eigen::Index i = 0; i < pick.rows(); ++i) {
    pick(i, 0) = unclipped.value()(i, 0) <= clipped.value()(i, 0) ? 1.0 : 0.0;
    if (unclipped.value()(i, 0) != clipped.value()(i, 0)) ++nclip;
  }
  if (clipped_fraction) *clipped_fraction = nclip / static_cast<double>(pick.rows());
  Var surr = add(mul_const(unclipped, pick), mul_const(clipped, (1.0 - pick.array()).matrix()));
  return detail::finish(tape, net, b, neg(mean(surr)), lp, cfg);
}

inline UpdateStats reinforce_update(PolicyNet& net, Adam& opt, const std::vector<Trajectory>& batch,
                                    const PolicyConfig& cfg) {
  if (batch.empty()) throw ConfigError("reinforce_update: empty batch");
  const PolicyBatch b = make_batch(net, batch, cfg.discount);
  Tape tape;
  const auto parts = reinforce_loss(tape, net, b, cfg);
  tape.backward(parts.total);
  opt.step(net.params());
  net.params().zero_grad();
  return {parts.policy.scalar(), parts.value.scalar(), parts.entropy.scalar(), 0.0};
}

inline UpdateStats ppo_update(PolicyNet& net, Adam& opt, const std::vector<Trajectory>& batch, const PolicyConfig& cfg) {
  if (batch.empty()) throw ConfigError("ppo_update: empty batch");
  if (!(cfg.ppo_clip > 0.0) || cfg.ppo_epochs < 1) throw ConfigError("ppo_update: clip and epochs must be positive");
  const PolicyBatch b = make_batch(net, batch, cfg.discount);
  UpdateStats st;
  for (int e = 0; e < cfg.ppo_epochs; ++e) {
    Tape tape;
    const auto parts = ppo_loss(tape, net, b, cfg, &st.clipped_fraction);
    tape.backward(parts.total);
    opt.step(net.params());
    net.params().zero_grad();
    st.policy_loss = parts.policy.scalar();
    st.value_loss = parts.value.scalar();
    st.entropy = parts.entropy.scalar();
  }
  return st;
}

/// Supervised warm start on labelled (state, action) pairs: cross-entropy on the policy head only.
inline std::vector<double> behavior_cloning(PolicyNet& net, const Matrix& states, const std::vector<int>& actions,
                                            int epochs, int batch, double lr, Rng& rng) {
  if (states.rows() != static_cast<Eigen::Index>(actions.size())) throw DimensionError("behavior_cloning: size mismatch");
  std::vector<double> log;
  if (actions.empty() || epochs < 1) return log;
  Adam opt(lr);
  std::vector<std::size_t> order(actions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto bs = static_cast<std::size_t>(std::max(1, batch));
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    double total = 0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      Matrix s(static_cast<Eigen::Index>(end - start), states.cols());
      std::vector<int> a;
      for (std::size_t i = start; i < end; ++i) {
        s.row(static_cast<Eigen::Index>(i - start)) = states.row(static_cast<Eigen::Index>(order[i]));
        a.push_back(actions[order[i]]);
      }
      Tape tape;
      Var lp = log_softmax_rows(net.logits(tape, s));
      Var ce = neg(mean(row_sum(mul_const(lp, detail::one_hot_rows(a, net.num_actions())))));
      tape.backward(ce);
      opt.step(net.params());
      net.params().zero_grad();
      total += ce.scalar();
      ++steps;
    }
    log.push_back(total / steps);
  }
  return log;
}

/// Behavior cloning with the config's warm-start settings; a no-op when warm_start_epochs is 0.
inline std::vector<double> warm_start(PolicyNet& net, const Matrix& states, const std::vector<int>& actions,
                                      const PolicyConfig& cfg) {
  if (cfg.warm_start_epochs < 0) throw ConfigError("warm_start_epochs must be non-negative");
  Rng rng(derive_seed(cfg.seed, 503));
  return behavior_cloning(net, states, actions, cfg.warm_start_epochs, cfg.warm_start_batch,
                          cfg.warm_start_learning_rate, rng);
}

struct PolicyEpisodeLog {
  int episode = 0;
  double episode_return = 0;
  bool success = false;
  int turns = 0;
};

struct TrainedPolicy {
  PolicyNet net;
  std::vector<PolicyEpisodeLog> log;
  std::vector<double> reward_losses;  // adversarial rewards only, one per policy batch
};

/// Runs `episodes` sampled dialogues in batches, refitting adversarial rewards on every batch. Starts from
/// `init` when given (a warm-started net), otherwise from a fresh one.
inline TrainedPolicy train_policy(const SchemaSet& schemas, RewardHandle& reward, const PolicyConfig& cfg,
                                  const PolicyNet* init = nullptr) {
  if (cfg.episodes < 1 || cfg.batch_episodes < 1) throw ConfigError("train_policy: episodes and batch must be positive");
  DialogueEnv env(schemas, cfg.max_turns);
  TrainedPolicy out{init ? *init : PolicyNet(env.state_width(), env.num_actions(), cfg.hidden, cfg.seed), {}, {}};
  if (out.net.state_width() != env.state_width() || out.net.num_actions() != env.num_actions())
    throw DimensionError("train_policy: initial policy does not match the environment");
  Adam opt(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip_norm);
  Rng goals(derive_seed(cfg.seed, 501)), sampling(derive_seed(cfg.seed, 502));
  int episode = 0;
  while (episode < cfg.episodes) {
    const int n = std::min(cfg.batch_episodes, cfg.episodes - episode);
    std::vector<Trajectory> batch;
    for (int k = 0; k < n; ++k) {
      env.reset(goals);
      batch.push_back(rollout(env, out.net, reward, sampling));
      out.log.push_back({++episode, batch.back().total_reward(), batch.back().success, batch.back().turns()});
    }
    if (reward.adversarial()) {
      std::vector<PolicyTurn> turns;
      for (const auto& t : batch)
        for (const auto& s : t.steps) turns.push_back({s.state, s.action, s.log_prob});
      out.reward_losses.push_back(reward.observe_policy_batch(turns));
    }
    if (reward.standardize()) standardize_rewards(batch);
    if (cfg.success_bonus)
      for (auto& t : batch)
        if (t.success && !t.steps.empty()) t.steps.back().reward += 1.0;
    if (cfg.algorithm == PolicyAlgorithm::ppo)
      ppo_update(out.net, opt, batch, cfg);
    else
      reinforce_update(out.net, opt, batch, cfg);
  }
  if (!out.net.params().all_finite()) throw NumericError("policy diverged (non-finite parameters)");
  return out;
}

/// Greedy policy over dialogue states, for evaluation.
inline StatePolicy greedy_policy(const PolicyNet& net, const SchemaSet& schemas) {
  return [&net, &schemas](const DialogueState& s) {
    Rng unused(0);
    return act(net, encode_state(schemas, s), unused, false).action;
  };
}

// ------------------------------------------------------------------ persistence

inline constexpr int kPolicyCheckpointVersion = 1;

inline nlohmann::json policy_config_to_json(const PolicyConfig& c) {
  return {{"hidden", c.hidden},
          {"learning_rate", c.learning_rate},
          {"clip_norm", c.clip_norm},
          {"discount", c.discount},
          {"entropy_weight", c.entropy_weight},
          {"value_weight", c.value_weight},
          {"episodes", c.episodes},
          {"batch_episodes", c.batch_episodes},
          {"algorithm", algorithm_name(c.algorithm)},
          {"ppo_clip", c.ppo_clip},
          {"ppo_epochs", c.ppo_epochs},
          {"success_bonus", c.success_bonus},
          {"max_turns", c.max_turns},
          {"warm_start_epochs", c.warm_start_epochs},
          {"warm_start_batch", c.warm_start_batch},
          {"warm_start_learning_rate", c.warm_start_learning_rate},
          {"seed", c.seed}};
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.hidden = j.at("hidden");
  c.learning_rate = j.at("learning_rate");
  c.clip_norm = j.at("clip_norm");
  c.discount = j.at("discount");
  c.entropy_weight = j.at("entropy_weight");
  c.value_weight = j.at("value_weight");
  c.episodes = j.at("episodes");
  c.batch_episodes = j.at("batch_episodes");
  c.algorithm = algorithm_from_name(j.at("algorithm"));
  c.ppo_clip = j.at("ppo_clip");
  c.ppo_epochs = j.at("ppo_epochs");
  c.success_bonus = j.at("success_bonus");
  c.max_turns = j.at("max_turns");
  c.warm_start_epochs = j.at("warm_start_epochs");
  c.warm_start_batch = j.at("warm_start_batch");
  c.warm_start_learning_rate = j.at("warm_start_learning_rate");
  c.seed = j.at("seed");
  return c;
}

inline nlohmann::json policy_to_json(const PolicyNet& net, const PolicyConfig& cfg, const std::string& reward,
                                     const std::string& config_hash) {
  return {{"format", "ssdial-policy"},
          {"version", kPolicyCheckpointVersion},
          {"config_hash", config_hash},
          {"reward", reward},
          {"state_width", net.state_width()},
          {"num_actions", net.num_actions()},
          {"config", policy_config_to_json(cfg)},
          {"params", params_to_json(net.params())}};
}

inline PolicyNet policy_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ssdial-policy") throw ParseError("not a policy checkpoint");
  if (j.at("version").get<int>() != kPolicyCheckpointVersion) throw VersionError("policy checkpoint version mismatch");
  const PolicyConfig cfg = policy_config_from_json(j.at("config"));
  PolicyNet net(j.at("state_width"), j.at("num_actions"), cfg.hidden, cfg.seed);
  load_params(net.params(), j.at("params"));
  return net;
}

}  // namespace ssdial
