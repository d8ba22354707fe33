#pragma once

// Reward functions behind one interface: a handle is shared and read-only during rollouts, and each
// rollout opens its own episode scorer that carries whatever history the reward needs.

#include "ssdial/core/errors.hpp"
#include "ssdial/core/params.hpp"
#include "ssdial/reward/vrnn.hpp"

#include <memory>
#include <string>

namespace ssdial {

class RewardEpisode {
 public:
  virtual ~RewardEpisode() = default;
  /// Reward for acting `action` in state `s`; `done`/`success` describe the step's outcome.
  virtual double score(const Vector& s, int action, bool done, bool success) = 0;
};

/// One policy-generated turn, as an adversarial reward sees it when it is refit.
struct PolicyTurn {
  Vector state;
  int action = 0;
  double log_prob = 0;  // log pi(a|s) under the policy that sampled it
};

class RewardHandle {
 public:
  virtual ~RewardHandle() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<RewardEpisode> begin_episode() const = 0;
  /// Learned rewards are standardized per batch before the policy update.
  virtual bool standardize() const { return true; }
  /// Rewards trained against the current policy take one step per policy batch; returns the loss.
  virtual bool adversarial() const { return false; }
  virtual double observe_policy_batch(const std::vector<PolicyTurn>&) { return 0.0; }
};

struct HandcraftedRewardConfig {
  double turn_penalty = -0.05;
  double success_bonus = 1.0;
  double failure_penalty = -1.0;
};

inline void validate(const HandcraftedRewardConfig& c) {
  if (!(c.turn_penalty < 0.0 && c.success_bonus > 0.0)) throw ConfigError("handcrafted reward needs penalty < 0 < bonus");
}

/// Penalty every turn, plus the bonus or the failure penalty on the final one.
inline double handcrafted_reward(const HandcraftedRewardConfig& c, bool done, bool success) {
  return c.turn_penalty + (done ? (success ? c.success_bonus : c.failure_penalty) : 0.0);
}

class HandcraftedReward final : public RewardHandle {
 public:
  explicit HandcraftedReward(HandcraftedRewardConfig cfg = {}) : cfg_(cfg) { validate(cfg_); }
  std::string name() const override { return "handcrafted"; }
  bool standardize() const override { return false; }
  std::unique_ptr<RewardEpisode> begin_episode() const override {
    struct Episode final : RewardEpisode {
      HandcraftedRewardConfig c;
      explicit Episode(HandcraftedRewardConfig cc) : c(cc) {}
      double score(const Vector&, int, bool done, bool success) override { return handcrafted_reward(c, done, success); }
    };
    return std::make_unique<Episode>(cfg_);
  }
  const HandcraftedRewardConfig& config() const { return cfg_; }

 private:
  HandcraftedRewardConfig cfg_;
};

/// Log-probability the dynamics model gives each taken action, filtered along the episode.
class VrnnReward final : public RewardHandle {
 public:
  VrnnReward(std::string name, std::shared_ptr<const TrainedVrnn> model) : name_(std::move(name)), model_(std::move(model)) {
    if (!model_) throw ConfigError("reward '" + name_ + "' needs a trained vrnn");
  }
  std::string name() const override { return name_; }
  std::unique_ptr<RewardEpisode> begin_episode() const override {
    struct Episode final : RewardEpisode {
      const Vrnn* m;
      VrnnState st;
      explicit Episode(const Vrnn* mm) : m(mm), st(initial_state(*mm)) {}
      double score(const Vector& s, int action, bool, bool) override { return estimate_reward(*m, st, s, action).reward; }
    };
    return std::make_unique<Episode>(&model_->model);
  }
  const Vrnn& model() const { return model_->model; }

 private:
  std::string name_;
  std::shared_ptr<const TrainedVrnn> model_;
};

}  // namespace ssdial
