#pragma once

// Adversarially learned reward f(s, a): expert pairs are pushed up, policy samples pushed down
// through an importance-weighted log-mean-exp partition estimate.

#include "ssdial/core/layers.hpp"
#include "ssdial/core/optim.hpp"
#include "ssdial/core/serialize.hpp"
#include "ssdial/reward/handle.hpp"

#include <cmath>

namespace ssdial {

struct DiscriminatorConfig {
  int hidden = 64;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  int expert_batch = 64;
  std::uint64_t seed = 1;
};

/// An expert pair as the discriminator reads it: state and action encoding (one-hot or embedding).
struct ExpertPair {
  Vector state;
  Vector action_input;
};

class Discriminator {
 public:
  Discriminator(Matrix table, int state_width, DiscriminatorConfig cfg)
      : table_(std::move(table)), state_width_(state_width), cfg_(cfg), ps_(cfg.seed) {
    if (table_.rows() < 1 || state_width < 1 || cfg.hidden < 1) throw ConfigError("Discriminator: bad dimensions");
    Rng rng(cfg.seed);
    register_dense(ps_, "disc.h", state_width + table_.cols(), cfg.hidden, rng);
    // no output bias: the loss is unchanged by a constant shift of f
    const double limit = std::sqrt(6.0 / (cfg.hidden + 1.0));
    Matrix w(cfg.hidden, 1);
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, 0) = (2.0 * rng.uniform() - 1.0) * limit;
    ps_.add("disc.out.W", std::move(w));
  }

  const Matrix& table() const { return table_; }
  int state_width() const { return state_width_; }
  const DiscriminatorConfig& config() const { return cfg_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  /// f(s, x) for every row, n x 1.
  Var forward(Tape& tape, const Matrix& states, const Matrix& inputs) {
    if (states.cols() != state_width_ || inputs.cols() != table_.cols() || states.rows() != inputs.rows())
      throw DimensionError("discriminator: input widths do not match");
    Matrix x(states.rows(), states.cols() + inputs.cols());
    x << states, inputs;
    Var h = dense_forward(tape, ps_, "disc.h", tape.constant(x), Activation::tanh);
    return matmul(h, tape.param(ps_.at("disc.out.W")));
  }

  double score(const Vector& s, int action) const {
    if (action < 0 || action >= table_.rows()) throw DimensionError("discriminator: action id out of range");
    RowVector x(s.size() + table_.cols());
    x << s.transpose(), table_.row(action);
    const double r = (dense_value(ps_, "disc.h", x, Activation::tanh) * ps_.at("disc.out.W").value)(0, 0);
    if (!std::isfinite(r)) throw NumericError("discriminator output is not finite");
    return r;
  }

 private:
  Matrix table_;
  int state_width_;
  DiscriminatorConfig cfg_;
  ParamSet ps_;
};

/// -mean_expert f + log mean_i exp(f_i - log q_i), q the sampling policy's probability of each pair.
inline Var adversarial_loss(Tape& tape, Discriminator& d, const Matrix& expert_states, const Matrix& expert_inputs,
                            const Matrix& policy_states, const Matrix& policy_inputs, const Vector& policy_log_q) {
  if (expert_states.rows() == 0 || policy_states.rows() == 0) throw ConfigError("adversarial loss needs both batches");
  if (policy_log_q.size() != policy_states.rows()) throw DimensionError("adversarial loss: one log q per policy pair");
  Var fe = d.forward(tape, expert_states, expert_inputs);
  Var fp = d.forward(tape, policy_states, policy_inputs);
  Var w = sub(fp, tape.constant(policy_log_q));  // n x 1
  // log mean exp, shifted by the max for stability
  const double shift = w.value().maxCoeff();
  Var lme = add_scalar(log(mean(exp(add_scalar(w, -shift)))), shift);
  return sub(lme, mean(fe));
}

/// Splits a policy batch into the matrices the loss consumes.
struct PolicyMatrices {
  Matrix states, inputs;
  Vector log_q;
};

inline PolicyMatrices policy_matrices(const Discriminator& d, const std::vector<PolicyTurn>& turns) {
  PolicyMatrices m{Matrix(static_cast<Eigen::Index>(turns.size()), d.state_width()),
                   Matrix(static_cast<Eigen::Index>(turns.size()), d.table().cols()),
                   Vector(static_cast<Eigen::Index>(turns.size()))};
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m.states.row(r) = turns[i].state.transpose();
    m.inputs.row(r) = d.table().row(turns[i].action);
    m.log_q[r] = turns[i].log_prob;
  }
  return m;
}

/// Discriminator-backed reward with its own expert pool; one Adam step per observed policy batch.
class AdversarialReward final : public RewardHandle {
 public:
  AdversarialReward(std::string name, Discriminator disc, std::vector<ExpertPair> expert)
      : name_(std::move(name)), disc_(std::move(disc)), expert_(std::move(expert)),
        opt_(disc_.config().learning_rate, 0.9, 0.999, 1e-8, disc_.config().clip_norm),
        rng_(derive_seed(disc_.config().seed, 401)) {
    if (expert_.empty()) throw ConfigError("reward '" + name_ + "' needs expert pairs");
    for (const auto& e : expert_)
      if (e.state.size() != disc_.state_width() || e.action_input.size() != disc_.table().cols())
        throw DimensionError("reward '" + name_ + "': expert pair widths do not match");
  }

  std::string name() const override { return name_; }
  bool adversarial() const override { return true; }
  std::unique_ptr<RewardEpisode> begin_episode() const override {
    struct Episode final : RewardEpisode {
      const Discriminator* d;
      explicit Episode(const Discriminator* dd) : d(dd) {}
      double score(const Vector& s, int action, bool, bool) override { return d->score(s, action); }
    };
    return std::make_unique<Episode>(&disc_);
  }

  double observe_policy_batch(const std::vector<PolicyTurn>& turns) override {
    if (turns.empty()) throw ConfigError("adversarial update needs policy samples");
    const auto n = static_cast<Eigen::Index>(std::min<std::size_t>(expert_.size(), disc_.config().expert_batch));
    Matrix es(n, disc_.state_width()), ei(n, disc_.table().cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const ExpertPair& e = expert_[rng_.below(expert_.size())];
      es.row(i) = e.state.transpose();
      ei.row(i) = e.action_input.transpose();
    }
    const PolicyMatrices p = policy_matrices(disc_, turns);
    Tape tape;
    Var loss = adversarial_loss(tape, disc_, es, ei, p.states, p.inputs, p.log_q);
    tape.backward(loss);
    opt_.step(disc_.params());
    disc_.params().zero_grad();
    losses_.push_back(loss.scalar());
    return loss.scalar();
  }

  const std::vector<double>& losses() const { return losses_; }
  const std::vector<ExpertPair>& expert() const { return expert_; }
  Discriminator& discriminator() { return disc_; }

 private:
  std::string name_;
  Discriminator disc_;
  std::vector<ExpertPair> expert_;
  Adam opt_;
  Rng rng_;
  std::vector<double> losses_;
};

}  // namespace ssdial
