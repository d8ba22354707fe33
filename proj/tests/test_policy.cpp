#include "ssdial/core/gradcheck.hpp"
#include "ssdial/corpus/corpus.hpp"
#include "ssdial/policy/policy.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ssdial;

namespace {

Vector random_state(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return v;
}

// A small batch with hand-set rewards over random states, sampled from `net` so old log-probs are current.
std::vector<Trajectory> toy_batch(const PolicyNet& net, Rng& rng, const std::vector<std::vector<double>>& rewards) {
  std::vector<Trajectory> batch;
  for (const auto& rs : rewards) {
    Trajectory t;
    for (double r : rs) {
      const Vector s = random_state(rng, net.state_width());
      const ActResult a = act(net, s, rng, true);
      t.steps.push_back({s, a.action, a.log_prob, r});
    }
    batch.push_back(std::move(t));
  }
  return batch;
}

PolicyConfig surrogate_only() {
  PolicyConfig c;
  c.entropy_weight = 0.0;
  c.value_weight = 0.0;
  return c;
}

Matrix policy_grads(PolicyNet& net) {
  const auto& e = net.params().entries();
  Matrix out(1, 0);
  for (const auto& [name, p] : e) {
    if (name.rfind("pi.", 0) != 0) continue;
    Matrix g(1, out.cols() + p.grad.size());
    g << out, Eigen::Map<const RowVector>(p.grad.data(), p.grad.size());
    out = g;
  }
  return out;
}

double greedy_success(const PolicyNet& net, const SchemaSet& schemas, int goals) {
  DialogueEnv env(schemas);
  Rng rng(999);
  int ok = 0;
  for (int i = 0; i < goals; ++i) ok += run_dialogue(env, sample_goal(schemas, rng), greedy_policy(net, schemas)).report.success;
  return static_cast<double>(ok) / goals;
}

}  // namespace

TEST(Act, ZeroWeightNetSamplesUniformly) {
  PolicyNet net(4, 5, 6, 1);
  for (auto& [_, p] : net.params().entries()) p.value.setZero();
  Rng rng(2);
  const Vector s = random_state(rng, 4);
  const Vector lp = net.log_probs(s);
  for (int a = 0; a < 5; ++a) EXPECT_NEAR(lp[a], std::log(0.2), 1e-15);
  EXPECT_EQ(act(net, s, rng, false).action, 0);  // ties go to the lowest id
}

TEST(Act, GreedyIsDeterministic) {
  PolicyNet net(6, 7, 8, 3);
  Rng rng(4);
  const Vector s = random_state(rng, 6);
  const ActResult first = act(net, s, rng, false);
  const Vector lp = net.log_probs(s);
  Eigen::Index best;
  lp.maxCoeff(&best);
  EXPECT_EQ(first.action, best);
  for (int i = 0; i < 20; ++i) {
    Rng other(static_cast<std::uint64_t>(100 + i));
    const ActResult again = act(net, s, other, false);
    EXPECT_EQ(again.action, first.action);
    EXPECT_EQ(again.log_prob, first.log_prob);
  }
}

TEST(Act, SampleFrequenciesMatchSoftmax) {
  PolicyNet net(4, 5, 6, 7);
  for (auto& [_, p] : net.params().entries()) p.value *= 8.0;  // a visibly non-uniform distribution
  Rng rng(8);
  const Vector s = random_state(rng, 4);
  const Vector p = net.log_probs(s).array().exp().matrix();
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  const int n = 100000;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(act(net, s, rng, true).action)];
  for (int a = 0; a < 5; ++a) {
    const double sigma = std::sqrt(p[a] * (1 - p[a]) / n);
    EXPECT_LE(std::abs(counts[static_cast<std::size_t>(a)] / static_cast<double>(n) - p[a]), 3 * sigma) << a;
  }
}

TEST(Rollout, HandcraftedTotalsMatchClosedForm) {
  const SchemaSet schemas = presets::single();
  DialogueEnv env(schemas);
  PolicyNet net(env.state_width(), env.num_actions(), 16, 5);
  HandcraftedReward h;
  Rng goals(6), sampling(7);
  for (int i = 0; i < 30; ++i) {
    env.reset(goals);
    const Trajectory t = rollout(env, net, h, sampling);
    ASSERT_GE(t.turns(), 1);
    EXPECT_LE(t.turns(), env.max_turns());
    EXPECT_EQ(t.success, env.judge().success);
    EXPECT_NEAR(t.total_reward(), -0.05 * t.turns() + (t.success ? 1.0 : -1.0), 1e-12);
  }
}

TEST(Rollout, SeedDeterminism) {
  const SchemaSet schemas = presets::pair();
  DialogueEnv env(schemas);
  PolicyNet net(env.state_width(), env.num_actions(), 16, 5);
  HandcraftedReward h;
  auto play = [&]() {
    Rng goals(11), sampling(12);
    std::vector<int> actions;
    for (int i = 0; i < 5; ++i) {
      env.reset(goals);
      for (const auto& s : rollout(env, net, h, sampling).steps) actions.push_back(s.action);
    }
    return actions;
  };
  EXPECT_EQ(play(), play());
}

TEST(Rollout, RequiresAResetEnvironment) {
  DialogueEnv env(presets::single());
  PolicyNet net(env.state_width(), env.num_actions(), 4, 1);
  HandcraftedReward h;
  Rng rng(1);
  EXPECT_THROW(rollout(env, net, h, rng), StateError);
}

TEST(Rollout, TrainedVrnnScoresExpertAboveRandom) {
  const SchemaSet schemas = presets::single();
  const int na = ActionSet(schemas).size();
  const Corpus corpus = generate_corpus(schemas, 150, 21);
  const Matrix table = vrnn_table(Matrix::Zero(na, 1), VrnnInput::one_hot);
  VrnnConfig cfg;
  cfg.input = VrnnInput::one_hot;
  cfg.epochs = 15;
  cfg.seed = 22;
  std::vector<VrnnSequence> data;
  for (const auto& d : corpus) {
    VrnnSequence s{Matrix(d.size(), state_width(schemas)), Matrix(d.size(), na), {}};
    for (int t = 0; t < d.size(); ++t) {
      const auto& turn = d.turns[static_cast<std::size_t>(t)];
      s.states.row(t) = from_bits(turn.state).transpose();
      s.inputs.row(t) = table.row(turn.action);
      s.actions.push_back(turn.action);
    }
    data.push_back(std::move(s));
  }
  const VrnnReward reward("act-vrnn", std::make_shared<TrainedVrnn>(train_vrnn(data, table, state_width(schemas), cfg)));

  DialogueEnv env(schemas);
  auto mean_reward = [&](bool expert) {
    Rng goals(31), pick(32);
    double total = 0;
    int n = 0;
    for (int i = 0; i < 40; ++i) {
      env.reset(goals);
      auto ep = reward.begin_episode();
      while (!env.done()) {
        const Vector s = env.observation();
        const int a = expert ? expert_action_id(env.schemas(), env.actions(), env.state())
                             : static_cast<int>(pick.below(static_cast<std::size_t>(na)));
        env.step(a);
        total += ep->score(s, a, env.done(), false);
        ++n;
      }
    }
    return total / n;
  };
  EXPECT_GT(mean_reward(true), mean_reward(false));
}

TEST(Returns, MatchBruteForceSum) {
  const std::vector<double> r = {0.5, -1.0, 2.0, 0.0, 3.5};
  for (double gamma : {0.0, 0.5, 0.99, 1.0}) {
    const auto g = discounted_returns(r, gamma);
    ASSERT_EQ(g.size(), r.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
      double want = 0;
      for (std::size_t k = t; k < r.size(); ++k) want += std::pow(gamma, static_cast<double>(k - t)) * r[k];
      EXPECT_NEAR(g[t], want, 1e-12);
      if (t + 1 < r.size()) EXPECT_NEAR(g[t], r[t] + gamma * g[t + 1], 1e-12);
    }
  }
  EXPECT_TRUE(discounted_returns({}, 0.9).empty());
}

TEST(Returns, StandardizationRemovesAShift) {
  PolicyNet net(3, 2, 4, 1);
  Rng rng(2);
  auto a = toy_batch(net, rng, {{1.0, -2.0, 0.5}, {3.0, 0.0}});
  auto b = a;
  for (auto& t : b)
    for (auto& s : t.steps) s.reward += 7.25;
  standardize_rewards(a);
  standardize_rewards(b);
  double mean = 0, sq = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].steps.size(); ++k) {
      EXPECT_NEAR(a[i].steps[k].reward, b[i].steps[k].reward, 1e-12);
      mean += a[i].steps[k].reward;
      sq += a[i].steps[k].reward * a[i].steps[k].reward;
    }
  EXPECT_NEAR(mean / 5, 0.0, 1e-12);
  EXPECT_NEAR(sq / 5, 1.0, 1e-12);
  const PolicyBatch pa = make_batch(net, a, 0.9), pb = make_batch(net, b, 0.9);
  EXPECT_TRUE(pa.advantages.isApprox(pb.advantages, 1e-12));
}

TEST(Surrogate, ZeroAdvantagesGiveZeroPolicyGradient) {
  PolicyNet net(3, 4, 5, 1);
  Rng rng(3);
  PolicyBatch b = make_batch(net, toy_batch(net, rng, {{1.0, 2.0}, {0.5}}), 0.9);
  b.advantages.setZero();
  Tape tape;
  tape.backward(reinforce_loss(tape, net, b, surrogate_only()).total);
  EXPECT_LT(policy_grads(net).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Surrogate, GradientCheckOnTwoActions) {
  PolicyNet net(3, 2, 4, 9);
  ASSERT_LE(net.params().size(), 500u);
  Rng rng(10);
  const PolicyBatch b = make_batch(net, toy_batch(net, rng, {{1.0, -0.5, 2.0}, {0.3, 0.7}}), 0.9);
  PolicyConfig cfg;
  cfg.algorithm = PolicyAlgorithm::reinforce;
  EXPECT_LT(grad_check([&](Tape& tape, ParamSet&) { return reinforce_loss(tape, net, b, cfg).total; }, net.params()),
            1e-4);
  PolicyBatch shifted = b;  // ratios away from 1 but inside the clip range
  for (Eigen::Index i = 0; i < shifted.old_log_probs.size(); ++i) shifted.old_log_probs[i] += (i % 2 ? 0.05 : -0.05);
  EXPECT_LT(grad_check([&](Tape& tape, ParamSet&) { return ppo_loss(tape, net, shifted, cfg).total; }, net.params()),
            1e-4);
}

TEST(Ppo, UnitRatiosEqualTheVanillaSurrogate) {
  PolicyNet net(3, 4, 5, 2);
  Rng rng(4);
  const PolicyBatch b = make_batch(net, toy_batch(net, rng, {{1.0, -1.0, 0.5}, {2.0, 0.2}}), 0.9);
  const PolicyConfig cfg = surrogate_only();
  double clipped = -1;
  Tape t1;
  const auto ppo = ppo_loss(t1, net, b, cfg, &clipped);
  EXPECT_NEAR(ppo.policy.scalar(), -b.advantages.mean(), 1e-12);
  EXPECT_EQ(clipped, 0.0);
  t1.backward(ppo.total);
  const Matrix g_ppo = policy_grads(net);
  net.params().zero_grad();
  Tape t2;
  t2.backward(reinforce_loss(t2, net, b, cfg).total);
  EXPECT_TRUE(g_ppo.isApprox(policy_grads(net), 1e-10));
}

TEST(Ppo, ClippedPositiveAdvantageHasNoGradient) {
  PolicyNet net(3, 4, 5, 2);
  Rng rng(5);
  PolicyBatch b = make_batch(net, toy_batch(net, rng, {{1.0, 1.0}, {1.0}}), 0.9);
  b.advantages.setConstant(1.5);
  b.old_log_probs.array() -= 1.0;  // ratio e > 1 + eps
  double clipped = 0;
  Tape tape;
  const auto parts = ppo_loss(tape, net, b, surrogate_only(), &clipped);
  EXPECT_EQ(clipped, 1.0);
  EXPECT_NEAR(parts.policy.scalar(), -1.2 * 1.5, 1e-12);
  tape.backward(parts.total);
  EXPECT_LT(policy_grads(net).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ppo, OneUnclippedEpochMatchesReinforceStep) {
  PolicyNet base(3, 4, 5, 6);
  Rng rng(7);
  const auto batch = toy_batch(base, rng, {{1.0, -1.0, 0.5}, {2.0, 0.2}, {-0.4}});
  PolicyConfig cfg;
  cfg.ppo_epochs = 1;
  PolicyNet a = base, b = base;
  Adam oa(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip_norm), ob(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip_norm);
  reinforce_update(a, oa, batch, cfg);
  const UpdateStats st = ppo_update(b, ob, batch, cfg);
  EXPECT_EQ(st.clipped_fraction, 0.0);
  for (const auto& [name, p] : a.params().entries())
    EXPECT_TRUE(p.value.isApprox(b.params().at(name).value, 1e-12)) << name;
  bool moved = false;
  for (const auto& [name, p] : a.params().entries()) moved |= !p.value.isApprox(base.params().at(name).value);
  EXPECT_TRUE(moved);
}

TEST(Ppo, RejectsBadSettings) {
  PolicyNet net(3, 2, 4, 1);
  Rng rng(1);
  const auto batch = toy_batch(net, rng, {{1.0}});
  PolicyConfig cfg;
  cfg.ppo_clip = 0.0;
  Adam opt(1e-3);
  EXPECT_THROW(ppo_update(net, opt, batch, cfg), ConfigError);
  EXPECT_THROW(reinforce_update(net, opt, {}, cfg), ConfigError);
}

TEST(WarmStart, BehaviorCloningLowersCrossEntropy) {
  const SchemaSet schemas = presets::single();
  const Corpus corpus = generate_corpus(schemas, 20, 3);
  std::vector<int> actions;
  std::vector<Vector> states;
  for (const auto& d : corpus)
    for (const auto& t : d.turns) {
      states.push_back(from_bits(t.state));
      actions.push_back(t.action);
    }
  Matrix s(static_cast<Eigen::Index>(states.size()), state_width(schemas));
  for (std::size_t i = 0; i < states.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
  PolicyNet net(state_width(schemas), ActionSet(schemas).size(), 32, 4);
  PolicyConfig cfg;
  cfg.warm_start_epochs = 10;
  const auto log = warm_start(net, s, actions, cfg);
  ASSERT_EQ(log.size(), 10u);
  EXPECT_LT(log.back(), log.front());
  cfg.warm_start_epochs = 0;
  EXPECT_TRUE(warm_start(net, s, actions, cfg).empty());
  Rng rng(1);
  EXPECT_THROW(behavior_cloning(net, s, {0}, 1, 4, 1e-3, rng), DimensionError);
}

TEST(Train, HandcraftedRewardLiftsSinglePresetAboveNinetyPercent) {
  const SchemaSet schemas = presets::single();
  const Corpus corpus = generate_corpus(schemas, 50, 1);
  std::vector<int> actions;
  std::vector<Vector> states;
  for (const auto& d : corpus)
    for (const auto& t : d.turns) {
      states.push_back(from_bits(t.state));
      actions.push_back(t.action);
    }
  Matrix s(static_cast<Eigen::Index>(states.size()), state_width(schemas));
  for (std::size_t i = 0; i < states.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = states[i].transpose();

  PolicyConfig cfg;
  cfg.seed = 1;
  cfg.warm_start_epochs = 30;
  PolicyNet net(state_width(schemas), ActionSet(schemas).size(), cfg.hidden, cfg.seed);
  warm_start(net, s, actions, cfg);
  const double before = greedy_success(net, schemas, 300);
  HandcraftedReward h;
  const TrainedPolicy p = train_policy(schemas, h, cfg, &net);
  const double after = greedy_success(p.net, schemas, 300);
  EXPECT_LT(before, 0.9);
  EXPECT_GT(after, 0.9);
  EXPECT_EQ(p.log.size(), static_cast<std::size_t>(cfg.episodes));
}

TEST(Train, RejectsMismatchedInitialNet) {
  HandcraftedReward h;
  PolicyConfig cfg;
  cfg.episodes = 1;
  PolicyNet wrong(3, 2, 4, 1);
  EXPECT_THROW(train_policy(presets::single(), h, cfg, &wrong), DimensionError);
  cfg.episodes = 0;
  EXPECT_THROW(train_policy(presets::single(), h, cfg), ConfigError);
}

TEST(Persistence, CheckpointRoundTrip) {
  PolicyConfig cfg;
  cfg.hidden = 4;
  cfg.warm_start_epochs = 7;
  PolicyNet net(5, 3, cfg.hidden, 8);
  cfg.algorithm = PolicyAlgorithm::reinforce;
  const auto j = policy_to_json(net, cfg, "act-vrnn", "abc123");
  const PolicyNet back = policy_from_json(nlohmann::json::parse(j.dump()));
  Rng rng(1);
  const Vector s = random_state(rng, 5);
  EXPECT_EQ(back.log_probs(s), net.log_probs(s));
  const PolicyConfig c = policy_config_from_json(j.at("config"));
  EXPECT_EQ(c.warm_start_epochs, 7);
  EXPECT_EQ(c.algorithm, PolicyAlgorithm::reinforce);
  EXPECT_THROW(policy_from_json(nlohmann::json{{"format", "other"}}), ParseError);
  EXPECT_THROW(algorithm_from_name("dqn"), ConfigError);
}
