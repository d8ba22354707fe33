#include "ssdial/core/gradcheck.hpp"
#include "ssdial/reward/vrnn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ssdial;

namespace {

VrnnConfig tiny_config(VrnnMode mode = VrnnMode::full) {
  VrnnConfig c;
  c.latent_dim = 2;
  c.hidden_dim = 3;
  c.mlp_hidden = 3;
  c.mode = mode;
  c.seed = 5;
  return c;
}

Matrix tiny_table() { return (Matrix(4, 2) << 1.0, 0.0, 0.0, 1.0, -1.0, 0.5, 0.3, -0.8).finished(); }

Vector bits(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return v;
}

VrnnSequence random_sequence(Rng& rng, const Matrix& table, int width, int length) {
  VrnnSequence s{Matrix(length, width), Matrix(length, table.cols()), {}};
  for (int t = 0; t < length; ++t) {
    const int a = static_cast<int>(rng.below(static_cast<std::size_t>(table.rows())));
    s.states.row(t) = bits(rng, width).transpose();
    s.inputs.row(t) = table.row(a);
    s.actions.push_back(a);
  }
  return s;
}

// Straight-line recomputation of the networks, independent of the tape and of the value helpers.
RowVector dense_ref(const ParamSet& ps, const std::string& n, const RowVector& x, bool squash) {
  RowVector y = x * ps.at(n + ".W").value + ps.at(n + ".b").value;
  if (squash)
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  return y;
}

RowVector head_ref(const ParamSet& ps, const std::string& net, const RowVector& x) {
  return dense_ref(ps, net + ".out", dense_ref(ps, net + ".h", x, true), false);
}

// Decoder head with the floored log-variance: -2 + log(1 + exp(raw + log(e^2 - 1))).
RowVector dec_ref(const ParamSet& ps, const RowVector& x) {
  RowVector y = head_ref(ps, "dec", x);
  const Eigen::Index d = y.size() / 2;
  for (Eigen::Index i = d; i < 2 * d; ++i) y[i] = -2.0 + std::log1p(std::exp(y[i] + std::log(std::exp(2.0) - 1.0)));
  return y;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RowVector gru_ref(const ParamSet& ps, const RowVector& x, const RowVector& h) {
  const Eigen::Index H = h.size();
  const RowVector gi = x * ps.at("rnn.Wi").value + ps.at("rnn.bi").value;
  const RowVector gh = h * ps.at("rnn.Wh").value + ps.at("rnn.bh").value;
  RowVector out(H);
  for (Eigen::Index j = 0; j < H; ++j) {
    const double r = sig(gi[j] + gh[j]);
    const double u = sig(gi[H + j] + gh[H + j]);
    const double n = std::tanh(gi[2 * H + j] + r * gh[2 * H + j]);
    out[j] = (1 - u) * n + u * h[j];
  }
  return out;
}

double log_normal_ref(const RowVector& x, const RowVector& mean, const RowVector& logvar) {
  double s = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double lv = std::clamp(logvar[i], -20.0, 20.0);
    s += -0.5 * (std::log(2 * std::numbers::pi) + lv + (x[i] - mean[i]) * (x[i] - mean[i]) / std::exp(lv));
  }
  return s;
}

double kl_ref(const RowVector& mq, const RowVector& lq, const RowVector& mp, const RowVector& lp) {
  double s = 0;
  for (Eigen::Index i = 0; i < mq.size(); ++i) {
    const double a = std::clamp(lq[i], -20.0, 20.0), b = std::clamp(lp[i], -20.0, 20.0);
    s += 0.5 * (b - a + (std::exp(a) + (mq[i] - mp[i]) * (mq[i] - mp[i])) / std::exp(b) - 1);
  }
  return s;
}

double elbo_ref(const Vrnn& m, const VrnnSequence& seq, const Matrix& noise) {
  const ParamSet& ps = m.params();
  const int z = m.config().latent_dim;
  RowVector h = RowVector::Zero(m.config().hidden_dim);
  double total = 0;
  for (Eigen::Index t = 0; t < seq.size(); ++t) {
    const RowVector x = seq.inputs.row(t), s = seq.states.row(t);
    const RowVector prior = head_ref(ps, "prior", h);
    RowVector in(h.size() + x.size());
    in << h, x;
    const RowVector post = head_ref(ps, "enc", in);
    RowVector zz(z);
    for (int k = 0; k < z; ++k) zz[k] = post[k] + std::exp(0.5 * std::clamp(post[z + k], -20.0, 20.0)) * noise(t, k);
    RowVector din(z + h.size() + s.size());
    din << zz, h, s;
    const RowVector dec = dec_ref(ps, din);
    const Eigen::Index d = x.size();
    total += log_normal_ref(x, dec.head(d), dec.tail(d)) - kl_ref(post.head(z), post.tail(z), prior.head(z), prior.tail(z));
    RowVector rin(x.size() + z + s.size());
    rin << x, zz, s;
    h = gru_ref(ps, rin, h);
  }
  return total;
}

void zero_heads(Vrnn& m) {
  for (const char* n : {"prior.out", "enc.out", "dec.out"}) {
    m.params().at(std::string(n) + ".W").value.setZero();
    m.params().at(std::string(n) + ".b").value.setZero();
  }
}

// Enriches expert dialogues with their true actions and a given action table.
EnrichedCorpus label_enrich(const Corpus& corpus, const Matrix& table) {
  EnrichedCorpus out;
  for (const auto& d : corpus) {
    EnrichedDialogue ed{d.id, d.level, {}};
    for (const auto& t : d.turns)
      ed.turns.push_back({from_bits(t.state), table.row(t.action).transpose(), t.action,
                          Vector::Unit(table.rows(), t.action)});
    out.push_back(std::move(ed));
  }
  return out;
}

struct Trajectory {
  std::vector<Vector> states;
  std::vector<int> actions;
};

std::vector<Trajectory> rollouts(const SchemaSet& schema, int n, std::uint64_t seed, bool expert) {
  DialogueEnv env(schema);
  Rng rng(seed);
  std::vector<Trajectory> out;
  for (int i = 0; i < n; ++i) {
    env.reset(rng);
    Trajectory tr;
    while (!env.done()) {
      const int a = expert ? expert_action_id(env.schemas(), env.actions(), env.state())
                           : static_cast<int>(rng.below(static_cast<std::size_t>(env.num_actions())));
      tr.states.push_back(env.observation());
      tr.actions.push_back(a);
      env.step(a);
    }
    out.push_back(std::move(tr));
  }
  return out;
}

// Probability that a random positive outscores a random negative, ties counted half.
double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos)
    for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

struct Trained {
  SchemaSet schema = presets::single();
  TrainedVrnn vrnn;
  std::vector<Trajectory> held_expert, held_random;
  static TrainedVrnn fit(const SchemaSet& schema) {
    const ActionSet actions(schema);
    const Matrix table = vrnn_table(Matrix::Zero(actions.size(), 1), VrnnInput::one_hot);
    const auto seqs = vrnn_sequences(label_enrich(generate_corpus(schema, 200, 31), table), VrnnInput::one_hot,
                                     actions.size());
    VrnnConfig c;
    c.input = VrnnInput::one_hot;
    c.epochs = 20;
    return train_vrnn(seqs, table, state_width(schema), c);
  }
  Trained() : vrnn(fit(schema)) {
    held_expert = rollouts(schema, 60, 77, true);
    held_random = rollouts(schema, 60, 78, false);
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

}  // namespace

TEST(Steps, ZeroHeadsGiveStandardNormal) {
  Vrnn m(tiny_table(), 3, tiny_config());
  zero_heads(m);
  Rng rng(1);
  const Vector h = rng.normal_matrix(3, 1).col(0), x = tiny_table().row(2).transpose(), z = rng.normal_matrix(2, 1).col(0);
  for (const GaussianParams& g : {m.prior_step(h), m.posterior_step(h, x), m.decode_step(z, h, bits(rng, 3))}) {
    EXPECT_TRUE(g.mean.isZero(0.0));
    EXPECT_TRUE(g.log_variance.isZero(0.0));
  }
}

TEST(Steps, MatchStraightLineOracleAndTape) {
  Rng rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    VrnnConfig c = tiny_config();
    c.seed = 40 + static_cast<std::uint64_t>(trial);
    Vrnn m(tiny_table(), 3, c);
    const Vector h = rng.normal_matrix(3, 1).col(0), z = rng.normal_matrix(2, 1).col(0), s = bits(rng, 3);
    const Vector x = tiny_table().row(static_cast<Eigen::Index>(rng.below(4))).transpose();

    const RowVector pr = head_ref(m.params(), "prior", h.transpose());
    RowVector ein(5);
    ein << h.transpose(), x.transpose();
    const RowVector po = head_ref(m.params(), "enc", ein);
    RowVector din(8);
    din << z.transpose(), h.transpose(), s.transpose();
    const RowVector de = dec_ref(m.params(), din);
    RowVector rin(7);
    rin << x.transpose(), z.transpose(), s.transpose();
    const RowVector hn = gru_ref(m.params(), rin, h.transpose());

    EXPECT_LT((m.prior_step(h).mean.transpose() - pr.head(2)).norm(), 1e-12);
    EXPECT_LT((m.prior_step(h).log_variance.transpose() - pr.tail(2)).norm(), 1e-12);
    EXPECT_LT((m.posterior_step(h, x).mean.transpose() - po.head(2)).norm(), 1e-12);
    EXPECT_LT((m.decode_step(z, h, s).log_variance.transpose() - de.tail(2)).norm(), 1e-12);
    EXPECT_LT((m.recur_step(x, z, h, s).transpose() - hn).norm(), 1e-12);

    Tape tape;
    Var hv = tape.constant(h.transpose()), zv = tape.constant(z.transpose()), sv = tape.constant(s.transpose()),
        xv = tape.constant(x.transpose());
    EXPECT_LT((m.prior(tape, hv).mean.value() - pr.head(2)).norm(), 1e-12);
    EXPECT_LT((m.posterior(tape, hv, xv).log_variance.value() - po.tail(2)).norm(), 1e-12);
    EXPECT_LT((m.decode(tape, zv, hv, sv).mean.value() - de.head(2)).norm(), 1e-12);
    EXPECT_LT((m.recur(tape, xv, zv, hv, sv).value() - hn).norm(), 1e-12);

    EXPECT_EQ(m.recur_step(x, z, h, s), m.recur_step(x, z, h, s));
    EXPECT_EQ(m.prior_step(h).mean, m.prior_step(h).mean);
  }
}

TEST(Steps, ZeroWeightCellHalvesTheHiddenState) {
  Vrnn m(tiny_table(), 3, tiny_config());
  for (const char* n : {"rnn.Wi", "rnn.Wh", "rnn.bi", "rnn.bh"}) m.params().at(n).value.setZero();
  const Vector h = (Vector(3) << 0.4, -1.0, 2.0).finished();
  EXPECT_LT((m.recur_step(Vector::Ones(2), Vector::Ones(2), h, Vector::Ones(3)) - h / 2).norm(), 1e-15);
}

TEST(Elbo, StandardNormalEverywhereAtOrigin) {
  Vrnn m(Matrix::Zero(1, 2), 3, tiny_config());
  zero_heads(m);
  VrnnSequence seq{Matrix::Zero(1, 3), Matrix::Zero(1, 2), {0}};
  Tape tape;
  const auto noise = std::vector<Matrix>{Matrix::Constant(1, 2, 0.7)};
  const ElboTerms t = elbo_terms(tape, m, {&seq}, noise);
  EXPECT_NEAR(t.elbo.scalar(), -std::log(2 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(t.elbo.scalar(), -1.8379, 1e-4);
  EXPECT_NEAR(t.kl, 0.0, 1e-15);
}

TEST(Elbo, MatchesOracleAndKlIsNonNegative) {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    VrnnConfig c = tiny_config();
    c.seed = 90 + static_cast<std::uint64_t>(trial);
    Vrnn m(tiny_table(), 3, c);
    const VrnnSequence seq = random_sequence(rng, tiny_table(), 3, 1 + static_cast<int>(rng.below(6)));
    const Matrix noise = rng.normal_matrix(seq.size(), 2);
    EXPECT_NEAR(elbo(m, seq, noise), elbo_ref(m, seq, noise), 1e-10);
    std::vector<Matrix> steps;
    for (Eigen::Index t = 0; t < noise.rows(); ++t) steps.push_back(noise.row(t));
    Tape tape;
    const ElboTerms terms = elbo_terms(tape, m, {&seq}, steps);
    ASSERT_EQ(terms.step_kl.size(), static_cast<std::size_t>(seq.size()));
    for (double k : terms.step_kl) EXPECT_GE(k, 0.0);
    EXPECT_NEAR(terms.elbo.scalar(), terms.reconstruction - terms.kl, 1e-10);
  }
}

TEST(Elbo, BatchedEqualsMeanOfSingles) {
  Rng rng(4);
  Vrnn m(tiny_table(), 3, tiny_config());
  std::vector<VrnnSequence> seqs;
  for (int len : {2, 5, 3}) seqs.push_back(random_sequence(rng, tiny_table(), 3, len));
  const auto noise = draw_step_noise(5, 3, 2, rng);
  Tape tape;
  const double batched = elbo_terms(tape, m, {&seqs[0], &seqs[1], &seqs[2]}, noise).elbo.scalar();
  double singles = 0;
  for (int i = 0; i < 3; ++i) {
    Matrix n(seqs[static_cast<std::size_t>(i)].size(), 2);
    for (Eigen::Index t = 0; t < n.rows(); ++t) n.row(t) = noise[static_cast<std::size_t>(t)].row(i);
    singles += elbo(m, seqs[static_cast<std::size_t>(i)], n) / 3;
  }
  EXPECT_NEAR(batched, singles, 1e-10);
}

TEST(Elbo, GradientCheckEveryMode) {
  for (VrnnMode mode : {VrnnMode::full, VrnnMode::deterministic_only, VrnnMode::stochastic_only}) {
    Rng rng(6);
    Vrnn m(tiny_table(), 3, tiny_config(mode));
    ASSERT_LE(m.params().size(), 500u);
    std::vector<VrnnSequence> seqs;
    for (int len : {3, 4}) seqs.push_back(random_sequence(rng, tiny_table(), 3, len));
    const auto noise = draw_step_noise(4, 2, 2, rng);
    const auto objective = [&](Tape& tape, ParamSet&) {
      return elbo_terms(tape, m, {&seqs[0], &seqs[1]}, noise).elbo;
    };
    const auto r = grad_check_detailed(objective, m.params());
    EXPECT_LT(r.max_rel_err, 1e-4) << vrnn_mode_name(mode) << " worst " << r.worst_param;
  }
}

TEST(Elbo, EmptyInputsAreRejected) {
  Vrnn m(tiny_table(), 3, tiny_config());
  Tape tape;
  EXPECT_THROW(elbo_terms(tape, m, {}, {}), ConfigError);
  VrnnSequence empty{Matrix(0, 3), Matrix(0, 2), {}};
  EXPECT_THROW(elbo_terms(tape, m, {&empty}, {}), ConfigError);
  EXPECT_THROW(train_vrnn({}, tiny_table(), 3, tiny_config()), ConfigError);
}

TEST(Reward, SingleActionScoresZero) {
  Vrnn m(Matrix::Constant(1, 2, 0.3), 3, tiny_config());
  VrnnState st = initial_state(m);
  Rng rng(7);
  for (int t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(estimate_reward(m, st, bits(rng, 3), 0).reward, 0.0);
  EXPECT_EQ(st.steps, 4);
  EXPECT_EQ(st.tag, LatentTag::posterior);
}

TEST(Reward, SymmetricActionsScoreLogHalf) {
  Vrnn m((Matrix(2, 2) << 1.0, -2.0, -1.0, 2.0).finished(), 3, tiny_config());
  m.params().at("dec.out.W").value.leftCols(2).setZero();
  m.params().at("dec.out.b").value.leftCols(2).setZero();
  VrnnState st = initial_state(m);
  Rng rng(8);
  for (int t = 0; t < 3; ++t) {
    m.params().at("dec.out.W").value.rightCols(2).setConstant(0.2);
    const RewardStep r = estimate_reward(m, st, bits(rng, 3), t % 2);
    EXPECT_NEAR(r.reward, std::log(0.5), 1e-12);
  }
}

TEST(Reward, DistributionsNormalizeAndStateIsRequired) {
  Vrnn m(tiny_table(), 3, tiny_config());
  Rng rng(9);
  VrnnState st = initial_state(m);
  for (int t = 0; t < 200; ++t) {
    const RewardStep r = estimate_reward(m, st, bits(rng, 3), static_cast<int>(rng.below(4)));
    EXPECT_NEAR(r.log_probs.array().exp().sum(), 1.0, 1e-9);
    EXPECT_TRUE(std::isfinite(r.reward));
  }
  VrnnState blank;
  EXPECT_THROW(estimate_reward(m, blank, bits(rng, 3), 0), StateError);
  EXPECT_THROW(estimate_reward(m, st, bits(rng, 3), 4), DimensionError);
}

TEST(Reward, StochasticOnlyKeepsHiddenStateAtZero) {
  Vrnn m(tiny_table(), 3, tiny_config(VrnnMode::stochastic_only));
  VrnnState st = initial_state(m);
  Rng rng(10);
  for (int t = 0; t < 5; ++t) estimate_reward(m, st, bits(rng, 3), 1);
  EXPECT_TRUE(st.h.isZero(0.0));
  Vrnn d(tiny_table(), 3, tiny_config(VrnnMode::deterministic_only));
  VrnnState sd = initial_state(d);
  estimate_reward(d, sd, bits(rng, 3), 1);
  EXPECT_EQ(sd.tag, LatentTag::prior);
}

TEST(Train, ElboRisesAndIsSmoothlyNonDecreasing) {
  const TrainedVrnn& t = trained().vrnn;
  ASSERT_EQ(t.log.size(), 20u);
  EXPECT_GT(t.log.back().elbo, t.initial_elbo);
  auto smoothed = [&](std::size_t i) {
    double s = 0;
    for (std::size_t k = i; k < i + 5; ++k) s += t.log[k].elbo;
    return s / 5;
  };
  for (std::size_t i = 0; i + 5 < t.log.size(); ++i) EXPECT_GE(smoothed(i + 1), smoothed(i) - 1e-9) << i;
  for (const auto& e : t.log) EXPECT_GE(e.kl, 0.0);
}

TEST(Train, HeldOutExpertActionsBeatChance) {
  const Trained& tr = trained();
  double total = 0;
  int n = 0;
  for (const auto& traj : tr.held_expert)
    for (double r : score_trajectory(tr.vrnn.model, traj.states, traj.actions)) {
      total += r;
      ++n;
    }
  EXPECT_GT(total / n, std::log(1.0 / tr.vrnn.model.num_actions()));
}

TEST(Train, RewardSeparatesExpertFromRandom) {
  const Trained& tr = trained();
  std::vector<double> pos, neg;
  for (const auto& traj : tr.held_expert)
    for (double r : score_trajectory(tr.vrnn.model, traj.states, traj.actions)) pos.push_back(r);
  for (const auto& traj : tr.held_random)
    for (double r : score_trajectory(tr.vrnn.model, traj.states, traj.actions)) neg.push_back(r);
  double mp = 0, mn = 0;
  for (double r : pos) mp += r / static_cast<double>(pos.size());
  for (double r : neg) mn += r / static_cast<double>(neg.size());
  EXPECT_GT(mp, mn);
  EXPECT_GE(pairwise_auc(pos, neg), 0.8);
}

TEST(Train, AblationsTrainAboveUntrainedElbo) {
  const SchemaSet schema = presets::single();
  const ActionSet actions(schema);
  Rng rng(11);
  const Matrix table = rng.normal_matrix(actions.size(), 4);
  const auto seqs = vrnn_sequences(label_enrich(generate_corpus(schema, 80, 12), table), VrnnInput::embedding,
                                   actions.size());
  for (VrnnMode mode : {VrnnMode::deterministic_only, VrnnMode::stochastic_only}) {
    VrnnConfig c;
    c.mode = mode;
    c.epochs = 5;
    const TrainedVrnn t = train_vrnn(seqs, table, state_width(schema), c);
    EXPECT_GT(t.log.back().elbo, t.initial_elbo) << vrnn_mode_name(mode);
  }
}

TEST(Train, SeedDeterminismAndCheckpointRoundTrip) {
  Rng rng(12);
  std::vector<VrnnSequence> seqs;
  for (int i = 0; i < 10; ++i) seqs.push_back(random_sequence(rng, tiny_table(), 3, 3 + i % 3));
  VrnnConfig c = tiny_config();
  c.epochs = 3;
  const TrainedVrnn a = train_vrnn(seqs, tiny_table(), 3, c);
  const TrainedVrnn b = train_vrnn(seqs, tiny_table(), 3, c);
  for (const auto& [name, p] : a.model.params().entries()) EXPECT_EQ(p.value, b.model.params().at(name).value) << name;

  const TrainedVrnn back = vrnn_from_json(vrnn_to_json(a, "h"));
  EXPECT_EQ(back.model.table(), a.model.table());
  EXPECT_EQ(back.log.size(), a.log.size());
  VrnnState s1 = initial_state(a.model), s2 = initial_state(back.model);
  const Vector s = Vector::Ones(3);
  EXPECT_EQ(estimate_reward(a.model, s1, s, 2).reward, estimate_reward(back.model, s2, s, 2).reward);
}

TEST(Sequences, OneHotUsesActionIdsAndTableIsIdentity) {
  const Matrix table = tiny_table();
  Corpus c = generate_corpus(presets::single(), 2, 3);
  const auto enriched = label_enrich(c, Matrix::Zero(ActionSet(presets::single()).size(), 2));
  const int na = ActionSet(presets::single()).size();
  const auto seqs = vrnn_sequences(enriched, VrnnInput::one_hot, na);
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0].inputs.cols(), na);
  for (Eigen::Index t = 0; t < seqs[0].size(); ++t) EXPECT_EQ(seqs[0].inputs(t, seqs[0].actions[t]), 1.0);
  EXPECT_EQ(vrnn_table(table, VrnnInput::one_hot), Matrix::Identity(4, 4));
  EXPECT_EQ(vrnn_table(table, VrnnInput::embedding), table);
}
