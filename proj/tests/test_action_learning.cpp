#include "ssdial/action/train.hpp"
#include "ssdial/core/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ssdial;

namespace {

ActionModelConfig tiny_config() {
  ActionModelConfig c;
  c.embed_dim = 2;
  c.latent_dim = 2;
  c.hidden = 3;
  c.token_dim = 2;
  c.utterance_hidden = 2;
  c.seed = 13;
  return c;
}

constexpr ActionModelDims kTiny{8, 3, 4};

double softplus_ref(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RowVector dense_ref(const ParamSet& ps, const std::string& name, const RowVector& x, bool tanh_act) {
  RowVector y = x * ps.at(name + ".W").value + ps.at(name + ".b").value;
  if (tanh_act) y = y.array().tanh().matrix();
  return y;
}

RowVector encode_ref(const ParamSet& ps, const Utterance& u) {
  const Matrix& tok = ps.at("tok.emb").value;
  const Matrix& wi = ps.at("utt.gru.Wi").value;
  const Matrix& wh = ps.at("utt.gru.Wh").value;
  const Matrix& bi = ps.at("utt.gru.bi").value;
  const Matrix& bh = ps.at("utt.gru.bh").value;
  const Eigen::Index H = wh.rows();
  RowVector h = RowVector::Zero(H);
  for (int id : u) {
    const RowVector gi = tok.row(id) * wi + bi;
    const RowVector gh = h * wh + bh;
    RowVector next(H);
    for (Eigen::Index j = 0; j < H; ++j) {
      const double r = sigmoid_ref(gi(j) + gh(j));
      const double z = sigmoid_ref(gi(H + j) + gh(H + j));
      const double n = std::tanh(gi(2 * H + j) + r * gh(2 * H + j));
      next(j) = n + z * (h(j) - n);
    }
    h = next;
  }
  return h;
}

// Straight-line recomputation of the transition bound for one turn.
double labeled_bound_ref(const ActionModel& m, const Vector& s_next, const Vector& s, const Utterance& u, int a,
                         const Vector& noise) {
  const ParamSet& ps = m.params();
  const int z = m.config().latent_dim;
  const RowVector enc = encode_ref(ps, u);
  RowVector in(enc.size() + m.config().embed_dim);
  in << enc, ps.at("embed.table").value.row(a);
  const RowVector head = dense_ref(ps, "inf.out", dense_ref(ps, "inf.h", in, true), false);
  double kl = 0, rec = 0;
  RowVector zz(z);
  for (int k = 0; k < z; ++k) {
    const double mu = head(k), lv = std::clamp(head(z + k), -20.0, 20.0);
    zz(k) = mu + std::exp(lv / 2) * noise(k);
    kl += 0.5 * (std::exp(lv) + mu * mu - lv - 1.0);
  }
  RowVector din(s.size() + z);
  din << s.transpose(), zz;
  const RowVector logits = dense_ref(ps, "dec.out", dense_ref(ps, "dec.h", din, true), false);
  for (Eigen::Index j = 0; j < logits.size(); ++j) rec += s_next(j) * logits(j) - softplus_ref(logits(j));
  return rec - kl;
}

Vector random_bits(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return v;
}

Utterance random_utterance(Rng& rng, int vocab, int max_len = 6) {
  Utterance u(1 + rng.below(static_cast<std::size_t>(max_len)));
  for (auto& t : u) t = 2 + static_cast<int>(rng.below(static_cast<std::size_t>(vocab - 2)));
  return u;
}

struct ToyData {
  SchemaSet schema = presets::single();
  ActionModelDims dims;
  Corpus train, held;
  ToyData() {
    dims = {build_vocabulary(schema).size(), state_width(schema), ActionSet(schema).size()};
    train = generate_corpus(schema, 120, 3);
    held = generate_corpus(schema, 60, 4);
  }
};

const ToyData& toy() {
  static const ToyData d;
  return d;
}

}  // namespace

TEST(Predict, ZeroEmbeddingsGiveUniform) {
  ActionModel m(kTiny, tiny_config());
  m.params().at("embed.table").value.setZero();
  Rng rng(1);
  const Vector p = predict_action(m, random_utterance(rng, 8), random_bits(rng, 3), random_bits(rng, 3));
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(p[k], 0.25);
}

TEST(Predict, HugeTemperatureIsNearlyUniform) {
  ActionModelConfig c = tiny_config();
  c.temperature = 1e6;
  ActionModel m(kTiny, c);
  Rng rng(2);
  const Vector p = predict_action(m, random_utterance(rng, 8), random_bits(rng, 3), random_bits(rng, 3));
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(p[k], 0.25, 1e-3);
}

TEST(Predict, DistributionAndTemperatureInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    ActionModelConfig c = tiny_config();
    c.seed = 100 + static_cast<std::uint64_t>(trial);
    ActionModel m(kTiny, c);
    const Utterance u = random_utterance(rng, 8);
    const Vector s = random_bits(rng, 3), sn = random_bits(rng, 3);
    const Vector p = predict_action(m, u, s, sn);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
    c.temperature = 7.5;
    ActionModel hot(kTiny, c);
    Eigen::Index a1, a2;
    p.maxCoeff(&a1);
    predict_action(hot, u, s, sn).maxCoeff(&a2);
    EXPECT_EQ(a1, a2);
  }
}

TEST(LabeledBound, MatchesStraightLineOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ActionModelConfig c = tiny_config();
    c.seed = 7 + static_cast<std::uint64_t>(trial);
    ActionModel m(kTiny, c);
    const Utterance u = random_utterance(rng, 8);
    const Vector s = random_bits(rng, 3), sn = random_bits(rng, 3), noise = rng.normal_matrix(2, 1).col(0);
    const int a = static_cast<int>(rng.below(3));
    EXPECT_NEAR(labeled_bound(m, sn, s, u, a, noise), labeled_bound_ref(m, sn, s, u, a, noise), 1e-10);
  }
}

TEST(LabeledBound, ConfidentDecoderLeavesOnlyKl) {
  ActionModel m(kTiny, tiny_config());
  const Vector sn = (Vector(3) << 1, 0, 1).finished();
  m.params().at("dec.out.W").value.setZero();
  m.params().at("dec.out.b").value = (Matrix(1, 3) << 20, -20, 20).finished();
  Rng rng(5);
  const Utterance u = random_utterance(rng, 8);
  const Vector s = random_bits(rng, 3), noise = rng.normal_matrix(2, 1).col(0);
  Tape tape;
  Var enc = m.encode(tape, {u});
  const BoundRows r = labeled_bound_rows(tape, m, enc, gather_rows(m.table(tape), {1}), s.transpose(), sn.transpose(),
                                         noise.transpose());
  EXPECT_GE(r.kl.scalar(), 0.0);
  EXPECT_NEAR(r.reconstruction.scalar(), 0.0, 1e-7);
  EXPECT_NEAR(r.bound.scalar(), -r.kl.scalar(), 1e-7);
}

TEST(UnlabeledBound, OneHotClassifierEqualsLabeledBound) {
  ActionModelConfig c = tiny_config();
  c.temperature = 1e-9;
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    c.seed = 50 + static_cast<std::uint64_t>(trial);
    ActionModel m(kTiny, c);
    const Utterance u = random_utterance(rng, 8);
    const Vector s = random_bits(rng, 3), sn = random_bits(rng, 3), noise = rng.normal_matrix(2, 1).col(0);
    Eigen::Index best;
    const Vector p = predict_action(m, u, s, sn);
    p.maxCoeff(&best);
    ASSERT_DOUBLE_EQ(p[best], 1.0);
    EXPECT_NEAR(unlabeled_bound(m, sn, s, u, noise), labeled_bound(m, sn, s, u, static_cast<int>(best), noise), 1e-12);
  }
}

TEST(UnlabeledBound, UniformOverTwoEqualBoundsAddsLogTwo) {
  ActionModel m({8, 3, 2}, tiny_config());
  m.params().at("embed.table").value.setZero();
  Rng rng(7);
  const Utterance u = random_utterance(rng, 8);
  const Vector s = random_bits(rng, 3), sn = random_bits(rng, 3), noise = rng.normal_matrix(2, 1).col(0);
  const double l = labeled_bound(m, sn, s, u, 0, noise);
  EXPECT_NEAR(labeled_bound(m, sn, s, u, 1, noise), l, 1e-14);
  EXPECT_NEAR(unlabeled_bound(m, sn, s, u, noise), l + std::log(2.0), 1e-12);

  ActionModelConfig flipped = tiny_config();
  flipped.entropy_sign = -1.0;
  ActionModel mf({8, 3, 2}, flipped);
  mf.params().at("embed.table").value.setZero();
  EXPECT_NEAR(unlabeled_bound(mf, sn, s, u, noise), labeled_bound(mf, sn, s, u, 0, noise) - std::log(2.0), 1e-12);
}

TEST(UnlabeledBound, RefusesHugeActionSets) {
  ActionModelConfig c = tiny_config();
  c.max_enumeration = 512;
  ActionModel m({8, 3, 513}, c);
  Rng rng(8);
  EXPECT_THROW(unlabeled_bound(m, random_bits(rng, 3), random_bits(rng, 3), {2, 3}, rng.normal_matrix(2, 1).col(0)),
               ConfigError);
}

TEST(Classification, PerfectAndUniformPredictors) {
  Tape tape;
  Matrix lp = Matrix::Constant(2, 4, -800.0);
  lp(0, 1) = 0.0;
  lp(1, 3) = 0.0;
  EXPECT_NEAR(classification_loss(tape.constant(lp), {1, 3}).scalar(), 0.0, 1e-12);
  Var uniform = log_softmax_rows(tape.constant(Matrix::Zero(3, 20)));
  EXPECT_NEAR(classification_loss(uniform, {0, 7, 19}).scalar(), std::log(20.0), 1e-12);
}

TEST(ResponseBound, ConfidentDecoderLeavesOnlyKl) {
  ActionModel m(kTiny, tiny_config());
  m.params().at("rdec.out.W").value.setZero();
  Matrix b = Matrix::Zero(1, 8);
  b(0, 5) = 20.0;
  m.params().at("rdec.out.b").value = b;
  const Utterance u = {5, 5, 5};
  Rng rng(9);
  const Vector noise = rng.normal_matrix(2, 1).col(0);
  Tape tape;
  const BoundRows r = response_labeled_bound_rows(tape, m, m.encode(tape, {u}), m.encode(tape, {{3}}),
                                                  m.encode(tape, {{}}), gather_rows(m.table(tape), {2}),
                                                  token_counts({u}, 8), noise.transpose());
  EXPECT_GE(r.kl.scalar(), 0.0);
  EXPECT_NEAR(r.reconstruction.scalar(), 0.0, 1e-7);
  EXPECT_NEAR(r.bound.scalar(), -r.kl.scalar(), 1e-7);
}

TEST(ResponseBound, OneHotCollapseAndUniformCase) {
  ActionModelConfig c = tiny_config();
  c.temperature = 1e-9;
  ActionModel m(kTiny, c);
  Rng rng(10);
  const Utterance u = random_utterance(rng, 8), up = random_utterance(rng, 8), un = random_utterance(rng, 8);
  const Vector noise = rng.normal_matrix(2, 1).col(0);
  Eigen::Index best;
  predict_action_text(m, up, u, un).maxCoeff(&best);
  EXPECT_NEAR(response_unlabeled_bound(m, u, up, un, noise),
              response_labeled_bound(m, u, up, un, static_cast<int>(best), noise), 1e-12);

  ActionModel two({8, 3, 2}, tiny_config());
  two.params().at("embed.table").value.setZero();
  EXPECT_NEAR(response_unlabeled_bound(two, u, up, un, noise), response_labeled_bound(two, u, up, un, 1, noise) + std::log(2.0),
              1e-12);
}

namespace {

struct GradFixture {
  std::vector<TurnExample> f, p, u;
  ObjectiveBatch batch;
  GradFixture() {
    Rng rng(21);
    auto make = [&](bool states, bool label) {
      TurnExample t;
      t.u = random_utterance(rng, 8, 4);
      t.u_prev = rng.bernoulli(0.3) ? Utterance{} : random_utterance(rng, 8, 3);
      t.u_next = random_utterance(rng, 8, 3);
      if (states) {
        t.s = random_bits(rng, 3);
        t.s_next = random_bits(rng, 3);
      }
      if (label) t.action = static_cast<int>(rng.below(3));
      return t;
    };
    for (int i = 0; i < 3; ++i) f.push_back(make(true, true));
    for (int i = 0; i < 2; ++i) p.push_back(make(true, false));
    for (int i = 0; i < 2; ++i) u.push_back(make(false, false));
    for (auto& t : f) batch.full.push_back(&t);
    for (auto& t : p) batch.partial.push_back(&t);
    for (auto& t : u) batch.unlabeled.push_back(&t);
    batch.draw_noise(2, rng);
  }
};

}  // namespace

TEST(GradCheck, FullSemiSupervisedObjective) {
  ActionModel m(kTiny, tiny_config());
  ASSERT_LE(m.params().size(), 500u);
  GradFixture fx;
  const double err = grad_check(
      [&](Tape& tape, ParamSet&) { return semi_supervised_objective(tape, m, fx.batch).objective; }, m.params());
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, ResponseBoundsAlone) {
  ActionModel m(kTiny, tiny_config());
  GradFixture fx;
  ObjectiveBatch only_u;
  only_u.unlabeled = fx.batch.unlabeled;
  only_u.noise_unlabeled = fx.batch.noise_unlabeled;
  EXPECT_LT(grad_check([&](Tape& tape, ParamSet&) { return semi_supervised_objective(tape, m, only_u).objective; },
                       m.params()),
            1e-4);
  const auto& t = fx.f.front();
  EXPECT_LT(grad_check(
                [&](Tape& tape, ParamSet&) {
                  return sum(response_labeled_bound_rows(tape, m, m.encode(tape, {t.u}), m.encode(tape, {t.u_prev}),
                                                         m.encode(tape, {t.u_next}), gather_rows(m.table(tape), {t.action}),
                                                         token_counts({t.u}, 8), fx.batch.noise_full.topRows(1))
                                 .bound);
                },
                m.params()),
            1e-4);
}

TEST(SharedParameters, ResponsePathMovesTransitionPath) {
  ActionModel m(kTiny, tiny_config());
  Rng rng(30);
  const Utterance u = random_utterance(rng, 8);
  const Vector s = random_bits(rng, 3), sn = random_bits(rng, 3), noise = rng.normal_matrix(2, 1).col(0);
  const double before = labeled_bound(m, sn, s, u, 1, noise);
  Tape tape;
  Var r = response_labeled_bound_rows(tape, m, m.encode(tape, {u}), m.encode(tape, {{}}), m.encode(tape, {{}}),
                                      gather_rows(m.table(tape), {1}), token_counts({u}, 8), noise.transpose())
              .bound;
  tape.backward(sum(r));
  EXPECT_GT(m.params().at("inf.h.W").grad.norm(), 0.0);
  EXPECT_GT(m.params().at("embed.table").grad.row(1).norm(), 0.0);
  EXPECT_EQ(m.params().at("dec.out.W").grad.norm(), 0.0);
  Adam opt(0.1);
  opt.step(m.params());
  EXPECT_NE(labeled_bound(m, sn, s, u, 1, noise), before);
}

TEST(Train, EmptyFullSetIsRejected) {
  EXPECT_THROW(train_action_model({}, toy().train, {}, toy().dims, ActionModelConfig{}), ConfigError);
}

TEST(Train, SupervisedOnlyReachesHighAccuracyAndLossFalls) {
  ActionModelConfig c;
  c.epochs = 30;
  auto t = train_action_model(toy().train, {}, {}, toy().dims, c);
  EXPECT_GE(action_accuracy(t.model, flatten(toy().held)), 0.95);
  ASSERT_EQ(t.log.size(), 30u);
  auto smoothed = [&](auto field, std::size_t i) {
    double s = 0;
    for (std::size_t k = i; k < i + 5; ++k) s += t.log[k].*field;
    return s / 5;
  };
  for (std::size_t i = 0; i + 5 < t.log.size(); ++i) {
    EXPECT_LE(smoothed(&EpochLog::classification, i + 1), smoothed(&EpochLog::classification, i) + 1e-9) << i;
    EXPECT_GE(smoothed(&EpochLog::objective, i + 1), smoothed(&EpochLog::objective, i) - 1e-9) << i;
  }
}

TEST(Train, SeedDeterminism) {
  ActionModelConfig c;
  c.epochs = 2;
  auto a = train_action_model(toy().train, {}, {}, toy().dims, c);
  auto b = train_action_model(toy().train, {}, {}, toy().dims, c);
  EXPECT_EQ(a.model.embedding_table(), b.model.embedding_table());
}

TEST(Enrich, LabelsPredictionsAndPlaceholders) {
  const Corpus corpus = generate_corpus(presets::pair(), 500, 8);
  const auto split = mask_labels(corpus, {0.2, 0.5, 0.3, 0, 8});
  const ActionModelDims dims{build_vocabulary(presets::pair()).size(), state_width(presets::pair()), ActionSet(presets::pair()).size()};
  ActionModelConfig c;
  c.epochs = 30;
  auto t = train_action_model(split.full, split.partial, split.unlabeled, dims, c);
  ASSERT_TRUE(t.placeholder.ready());

  const Matrix table = t.model.embedding_table();
  const auto full = enrich(split.full, t);
  for (std::size_t i = 0; i < full.size(); ++i)
    for (std::size_t k = 0; k < full[i].turns.size(); ++k) {
      const int a = split.full[i].turns[k].action;
      EXPECT_EQ(full[i].turns[k].action, a);
      EXPECT_EQ(full[i].turns[k].embedding, Vector(table.row(a).transpose()));
    }

  const auto partial = enrich(split.partial, t);
  EXPECT_EQ(partial.size(), split.partial.size());
  int hit = 0, total = 0;
  for (const auto& d : partial) {
    const auto& truth = corpus[static_cast<std::size_t>(d.id)];
    for (std::size_t k = 0; k < d.turns.size(); ++k) {
      hit += d.turns[k].action == truth.turns[k].action;
      ++total;
      EXPECT_NEAR(d.turns[k].distribution.sum(), 1.0, 1e-9);
    }
  }
  EXPECT_GE(static_cast<double>(hit) / total, 0.85);

  const auto again = enrich(split.partial, t);
  for (std::size_t i = 0; i < again.size(); ++i)
    for (std::size_t k = 0; k < again[i].turns.size(); ++k) EXPECT_EQ(again[i].turns[k].embedding, partial[i].turns[k].embedding);

  const auto text = enrich(split.unlabeled, t);
  int bits = 0, right = 0;
  for (const auto& d : text) {
    const auto& truth = corpus[static_cast<std::size_t>(d.id)];
    for (std::size_t k = 0; k < d.turns.size(); ++k) {
      ASSERT_EQ(d.turns[k].state.size(), dims.state_width);
      for (int j = 0; j < dims.state_width; ++j) {
        right += d.turns[k].state[j] == truth.turns[k].state[static_cast<std::size_t>(j)];
        ++bits;
      }
    }
  }
  EXPECT_GE(static_cast<double>(right) / bits, 0.9);

  const auto soft = enrich(split.partial, t, true);
  const auto& st = soft.front().turns.front();
  EXPECT_TRUE(st.embedding.isApprox(Vector(table.transpose() * st.distribution), 1e-12));
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
  ActionModelConfig c;
  c.epochs = 1;
  auto t = train_action_model(toy().train, {}, {}, toy().dims, c);
  const auto j = checkpoint_to_json(t, "cafe");
  auto back = checkpoint_from_json(nlohmann::json::parse(j.dump()));
  const auto turns = flatten(toy().held);
  EXPECT_EQ(predict_labels(t.model, turns, false), predict_labels(back.model, turns, false));
  EXPECT_EQ(back.model.embedding_table(), t.model.embedding_table());
  auto bad = j;
  bad["version"] = 2;
  EXPECT_THROW(checkpoint_from_json(bad), VersionError);
}
