#pragma once

// Numerical integrity checks on small random networks: finite-difference gradient checks of every
// training objective, and the bound, KL and normalization properties of the generative models.

#include "ssdial/action/train.hpp"
#include "ssdial/core/gradcheck.hpp"
#include "ssdial/policy/policy.hpp"
#include "ssdial/reward/adversarial.hpp"

#include <algorithm>
#include <chrono>

namespace ssdial {

struct GradientCheckReport {
  std::string name;
  std::size_t params = 0;
  double max_rel_err = 0;
  std::string worst_param;
};

namespace detail {

inline Vector random_bits(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return v;
}

inline Utterance random_utterance(Rng& rng, int vocab, int max_len) {
  Utterance u(1 + rng.below(static_cast<std::size_t>(max_len)));
  for (auto& t : u) t = 2 + static_cast<int>(rng.below(static_cast<std::size_t>(vocab - 2)));
  return u;
}

inline ActionModelConfig tiny_action_config(std::uint64_t seed) {
  ActionModelConfig c;
  c.embed_dim = 2;
  c.latent_dim = 2;
  c.hidden = 3;
  c.token_dim = 2;
  c.utterance_hidden = 2;
  c.seed = seed;
  return c;
}

inline constexpr ActionModelDims kTinyDims{8, 3, 4};

inline VrnnConfig tiny_vrnn_config(VrnnMode mode, std::uint64_t seed) {
  VrnnConfig c;
  c.latent_dim = 2;
  c.hidden_dim = 3;
  c.mlp_hidden = 3;
  c.mode = mode;
  c.seed = seed;
  return c;
}

inline Matrix tiny_table() { return (Matrix(4, 2) << 1.0, 0.0, 0.0, 1.0, -1.0, 0.5, 0.3, -0.8).finished(); }

inline VrnnSequence random_sequence(Rng& rng, const Matrix& table, int width, int length) {
  VrnnSequence s{Matrix(length, width), Matrix(length, table.cols()), {}};
  for (int t = 0; t < length; ++t) {
    const int a = static_cast<int>(rng.below(static_cast<std::size_t>(table.rows())));
    s.states.row(t) = random_bits(rng, width).transpose();
    s.inputs.row(t) = table.row(a);
    s.actions.push_back(a);
  }
  return s;
}

inline GradientCheckReport run_check(std::string name, const Objective& f, ParamSet& ps) {
  const GradCheckResult r = grad_check_detailed(f, ps, 1e-5);
  return {std::move(name), ps.size(), r.max_rel_err, r.worst_param};
}

}  // namespace detail

/// Gradient checks of the semi-supervised objective, the VRNN ELBO, the adversarial loss and
/// both policy surrogates, each on a net under 500 parameters with frozen noise.
inline std::vector<GradientCheckReport> gradient_integrity(std::uint64_t seed = 21) {
  using namespace detail;
  std::vector<GradientCheckReport> out;
  Rng rng(seed);

  {
    ActionModel m(kTinyDims, tiny_action_config(13));
    std::vector<TurnExample> f, p, u;
    auto make = [&](bool states, bool label) {
      TurnExample t;
      t.u = random_utterance(rng, 8, 4);
      t.u_prev = rng.bernoulli(0.3) ? Utterance{} : random_utterance(rng, 8, 3);
      t.u_next = random_utterance(rng, 8, 3);
      if (states) {
        t.s = random_bits(rng, 3);
        t.s_next = random_bits(rng, 3);
      }
      if (label) t.action = static_cast<int>(rng.below(4));
      return t;
    };
    for (int i = 0; i < 3; ++i) f.push_back(make(true, true));
    for (int i = 0; i < 2; ++i) p.push_back(make(true, false));
    for (int i = 0; i < 2; ++i) u.push_back(make(false, false));
    ObjectiveBatch b;
    for (auto& t : f) b.full.push_back(&t);
    for (auto& t : p) b.partial.push_back(&t);
    for (auto& t : u) b.unlabeled.push_back(&t);
    b.draw_noise(2, rng);
    out.push_back(run_check(
        "semi-supervised objective", [&](Tape& tape, ParamSet&) { return semi_supervised_objective(tape, m, b).objective; },
        m.params()));
  }

  {
    Vrnn m(tiny_table(), 3, tiny_vrnn_config(VrnnMode::full, 5));
    std::vector<VrnnSequence> seqs;
    for (int len : {3, 4}) seqs.push_back(random_sequence(rng, tiny_table(), 3, len));
    const auto noise = draw_step_noise(4, 2, 2, rng);
    out.push_back(run_check("vrnn elbo",
                            [&](Tape& tape, ParamSet&) { return elbo_terms(tape, m, {&seqs[0], &seqs[1]}, noise).elbo; },
                            m.params()));
  }

  {
    const Matrix table = (Matrix(3, 2) << 0.5, -1.0, 1.2, 0.3, -0.7, 0.8).finished();
    DiscriminatorConfig dc;
    dc.hidden = 4;
    dc.seed = 3;
    Discriminator d(table, 4, dc);
    auto rows = [&](int n) {
      Matrix m(n, 4);
      for (int i = 0; i < n; ++i) m.row(i) = random_bits(rng, 4).transpose();
      return m;
    };
    auto inputs = [&](const std::vector<int>& a) {
      Matrix m(static_cast<Eigen::Index>(a.size()), table.cols());
      for (std::size_t i = 0; i < a.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = table.row(a[i]);
      return m;
    };
    const Matrix es = rows(5), ps = rows(6), ei = inputs({0, 1, 2, 1, 0}), pi = inputs({2, 2, 0, 1, 1, 0});
    Vector log_q(6);
    for (int i = 0; i < 6; ++i) log_q[i] = -0.2 * (i + 1);
    out.push_back(run_check(
        "adversarial loss", [&](Tape& tape, ParamSet&) { return adversarial_loss(tape, d, es, ei, ps, pi, log_q); },
        d.params()));
  }

  {
    PolicyNet net(3, 2, 4, 9);
    std::vector<Trajectory> batch;
    for (const std::vector<double>& rs : {std::vector<double>{1.0, -0.5, 2.0}, std::vector<double>{0.3, 0.7}}) {
      Trajectory t;
      for (double r : rs) {
        const Vector s = random_bits(rng, 3);
        const ActResult a = act(net, s, rng, true);
        t.steps.push_back({s, a.action, a.log_prob, r});
      }
      batch.push_back(std::move(t));
    }
    const PolicyBatch b = make_batch(net, batch, 0.9);
    PolicyConfig cfg;
    out.push_back(run_check(
        "policy surrogate (reinforce)", [&](Tape& tape, ParamSet&) { return reinforce_loss(tape, net, b, cfg).total; },
        net.params()));
    PolicyBatch shifted = b;  // ratios away from 1, inside the clip range
    for (Eigen::Index i = 0; i < shifted.old_log_probs.size(); ++i) shifted.old_log_probs[i] += (i % 2 ? 0.05 : -0.05);
    out.push_back(run_check(
        "policy surrogate (ppo)", [&](Tape& tape, ParamSet&) { return ppo_loss(tape, net, shifted, cfg).total; },
        net.params()));
  }
  return out;
}

struct BoundConsistencyReport {
  int trials = 0;
  double max_bound_gap = 0;      // |unlabeled bound with a one-hot classifier - labelled bound at that action|
  double min_kl = 0;             // smallest KL term seen (VAE rows and every VRNN step)
  double max_softmax_error = 0;  // largest |sum p - 1| over every action distribution
  int non_one_hot = 0;           // trials whose near-zero-temperature classifier was not exactly one-hot
};

/// Property checks over `trials` random inputs and random small networks.
inline BoundConsistencyReport bound_consistency(int trials = 1000, std::uint64_t seed = 99) {
  using namespace detail;
  BoundConsistencyReport r;
  r.trials = trials;
  r.min_kl = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  auto softmax_error = [&](const Vector& p) { r.max_softmax_error = std::max(r.max_softmax_error, std::abs(p.sum() - 1.0)); };
  for (int trial = 0; trial < trials; ++trial) {
    const auto tseed = derive_seed(seed, static_cast<std::uint64_t>(trial));
    ActionModelConfig cold = tiny_action_config(tseed);
    cold.temperature = 1e-9;
    ActionModel hot(kTinyDims, tiny_action_config(tseed)), m(kTinyDims, cold);
    const Utterance u = random_utterance(rng, 8, 6), up = random_utterance(rng, 8, 4), un = random_utterance(rng, 8, 4);
    const Vector s = random_bits(rng, 3), sn = random_bits(rng, 3), noise = rng.normal_matrix(2, 1).col(0);

    const Vector p = predict_action(m, u, s, sn);
    Eigen::Index best;
    p.maxCoeff(&best);
    if (p[best] != 1.0) ++r.non_one_hot;
    r.max_bound_gap = std::max(
        r.max_bound_gap, std::abs(unlabeled_bound(m, sn, s, u, noise) - labeled_bound(m, sn, s, u, static_cast<int>(best), noise)));
    const Vector pt = predict_action_text(m, up, u, un);
    pt.maxCoeff(&best);
    if (pt[best] != 1.0) ++r.non_one_hot;
    r.max_bound_gap = std::max(r.max_bound_gap, std::abs(response_unlabeled_bound(m, u, up, un, noise) -
                                                         response_labeled_bound(m, u, up, un, static_cast<int>(best), noise)));

    softmax_error(predict_action(hot, u, s, sn));
    softmax_error(predict_action_text(hot, up, u, un));
    {
      Tape tape;
      const int a = static_cast<int>(rng.below(4));
      const BoundRows lb = labeled_bound_rows(tape, hot, hot.encode(tape, {u}), gather_rows(hot.table(tape), {a}),
                                              s.transpose(), sn.transpose(), noise.transpose());
      const BoundRows rb = response_labeled_bound_rows(tape, hot, hot.encode(tape, {u}), hot.encode(tape, {up}),
                                                       hot.encode(tape, {un}), gather_rows(hot.table(tape), {a}),
                                                       token_counts({u}, kTinyDims.vocab), noise.transpose());
      r.min_kl = std::min({r.min_kl, lb.kl.scalar(), rb.kl.scalar()});
    }

    const VrnnMode mode = trial % 3 == 0 ? VrnnMode::full : trial % 3 == 1 ? VrnnMode::stochastic_only : VrnnMode::deterministic_only;
    Vrnn v(tiny_table(), 3, tiny_vrnn_config(mode, tseed));
    const VrnnSequence seq = random_sequence(rng, tiny_table(), 3, 2 + static_cast<int>(rng.below(4)));
    {
      Tape tape;
      const ElboTerms e = elbo_terms(tape, v, {&seq}, draw_step_noise(seq.size(), 1, 2, rng));
      for (double k : e.step_kl) r.min_kl = std::min(r.min_kl, k);
    }
    VrnnState st = initial_state(v);
    for (Eigen::Index t = 0; t < seq.size(); ++t) {
      const Vector st_s = seq.states.row(t).transpose();
      softmax_error(action_log_probs(v, st, st_s).array().exp().matrix());
      advance(v, st, seq.inputs.row(t).transpose(), st_s);
    }

    PolicyNet net(3, 4, 5, tseed);
    softmax_error(net.log_probs(random_bits(rng, 3)).array().exp().matrix());
  }
  return r;
}

}  // namespace ssdial
