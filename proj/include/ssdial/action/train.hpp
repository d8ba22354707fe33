#pragma once

#include "ssdial/action/model.hpp"
#include "ssdial/core/optim.hpp"
#include "ssdial/core/serialize.hpp"
#include "ssdial/corpus/corpus.hpp"

#include <json.hpp>

#include <optional>

namespace ssdial {

/// One system turn flattened out of a demonstration, with its neighbouring system utterances.
struct TurnExample {
  Utterance u, u_prev, u_next, context;
  Vector s, s_next;  // empty for text-only turns
  int action = -1;   // -1 when unlabeled
  int dialogue = 0;
  int turn = 0;
};

inline std::vector<TurnExample> flatten(const Corpus& corpus) {
  std::vector<TurnExample> out;
  for (const auto& d : corpus) {
    for (int t = 0; t < d.size(); ++t) {
      const auto& tr = d.turns[static_cast<std::size_t>(t)];
      TurnExample ex;
      ex.u = tr.system;
      if (t > 0) ex.u_prev = d.turns[static_cast<std::size_t>(t) - 1].system;
      if (t + 1 < d.size()) ex.u_next = d.turns[static_cast<std::size_t>(t) + 1].system;
      ex.context = d.level == Supervision::unlabeled ? tr.context : history_before(d, t);
      if (d.level != Supervision::unlabeled) {
        ex.s = from_bits(tr.state);
        ex.s_next = from_bits(d.next_state(t));
      }
      ex.action = tr.action;
      ex.dialogue = d.id;
      ex.turn = t;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

namespace detail {

template <class F>
inline std::vector<Utterance> gather_utts(const std::vector<const TurnExample*>& b, F field) {
  std::vector<Utterance> out;
  out.reserve(b.size());
  for (const auto* e : b) out.push_back(e->*field);
  return out;
}

inline Matrix stack_states(const std::vector<const TurnExample*>& b, Vector TurnExample::*field) {
  Matrix m(static_cast<Eigen::Index>(b.size()), (b.front()->*field).size());
  for (std::size_t i = 0; i < b.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = (b[i]->*field).transpose();
  return m;
}

inline std::vector<int> labels(const std::vector<const TurnExample*>& b) {
  std::vector<int> a;
  for (const auto* e : b) {
    if (e->action < 0) throw ConfigError("labelled batch contains an unlabelled turn");
    a.push_back(e->action);
  }
  return a;
}

}  // namespace detail

/// Minibatches drawn from each supervision level plus the frozen noise for every stochastic term.
struct ObjectiveBatch {
  std::vector<const TurnExample*> full, partial, unlabeled;
  Matrix noise_full, noise_full_response, noise_partial, noise_unlabeled;

  void draw_noise(int latent, Rng& rng) {
    noise_full = rng.normal_matrix(static_cast<Eigen::Index>(full.size()), latent);
    noise_full_response = rng.normal_matrix(static_cast<Eigen::Index>(full.size()), latent);
    noise_partial = rng.normal_matrix(static_cast<Eigen::Index>(partial.size()), latent);
    noise_unlabeled = rng.normal_matrix(static_cast<Eigen::Index>(unlabeled.size()), latent);
  }
};

/// Per-term batch means; terms absent from the batch stay at 0 and are marked missing.
struct ObjectiveTerms {
  Var objective;
  double labeled = 0, unlabeled = 0, classification = 0, text_classification = 0, response_labeled = 0,
         response_unlabeled = 0;
};

/// Semi-supervised objective to maximize, each term averaged over its batch:
///   mean_F L + mean_P U - alpha (CE + CE_text) on F + mean_F L_resp + mean_U U_resp.
inline ObjectiveTerms semi_supervised_objective(Tape& tape, ActionModel& m, const ObjectiveBatch& b) {
  using detail::gather_utts;
  using detail::stack_states;
  ObjectiveTerms out;
  std::vector<Var> parts;
  const double alpha = m.config().alpha;
  const int vocab = m.dims().vocab;
  if (!b.full.empty()) {
    const double n = static_cast<double>(b.full.size());
    const std::vector<int> a = detail::labels(b.full);
    Var enc_u = m.encode(tape, gather_utts(b.full, &TurnExample::u));
    Var enc_prev = m.encode(tape, gather_utts(b.full, &TurnExample::u_prev));
    Var enc_next = m.encode(tape, gather_utts(b.full, &TurnExample::u_next));
    const Matrix s = stack_states(b.full, &TurnExample::s), sn = stack_states(b.full, &TurnExample::s_next);
    Var e_a = gather_rows(m.table(tape), a);

    Var lab = scale(sum(labeled_bound_rows(tape, m, enc_u, e_a, s, sn, b.noise_full).bound), 1.0 / n);
    Var ce = classification_loss(m.action_log_probs(tape, m.context_features(tape, enc_u, tape.constant(s), tape.constant(sn))), a);
    Var ce_text = classification_loss(m.action_log_probs(tape, m.text_features(tape, enc_prev, enc_u, enc_next)), a);
    const Matrix counts = token_counts(gather_utts(b.full, &TurnExample::u), vocab);
    Var resp = scale(sum(response_labeled_bound_rows(tape, m, enc_u, enc_prev, enc_next, e_a, counts, b.noise_full_response).bound),
                     1.0 / n);
    out.labeled = lab.scalar();
    out.classification = ce.scalar();
    out.text_classification = ce_text.scalar();
    out.response_labeled = resp.scalar();
    parts.push_back(lab);
    parts.push_back(scale(add(ce, ce_text), -alpha));
    parts.push_back(resp);
  }
  if (!b.partial.empty()) {
    const double n = static_cast<double>(b.partial.size());
    Var enc_u = m.encode(tape, gather_utts(b.partial, &TurnExample::u));
    const Matrix s = stack_states(b.partial, &TurnExample::s), sn = stack_states(b.partial, &TurnExample::s_next);
    Var logp = m.action_log_probs(tape, m.context_features(tape, enc_u, tape.constant(s), tape.constant(sn)));
    Var u = scale(sum(unlabeled_bound_rows(tape, m, enc_u, logp, s, sn, b.noise_partial)), 1.0 / n);
    out.unlabeled = u.scalar();
    parts.push_back(u);
  }
  if (!b.unlabeled.empty()) {
    const double n = static_cast<double>(b.unlabeled.size());
    Var enc_u = m.encode(tape, gather_utts(b.unlabeled, &TurnExample::u));
    Var enc_prev = m.encode(tape, gather_utts(b.unlabeled, &TurnExample::u_prev));
    Var enc_next = m.encode(tape, gather_utts(b.unlabeled, &TurnExample::u_next));
    Var logp = m.action_log_probs(tape, m.text_features(tape, enc_prev, enc_u, enc_next));
    const Matrix counts = token_counts(gather_utts(b.unlabeled, &TurnExample::u), vocab);
    Var u = scale(sum(response_unlabeled_bound_rows(tape, m, enc_u, enc_prev, enc_next, logp, counts, b.noise_unlabeled)),
                  1.0 / n);
    out.response_unlabeled = u.scalar();
    parts.push_back(u);
  }
  if (parts.empty()) throw ConfigError("semi_supervised_objective: empty batch");
  Var total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  out.objective = total;
  return out;
}

// ------------------------------------------------------------------ single-example helpers

inline Vector predict_action(ActionModel& m, const Utterance& u, const Vector& s, const Vector& s_next) {
  Tape tape;
  Var enc = m.encode(tape, {u});
  Var logp = m.action_log_probs(tape, m.context_features(tape, enc, tape.constant(s.transpose()), tape.constant(s_next.transpose())));
  return logp.value().row(0).transpose().array().exp();
}

inline Vector predict_action_text(ActionModel& m, const Utterance& u_prev, const Utterance& u, const Utterance& u_next) {
  Tape tape;
  Var logp = m.action_log_probs(tape, m.text_features(tape, m.encode(tape, {u_prev}), m.encode(tape, {u}), m.encode(tape, {u_next})));
  return logp.value().row(0).transpose().array().exp();
}

inline double labeled_bound(ActionModel& m, const Vector& s_next, const Vector& s, const Utterance& u, int a,
                            const Vector& noise) {
  Tape tape;
  Var enc = m.encode(tape, {u});
  return labeled_bound_rows(tape, m, enc, gather_rows(m.table(tape), {a}), s.transpose(), s_next.transpose(),
                            noise.transpose())
      .bound.scalar();
}

inline double unlabeled_bound(ActionModel& m, const Vector& s_next, const Vector& s, const Utterance& u,
                              const Vector& noise) {
  Tape tape;
  Var enc = m.encode(tape, {u});
  Var logp = m.action_log_probs(tape, m.context_features(tape, enc, tape.constant(s.transpose()), tape.constant(s_next.transpose())));
  return unlabeled_bound_rows(tape, m, enc, logp, s.transpose(), s_next.transpose(), noise.transpose()).scalar();
}

inline double response_labeled_bound(ActionModel& m, const Utterance& u, const Utterance& u_prev, const Utterance& u_next,
                                     int a, const Vector& noise) {
  Tape tape;
  return response_labeled_bound_rows(tape, m, m.encode(tape, {u}), m.encode(tape, {u_prev}), m.encode(tape, {u_next}),
                                     gather_rows(m.table(tape), {a}), token_counts({u}, m.dims().vocab), noise.transpose())
      .bound.scalar();
}

inline double response_unlabeled_bound(ActionModel& m, const Utterance& u, const Utterance& u_prev,
                                       const Utterance& u_next, const Vector& noise) {
  Tape tape;
  Var enc_u = m.encode(tape, {u}), enc_prev = m.encode(tape, {u_prev}), enc_next = m.encode(tape, {u_next});
  Var logp = m.action_log_probs(tape, m.text_features(tape, enc_prev, enc_u, enc_next));
  return response_unlabeled_bound_rows(tape, m, enc_u, enc_prev, enc_next, logp, token_counts({u}, m.dims().vocab),
                                       noise.transpose())
      .scalar();
}

/// Batched argmax predictions (lowest id wins ties); text mode ignores states.
inline std::vector<int> predict_labels(ActionModel& m, const std::vector<TurnExample>& turns, bool text_mode,
                                       std::vector<Vector>* distributions = nullptr, int batch = 256) {
  std::vector<int> out;
  for (std::size_t start = 0; start < turns.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(turns.size(), start + static_cast<std::size_t>(batch));
    std::vector<const TurnExample*> b;
    for (std::size_t i = start; i < end; ++i) b.push_back(&turns[i]);
    Tape tape;
    Var enc_u = m.encode(tape, detail::gather_utts(b, &TurnExample::u));
    Var logp;
    if (text_mode) {
      Var enc_prev = m.encode(tape, detail::gather_utts(b, &TurnExample::u_prev));
      Var enc_next = m.encode(tape, detail::gather_utts(b, &TurnExample::u_next));
      logp = m.action_log_probs(tape, m.text_features(tape, enc_prev, enc_u, enc_next));
    } else {
      Var s = tape.constant(detail::stack_states(b, &TurnExample::s));
      Var sn = tape.constant(detail::stack_states(b, &TurnExample::s_next));
      logp = m.action_log_probs(tape, m.context_features(tape, enc_u, s, sn));
    }
    const Matrix& lp = logp.value();
    for (Eigen::Index i = 0; i < lp.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < lp.cols(); ++k)
        if (lp(i, k) > lp(i, best)) best = k;
      out.push_back(static_cast<int>(best));
      if (distributions) distributions->push_back(lp.row(i).transpose().array().exp());
    }
  }
  return out;
}

/// Fraction of turns whose argmax prediction equals the stored action label.
inline double action_accuracy(ActionModel& m, const std::vector<TurnExample>& turns, bool text_mode = false) {
  if (turns.empty()) throw ConfigError("action_accuracy: no turns");
  const auto pred = predict_labels(m, turns, text_mode);
  int hit = 0;
  for (std::size_t i = 0; i < turns.size(); ++i) hit += pred[i] == turns[i].action;
  return static_cast<double>(hit) / static_cast<double>(turns.size());
}

// ------------------------------------------------------------------ state placeholder

/// Predicts the state bits of a turn from the bag of words of its context; stands in for
/// s_t on text-only dialogues.
class StatePlaceholder {
 public:
  StatePlaceholder() = default;
  StatePlaceholder(int vocab, int state_width, int hidden, std::uint64_t seed)
      : vocab_(vocab), width_(state_width), ps_(seed) {
    Rng rng(seed);
    register_dense(ps_, "ph.h", vocab, hidden, rng);
    register_dense(ps_, "ph.out", hidden, state_width, rng);
  }

  bool ready() const { return vocab_ > 0; }
  int vocab() const { return vocab_; }
  int state_width() const { return width_; }
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

  Matrix features(const std::vector<Utterance>& contexts) const {
    Matrix f = token_counts(contexts, vocab_);
    return f.array().log1p().matrix();
  }

  Var logits(Tape& tape, const Matrix& feats) {
    Var h = dense_forward(tape, ps_, "ph.h", tape.constant(feats), Activation::tanh);
    return dense_forward(tape, ps_, "ph.out", h, Activation::identity);
  }

  Vector predict_bits(const Utterance& context) {
    Tape tape;
    const Matrix& l = logits(tape, features({context})).value();
    Vector v(l.cols());
    for (Eigen::Index k = 0; k < l.cols(); ++k) v[k] = l(0, k) > 0.0 ? 1.0 : 0.0;
    return v;
  }

  /// Binary cross-entropy training on turns that carry true states.
  std::vector<double> train(const std::vector<TurnExample>& turns, int epochs, int batch, double lr, Rng& rng) {
    std::vector<double> log;
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < turns.size(); ++i)
      if (turns[i].s.size() == width_) order.push_back(i);
    if (order.empty()) return log;
    Adam opt(lr);
    for (int e = 0; e < epochs; ++e) {
      rng.shuffle(order.begin(), order.end());
      double total = 0;
      int steps = 0;
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
        std::vector<Utterance> ctx;
        Matrix target(static_cast<Eigen::Index>(end - start), width_);
        for (std::size_t i = start; i < end; ++i) {
          ctx.push_back(turns[order[i]].context);
          target.row(static_cast<Eigen::Index>(i - start)) = turns[order[i]].s.transpose();
        }
        Tape tape;
        Var ll = scale(sum(bernoulli_log_likelihood(logits(tape, features(ctx)), target)),
                       -1.0 / static_cast<double>(end - start));
        tape.backward(ll);
        opt.step(ps_);
        ps_.zero_grad();
        total += ll.scalar();
        ++steps;
      }
      log.push_back(total / steps);
    }
    return log;
  }

 private:
  int vocab_ = 0;
  int width_ = 0;
  ParamSet ps_;
};

// ------------------------------------------------------------------ training

/// Terms measured after each epoch on a fixed monitor sample with frozen noise, plus the mean
/// minibatch objective seen during the epoch.
struct EpochLog {
  int epoch = 0;
  double objective = 0, labeled = 0, unlabeled = 0, classification = 0, text_classification = 0,
         response_labeled = 0, response_unlabeled = 0;
  double train_objective = 0;
};

inline constexpr std::size_t kMonitorTurns = 256;

struct TrainedActionModel {
  ActionModel model;
  StatePlaceholder placeholder;
  std::vector<EpochLog> log;
};

/// Maximizes the semi-supervised objective. An epoch is one pass over the fully labelled turns;
/// every step also draws a batch from each other non-empty level, cycled with its own reshuffles,
/// so adding unlabelled data never changes the number of optimizer steps.
inline TrainedActionModel train_action_model(const Corpus& full, const Corpus& partial, const Corpus& unlabeled,
                                             ActionModelDims dims, const ActionModelConfig& cfg) {
  if (full.empty()) throw ConfigError("at least some fully labeled dialogues required");
  TrainedActionModel out{ActionModel(dims, cfg), {}, {}};
  ActionModel& m = out.model;
  const auto tf = flatten(full), tp = flatten(partial), tu = flatten(unlabeled);
  Rng rng(derive_seed(cfg.seed, 101));
  Adam opt(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip_norm);

  struct Cursor {
    const std::vector<TurnExample>* data;
    std::vector<std::size_t> order;
    std::size_t pos = 0;
    std::vector<const TurnExample*> next(int n, Rng& rng) {
      std::vector<const TurnExample*> b;
      if (data->empty()) return b;
      for (int k = 0; k < n; ++k) {
        if (pos == 0) rng.shuffle(order.begin(), order.end());
        b.push_back(&(*data)[order[pos]]);
        pos = (pos + 1) % order.size();
      }
      return b;
    }
  };
  auto make_cursor = [](const std::vector<TurnExample>& v) {
    Cursor c{&v, {}, 0};
    for (std::size_t i = 0; i < v.size(); ++i) c.order.push_back(i);
    return c;
  };
  Cursor cf = make_cursor(tf), cp = make_cursor(tp), cu = make_cursor(tu);
  const int steps =
      static_cast<int>((tf.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size));

  ObjectiveBatch monitor;
  {
    Rng mrng(derive_seed(cfg.seed, 102));
    auto sample = [&](const std::vector<TurnExample>& v) {
      Cursor c = make_cursor(v);
      return c.next(static_cast<int>(std::min<std::size_t>(v.size(), kMonitorTurns)), mrng);
    };
    monitor.full = sample(tf);
    monitor.partial = sample(tp);
    monitor.unlabeled = sample(tu);
    monitor.draw_noise(cfg.latent_dim, mrng);
  }

  for (int e = 0; e < cfg.epochs; ++e) {
    EpochLog log;
    log.epoch = e + 1;
    const double progress = cfg.epochs > 1 ? static_cast<double>(e) / (cfg.epochs - 1) : 0.0;
    opt.set_learning_rate(cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * progress));
    for (int k = 0; k < steps; ++k) {
      ObjectiveBatch b;
      b.full = cf.next(std::min<int>(cfg.batch_size, static_cast<int>(tf.size())), rng);
      b.partial = cp.next(std::min<int>(cfg.batch_size, static_cast<int>(tp.size())), rng);
      b.unlabeled = cu.next(std::min<int>(cfg.batch_size, static_cast<int>(tu.size())), rng);
      b.draw_noise(cfg.latent_dim, rng);
      Tape tape;
      ObjectiveTerms t = semi_supervised_objective(tape, m, b);
      tape.backward(t.objective, -1.0);
      opt.step(m.params());
      m.params().zero_grad();
      log.train_objective += t.objective.scalar() / steps;
    }
    Tape tape;
    const ObjectiveTerms t = semi_supervised_objective(tape, m, monitor);
    log.objective = t.objective.scalar();
    log.labeled = t.labeled;
    log.unlabeled = t.unlabeled;
    log.classification = t.classification;
    log.text_classification = t.text_classification;
    log.response_labeled = t.response_labeled;
    log.response_unlabeled = t.response_unlabeled;
    out.log.push_back(log);
  }
  if (!m.params().all_finite()) throw NumericError("action model diverged (non-finite parameters)");

  if (!tu.empty()) {
    out.placeholder = StatePlaceholder(dims.vocab, dims.state_width, cfg.placeholder_hidden, derive_seed(cfg.seed, 202));
    std::vector<TurnExample> stateful = tf;
    stateful.insert(stateful.end(), tp.begin(), tp.end());
    Rng prng(derive_seed(cfg.seed, 203));
    out.placeholder.train(stateful, cfg.placeholder_epochs, cfg.batch_size, cfg.learning_rate, prng);
  }
  return out;
}

// ------------------------------------------------------------------ enrichment

struct EnrichedTurn {
  Vector state;         // s_t, or the placeholder prediction for text-only dialogues
  Vector embedding;     // e(a_t) of the true or predicted action (distribution-weighted when soft)
  int action = -1;      // true or predicted action id
  Vector distribution;  // predictive distribution over A (one-hot for labelled turns)
};

struct EnrichedDialogue {
  int id = 0;
  Supervision level = Supervision::full;
  std::vector<EnrichedTurn> turns;
};

using EnrichedCorpus = std::vector<EnrichedDialogue>;

inline EnrichedCorpus enrich(const Corpus& demos, TrainedActionModel& trained, bool soft = false) {
  ActionModel& m = trained.model;
  const Matrix table = m.embedding_table();
  EnrichedCorpus out;
  for (const auto& d : demos) {
    const Corpus one{d};
    const auto turns = flatten(one);
    EnrichedDialogue ed;
    ed.id = d.id;
    ed.level = d.level;
    std::vector<Vector> dist;
    std::vector<int> pred;
    if (d.level == Supervision::full) {
      for (const auto& t : turns) {
        pred.push_back(t.action);
        dist.push_back(Vector::Unit(m.dims().num_actions, t.action));
      }
    } else {
      pred = predict_labels(m, turns, d.level == Supervision::unlabeled, &dist);
    }
    for (std::size_t t = 0; t < turns.size(); ++t) {
      EnrichedTurn et;
      if (d.level == Supervision::unlabeled) {
        if (!trained.placeholder.ready()) throw StateError("enrich: text-only dialogue but no state placeholder trained");
        et.state = trained.placeholder.predict_bits(turns[t].context);
      } else {
        et.state = turns[t].s;
      }
      et.action = pred[t];
      et.distribution = dist[t];
      et.embedding = soft ? Vector(table.transpose() * dist[t]) : Vector(table.row(pred[t]).transpose());
      ed.turns.push_back(std::move(et));
    }
    out.push_back(std::move(ed));
  }
  return out;
}

// ------------------------------------------------------------------ checkpoints

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const ActionModelConfig& c) {
  return {{"embed_dim", c.embed_dim},       {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},             {"token_dim", c.token_dim},
          {"utterance_hidden", c.utterance_hidden}, {"temperature", c.temperature},
          {"alpha", c.alpha},               {"entropy_sign", c.entropy_sign},
          {"epochs", c.epochs},             {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"final_lr_fraction", c.final_lr_fraction},
          {"clip_norm", c.clip_norm},
          {"max_enumeration", c.max_enumeration}, {"placeholder_hidden", c.placeholder_hidden},
          {"placeholder_epochs", c.placeholder_epochs}, {"soft_enrichment", c.soft_enrichment},
          {"seed", c.seed}};
}

inline ActionModelConfig config_from_json(const nlohmann::json& j) {
  ActionModelConfig c;
  c.embed_dim = j.at("embed_dim");
  c.latent_dim = j.at("latent_dim");
  c.hidden = j.at("hidden");
  c.token_dim = j.at("token_dim");
  c.utterance_hidden = j.at("utterance_hidden");
  c.temperature = j.at("temperature");
  c.alpha = j.at("alpha");
  c.entropy_sign = j.at("entropy_sign");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.learning_rate = j.at("learning_rate");
  c.final_lr_fraction = j.at("final_lr_fraction");
  c.clip_norm = j.at("clip_norm");
  c.max_enumeration = j.at("max_enumeration");
  c.placeholder_hidden = j.at("placeholder_hidden");
  c.placeholder_epochs = j.at("placeholder_epochs");
  c.soft_enrichment = j.at("soft_enrichment");
  c.seed = j.at("seed");
  return c;
}

inline nlohmann::json checkpoint_to_json(const TrainedActionModel& t, const std::string& config_hash) {
  const auto& m = t.model;
  nlohmann::json j;
  j["format"] = "ssdial-action-model";
  j["version"] = kCheckpointVersion;
  j["config_hash"] = config_hash;
  j["dims"] = {{"vocab", m.dims().vocab}, {"state_width", m.dims().state_width}, {"num_actions", m.dims().num_actions}};
  j["config"] = config_to_json(m.config());
  j["params"] = params_to_json(m.params());
  if (t.placeholder.ready()) j["placeholder"] = params_to_json(t.placeholder.params());
  j["log"] = nlohmann::json::array();
  for (const auto& e : t.log)
    j["log"].push_back({{"epoch", e.epoch}, {"objective", e.objective}, {"labeled", e.labeled}, {"unlabeled", e.unlabeled},
                        {"classification", e.classification}, {"text_classification", e.text_classification},
                        {"response_labeled", e.response_labeled}, {"response_unlabeled", e.response_unlabeled},
                        {"train_objective", e.train_objective}});
  return j;
}

inline TrainedActionModel checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ssdial-action-model") throw ParseError("not an action-model checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion) throw VersionError("action-model checkpoint version mismatch");
  ActionModelDims dims{j.at("dims").at("vocab"), j.at("dims").at("state_width"), j.at("dims").at("num_actions")};
  const ActionModelConfig cfg = config_from_json(j.at("config"));
  TrainedActionModel t{ActionModel(dims, cfg), {}, {}};
  load_params(t.model.params(), j.at("params"));
  if (j.contains("placeholder")) {
    t.placeholder = StatePlaceholder(dims.vocab, dims.state_width, cfg.placeholder_hidden, 0);
    load_params(t.placeholder.params(), j.at("placeholder"));
  }
  for (const auto& e : j.at("log"))
    t.log.push_back({e.at("epoch"), e.at("objective"), e.at("labeled"), e.at("unlabeled"), e.at("classification"),
                     e.at("text_classification"), e.at("response_labeled"), e.at("response_unlabeled"),
                     e.at("train_objective")});
  return t;
}

}  // namespace ssdial
