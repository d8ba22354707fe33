#pragma once

// Expert demonstrations, supervision masking and the JSONL corpus format.

#include "ssdial/core/errors.hpp"
#include "ssdial/core/hash.hpp"
#include "ssdial/core/rng.hpp"
#include "ssdial/env/environment.hpp"
#include "ssdial/env/render.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace ssdial {

enum class Supervision { full, partial, unlabeled };

inline const char* supervision_name(Supervision s) {
  switch (s) {
    case Supervision::full: return "full";
    case Supervision::partial: return "partial";
    case Supervision::unlabeled: return "unlabeled";
  }
  return "?";
}

inline Supervision supervision_from_name(const std::string& s) {
  if (s == "full") return Supervision::full;
  if (s == "partial") return Supervision::partial;
  if (s == "unlabeled") return Supervision::unlabeled;
  throw ParseError("unknown supervision level '" + s + "'");
}

using StateBits = std::vector<int>;

inline StateBits to_bits(const Vector& v) {
  StateBits b(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) b[static_cast<std::size_t>(i)] = v[i] > 0.5 ? 1 : 0;
  return b;
}

inline Vector from_bits(const StateBits& b) {
  Vector v(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) v[static_cast<Eigen::Index>(i)] = b[i];
  return v;
}

/// One system turn. Fields a supervision level does not carry are left empty / -1.
struct DemoTurn {
  StateBits state;      // s_t (full, partial)
  int action = -1;      // a_t (full)
  Utterance system;     // u_t
  Utterance user;       // user reply to u_t
  Utterance context;    // c_t: every utterance before u_t (unlabeled)

  friend bool operator==(const DemoTurn&, const DemoTurn&) = default;
};

struct Demonstration {
  int id = 0;
  Supervision level = Supervision::full;
  UserGoal goal;        // kept for evaluation only; learners never read it
  Utterance opening;    // the user's first utterance
  std::vector<DemoTurn> turns;
  StateBits final_state;  // s_{n+1} (full, partial)

  int size() const { return static_cast<int>(turns.size()); }
  /// s_{t+1} for turn t.
  const StateBits& next_state(int t) const {
    return t + 1 < size() ? turns[static_cast<std::size_t>(t) + 1].state : final_state;
  }
  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

using Corpus = std::vector<Demonstration>;

/// Fully annotated expert rollout for one goal, rendered with `rng`.
inline Demonstration demonstrate(DialogueEnv& env, const Vocabulary& vocab, const UserGoal& goal, Rng& rng, int id) {
  const auto rec = run_dialogue(env, goal, expert_policy(env));
  if (!rec.report.success) throw StateError("expert failed on dialogue " + std::to_string(id));
  Demonstration d;
  d.id = id;
  d.goal = goal;
  {
    DialogueState s0 = initial_state(env.schemas(), goal, env.max_turns());
    d.opening = render_user(env.schemas(), vocab, rec.opening, s0, rng);
  }
  for (std::size_t t = 0; t < rec.turns.size(); ++t) {
    const auto& tr = rec.turns[t];
    DemoTurn dt;
    dt.state = to_bits(encode_state(env.schemas(), tr.state));
    dt.action = tr.action;
    dt.system = render_system(env.schemas(), vocab, env.actions().at(tr.action), rng);
    const DialogueState& after = t + 1 < rec.turns.size() ? rec.turns[t + 1].state : rec.final_state;
    dt.user = render_user(env.schemas(), vocab, tr.user, after, rng);
    d.turns.push_back(std::move(dt));
  }
  d.final_state = to_bits(encode_state(env.schemas(), rec.final_state));
  return d;
}

/// N expert dialogues; dialogue i draws goal and surface noise from its own seed-derived stream.
inline Corpus generate_corpus(const SchemaSet& schemas, int n, std::uint64_t seed, int max_turns = kDefaultMaxTurns) {
  if (n < 1) throw ConfigError("generate_corpus: N must be at least 1");
  DialogueEnv env(schemas, max_turns);
  const Vocabulary vocab = build_vocabulary(schemas);
  Corpus out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const UserGoal goal = sample_goal(schemas, rng);
    out.push_back(demonstrate(env, vocab, goal, rng, i));
  }
  return out;
}

/// Concatenation of the opening and every system/user utterance before turn t.
inline Utterance history_before(const Demonstration& d, int t) {
  Utterance c = d.opening;
  for (int k = 0; k < t; ++k) {
    const auto& tr = d.turns[static_cast<std::size_t>(k)];
    c.insert(c.end(), tr.system.begin(), tr.system.end());
    c.insert(c.end(), tr.user.begin(), tr.user.end());
  }
  return c;
}

inline Demonstration mask(const Demonstration& full, Supervision level) {
  Demonstration d = full;
  d.level = level;
  for (int t = 0; t < d.size(); ++t) {
    auto& tr = d.turns[static_cast<std::size_t>(t)];
    if (level != Supervision::full) tr.action = -1;
    if (level == Supervision::unlabeled) {
      tr.state.clear();
      tr.context = history_before(full, t);
    }
  }
  if (level == Supervision::unlabeled) d.final_state.clear();
  return d;
}

/// Puts the hidden fields back from the generator's fully annotated ledger.
inline Demonstration restore_labels(const Demonstration& masked, const Corpus& ledger) {
  auto it = std::find_if(ledger.begin(), ledger.end(), [&](const Demonstration& d) { return d.id == masked.id; });
  if (it == ledger.end()) throw ConfigError("dialogue " + std::to_string(masked.id) + " missing from ledger");
  return *it;
}

struct SplitSpec {
  double full = 1.0;
  double partial = 0.0;
  double unlabeled = 0.0;
  int n = 0;  // corpus size; 0 accepts whatever size is passed
  std::uint64_t seed = 0;
};

inline void validate(const SplitSpec& s) {
  for (double f : {s.full, s.partial, s.unlabeled})
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  if (std::abs(s.full + s.partial + s.unlabeled - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

struct SplitCorpus {
  Corpus full, partial, unlabeled;
};

/// Dialogue-level random partition into fully labeled, state-only and text-only demonstrations.
inline SplitCorpus mask_labels(const Corpus& corpus, const SplitSpec& spec) {
  validate(spec);
  const int n = static_cast<int>(corpus.size());
  if (n < 10) throw ConfigError("mask_labels: corpus needs at least 10 dialogues");
  if (spec.n != 0 && spec.n != n) throw ConfigError("mask_labels: split expects " + std::to_string(spec.n) + " dialogues");
  const int nf = static_cast<int>(std::lround(spec.full * n));
  const int np = std::min(n - nf, static_cast<int>(std::lround(spec.partial * n)));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(spec.seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<Supervision> level(static_cast<std::size_t>(n), Supervision::unlabeled);
  for (int k = 0; k < nf + np; ++k)
    level[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k < nf ? Supervision::full : Supervision::partial;
  SplitCorpus out;
  for (int i = 0; i < n; ++i) {
    const Supervision l = level[static_cast<std::size_t>(i)];
    Corpus& dst = l == Supervision::full ? out.full : l == Supervision::partial ? out.partial : out.unlabeled;
    dst.push_back(mask(corpus[static_cast<std::size_t>(i)], l));
  }
  return out;
}

// ---------------------------------------------------------------- JSONL persistence

inline constexpr int kCorpusFormatVersion = 1;

struct CorpusFile {
  SchemaSet schemas;
  std::string config_hash;
  Corpus dialogues;
};

inline nlohmann::json goal_to_json(const UserGoal& g) {
  auto arr = nlohmann::json::array();
  for (const auto& d : g.domains)
    arr.push_back({{"domain", d.domain}, {"constraints", d.constraints}, {"requests", d.requests}, {"book", d.book}, {"opening", d.opening}});
  return arr;
}

inline UserGoal goal_from_json(const nlohmann::json& j) {
  UserGoal g;
  for (const auto& d : j)
    g.domains.push_back({d.at("domain").get<int>(), d.at("constraints").get<std::vector<int>>(),
                         d.at("requests").get<std::vector<int>>(), d.at("book").get<bool>(),
                         d.at("opening").get<std::vector<int>>()});
  return g;
}

inline nlohmann::json to_json(const Demonstration& d) {
  nlohmann::json j;
  j["id"] = d.id;
  j["level"] = supervision_name(d.level);
  j["goal"] = goal_to_json(d.goal);
  j["opening"] = d.opening;
  j["turns"] = nlohmann::json::array();
  for (const auto& t : d.turns) {
    nlohmann::json jt;
    if (d.level != Supervision::unlabeled) jt["s"] = t.state;
    if (d.level == Supervision::full) jt["a"] = t.action;
    jt["u"] = t.system;
    jt["user"] = t.user;
    if (d.level == Supervision::unlabeled) jt["c"] = t.context;
    j["turns"].push_back(std::move(jt));
  }
  if (d.level != Supervision::unlabeled) j["final_state"] = d.final_state;
  return j;
}

inline Demonstration demonstration_from_json(const nlohmann::json& j) {
  Demonstration d;
  d.id = j.at("id").get<int>();
  d.level = supervision_from_name(j.at("level").get<std::string>());
  d.goal = goal_from_json(j.at("goal"));
  d.opening = j.at("opening").get<Utterance>();
  for (const auto& jt : j.at("turns")) {
    DemoTurn t;
    if (d.level != Supervision::unlabeled) t.state = jt.at("s").get<StateBits>();
    if (d.level == Supervision::full) t.action = jt.at("a").get<int>();
    t.system = jt.at("u").get<Utterance>();
    t.user = jt.at("user").get<Utterance>();
    if (d.level == Supervision::unlabeled) t.context = jt.at("c").get<Utterance>();
    d.turns.push_back(std::move(t));
  }
  if (d.level != Supervision::unlabeled) d.final_state = j.at("final_state").get<StateBits>();
  if (d.turns.size() < 2) throw ParseError("dialogue " + std::to_string(d.id) + " has fewer than 2 turns");
  return d;
}

inline std::string serialize_corpus(const CorpusFile& f) {
  nlohmann::json header;
  header["format"] = "ssdial-corpus";
  header["version"] = kCorpusFormatVersion;
  header["config_hash"] = f.config_hash;
  header["count"] = f.dialogues.size();
  header["schema"] = to_json(f.schemas);
  std::string out = header.dump() + "\n";
  for (const auto& d : f.dialogues) out += to_json(d).dump() + "\n";
  return out;
}

inline void save_corpus(const std::string& path, const CorpusFile& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os << serialize_corpus(f);
  if (!os) throw ConfigError("write failed for " + path);
}

inline CorpusFile parse_corpus(std::istream& in) {
  CorpusFile f;
  std::string line;
  std::size_t lineno = 0;
  auto parse_line = [&](const char* what) {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ParseError(std::string("malformed ") + what + " (last complete line " + std::to_string(lineno - 1) + ")", lineno);
    }
  };
  if (!std::getline(in, line)) throw ParseError("empty corpus file", 1);
  ++lineno;
  const auto header = parse_line("header");
  if (header.value("format", "") != "ssdial-corpus") throw ParseError("not a corpus file", 1);
  const int version = header.at("version").get<int>();
  if (version != kCorpusFormatVersion)
    throw VersionError("corpus version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCorpusFormatVersion) + ")");
  f.config_hash = header.at("config_hash").get<std::string>();
  f.schemas = schema_from_json(header.at("schema"));
  const std::size_t count = header.at("count").get<std::size_t>();
  const int width = state_width(f.schemas);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = parse_line("dialogue record");
    try {
      Demonstration d = demonstration_from_json(j);
      for (const auto& t : d.turns)
        if (!t.state.empty() && static_cast<int>(t.state.size()) != width) throw ParseError("state width mismatch");
      f.dialogues.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad dialogue record: ") + e.what(), lineno);
    } catch (const ParseError& e) {
      if (e.line()) throw;
      throw ParseError(e.what(), lineno);
    }
  }
  if (f.dialogues.size() != count)
    throw ParseError("expected " + std::to_string(count) + " dialogues, found " + std::to_string(f.dialogues.size()) +
                         " (last complete line " + std::to_string(lineno) + ")",
                     lineno);
  return f;
}

inline CorpusFile load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return parse_corpus(in);
}

/// Human-readable sidecar: one "kind<TAB>id<TAB>name" row per token, action and state bit.
inline std::string vocabulary_sidecar(const SchemaSet& schemas) {
  std::string out;
  const Vocabulary v = build_vocabulary(schemas);
  for (int i = 0; i < v.size(); ++i) out += "token\t" + std::to_string(i) + "\t" + v.token(i) + "\n";
  const ActionSet a(schemas);
  for (int i = 0; i < a.size(); ++i) out += "action\t" + std::to_string(i) + "\t" + a.name(i) + "\n";
  const auto layout = state_layout(schemas);
  for (std::size_t i = 0; i < layout.size(); ++i) out += "state\t" + std::to_string(i) + "\t" + layout[i] + "\n";
  return out;
}

}  // namespace ssdial
