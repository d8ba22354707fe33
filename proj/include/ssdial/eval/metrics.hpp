#pragma once

// Dialogue-level metrics: Entity-F1, success rate and turns, with a breakdown by the number of goal domains.

#include "ssdial/env/environment.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ssdial {

struct EntityScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// precision = correct / provided, recall = matched / required; an empty denominator scores 0.
inline EntityScore entity_score(const EntityCounts& c) {
  EntityScore s;
  s.precision = c.provided > 0 ? static_cast<double>(c.correct) / c.provided : 0.0;
  s.recall = c.required > 0 ? static_cast<double>(c.matched) / c.required : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

inline double entity_f1(const EntityCounts& c) { return entity_score(c).f1; }

inline double entity_f1(const UserGoal& goal, const DialogueRecord& rec) {
  return entity_f1(entity_counts(goal, rec.final_state));
}

inline double success_rate(const std::vector<DialogueRecord>& batch) {
  if (batch.empty()) throw ConfigError("success_rate: empty batch");
  int n = 0;
  for (const auto& r : batch) n += r.report.success ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(batch.size());
}

inline double avg_turns(const std::vector<DialogueRecord>& batch) {
  if (batch.empty()) throw ConfigError("avg_turns: empty batch");
  double t = 0;
  for (const auto& r : batch) t += r.num_turns();
  return t / static_cast<double>(batch.size());
}

inline double mean_entity_f1(const std::vector<DialogueRecord>& batch) {
  if (batch.empty()) throw ConfigError("mean_entity_f1: empty batch");
  double f = 0;
  for (const auto& r : batch) f += entity_f1(r.goal, r);
  return f / static_cast<double>(batch.size());
}

struct MetricSummary {
  int dialogues = 0;
  double entity_f1 = 0;
  double success_rate = 0;
  double avg_turns = 0;
};

inline MetricSummary summarize(const std::vector<DialogueRecord>& batch) {
  return {static_cast<int>(batch.size()), mean_entity_f1(batch), success_rate(batch), avg_turns(batch)};
}

struct MetricReport {
  double entity_f1 = 0;
  double success_rate = 0;
  double avg_turns = 0;
  int dialogues = 0;
  int max_turns = kDefaultMaxTurns;
  std::map<int, MetricSummary> by_domain_count;  // keyed by the number of domains in the goal
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
};

inline MetricReport make_report(const std::vector<DialogueRecord>& batch, int max_turns) {
  const MetricSummary all = summarize(batch);
  MetricReport r;
  r.entity_f1 = all.entity_f1;
  r.success_rate = all.success_rate;
  r.avg_turns = all.avg_turns;
  r.dialogues = all.dialogues;
  r.max_turns = max_turns;
  std::map<int, std::vector<DialogueRecord>> groups;
  for (const auto& d : batch) groups[static_cast<int>(d.goal.domains.size())].push_back(d);
  for (const auto& [k, g] : groups) r.by_domain_count[k] = summarize(g);
  return r;
}

/// Plays `goals` fresh goals, drawn from `seed`, under `policy`.
inline std::vector<DialogueRecord> play_goals(const SchemaSet& schemas, const StatePolicy& policy, int goals,
                                              std::uint64_t seed, int max_turns = kDefaultMaxTurns) {
  if (goals < 1) throw ConfigError("evaluation needs at least one goal");
  DialogueEnv env(schemas, max_turns);
  Rng rng(seed);
  std::vector<DialogueRecord> out;
  out.reserve(static_cast<std::size_t>(goals));
  for (int i = 0; i < goals; ++i) {
    const UserGoal g = sample_goal(schemas, rng);
    out.push_back(run_dialogue(env, g, policy));
  }
  return out;
}

inline MetricReport evaluate_policy(const SchemaSet& schemas, const StatePolicy& policy, int goals, std::uint64_t seed,
                                    int max_turns = kDefaultMaxTurns) {
  MetricReport r = make_report(play_goals(schemas, policy, goals, seed, max_turns), max_turns);
  r.seeds = {seed};
  return r;
}

/// Mann-Whitney estimate of P(pos > neg), ties counted half.
inline double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) throw ConfigError("roc_auc: both classes need scores");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> all;
  all.reserve(pos.size() + neg.size());
  for (double p : pos) all.push_back({p, true});
  for (double q : neg) all.push_back({q, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average 1-based rank of the tie block
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) rank_sum += mid;
    i = j;
  }
  const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

/// Linear-interpolated quantile of a copy of `v`, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

}  // namespace ssdial
