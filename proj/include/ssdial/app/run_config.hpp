#pragma once

// Flat key=value run configuration covering every stage, with include files, overrides and a content hash.

#include "ssdial/action/train.hpp"
#include "ssdial/core/hash.hpp"
#include "ssdial/policy/policy.hpp"
#include "ssdial/reward/wiring.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ssdial {

struct RunConfig {
  std::string preset = "double";
  int corpus_size = 1000;
  int max_turns = kDefaultMaxTurns;
  double split_full = 0.1;
  double split_partial = 0.9;
  double split_unlabeled = 0.0;
  std::uint64_t seed = 1;
  ActionModelConfig action;
  VrnnConfig vrnn;
  std::string reward = "act-vrnn";
  HandcraftedRewardConfig handcrafted;
  DiscriminatorConfig discriminator;
  PolicyConfig policy = pipeline_policy_defaults();
  int eval_goals = 500;
  int heldout_dialogues = 200;
  int auc_dialogues = 100;
  int workers = 1;

  static PolicyConfig pipeline_policy_defaults() {
    PolicyConfig p;
    p.episodes = 10000;
    p.warm_start_epochs = 20;
    return p;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return x;
}

inline double parse_real(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(x))
    throw ConfigError("config key '" + key + "': '" + v + "' is not a finite number");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean (true, false)");
}

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace detail {

template <class Access>
ConfigField int_field(std::string key, Access at) {
  return {key,
          [key, at](RunConfig& c, const std::string& v) {
            const long long x = parse_integer(key, v);
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
              throw ConfigError("config key '" + key + "': out of range");
            at(c) = static_cast<int>(x);
          },
          [at](const RunConfig& c) { return std::to_string(at(const_cast<RunConfig&>(c))); }};
}

template <class Access>
ConfigField real_field(std::string key, Access at) {
  return {key, [key, at](RunConfig& c, const std::string& v) { at(c) = parse_real(key, v); },
          [at](const RunConfig& c) { return format_real(at(const_cast<RunConfig&>(c))); }};
}

template <class Access>
ConfigField bool_field(std::string key, Access at) {
  return {key, [key, at](RunConfig& c, const std::string& v) { at(c) = parse_bool(key, v); },
          [at](const RunConfig& c) { return std::string(at(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

}  // namespace detail

/// Every recognised key, in canonical order.
inline const std::vector<ConfigField>& config_fields() {
  using namespace detail;
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back({"preset",
                 [](RunConfig& c, const std::string& v) {
                   presets::by_name(v);
                   c.preset = v;
                 },
                 [](const RunConfig& c) { return c.preset; }});
    f.push_back(int_field("corpus.size", [](RunConfig& c) -> int& { return c.corpus_size; }));
    f.push_back(int_field("max_turns", [](RunConfig& c) -> int& { return c.max_turns; }));
    f.push_back(real_field("split.full", [](RunConfig& c) -> double& { return c.split_full; }));
    f.push_back(real_field("split.partial", [](RunConfig& c) -> double& { return c.split_partial; }));
    f.push_back(real_field("split.unlabeled", [](RunConfig& c) -> double& { return c.split_unlabeled; }));
    f.push_back({"seed",
                 [](RunConfig& c, const std::string& v) {
                   const long long x = parse_integer("seed", v);
                   if (x < 0) throw ConfigError("config key 'seed': must be non-negative");
                   c.seed = static_cast<std::uint64_t>(x);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});

    f.push_back(int_field("action.embed_dim", [](RunConfig& c) -> int& { return c.action.embed_dim; }));
    f.push_back(int_field("action.latent_dim", [](RunConfig& c) -> int& { return c.action.latent_dim; }));
    f.push_back(int_field("action.hidden", [](RunConfig& c) -> int& { return c.action.hidden; }));
    f.push_back(int_field("action.token_dim", [](RunConfig& c) -> int& { return c.action.token_dim; }));
    f.push_back(int_field("action.utterance_hidden", [](RunConfig& c) -> int& { return c.action.utterance_hidden; }));
    f.push_back(real_field("action.temperature", [](RunConfig& c) -> double& { return c.action.temperature; }));
    f.push_back(real_field("action.alpha", [](RunConfig& c) -> double& { return c.action.alpha; }));
    f.push_back(real_field("action.entropy_sign", [](RunConfig& c) -> double& { return c.action.entropy_sign; }));
    f.push_back(int_field("action.epochs", [](RunConfig& c) -> int& { return c.action.epochs; }));
    f.push_back(int_field("action.batch_size", [](RunConfig& c) -> int& { return c.action.batch_size; }));
    f.push_back(real_field("action.learning_rate", [](RunConfig& c) -> double& { return c.action.learning_rate; }));
    f.push_back(real_field("action.final_lr_fraction", [](RunConfig& c) -> double& { return c.action.final_lr_fraction; }));
    f.push_back(real_field("action.clip_norm", [](RunConfig& c) -> double& { return c.action.clip_norm; }));
    f.push_back(int_field("action.max_enumeration", [](RunConfig& c) -> int& { return c.action.max_enumeration; }));
    f.push_back(int_field("action.placeholder_hidden", [](RunConfig& c) -> int& { return c.action.placeholder_hidden; }));
    f.push_back(int_field("action.placeholder_epochs", [](RunConfig& c) -> int& { return c.action.placeholder_epochs; }));
    f.push_back(bool_field("action.soft_enrichment", [](RunConfig& c) -> bool& { return c.action.soft_enrichment; }));

    f.push_back(int_field("vrnn.latent_dim", [](RunConfig& c) -> int& { return c.vrnn.latent_dim; }));
    f.push_back(int_field("vrnn.hidden_dim", [](RunConfig& c) -> int& { return c.vrnn.hidden_dim; }));
    f.push_back(int_field("vrnn.mlp_hidden", [](RunConfig& c) -> int& { return c.vrnn.mlp_hidden; }));
    f.push_back(int_field("vrnn.epochs", [](RunConfig& c) -> int& { return c.vrnn.epochs; }));
    f.push_back(int_field("vrnn.batch_size", [](RunConfig& c) -> int& { return c.vrnn.batch_size; }));
    f.push_back(real_field("vrnn.learning_rate", [](RunConfig& c) -> double& { return c.vrnn.learning_rate; }));
    f.push_back(real_field("vrnn.final_lr_fraction", [](RunConfig& c) -> double& { return c.vrnn.final_lr_fraction; }));
    f.push_back(real_field("vrnn.clip_norm", [](RunConfig& c) -> double& { return c.vrnn.clip_norm; }));
    f.push_back(int_field("vrnn.samples", [](RunConfig& c) -> int& { return c.vrnn.samples; }));
    f.push_back(real_field("vrnn.decoder_min_log_variance",
                           [](RunConfig& c) -> double& { return c.vrnn.decoder_min_log_variance; }));
    f.push_back({"vrnn.mode", [](RunConfig& c, const std::string& v) { c.vrnn.mode = vrnn_mode_from_name(v); },
                 [](const RunConfig& c) { return vrnn_mode_name(c.vrnn.mode); }});

    f.push_back({"reward",
                 [](RunConfig& c, const std::string& v) {
                   if (!is_reward_name(v))
                     throw ConfigError("unknown reward '" + v +
                                       "' (act-vrnn, ss-vrnn, act-gdpl, ss-gdpl, handcrafted, adversarial)");
                   c.reward = v;
                 },
                 [](const RunConfig& c) { return c.reward; }});
    f.push_back(real_field("handcrafted.turn_penalty", [](RunConfig& c) -> double& { return c.handcrafted.turn_penalty; }));
    f.push_back(real_field("handcrafted.success_bonus", [](RunConfig& c) -> double& { return c.handcrafted.success_bonus; }));
    f.push_back(
        real_field("handcrafted.failure_penalty", [](RunConfig& c) -> double& { return c.handcrafted.failure_penalty; }));
    f.push_back(int_field("discriminator.hidden", [](RunConfig& c) -> int& { return c.discriminator.hidden; }));
    f.push_back(
        real_field("discriminator.learning_rate", [](RunConfig& c) -> double& { return c.discriminator.learning_rate; }));
    f.push_back(real_field("discriminator.clip_norm", [](RunConfig& c) -> double& { return c.discriminator.clip_norm; }));
    f.push_back(int_field("discriminator.expert_batch", [](RunConfig& c) -> int& { return c.discriminator.expert_batch; }));

    f.push_back(int_field("policy.hidden", [](RunConfig& c) -> int& { return c.policy.hidden; }));
    f.push_back(real_field("policy.learning_rate", [](RunConfig& c) -> double& { return c.policy.learning_rate; }));
    f.push_back(real_field("policy.clip_norm", [](RunConfig& c) -> double& { return c.policy.clip_norm; }));
    f.push_back(real_field("policy.discount", [](RunConfig& c) -> double& { return c.policy.discount; }));
    f.push_back(real_field("policy.entropy_weight", [](RunConfig& c) -> double& { return c.policy.entropy_weight; }));
    f.push_back(real_field("policy.value_weight", [](RunConfig& c) -> double& { return c.policy.value_weight; }));
    f.push_back(int_field("policy.episodes", [](RunConfig& c) -> int& { return c.policy.episodes; }));
    f.push_back(int_field("policy.batch_episodes", [](RunConfig& c) -> int& { return c.policy.batch_episodes; }));
    f.push_back({"policy.algorithm", [](RunConfig& c, const std::string& v) { c.policy.algorithm = algorithm_from_name(v); },
                 [](const RunConfig& c) { return algorithm_name(c.policy.algorithm); }});
    f.push_back(real_field("policy.ppo_clip", [](RunConfig& c) -> double& { return c.policy.ppo_clip; }));
    f.push_back(int_field("policy.ppo_epochs", [](RunConfig& c) -> int& { return c.policy.ppo_epochs; }));
    f.push_back(bool_field("policy.success_bonus", [](RunConfig& c) -> bool& { return c.policy.success_bonus; }));
    f.push_back(int_field("policy.warm_start_epochs", [](RunConfig& c) -> int& { return c.policy.warm_start_epochs; }));
    f.push_back(int_field("policy.warm_start_batch", [](RunConfig& c) -> int& { return c.policy.warm_start_batch; }));
    f.push_back(real_field("policy.warm_start_learning_rate",
                           [](RunConfig& c) -> double& { return c.policy.warm_start_learning_rate; }));

    f.push_back(int_field("eval.goals", [](RunConfig& c) -> int& { return c.eval_goals; }));
    f.push_back(int_field("eval.heldout_dialogues", [](RunConfig& c) -> int& { return c.heldout_dialogues; }));
    f.push_back(int_field("eval.auc_dialogues", [](RunConfig& c) -> int& { return c.auc_dialogues; }));
    f.push_back(int_field("workers", [](RunConfig& c) -> int& { return c.workers; }));
    return f;
  }();
  return fields;
}

inline const ConfigField& config_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

/// Applies one "key=value" assignment.
inline void apply_assignment(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = detail::trim(assignment.substr(0, eq)), value = detail::trim(assignment.substr(eq + 1));
  config_field(key).set(c, value);
}

namespace detail {

inline void apply_file(RunConfig& c, const std::filesystem::path& path, std::vector<std::filesystem::path>& stack) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  for (const auto& p : stack)
    if (p == canonical) throw ConfigError("config include cycle at '" + path.string() + "'");
  if (!std::filesystem::exists(canonical)) throw ConfigError("config file not found: " + path.string());
  stack.push_back(canonical);
  std::istringstream in(read_text_file(canonical.string()));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.rfind("include ", 0) == 0) {
        std::filesystem::path inc = trim(line.substr(8));
        if (inc.is_relative()) inc = canonical.parent_path() / inc;
        apply_file(c, inc, stack);
      } else {
        apply_assignment(c, line);
      }
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  stack.pop_back();
}

}  // namespace detail

/// Reads a config file over `base`; "include other.conf" lines are resolved relative to the including file.
inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  std::vector<std::filesystem::path> stack;
  detail::apply_file(base, path, stack);
  return base;
}

inline void validate(const RunConfig& c) {
  presets::by_name(c.preset);
  validate(SplitSpec{c.split_full, c.split_partial, c.split_unlabeled, 0, 0});
  if (c.split_full <= 0) throw ConfigError("split.full must be positive: the action learner needs labelled dialogues");
  if (c.corpus_size < 10) throw ConfigError("corpus.size must be at least 10");
  if (c.max_turns < 1) throw ConfigError("max_turns must be positive");
  if (!is_reward_name(c.reward)) throw ConfigError("unknown reward '" + c.reward + "'");
  validate(c.handcrafted);
  if (c.eval_goals < 1 || c.heldout_dialogues < 1 || c.auc_dialogues < 1)
    throw ConfigError("eval.goals, eval.heldout_dialogues and eval.auc_dialogues must be positive");
  if (c.workers < 1) throw ConfigError("workers must be positive");
  if (c.policy.episodes < 1 || c.policy.batch_episodes < 1) throw ConfigError("policy.episodes and policy.batch_episodes must be positive");
  if (c.policy.warm_start_epochs < 0) throw ConfigError("policy.warm_start_epochs must be non-negative");
  if (c.action.epochs < 1 || c.vrnn.epochs < 1) throw ConfigError("action.epochs and vrnn.epochs must be positive");
}

/// Resolved config as sorted-by-registry "key=value" lines; the hash is taken over exactly this text.
inline std::string canonical_text(const RunConfig& c) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + "=" + f.get(c) + "\n";
  return out;
}

/// Hash of everything that determines results; `workers` only schedules work and is left out.
inline std::string config_hash(const RunConfig& c) {
  RunConfig h = c;
  h.workers = 1;
  return content_hash(canonical_text(h));
}

}  // namespace ssdial
