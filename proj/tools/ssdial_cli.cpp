#include "ssdial/eval/checks.hpp"
#include "ssdial/eval/grid.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace ssdial;
namespace fs = std::filesystem;

namespace {

constexpr const char* kOutEnv = "SSDIAL_OUT_DIR";

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, CommonOptions& o, bool out_required = true) {
  sub->add_option("--config", o.config, "key=value config file (include lines allowed)")->check(CLI::ExistingFile);
  sub->add_option("--set", o.sets, "override one key, e.g. --set policy.episodes=2000")->take_all();
  sub->add_option("--seed", o.seed, "run seed");
  sub->add_option("--out", o.out, std::string("output directory (default $") + kOutEnv + ")")->required(false);
  (void)out_required;
}

fs::path out_dir(const CommonOptions& o, bool required = true) {
  std::string dir = o.out;
  if (dir.empty())
    if (const char* env = std::getenv(kOutEnv)) dir = env;
  if (dir.empty() && required) throw ConfigError(std::string("no output directory: pass --out or set ") + kOutEnv);
  if (!dir.empty()) fs::create_directories(dir);
  return dir;
}

/// Defaults, then the --config file or else the config a previous stage left in the output directory,
/// then --set overrides and --seed.
RunConfig resolve(const CommonOptions& o, const fs::path& out, bool inherit = true) {
  RunConfig c;
  if (!o.config.empty())
    c = load_run_config(o.config);
  else if (inherit && !out.empty() && fs::exists(out / "config.txt"))
    c = load_run_config((out / "config.txt").string());
  for (const auto& s : o.sets) apply_assignment(c, s);
  if (o.seed) c.seed = *o.seed;
  validate(c);
  return c;
}

void save_config(const RunConfig& c, const fs::path& out) {
  write_text_file((out / "config.txt").string(), "# config_hash=" + config_hash(c) + "\n" + canonical_text(c));
}

class RunLog {
 public:
  RunLog(const fs::path& out, std::string stage, const RunConfig& c)
      : os_(out / "log.jsonl", std::ios::app), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    event({{"event", "start"}, {"config_hash", config_hash(c)}, {"seed", c.seed}});
  }
  void event(nlohmann::json e) {
    e["stage"] = stage_;
    e["elapsed_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    os_ << e.dump() << "\n";
    os_.flush();
  }

 private:
  std::ofstream os_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

fs::path need(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) throw ConfigError("missing " + path.string() + ": run stage " + stage + " first");
  return path;
}

const char* level_file(Supervision s) {
  return s == Supervision::full ? "demos_full.jsonl" : s == Supervision::partial ? "demos_partial.jsonl" : "demos_unlabeled.jsonl";
}

SplitCorpus load_split(const fs::path& out) {
  SplitCorpus s;
  for (Supervision level : {Supervision::full, Supervision::partial, Supervision::unlabeled}) {
    Corpus c = load_corpus(need(out / level_file(level), "gen-corpus").string()).dialogues;
    (level == Supervision::full ? s.full : level == Supervision::partial ? s.partial : s.unlabeled) = std::move(c);
  }
  return s;
}

TrainedActionModel load_actions(const fs::path& out) {
  return checkpoint_from_json(read_json_file(need(out / "action_model.json", "train-actions").string()));
}

std::shared_ptr<const TrainedVrnn> load_vrnn(const fs::path& out, const RunConfig& c) {
  if (!uses_vrnn(c.reward)) return nullptr;
  const fs::path path = out / ("vrnn_" + c.reward + ".json");
  auto v = std::make_shared<const TrainedVrnn>(vrnn_from_json(read_json_file(need(path, "train-reward").string())));
  if (v->model.config().mode != c.vrnn.mode)
    throw ConfigError(path.string() + " was trained in mode " + vrnn_mode_name(v->model.config().mode) +
                      ", config asks for " + vrnn_mode_name(c.vrnn.mode) + ": run stage train-reward first");
  return v;
}

nlohmann::json report_json(const MetricReport& r) {
  nlohmann::json by = nlohmann::json::object();
  for (const auto& [k, s] : r.by_domain_count)
    by[std::to_string(k)] = {{"dialogues", s.dialogues}, {"entity_f1", s.entity_f1}, {"success_rate", s.success_rate},
                             {"avg_turns", s.avg_turns}};
  return {{"format", "ssdial-metrics"}, {"config_hash", r.config_hash}, {"entity_f1", r.entity_f1},
          {"success_rate", r.success_rate}, {"avg_turns", r.avg_turns}, {"dialogues", r.dialogues},
          {"max_turns", r.max_turns}, {"seeds", r.seeds}, {"by_domain_count", by}};
}

// ------------------------------------------------------------------ subcommands

int gen_corpus(const CommonOptions& o) {
  const fs::path out = out_dir(o);
  const RunConfig c = resolve(o, out);
  RunLog log(out, "gen-corpus", c);
  const SchemaSet schemas = run_schemas(c);
  const Corpus corpus = stage_corpus(c);
  const SplitCorpus split = stage_split(corpus, c);
  const std::string h = config_hash(c);
  save_corpus((out / "corpus.jsonl").string(), {schemas, h, corpus});
  save_corpus((out / level_file(Supervision::full)).string(), {schemas, h, split.full});
  save_corpus((out / level_file(Supervision::partial)).string(), {schemas, h, split.partial});
  save_corpus((out / level_file(Supervision::unlabeled)).string(), {schemas, h, split.unlabeled});
  save_config(c, out);
  log.event({{"event", "done"}, {"dialogues", corpus.size()}, {"full", split.full.size()}, {"partial", split.partial.size()},
             {"unlabeled", split.unlabeled.size()}});
  std::cout << "corpus: " << corpus.size() << " dialogues (" << split.full.size() << " full, " << split.partial.size()
            << " partial, " << split.unlabeled.size() << " unlabeled) -> " << out.string() << "\n";
  return 0;
}

int train_actions(const CommonOptions& o) {
  const fs::path out = out_dir(o);
  const RunConfig c = resolve(o, out);
  RunLog log(out, "train-actions", c);
  const SplitCorpus split = load_split(out);
  TrainedActionModel t = stage_actions(split, c);
  for (const auto& e : t.log)
    log.event({{"event", "epoch"}, {"epoch", e.epoch}, {"objective", e.objective}, {"labeled", e.labeled},
               {"unlabeled", e.unlabeled}, {"classification", e.classification}, {"train_objective", e.train_objective}});
  const double acc = heldout_action_accuracy(t, c);
  write_text_file((out / "action_model.json").string(), checkpoint_to_json(t, config_hash(c)).dump() + "\n");
  save_config(c, out);
  log.event({{"event", "done"}, {"heldout_action_accuracy", acc}});
  std::cout << "action model: held-out accuracy " << acc << "\n";
  return 0;
}

int train_reward(const CommonOptions& o) {
  const fs::path out = out_dir(o);
  const RunConfig c = resolve(o, out);
  RunLog log(out, "train-reward", c);
  nlohmann::json summary = {{"format", "ssdial-reward"}, {"config_hash", config_hash(c)}, {"reward", c.reward}};
  if (uses_vrnn(c.reward)) {
    const SplitCorpus split = load_split(out);
    TrainedActionModel t = load_actions(out);
    const EnrichedCorpus enriched = stage_enrich(split, t, c);
    const TrainedVrnn v = stage_vrnn(enriched, t, c);
    for (const auto& e : v.log)
      log.event({{"event", "epoch"}, {"epoch", e.epoch}, {"elbo", e.elbo}, {"reconstruction", e.reconstruction},
                 {"kl", e.kl}, {"train_elbo", e.train_elbo}});
    const double auc = reward_auc(v.model, c);
    write_text_file((out / ("vrnn_" + c.reward + ".json")).string(), vrnn_to_json(v, config_hash(c)).dump() + "\n");
    summary["vrnn_mode"] = vrnn_mode_name(c.vrnn.mode);
    summary["initial_elbo"] = v.initial_elbo;
    summary["final_elbo"] = v.log.back().elbo;
    summary["reward_auc"] = auc;
    std::cout << c.reward << ": elbo " << v.initial_elbo << " -> " << v.log.back().elbo << ", expert-vs-random AUC " << auc
              << "\n";
  } else {
    summary["note"] = c.reward == "handcrafted" ? "fixed reward, nothing to train"
                                                : "discriminator is trained jointly with the policy in train-policy";
    std::cout << c.reward << ": " << summary["note"].get<std::string>() << "\n";
  }
  write_text_file((out / "reward.json").string(), summary.dump(1) + "\n");
  save_config(c, out);
  log.event({{"event", "done"}, {"reward", c.reward}});
  return 0;
}

int train_policy_cmd(const CommonOptions& o) {
  const fs::path out = out_dir(o);
  const RunConfig c = resolve(o, out);
  RunLog log(out, "train-policy", c);
  const SplitCorpus split = load_split(out);
  TrainedActionModel t = load_actions(out);
  const EnrichedCorpus enriched = stage_enrich(split, t, c);
  auto handle = stage_reward(c, t, enriched, load_vrnn(out, c));
  const PolicyNet init = stage_warm_start(split.full, c);
  const TrainedPolicy p = stage_policy(*handle, init, c);
  const std::string h = config_hash(c);
  std::string lines = nlohmann::json({{"format", "ssdial-policy-log"}, {"config_hash", h}, {"reward", c.reward}}).dump() + "\n";
  for (const auto& e : p.log)
    lines += nlohmann::json({{"episode", e.episode}, {"return", e.episode_return}, {"success", e.success}, {"turns", e.turns}})
                 .dump() +
             "\n";
  write_text_file((out / "policy_log.jsonl").string(), lines);
  write_text_file((out / "policy.json").string(), policy_to_json(p.net, policy_config(c), c.reward, h).dump() + "\n");
  save_config(c, out);
  int wins = 0;
  const std::size_t tail = std::min<std::size_t>(500, p.log.size());
  for (std::size_t i = p.log.size() - tail; i < p.log.size(); ++i) wins += p.log[i].success ? 1 : 0;
  log.event({{"event", "done"}, {"episodes", p.log.size()}, {"train_success_tail", static_cast<double>(wins) / tail}});
  std::cout << "policy (" << c.reward << "): " << p.log.size() << " episodes, training success over the last " << tail
            << " " << static_cast<double>(wins) / tail << "\n";
  return 0;
}

int evaluate_cmd(const CommonOptions& o) {
  const fs::path out = out_dir(o);
  const RunConfig c = resolve(o, out);
  RunLog log(out, "evaluate", c);
  const PolicyNet net = policy_from_json(read_json_file(need(out / "policy.json", "train-policy").string()));
  const MetricReport r = stage_evaluate(net, c);
  write_text_file((out / "metrics.json").string(), report_json(r).dump(1) + "\n");
  log.event({{"event", "done"}, {"entity_f1", r.entity_f1}, {"success_rate", r.success_rate}, {"avg_turns", r.avg_turns}});
  std::printf("entity_f1 %.4f  success %.4f  turns %.3f  (%d goals)\n", r.entity_f1, r.success_rate, r.avg_turns, r.dialogues);
  for (const auto& [k, s] : r.by_domain_count)
    std::printf("  %d-domain goals: %4d  entity_f1 %.4f  success %.4f  turns %.3f\n", k, s.dialogues, s.entity_f1,
                s.success_rate, s.avg_turns);
  return 0;
}

int gradcheck_cmd(const CommonOptions& o, int trials) {
  const fs::path out = out_dir(o, false);
  const auto t0 = std::chrono::steady_clock::now();
  const auto checks = gradient_integrity();
  const auto bounds = bound_consistency(trials);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = bounds.max_bound_gap < 1e-10 && bounds.min_kl >= 0 && bounds.max_softmax_error < 1e-9 && bounds.non_one_hot == 0;
  nlohmann::json j = {{"format", "ssdial-gradcheck"}, {"checks", nlohmann::json::array()}};
  for (const auto& c : checks) {
    const bool pass = c.max_rel_err < 1e-4 && c.params <= 500;
    ok = ok && pass;
    std::printf("%-34s params %3zu  max rel err %.3e  %s\n", c.name.c_str(), c.params, c.max_rel_err, pass ? "ok" : "FAIL");
    j["checks"].push_back({{"name", c.name}, {"params", c.params}, {"max_rel_err", c.max_rel_err}, {"worst", c.worst_param}});
  }
  std::printf("bounds over %d trials: gap %.3e  min kl %.3e  softmax err %.3e  non-one-hot %d\n", bounds.trials,
              bounds.max_bound_gap, bounds.min_kl, bounds.max_softmax_error, bounds.non_one_hot);
  j["bounds"] = {{"trials", bounds.trials}, {"max_bound_gap", bounds.max_bound_gap}, {"min_kl", bounds.min_kl},
                 {"max_softmax_error", bounds.max_softmax_error}, {"non_one_hot", bounds.non_one_hot}};
  j["passed"] = ok;
  if (!out.empty()) write_text_file((out / "gradcheck.json").string(), j.dump(1) + "\n");
  std::printf("%s in %.1f s\n", ok ? "all checks passed" : "some checks FAILED", seconds);
  return ok ? 0 : 1;
}

int reproduce_cmd(const CommonOptions& o, const std::string& preset, int num_seeds, int workers, bool no_resume) {
  const fs::path out = out_dir(o);
  GridSpec g = grid_preset(preset, o.seed.value_or(1), num_seeds);
  if (!o.config.empty()) g.base = load_run_config(o.config, g.base);
  for (const auto& s : o.sets) apply_assignment(g.base, s);
  if (workers > 0) g.base.workers = workers;
  validate(g);
  save_config(g.base, out);
  RunLog log(out, "reproduce", g.base);
  log.event({{"event", "grid"}, {"preset", preset}, {"cells", g.cells.size()}, {"seeds", g.seeds}, {"grid_hash", grid_hash(g)}});
  GridOptions opt;
  opt.out_dir = out.string();
  opt.resume = !no_resume;
  opt.workers = g.base.workers;
  opt.on_event = [&](const nlohmann::json& e) {
    log.event(e);
    const std::string kind = e.at("event");
    if (kind == "cell_done")
      std::printf("  %-40s seed %-3llu success %.3f turns %.2f\n", e.at("cell").get<std::string>().c_str(),
                  static_cast<unsigned long long>(e.at("seed").get<std::uint64_t>()), e.at("success_rate").get<double>(),
                  e.at("avg_turns").get<double>());
    else if (kind == "cell_failed")
      std::printf("  %-40s seed %-3llu FAILED: %s\n", e.at("cell").get<std::string>().c_str(),
                  static_cast<unsigned long long>(e.at("seed").get<std::uint64_t>()), e.at("error").get<std::string>().c_str());
    std::fflush(stdout);
  };
  const auto rows = run_grid_to_disk(g, opt);
  int failed = 0;
  for (const auto& r : rows) failed += r.ok() ? 0 : 1;
  log.event({{"event", "done"}, {"rows", rows.size()}, {"failed", failed}});
  std::cout << read_text_file((out / "summary.csv").string());
  std::cout << rows.size() << " rows, " << failed << " failed -> " << (out / "grid.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised dialogue policy learning: corpus generation, action learning, reward models, policy learning"};
  app.require_subcommand(1);
  CommonOptions gen, act, rew, pol, ev, gc, rep;
  add_common(app.add_subcommand("gen-corpus", "generate expert dialogues and mask them into supervision levels"), gen);
  add_common(app.add_subcommand("train-actions", "train the semi-supervised action model"), act);
  add_common(app.add_subcommand("train-reward", "train the reward model named by `reward`"), rew);
  add_common(app.add_subcommand("train-policy", "warm-start and train the dialogue policy"), pol);
  add_common(app.add_subcommand("evaluate", "evaluate the trained policy on fresh goals"), ev);
  auto* gcs = app.add_subcommand("gradcheck", "gradient checks and bound properties on small random networks");
  int trials = 1000;
  gcs->add_option("--out", gc.out, "write gradcheck.json here");
  gcs->add_option("--trials", trials, "random inputs for the bound properties")->check(CLI::PositiveNumber);
  auto* reps = app.add_subcommand("reproduce", "run a named experiment grid end to end");
  add_common(reps, rep);
  std::string preset;
  int num_seeds = 0, workers = 0;
  bool no_resume = false;
  reps->add_option("--preset", preset, "smoke | table2-small | table3-small | fig4-small | acceptance")->required();
  reps->add_option("--seeds", num_seeds, "number of consecutive seeds, starting at --seed (default: the preset's)");
  reps->add_option("--workers", workers, "parallel (split, seed) groups");
  reps->add_flag("--no-resume", no_resume, "recompute cells that already have completion markers");
  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-corpus")) return gen_corpus(gen);
    if (app.got_subcommand("train-actions")) return train_actions(act);
    if (app.got_subcommand("train-reward")) return train_reward(rew);
    if (app.got_subcommand("train-policy")) return train_policy_cmd(pol);
    if (app.got_subcommand("evaluate")) return evaluate_cmd(ev);
    if (app.got_subcommand("gradcheck")) return gradcheck_cmd(gc, trials);
    if (app.got_subcommand("reproduce")) return reproduce_cmd(rep, preset, num_seeds, workers, no_resume);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
