#pragma once

// Experiment grids: supervision splits x reward configurations x seeds, one CSV row per (cell, seed).
// Upstream work (corpus, action model, warm start, dynamics models) is shared by the cells of one
// (split, seed) group; groups run in parallel and resume from per-cell completion markers.

#include "ssdial/eval/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

namespace ssdial {

struct SplitChoice {
  std::string name;
  double full = 1.0, partial = 0.0, unlabeled = 0.0;
};

struct CellSpec {
  std::string split;
  std::string reward;
  VrnnMode mode = VrnnMode::full;

  std::string mode_label() const { return uses_vrnn(reward) ? vrnn_mode_name(mode) : "-"; }
  std::string key() const { return split + "__" + reward + "__" + mode_label(); }
};

struct GridSpec {
  std::string name;
  RunConfig base;
  std::vector<SplitChoice> splits;
  std::vector<CellSpec> cells;
  std::vector<std::uint64_t> seeds;
  bool supervised_baseline = false;  // also train the labelled-only action model for every group
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct GridRow {
  CellSpec cell;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | failed
  std::string error;
  MetricReport report;
  double action_accuracy = kMissing;
  double supervised_accuracy = kMissing;
  double warm_start_success = kMissing;
  double reward_auc = kMissing;
  double vrnn_initial_elbo = kMissing;
  double vrnn_final_elbo = kMissing;
  std::string config_hash;

  bool ok() const { return status == "ok"; }
};

inline const SplitChoice& find_split(const GridSpec& g, const std::string& name) {
  for (const auto& s : g.splits)
    if (s.name == name) return s;
  throw ConfigError("grid '" + g.name + "': cell refers to unknown split '" + name + "'");
}

inline void validate(const GridSpec& g) {
  if (g.cells.empty() || g.seeds.empty()) throw ConfigError("grid '" + g.name + "' needs at least one cell and one seed");
  validate(g.base);
  std::set<std::string> keys;
  for (const auto& c : g.cells) {
    find_split(g, c.split);
    if (!is_reward_name(c.reward)) throw ConfigError("grid '" + g.name + "': unknown reward '" + c.reward + "'");
    if (!keys.insert(c.key()).second) throw ConfigError("grid '" + g.name + "': duplicate cell " + c.key());
  }
  for (const auto& s : g.splits) validate(SplitSpec{s.full, s.partial, s.unlabeled, 0, 0});
}

/// Resolved configuration of one cell at one seed.
inline RunConfig cell_config(const GridSpec& g, const CellSpec& cell, std::uint64_t seed) {
  RunConfig c = g.base;
  const SplitChoice& s = find_split(g, cell.split);
  c.split_full = s.full;
  c.split_partial = s.partial;
  c.split_unlabeled = s.unlabeled;
  c.reward = cell.reward;
  c.vrnn.mode = uses_vrnn(cell.reward) ? cell.mode : VrnnMode::full;
  c.seed = seed;
  return c;
}

// ------------------------------------------------------------------ row persistence

namespace detail {

inline nlohmann::json real_json(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }
inline double real_from(const nlohmann::json& j) { return j.is_null() ? kMissing : j.get<double>(); }

}  // namespace detail

inline nlohmann::json row_to_json(const GridRow& r) {
  nlohmann::json by = nlohmann::json::object();
  for (const auto& [k, s] : r.report.by_domain_count)
    by[std::to_string(k)] = {{"dialogues", s.dialogues}, {"entity_f1", s.entity_f1}, {"success_rate", s.success_rate},
                             {"avg_turns", s.avg_turns}};
  using detail::real_json;
  return {{"split", r.cell.split},
          {"reward", r.cell.reward},
          {"vrnn_mode", vrnn_mode_name(r.cell.mode)},
          {"seed", r.seed},
          {"status", r.status},
          {"error", r.error},
          {"entity_f1", r.report.entity_f1},
          {"success_rate", r.report.success_rate},
          {"avg_turns", r.report.avg_turns},
          {"dialogues", r.report.dialogues},
          {"max_turns", r.report.max_turns},
          {"by_domain_count", by},
          {"action_accuracy", real_json(r.action_accuracy)},
          {"supervised_accuracy", real_json(r.supervised_accuracy)},
          {"warm_start_success", real_json(r.warm_start_success)},
          {"reward_auc", real_json(r.reward_auc)},
          {"vrnn_initial_elbo", real_json(r.vrnn_initial_elbo)},
          {"vrnn_final_elbo", real_json(r.vrnn_final_elbo)},
          {"config_hash", r.config_hash}};
}

inline GridRow row_from_json(const nlohmann::json& j) {
  using detail::real_from;
  GridRow r;
  r.cell = {j.at("split"), j.at("reward"), vrnn_mode_from_name(j.at("vrnn_mode"))};
  r.seed = j.at("seed");
  r.status = j.at("status");
  r.error = j.at("error");
  r.report.entity_f1 = j.at("entity_f1");
  r.report.success_rate = j.at("success_rate");
  r.report.avg_turns = j.at("avg_turns");
  r.report.dialogues = j.at("dialogues");
  r.report.max_turns = j.at("max_turns");
  for (const auto& [k, s] : j.at("by_domain_count").items())
    r.report.by_domain_count[std::stoi(k)] = {s.at("dialogues"), s.at("entity_f1"), s.at("success_rate"), s.at("avg_turns")};
  r.report.seeds = {r.seed};
  r.report.config_hash = j.at("config_hash");
  r.action_accuracy = real_from(j.at("action_accuracy"));
  r.supervised_accuracy = real_from(j.at("supervised_accuracy"));
  r.warm_start_success = real_from(j.at("warm_start_success"));
  r.reward_auc = real_from(j.at("reward_auc"));
  r.vrnn_initial_elbo = real_from(j.at("vrnn_initial_elbo"));
  r.vrnn_final_elbo = real_from(j.at("vrnn_final_elbo"));
  r.config_hash = j.at("config_hash");
  return r;
}

// ------------------------------------------------------------------ CSV

inline constexpr int kMaxDomainColumns = 3;

namespace detail {

inline std::string csv_real(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string grid_hash(const GridSpec& g) {
  RunConfig base = g.base;
  base.workers = 1;
  std::string text = "grid=" + g.name + "\n" + canonical_text(base);
  for (const auto& s : g.splits)
    text += "split=" + s.name + ":" + detail::format_real(s.full) + "/" + detail::format_real(s.partial) + "/" +
            detail::format_real(s.unlabeled) + "\n";
  for (const auto& c : g.cells) text += "cell=" + c.key() + "\n";
  for (auto s : g.seeds) text += "seed=" + std::to_string(s) + "\n";
  text += std::string("supervised_baseline=") + (g.supervised_baseline ? "true" : "false") + "\n";
  return content_hash(text);
}

inline std::string grid_csv_header() {
  std::string h = "split,reward,vrnn_mode,seed,status,entity_f1,success_rate,avg_turns,dialogues";
  for (int k = 1; k <= kMaxDomainColumns; ++k) {
    const std::string p = "d" + std::to_string(k) + "_";
    h += "," + p + "dialogues," + p + "entity_f1," + p + "success_rate," + p + "avg_turns";
  }
  return h + ",action_accuracy,supervised_accuracy,warm_start_success,reward_auc,vrnn_initial_elbo,vrnn_final_elbo,"
             "config_hash,error";
}

/// One row per (cell, seed), preceded by a comment line carrying the grid hash.
inline std::string grid_csv(const GridSpec& g, const std::vector<GridRow>& rows) {
  using detail::csv_real;
  std::string out = "# ssdial grid=" + g.name + " config_hash=" + grid_hash(g) + "\n" + grid_csv_header() + "\n";
  for (const auto& r : rows) {
    const bool ok = r.ok();
    out += r.cell.split + "," + r.cell.reward + "," + r.cell.mode_label() + "," + std::to_string(r.seed) + "," + r.status;
    out += "," + (ok ? csv_real(r.report.entity_f1) : "") + "," + (ok ? csv_real(r.report.success_rate) : "") + "," +
           (ok ? csv_real(r.report.avg_turns) : "") + "," + (ok ? std::to_string(r.report.dialogues) : "");
    for (int k = 1; k <= kMaxDomainColumns; ++k) {
      const auto it = r.report.by_domain_count.find(k);
      if (!ok || it == r.report.by_domain_count.end()) {
        out += ",,,,";
        continue;
      }
      const MetricSummary& s = it->second;
      out += "," + std::to_string(s.dialogues) + "," + csv_real(s.entity_f1) + "," + csv_real(s.success_rate) + "," +
             csv_real(s.avg_turns);
    }
    out += "," + csv_real(r.action_accuracy) + "," + csv_real(r.supervised_accuracy) + "," + csv_real(r.warm_start_success) +
           "," + csv_real(r.reward_auc) + "," + csv_real(r.vrnn_initial_elbo) + "," + csv_real(r.vrnn_final_elbo) + "," +
           r.config_hash + "," + detail::csv_text(r.error) + "\n";
  }
  return out;
}

/// Values of one metric over the successful seeds of a cell.
inline std::vector<double> cell_values(const std::vector<GridRow>& rows, const std::string& key,
                                       const std::function<double(const GridRow&)>& metric) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.ok() && r.cell.key() == key) {
      const double x = metric(r);
      if (!std::isnan(x)) v.push_back(x);
    }
  return v;
}

inline double cell_median(const std::vector<GridRow>& rows, const std::string& key,
                          const std::function<double(const GridRow&)>& metric) {
  const auto v = cell_values(rows, key, metric);
  return v.empty() ? kMissing : median(v);
}

/// Median (and quartiles for the headline metrics) of every cell over its successful seeds.
inline std::string summary_csv(const GridSpec& g, const std::vector<GridRow>& rows) {
  using detail::csv_real;
  using Metric = std::function<double(const GridRow&)>;
  const std::vector<std::pair<std::string, Metric>> quartiled = {
      {"success_rate", [](const GridRow& r) { return r.report.success_rate; }},
      {"entity_f1", [](const GridRow& r) { return r.report.entity_f1; }},
      {"avg_turns", [](const GridRow& r) { return r.report.avg_turns; }}};
  const std::vector<std::pair<std::string, Metric>> plain = {
      {"action_accuracy", [](const GridRow& r) { return r.action_accuracy; }},
      {"supervised_accuracy", [](const GridRow& r) { return r.supervised_accuracy; }},
      {"warm_start_success", [](const GridRow& r) { return r.warm_start_success; }},
      {"reward_auc", [](const GridRow& r) { return r.reward_auc; }},
      {"vrnn_initial_elbo", [](const GridRow& r) { return r.vrnn_initial_elbo; }},
      {"vrnn_final_elbo", [](const GridRow& r) { return r.vrnn_final_elbo; }}};
  std::string out = "# ssdial grid=" + g.name + " config_hash=" + grid_hash(g) + "\nsplit,reward,vrnn_mode,seeds_ok,seeds_failed";
  for (const auto& [name, _] : quartiled) out += "," + name + "_median," + name + "_q1," + name + "_q3";
  for (const auto& [name, _] : plain) out += "," + name + "_median";
  out += "\n";
  for (const auto& cell : g.cells) {
    int ok = 0, failed = 0;
    for (const auto& r : rows)
      if (r.cell.key() == cell.key()) (r.ok() ? ok : failed) += 1;
    out += cell.split + "," + cell.reward + "," + cell.mode_label() + "," + std::to_string(ok) + "," + std::to_string(failed);
    for (const auto& [_, metric] : quartiled) {
      const auto v = cell_values(rows, cell.key(), metric);
      if (v.empty()) {
        out += ",,,";
        continue;
      }
      out += "," + csv_real(median(v)) + "," + csv_real(quantile(v, 0.25)) + "," + csv_real(quantile(v, 0.75));
    }
    for (const auto& [_, metric] : plain) out += "," + csv_real(cell_median(rows, cell.key(), metric));
    out += "\n";
  }
  return out;
}

// ------------------------------------------------------------------ execution

struct GridOptions {
  std::string out_dir;  // empty keeps everything in memory
  bool resume = true;
  int workers = 1;
  std::function<void(const nlohmann::json&)> on_event;  // called under a lock, one JSON object per event
};

namespace detail {

inline std::filesystem::path cell_dir(const GridOptions& o, const CellSpec& c, std::uint64_t seed) {
  return std::filesystem::path(o.out_dir) / "cells" / c.key() / ("seed-" + std::to_string(seed));
}

class GridRunner {
 public:
  GridRunner(const GridSpec& g, const GridOptions& o) : g_(g), o_(o) {}

  std::vector<GridRow> run() {
    validate(g_);
    if (o_.workers < 1) throw ConfigError("grid workers must be positive");
    // rows are laid out cell-major, seeds inner
    rows_.assign(g_.cells.size() * g_.seeds.size(), GridRow{});
    std::vector<std::pair<std::string, std::uint64_t>> groups;
    for (const auto& s : g_.splits) {
      bool used = false;
      for (const auto& c : g_.cells) used = used || c.split == s.name;
      if (used)
        for (auto seed : g_.seeds) groups.push_back({s.name, seed});
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < groups.size(); i = next++) run_group(groups[i].first, groups[i].second);
    };
    const int n = std::min<int>(o_.workers, static_cast<int>(groups.size()));
    std::vector<std::thread> pool;
    for (int k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows_;
  }

 private:
  const GridSpec& g_;
  const GridOptions& o_;
  std::vector<GridRow> rows_;
  std::mutex lock_;

  GridRow& slot(std::size_t cell, std::size_t seed_index) { return rows_[cell * g_.seeds.size() + seed_index]; }

  void emit(nlohmann::json e) {
    if (!o_.on_event) return;
    std::lock_guard<std::mutex> guard(lock_);
    o_.on_event(e);
  }

  bool load_marker(std::size_t cell, std::size_t si) {
    if (o_.out_dir.empty() || !o_.resume) return false;
    const auto path = cell_dir(o_, g_.cells[cell], g_.seeds[si]) / "row.json";
    if (!std::filesystem::exists(path)) return false;
    GridRow r = row_from_json(read_json_file(path.string()));
    const RunConfig cfg = cell_config(g_, g_.cells[cell], g_.seeds[si]);
    if (r.config_hash != config_hash(cfg) || !r.ok()) return false;  // stale or failed: recompute
    slot(cell, si) = std::move(r);
    emit({{"event", "cell_resumed"}, {"cell", g_.cells[cell].key()}, {"seed", g_.seeds[si]}});
    return true;
  }

  void save_cell(std::size_t cell, std::size_t si, const RunConfig& cfg, const PolicyNet* net) {
    if (o_.out_dir.empty()) return;
    const auto dir = cell_dir(o_, g_.cells[cell], g_.seeds[si]);
    std::filesystem::create_directories(dir);
    write_text_file((dir / "config.txt").string(), "# config_hash=" + config_hash(cfg) + "\n" + canonical_text(cfg));
    if (net) write_text_file((dir / "policy.json").string(), policy_to_json(*net, policy_config(cfg), cfg.reward, config_hash(cfg)).dump() + "\n");
    const GridRow& r = slot(cell, si);
    // the marker is written last; a failed cell leaves no marker and is retried on resume
    if (r.ok()) write_text_file((dir / "row.json").string(), row_to_json(r).dump(1) + "\n");
    else write_text_file((dir / "error.txt").string(), r.error + "\n");
  }

  void fail(std::size_t cell, std::size_t si, const std::string& error) {
    GridRow& r = slot(cell, si);
    r.cell = g_.cells[cell];
    r.seed = g_.seeds[si];
    r.status = "failed";
    r.error = error;
    r.config_hash = config_hash(cell_config(g_, g_.cells[cell], g_.seeds[si]));
    emit({{"event", "cell_failed"}, {"cell", g_.cells[cell].key()}, {"seed", g_.seeds[si]}, {"error", error}});
  }

  void run_group(const std::string& split_name, std::uint64_t seed) {
    const std::size_t si = static_cast<std::size_t>(std::find(g_.seeds.begin(), g_.seeds.end(), seed) - g_.seeds.begin());
    std::vector<std::size_t> pending;
    for (std::size_t c = 0; c < g_.cells.size(); ++c)
      if (g_.cells[c].split == split_name && !load_marker(c, si)) pending.push_back(c);
    if (pending.empty()) return;
    const auto t0 = std::chrono::steady_clock::now();
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    RunConfig base = cell_config(g_, g_.cells[pending.front()], seed);
    struct Upstream {
      SplitCorpus split;
      std::optional<TrainedActionModel> trained;
      EnrichedCorpus enriched;
      std::optional<PolicyNet> init;
      double accuracy = kMissing, supervised = kMissing, warm = kMissing;
    } up;
    try {
      up.split = stage_split(stage_corpus(base), base);
      up.trained.emplace(stage_actions(up.split, base));
      up.accuracy = heldout_action_accuracy(*up.trained, base);
      if (g_.supervised_baseline) {
        TrainedActionModel sup = stage_supervised_actions(up.split, base);
        up.supervised = heldout_action_accuracy(sup, base);
      }
      up.enriched = stage_enrich(up.split, *up.trained, base);
      up.init.emplace(stage_warm_start(up.split.full, base));
      up.warm = stage_evaluate(*up.init, base).success_rate;
      emit({{"event", "group_ready"}, {"split", split_name}, {"seed", seed}, {"seconds", seconds()},
            {"action_accuracy", up.accuracy}});
    } catch (const std::exception& e) {
      for (std::size_t c : pending) {
        fail(c, si, std::string("upstream: ") + e.what());
        save_cell(c, si, cell_config(g_, g_.cells[c], seed), nullptr);
      }
      return;
    }

    std::map<std::string, std::shared_ptr<const TrainedVrnn>> vrnns;
    for (std::size_t c : pending) {
      const CellSpec& cell = g_.cells[c];
      const RunConfig cfg = cell_config(g_, cell, seed);
      std::optional<TrainedPolicy> policy;
      try {
        GridRow r;
        r.cell = cell;
        r.seed = seed;
        r.config_hash = config_hash(cfg);
        r.action_accuracy = up.accuracy;
        r.supervised_accuracy = up.supervised;
        r.warm_start_success = up.warm;
        std::shared_ptr<const TrainedVrnn> vrnn;
        if (uses_vrnn(cell.reward)) {
          const std::string vk = cell.reward + "/" + vrnn_mode_name(cell.mode);
          auto it = vrnns.find(vk);
          if (it == vrnns.end())
            it = vrnns.emplace(vk, std::make_shared<const TrainedVrnn>(stage_vrnn(up.enriched, *up.trained, cfg))).first;
          vrnn = it->second;
          r.reward_auc = reward_auc(vrnn->model, cfg);
          r.vrnn_initial_elbo = vrnn->initial_elbo;
          r.vrnn_final_elbo = vrnn->log.empty() ? kMissing : vrnn->log.back().elbo;
        }
        auto handle = stage_reward(cfg, *up.trained, up.enriched, vrnn);
        policy.emplace(stage_policy(*handle, *up.init, cfg));
        r.report = stage_evaluate(policy->net, cfg);
        slot(c, si) = std::move(r);
        emit({{"event", "cell_done"}, {"cell", cell.key()}, {"seed", seed}, {"seconds", seconds()},
              {"success_rate", slot(c, si).report.success_rate}, {"avg_turns", slot(c, si).report.avg_turns}});
      } catch (const std::exception& e) {
        fail(c, si, e.what());
      }
      try {
        save_cell(c, si, cfg, policy ? &policy->net : nullptr);
      } catch (const std::exception& e) {
        fail(c, si, std::string("saving outputs: ") + e.what());
      }
    }
  }
};

}  // namespace detail

/// Runs every (cell, seed); failures are recorded in their rows and never stop the grid.
inline std::vector<GridRow> run_grid(const GridSpec& g, const GridOptions& o = {}) {
  return detail::GridRunner(g, o).run();
}

/// Runs the grid and writes grid.csv and summary.csv into the output directory.
inline std::vector<GridRow> run_grid_to_disk(const GridSpec& g, const GridOptions& o) {
  if (o.out_dir.empty()) throw ConfigError("run_grid_to_disk needs an output directory");
  std::filesystem::create_directories(o.out_dir);
  const auto rows = run_grid(g, o);
  write_text_file((std::filesystem::path(o.out_dir) / "grid.csv").string(), grid_csv(g, rows));
  write_text_file((std::filesystem::path(o.out_dir) / "summary.csv").string(), summary_csv(g, rows));
  return rows;
}

// ------------------------------------------------------------------ presets

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  if (count < 1) throw ConfigError("need at least one seed");
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
  return s;
}

inline RunConfig smoke_config() {
  RunConfig c;
  c.preset = "single";
  c.corpus_size = 40;
  c.action.epochs = 3;
  c.action.placeholder_epochs = 2;
  c.vrnn.epochs = 3;
  c.policy.episodes = 64;
  c.policy.warm_start_epochs = 3;
  c.eval_goals = 30;
  c.heldout_dialogues = 10;
  c.auc_dialogues = 10;
  return c;
}

inline const std::vector<std::string>& grid_preset_names() {
  static const std::vector<std::string> names = {"smoke", "table2-small", "table3-small", "fig4-small", "acceptance"};
  return names;
}

/// Named grids. Seeds run from `first_seed`; `num_seeds` 0 keeps the preset's own count.
inline GridSpec grid_preset(const std::string& name, std::uint64_t first_seed = 1, int num_seeds = 0,
                            const RunConfig* base = nullptr) {
  const SplitChoice fp{"F10-P90", 0.1, 0.9, 0.0}, fu{"F10-U90", 0.1, 0.0, 0.9}, fpu{"F10-P10-U80", 0.1, 0.1, 0.8};
  const std::vector<std::string> table2 = {"act-vrnn", "ss-vrnn", "act-gdpl", "ss-gdpl", "handcrafted", "adversarial"};
  const std::vector<std::string> table3 = {"act-vrnn", "ss-vrnn", "act-gdpl", "ss-gdpl", "handcrafted"};
  GridSpec g;
  g.name = name;
  g.base = base ? *base : RunConfig{};
  int seeds = 5;
  auto add = [&](const SplitChoice& s, const std::vector<std::string>& rewards) {
    if (std::none_of(g.splits.begin(), g.splits.end(), [&](const SplitChoice& x) { return x.name == s.name; }))
      g.splits.push_back(s);
    for (const auto& r : rewards) g.cells.push_back({s.name, r, VrnnMode::full});
  };
  auto add_ablations = [&] {
    if (std::none_of(g.splits.begin(), g.splits.end(), [&](const SplitChoice& x) { return x.name == fp.name; }))
      g.splits.push_back(fp);
    for (VrnnMode m : {VrnnMode::full, VrnnMode::stochastic_only, VrnnMode::deterministic_only}) {
      const CellSpec c{fp.name, "act-vrnn", m};
      if (std::none_of(g.cells.begin(), g.cells.end(), [&](const CellSpec& x) { return x.key() == c.key(); }))
        g.cells.push_back(c);
    }
  };
  if (name == "smoke") {
    if (!base) g.base = smoke_config();
    add({"F20-P80", 0.2, 0.8, 0.0}, {"act-vrnn", "handcrafted"});
    seeds = 1;
  } else if (name == "table2-small") {
    add(fp, table2);
    g.supervised_baseline = true;
  } else if (name == "table3-small") {
    add(fu, table3);
    add(fpu, table3);
  } else if (name == "fig4-small") {
    add_ablations();
  } else if (name == "acceptance") {
    add(fp, {"act-vrnn", "ss-vrnn", "handcrafted"});
    add_ablations();
    add(fu, {"act-vrnn", "handcrafted"});
    add(fpu, {"act-vrnn"});
    g.supervised_baseline = true;
  } else {
    throw ConfigError("unknown grid preset '" + name + "' (smoke, table2-small, table3-small, fig4-small, acceptance)");
  }
  g.seeds = seed_range(first_seed, num_seeds > 0 ? num_seeds : seeds);
  return g;
}

}  // namespace ssdial
