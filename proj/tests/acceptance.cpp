#include "ssdial/eval/checks.hpp"
#include "ssdial/eval/grid.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

using namespace ssdial;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int n, const std::string& name, const Verdict& v) {
  std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", n, name.c_str(), v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string file_bytes(const fs::path& p) { return read_text_file(p.string()); }

Verdict gradients() {
  const auto t0 = Clock::now();
  const auto checks = gradient_integrity();
  const double secs = since(t0);
  Verdict v{secs < 300, ""};
  for (const auto& c : checks) {
    v.pass = v.pass && c.max_rel_err < 1e-4 && c.params <= 500;
    v.detail += c.name + " " + fmt("%.2e", c.max_rel_err) + " (" + std::to_string(c.params) + " params); ";
  }
  v.detail += fmt("%.1f s", secs);
  return v;
}

Verdict bounds() {
  const auto b = bound_consistency(1000);
  return {b.trials >= 1000 && b.max_bound_gap < 1e-10 && b.min_kl >= 0 && b.max_softmax_error < 1e-9 && b.non_one_hot == 0,
          std::to_string(b.trials) + " trials, bound gap " + fmt("%.2e", b.max_bound_gap) + ", min kl " +
              fmt("%.2e", b.min_kl) + ", softmax err " + fmt("%.2e", b.max_softmax_error) + ", non-one-hot " +
              std::to_string(b.non_one_hot)};
}

struct Timing {
  std::map<std::pair<std::string, std::uint64_t>, double> upstream;  // (split, seed) -> seconds
  std::map<std::pair<std::string, std::uint64_t>, double> last;
  std::map<std::pair<std::string, std::uint64_t>, double> cell;      // (cell key, seed) -> seconds incl. upstream
};

std::string split_of(const std::string& key) { return key.substr(0, key.find("__")); }

double median_of(const std::vector<GridRow>& rows, const std::string& key, double (*f)(const GridRow&)) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.cell.key() == key && r.ok()) v.push_back(f(r));
  return v.empty() ? kMissing : median(v);
}

double success(const GridRow& r) { return r.report.success_rate; }
double turns(const GridRow& r) { return r.report.avg_turns; }
double accuracy(const GridRow& r) { return r.action_accuracy; }
double supervised(const GridRow& r) { return r.supervised_accuracy; }
double auc(const GridRow& r) { return r.reward_auc; }

bool all_ok(const std::vector<GridRow>& rows, const std::string& key, std::size_t seeds) {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.cell.key() == key && r.ok() ? 1 : 0;
  return n == seeds;
}

Verdict determinism(const fs::path& work) {
  RunConfig c;
  validate(c);
  const SchemaSet schemas = run_schemas(c);
  for (const char* name : {"corpus_a.jsonl", "corpus_b.jsonl"})
    save_corpus((work / name).string(), {schemas, config_hash(c), stage_corpus(c)});
  const bool corpus_same = file_bytes(work / "corpus_a.jsonl") == file_bytes(work / "corpus_b.jsonl");

  const GridSpec g = grid_preset("smoke");
  for (const char* name : {"smoke_a", "smoke_b"}) {
    fs::remove_all(work / name);
    GridOptions o;
    o.out_dir = (work / name).string();
    o.resume = false;
    run_grid_to_disk(g, o);
  }
  bool csv_same = true;
  for (const char* f : {"grid.csv", "summary.csv"})
    csv_same = csv_same && file_bytes(work / "smoke_a" / f) == file_bytes(work / "smoke_b" / f);

  bool expert_ok = true;
  std::string detail = std::string("corpus ") + (corpus_same ? "identical" : "DIFFERS") + ", smoke csv " +
                       (csv_same ? "identical" : "DIFFERS") + "; expert on 1000 goals:";
  for (const std::string preset : {"single", "double", "triple"}) {
    const SchemaSet s = presets::by_name(preset);
    DialogueEnv env(s);
    const MetricReport r = evaluate_policy(s, expert_policy(env), 1000, 8);
    expert_ok = expert_ok && r.success_rate == 1.0 && r.entity_f1 == 1.0;
    detail += " " + preset + " success " + fmt("%.3f", r.success_rate) + " f1 " + fmt("%.3f", r.entity_f1);
  }
  return {corpus_same && csv_same && expert_ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "ssdial_acceptance";
  const int workers = argc > 2 ? std::stoi(argv[2]) : 1;
  fs::create_directories(work);
  const auto t0 = Clock::now();

  report(1, "gradient integrity", gradients());
  report(2, "bound consistency", bounds());

  GridSpec g = grid_preset("acceptance", 1, 5);
  g.base.workers = workers;
  std::printf("running the acceptance grid (%zu cells x %zu seeds) into %s\n", g.cells.size(), g.seeds.size(),
              (work / "grid").string().c_str());
  std::fflush(stdout);
  Timing timing;
  GridOptions o;
  o.out_dir = (work / "grid").string();
  o.resume = false;
  o.workers = workers;
  o.on_event = [&](const nlohmann::json& e) {
    const std::string kind = e.at("event");
    const std::uint64_t seed = e.at("seed");
    if (kind == "group_ready") {
      const auto k = std::make_pair(e.at("split").get<std::string>(), seed);
      timing.upstream[k] = timing.last[k] = e.at("seconds");
    } else if (kind == "cell_done") {
      const std::string cell = e.at("cell");
      const auto k = std::make_pair(split_of(cell), seed);
      const double now = e.at("seconds");
      timing.cell[{cell, seed}] = timing.upstream[k] + now - timing.last[k];
      timing.last[k] = now;
      std::printf("  %-40s seed %llu  success %.3f  turns %.2f  (%.0f s)\n", cell.c_str(),
                  static_cast<unsigned long long>(seed), e.at("success_rate").get<double>(), e.at("avg_turns").get<double>(),
                  timing.cell[{cell, seed}]);
    } else if (kind == "cell_failed") {
      std::printf("  %-40s seed %llu  FAILED: %s\n", e.at("cell").get<std::string>().c_str(),
                  static_cast<unsigned long long>(seed), e.at("error").get<std::string>().c_str());
    }
    std::fflush(stdout);
  };
  const auto rows = run_grid_to_disk(g, o);
  const std::size_t seeds = g.seeds.size();

  const std::string act = "F10-P90__act-vrnn__full", ss = "F10-P90__ss-vrnn__full", hc = "F10-P90__handcrafted__-";
  const std::string act_u = "F10-U90__act-vrnn__full", hc_u = "F10-U90__handcrafted__-", act_pu = "F10-P10-U80__act-vrnn__full";
  const std::string sto = "F10-P90__act-vrnn__stochastic-only", det = "F10-P90__act-vrnn__deterministic-only";

  {
    double slowest = 0;
    for (std::uint64_t s : g.seeds) slowest = std::max(slowest, timing.upstream[{std::string("F10-P90"), s}]);
    const double semi = median_of(rows, act, accuracy), sup = median_of(rows, act, supervised);
    report(3, "semi-supervision helps",
           {all_ok(rows, act, seeds) && semi >= sup + 0.05 && slowest < 600,
            "held-out action accuracy median " + fmt("%.4f", semi) + " (D_F+D_P) vs " + fmt("%.4f", sup) +
                " (D_F only), needs +0.05; slowest upstream run " + fmt("%.0f s", slowest)});
  }
  {
    const double a = median_of(rows, act, auc);
    report(4, "reward discrimination", {all_ok(rows, act, seeds) && a >= 0.8, "act-vrnn expert-vs-random AUC median " + fmt("%.4f", a)});
  }
  {
    const double sa = median_of(rows, act, success), ssv = median_of(rows, ss, success), sh = median_of(rows, hc, success);
    const double ta = median_of(rows, act, turns), th = median_of(rows, hc, turns);
    double slowest = 0;
    for (const auto& [k, secs] : timing.cell)
      if (split_of(k.first) == "F10-P90") slowest = std::max(slowest, secs);
    const bool ok = all_ok(rows, act, seeds) && all_ok(rows, ss, seeds) && all_ok(rows, hc, seeds);
    report(5, "policy-learning ordering",
           {ok && sa >= ssv && sa >= sh + 0.10 && ta <= th && slowest < 1800,
            "median success act-vrnn " + fmt("%.3f", sa) + ", ss-vrnn " + fmt("%.3f", ssv) + ", handcrafted " +
                fmt("%.3f", sh) + "; turns act-vrnn " + fmt("%.2f", ta) + " vs handcrafted " + fmt("%.2f", th) +
                "; slowest cell " + fmt("%.0f s", slowest)});
  }
  {
    const double su = median_of(rows, act_u, success), shu = median_of(rows, hc_u, success), spu = median_of(rows, act_pu, success);
    const bool ok = all_ok(rows, act_u, seeds) && all_ok(rows, hc_u, seeds) && all_ok(rows, act_pu, seeds);
    report(6, "unlabeled-corpus extension",
           {ok && su >= shu + 0.10 && spu >= su,
            "F10-U90 median success act-vrnn " + fmt("%.3f", su) + " vs handcrafted " + fmt("%.3f", shu) +
                "; F10-P10-U80 act-vrnn " + fmt("%.3f", spu)});
  }
  {
    bool trained = all_ok(rows, sto, seeds) && all_ok(rows, det, seeds);
    for (const auto& r : rows)
      if ((r.cell.key() == sto || r.cell.key() == det) && r.ok())
        trained = trained && r.vrnn_final_elbo > r.vrnn_initial_elbo;
    const double sf = median_of(rows, act, success), ssto = median_of(rows, sto, success), sdet = median_of(rows, det, success);
    report(7, "ablation machinery",
           {trained && sf >= ssto && sf >= sdet,
            std::string("ablation ELBOs ") + (trained ? "all improved" : "NOT all improved") + "; median success full " +
                fmt("%.3f", sf) + ", stochastic-only " + fmt("%.3f", ssto) + ", deterministic-only " + fmt("%.3f", sdet)});
  }
  report(8, "determinism and environment sanity", determinism(work));

  std::printf("%d of 8 criteria failed; %.0f s total; grid outputs in %s\n", failures, since(t0), (work / "grid").string().c_str());
  return failures == 0 ? 0 : 1;
}
