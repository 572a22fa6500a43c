// qdhf command line: run, bench, sweep, serve, export-heatmap.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qdhf/qdhf.hpp"
#include "qdhf/service.hpp"

namespace {

using nlohmann::json;
using namespace qdhf;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitJudge = 3;

struct CommonFlags {
  std::string config_file;
  std::optional<std::string> task, strategy, judge, out, maze_layout;
  std::optional<std::uint64_t> seed;
  std::optional<int> budget, iterations, batch_size, epochs, validation_size;
  std::optional<double> sigma, learning_rate, margin;
  std::vector<std::string> sets;
  bool force = false;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_file, "JSON config with flat dotted keys");
    app->add_option("--task", task, "arm | maze");
    app->add_option("--strategy", strategy, "metric strategy");
    app->add_option("--seed", seed, "PRNG seed");
    app->add_option("--budget", budget, "total judgment budget");
    app->add_option("--iterations", iterations, "total QD iterations");
    app->add_option("--batch-size", batch_size, "solutions emitted per iteration");
    app->add_option("--sigma", sigma, "Gaussian mutation sigma");
    app->add_option("--lr", learning_rate, "projection learning rate");
    app->add_option("--margin", margin, "triplet loss margin");
    app->add_option("--epochs", epochs, "projection training epochs");
    app->add_option("--validation-size", validation_size, "oracle validation triplets");
    app->add_option("--judge", judge, "oracle | human");
    app->add_option("--maze-layout", maze_layout, "maze wall file");
    app->add_option("--set", sets, "extra key=value override (value parsed as JSON)");
    app->add_option("-o,--out", out, "output directory");
    app->add_flag("--force", force, "overwrite a non-empty output directory");
  }

  [[nodiscard]] json document() const {
    json doc = json::object();
    if (!config_file.empty()) {
      doc = read_json(config_file);
      if (!doc.is_object()) throw InvalidArgument("config file must hold a JSON object");
    }
    apply_seed_env(doc);
    auto put = [&](const char* key, const auto& opt) {
      if (opt) doc[key] = *opt;
    };
    put("task", task);
    put("strategy", strategy);
    put("seed", seed);
    put("budget.total", budget);
    put("schedule.total_iterations", iterations);
    put("schedule.batch_size", batch_size);
    put("schedule.mutation_sigma", sigma);
    put("train.learning_rate", learning_rate);
    put("train.margin", margin);
    put("train.epochs", epochs);
    put("validation.size", validation_size);
    put("judge", judge);
    put("maze.layout", maze_layout);
    put("out", out);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw InvalidArgument("--set expects key=value");
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      json parsed = json::parse(value, nullptr, false);
      doc[key] = parsed.is_discarded() ? json(value) : parsed;
    }
    return doc;
  }

  [[nodiscard]] ExperimentConfig resolve() const { return resolve_config(document()); }
};

void log_progress(const std::string& tag, const MetricsRow& m, int total) {
  std::fprintf(stderr, "[%s] iter %d/%d  qd_archive %.2f  cov_archive %.2f  qd_all %.2f  cov_all %.2f\n",
               tag.c_str(), m.iteration + 1, total, m.qd_score_archive, m.coverage_archive,
               m.qd_score_all, m.coverage_all);
}

RunHooks progress_hooks(const std::string& tag, int total) {
  RunHooks hooks;
  hooks.on_iteration = [tag, total](const MetricsRow& m, const Budget&) {
    if ((m.iteration + 1) % 100 == 0 || m.iteration + 1 == total) log_progress(tag, m, total);
  };
  return hooks;
}

int cmd_run(const CommonFlags& flags) {
  const ExperimentConfig cfg = flags.resolve();
  if (cfg.judge == "human") throw InvalidArgument("human judge runs use the serve command");
  prepare_output_dir(cfg.out, flags.force);
  const json resolved = to_json(cfg);
  write_json(fs::path(cfg.out) / "config.json", resolved);
  RunHooks hooks = progress_hooks(to_string(cfg.strategy), cfg.engine.schedule.total_iterations);
  hooks.on_update = [dir = fs::path(cfg.out) / "checkpoint"](const UpdateSnapshot& snap) {
    write_checkpoint(dir, snap);
  };
  const RunResult r = run_experiment(cfg, hooks);
  write_run(cfg.out, r, resolved);
  std::cout << "wrote " << cfg.out << "\n";
  return kExitOk;
}

std::vector<Strategy> parse_strategy_list(const std::string& list) {
  std::vector<Strategy> out;
  if (list.empty() || list == "all") return {std::begin(kAllStrategies), std::end(kAllStrategies)};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_strategy(item));
  return out;
}

int cmd_bench(const CommonFlags& flags, int trials, const std::string& strategies) {
  if (trials < 1) throw InvalidArgument("--trials must be >= 1");
  json doc = flags.document();
  doc.erase("strategy");
  const ExperimentConfig base = resolve_config(doc);
  const auto list = parse_strategy_list(strategies);
  prepare_output_dir(base.out, flags.force);
  json summary = json::array();
  for (Strategy s : list) {
    std::vector<TrialRecord> records;
    for (int t = 0; t < trials; ++t) {
      ExperimentConfig c = base;
      c.strategy = s;
      c.seed = base.seed + static_cast<std::uint64_t>(t);
      c.out = (fs::path(base.out) / to_string(s) / ("trial_" + std::to_string(t))).string();
      c.validate();
      const RunResult r = run_experiment(c);
      write_run(c.out, r, to_json(c));
      const MetricsRow last = r.metrics.empty() ? MetricsRow{} : r.metrics.back();
      log_progress(to_string(s) + " trial " + std::to_string(t), last,
                   c.engine.schedule.total_iterations);
      records.push_back({c, last});
    }
    summary.push_back(to_json(aggregate_trials(records)));
  }
  write_json(fs::path(base.out) / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags, const std::vector<int>& budgets, int trials) {
  if (budgets.empty()) throw InvalidArgument("--budgets must list at least one budget");
  json doc = flags.document();
  doc["strategy"] = "qdhf-online";
  const ExperimentConfig base = resolve_config(doc);
  prepare_output_dir(base.out, flags.force);
  write_json(fs::path(base.out) / "config.json", to_json(base));
  const auto rows = sweep_budget(budgets, base, trials, [](const ExperimentConfig& c) {
    const RunResult r = run_experiment(c);
    const MetricsRow last = r.metrics.empty() ? MetricsRow{} : r.metrics.back();
    std::fprintf(stderr, "[sweep] %s budget %d seed %llu  qd_all %.2f\n",
                 to_string(c.strategy).c_str(), c.engine.budget_total,
                 static_cast<unsigned long long>(c.seed), last.qd_score_all);
    return last;
  });
  write_text(fs::path(base.out) / "sweep.csv", sweep_csv(rows));
  std::cout << "wrote " << (fs::path(base.out) / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_serve(const CommonFlags& flags, const std::string& host, int port,
              const std::string& static_dir, bool keep_alive) {
  json doc = flags.document();
  doc["judge"] = "human";
  doc["service.enabled"] = true;
  if (port >= 0) doc["service.port"] = port;
  const ExperimentConfig cfg = resolve_config(doc);
  prepare_output_dir(cfg.out, flags.force);
  const json resolved = to_json(cfg);
  write_json(fs::path(cfg.out) / "config.json", resolved);

  // SIGINT/SIGTERM are handled on a dedicated thread via sigwait.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  FeedbackChannel channel;
  RunStatus initial;
  initial.total_iterations = cfg.engine.schedule.total_iterations;
  initial.budget_total = cfg.engine.budget_total;
  channel.publish(initial);
  FeedbackService service(channel, static_dir);
  const int bound = service.start(host, cfg.service_port);
  std::cout << "serving on http://" << host << ":" << bound << "/api/v1/status" << std::endl;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (!done) std::fprintf(stderr, "signal %d: shutting down\n", sig);
    channel.close();
  });

  const fs::path checkpoint = fs::path(cfg.out) / "checkpoint";
  RunHooks hooks = service_hooks(channel, cfg, checkpoint);
  std::vector<MetricsRow> seen;
  auto publish = hooks.on_iteration;
  hooks.on_iteration = [&](const MetricsRow& m, const Budget& b) {
    publish(m, b);
    seen.push_back(m);
  };
  HumanJudge judge(channel, judge_timeout(cfg));
  int code = kExitOk;
  try {
    const RunResult r = run_experiment(cfg, judge, hooks);
    write_run(cfg.out, r, resolved);
    RunStatus s = channel.status();
    s.finished = true;
    s.waiting_for_feedback = false;
    channel.publish(s);
    std::cout << "run finished; wrote " << cfg.out << std::endl;
    if (keep_alive) {
      std::cout << "serving until interrupted" << std::endl;
      while (!channel.closed()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
  } catch (const JudgeError& e) {
    write_text(checkpoint / "metrics.csv", metrics_csv(seen));
    std::fprintf(stderr, "run stopped: %s (checkpoint in %s)\n", e.what(), checkpoint.c_str());
    code = kExitJudge;
  }
  done = true;
  if (!channel.closed()) pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  service.stop();
  return code;
}

int cmd_export_heatmap(const std::string& archive_path, const std::string& out, bool force) {
  fs::path path = archive_path;
  if (fs::is_directory(path)) path /= "eval_archive.json";
  const Archive archive = archive_from_json(read_json(path));
  if (fs::exists(fs::path(out) / "heatmap.csv") && !force) {
    throw OutputExists("heatmap already exists in " + out + " (pass --force to overwrite)");
  }
  export_heatmap(archive, out);
  std::cout << "wrote " << (fs::path(out) / "heatmap.csv").string() << " and heatmap.svg\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quality diversity with learned diversity metrics"};
  app.require_subcommand(1);

  CommonFlags run_flags, bench_flags, sweep_flags, serve_flags;
  auto* run = app.add_subcommand("run", "execute one run");
  run_flags.add_to(run);

  auto* bench = app.add_subcommand("bench", "all strategies x trials, then summary.json");
  bench_flags.add_to(bench);
  int bench_trials = 20;
  std::string bench_strategies = "all";
  bench->add_option("--trials", bench_trials, "trials per strategy");
  bench->add_option("--strategies", bench_strategies, "comma-separated list or 'all'");

  auto* sweep = app.add_subcommand("sweep", "judgment budget sweep, writes sweep.csv");
  sweep_flags.add_to(sweep);
  std::vector<int> budgets;
  int sweep_trials = 5;
  sweep->add_option("--budgets", budgets, "budgets, ascending")->delimiter(',')->check(CLI::PositiveNumber);
  sweep->add_option("--trials", sweep_trials, "trials per budget");

  auto* serve = app.add_subcommand("serve", "human-in-the-loop run behind the HTTP API");
  serve_flags.add_to(serve);
  std::string host = "127.0.0.1";
  int port = -1;
  std::string static_dir;
  bool keep_alive = false;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 = any free port)");
  serve->add_option("--static-dir", static_dir, "directory with UI assets served at /");
  serve->add_flag("--keep-alive", keep_alive, "keep serving after the run finishes");

  auto* heat = app.add_subcommand("export-heatmap", "archive.json -> heatmap.csv + heatmap.svg");
  std::string heat_archive, heat_out;
  bool heat_force = false;
  heat->add_option("archive", heat_archive, "archive JSON or run directory")->required();
  heat->add_option("-o,--out", heat_out, "output directory")->required();
  heat->add_flag("--force", heat_force, "overwrite existing heatmap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*bench) return cmd_bench(bench_flags, bench_trials, bench_strategies);
    if (*sweep) return cmd_sweep(sweep_flags, budgets, sweep_trials);
    if (*serve) return cmd_serve(serve_flags, host, port, static_dir, keep_alive);
    if (*heat) return cmd_export_heatmap(heat_archive, heat_out, heat_force);
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const OutputExists& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BudgetExhausted& e) {
    std::cerr << e.what() << "\n";
    return kExitJudge;
  } catch (const JudgeError& e) {
    std::cerr << e.what() << "\n";
    return kExitJudge;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
