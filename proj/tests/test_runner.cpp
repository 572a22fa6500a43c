#include <gtest/gtest.h>

#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include "qdhf/qdhf.hpp"
#include "qdhf/service.hpp"

#include <httplib.h>

using namespace qdhf;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qdhf_test_" + name);
  fs::remove_all(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QDHF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Individual gt_ind(IndividualId id, double x, double y, double obj) {
  Individual ind;
  ind.id = id;
  ind.genome = Genome(Vec::Zero(1));
  ind.objective = obj;
  ind.gt_measures = Vec(2);
  ind.gt_measures << x, y;
  return ind;
}

}  // namespace

// ---- config ---------------------------------------------------------------------

TEST(Config, DefaultsFromTask) {
  const ExperimentConfig arm = resolve_config({{"task", "arm"}});
  EXPECT_EQ(arm.engine.schedule.batch_size, 100);
  EXPECT_DOUBLE_EQ(arm.engine.schedule.mutation_sigma, 0.1);
  EXPECT_EQ(arm.engine.budget_total, 1000);
  EXPECT_EQ(arm.engine.schedule.total_iterations, 1000);
  EXPECT_EQ(arm.engine.archive_shape, (std::vector<int>{50, 50}));
  const ExperimentConfig maze = resolve_config({{"task", "maze"}, {"strategy", "gt"}});
  EXPECT_EQ(maze.engine.schedule.batch_size, 200);
  EXPECT_DOUBLE_EQ(maze.engine.schedule.mutation_sigma, 0.2);
  EXPECT_EQ(maze.engine.budget_total, 200);
  EXPECT_EQ(maze.strategy, Strategy::GroundTruth);
}

TEST(Config, RoundTrip) {
  ExperimentConfig c = resolve_config({{"task", "maze"}, {"seed", 77}, {"train.margin", 0.2},
                                       {"schedule.update_iterations", {0, 50}}});
  const json j = to_json(c);
  const ExperimentConfig back = resolve_config(json::parse(j.dump()));
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_json(back), j);
}

TEST(Config, Errors) {
  EXPECT_THROW(resolve_config({{"task", "arm"}, {"bogus.key", 1}}), InvalidArgument);
  EXPECT_THROW(resolve_config({{"task", "cube"}}), InvalidArgument);
  EXPECT_THROW(resolve_config({{"strategy", "nope"}}), InvalidArgument);
  EXPECT_THROW(resolve_config({{"seed", "abc"}}), InvalidArgument);
  EXPECT_THROW(resolve_config({{"judge", "human"}, {"strategy", "gt"}}), InvalidArgument);
  EXPECT_THROW(resolve_config({{"train.learning_rate", -1.0}}), InvalidArgument);
  EXPECT_THROW(resolve_config(json::array()), InvalidArgument);
}

TEST(Config, SeedEnvironmentOverride) {
  json doc{{"seed", 1}};
  ::setenv("QDHF_SEED", "1234", 1);
  apply_seed_env(doc);
  ::unsetenv("QDHF_SEED");
  EXPECT_EQ(resolve_config(doc).seed, 1234u);
  ::setenv("QDHF_SEED", "x1", 1);
  EXPECT_THROW(apply_seed_env(doc), InvalidArgument);
  ::unsetenv("QDHF_SEED");
}

// ---- io -------------------------------------------------------------------------

TEST(Io, FormatDoubleRoundTrips) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    ASSERT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Io, MetricsCsvRoundTrip) {
  std::vector<MetricsRow> rows{{0, 1.5, 2.0, 3.25, 4.0, 250, 0.875}, {1, 1.0 / 3, 2, 3, 4, 250, std::nullopt}};
  std::istringstream in(metrics_csv(rows));
  const auto back = parse_metrics_csv(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].val_acc, 0.875);
  EXPECT_EQ(back[1].qd_score_archive, 1.0 / 3);
  EXPECT_FALSE(back[1].val_acc);
  EXPECT_EQ(metrics_csv(rows).substr(0, metrics_csv(rows).find('\n')),
            "iteration,qd_score_archive,coverage_archive,qd_score_all,coverage_all,judgments_used,val_acc");
}

TEST(Io, ArchiveJsonRoundTrip) {
  Archive a({50, 50}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::Latent);
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (IndividualId id = 1; id <= 100; ++id) {
    Individual ind = gt_ind(id, u(rng), u(rng), (u(rng) + 1) / 2);
    ind.latent_measures = Vec(2);
    *ind.latent_measures << u(rng), u(rng);
    a.insert(ind);
  }
  const Archive b = archive_from_json(json::parse(archive_to_json(a).dump()));
  EXPECT_EQ(archive_to_json(b), archive_to_json(a));
  EXPECT_EQ(b.filled(), a.filled());
}

TEST(Io, PrepareOutputDirRefusesUnlessForced) {
  const fs::path dir = scratch("prep");
  prepare_output_dir(dir, false);
  write_text(dir / "x.txt", "x");
  EXPECT_THROW(prepare_output_dir(dir, false), OutputExists);
  EXPECT_NO_THROW(prepare_output_dir(dir, true));
  EXPECT_TRUE(fs::is_empty(dir));
  fs::remove_all(dir);
}

// ---- evalsuite -----------------------------------------------------------------

TEST(Evalsuite, MeanStdTwoPoint) {
  const MeanStd ms = mean_std({10, 20});
  EXPECT_DOUBLE_EQ(ms.mean, 15);
  EXPECT_NEAR(ms.std, 7.0710678118654755, 1e-12);
  EXPECT_EQ(mean_std({3, 3, 3}).std, 0.0);
}

TEST(Evalsuite, AggregateTrials) {
  ExperimentConfig c = resolve_config({{"task", "arm"}, {"strategy", "qdhf-online"}});
  std::vector<TrialRecord> runs;
  for (int i = 0; i < 5; ++i) {
    ExperimentConfig ci = c;
    ci.seed = static_cast<std::uint64_t>(i);
    ci.out = "runs/" + std::to_string(i);
    runs.push_back({ci, MetricsRow{999, 10.0 * i, 20, 30.0 + i, 40, 1000, 0.9}});
  }
  const TrialSummary s = aggregate_trials(runs);
  EXPECT_EQ(s.trials, 5);
  EXPECT_EQ(s.task, "arm");
  EXPECT_EQ(s.strategy, "qdhf-online");
  EXPECT_DOUBLE_EQ(s.metrics.at("qd_score_archive").mean, 20.0);
  EXPECT_DOUBLE_EQ(s.metrics.at("coverage_archive").std, 0.0);
  EXPECT_TRUE(s.metrics.count("val_acc"));
  const json j = to_json(s);
  for (const char* k : {"strategy", "task", "trials", "metrics"}) EXPECT_TRUE(j.contains(k));
  EXPECT_TRUE(j["metrics"]["qd_score_all"].contains("mean"));
  EXPECT_TRUE(j["metrics"]["qd_score_all"].contains("std"));

  // Permutation invariance, bit-for-bit.
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    auto shuffled = runs;
    for (auto& r : shuffled) r.final.qd_score_all += 1e-3 * (static_cast<double>(rng() % 1000));
    const auto ref = to_json(aggregate_trials(shuffled));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(to_json(aggregate_trials(shuffled)), ref);
  }

  auto mismatched = runs;
  mismatched[2].config.engine.budget_total = 5;
  EXPECT_THROW(aggregate_trials(mismatched), InvalidArgument);
  EXPECT_THROW(aggregate_trials({}), InvalidArgument);
}

TEST(Evalsuite, SpearmanAgainstClosedForm) {
  // Without ties: rho = 1 - 6 sum d^2 / (n (n^2 - 1)).
  Rng rng(4);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x[i] = n(rng);
      y[i] = x[i] + n(rng);
    }
    std::vector<int> rx(30), ry(30), ix(30), iy(30);
    std::iota(ix.begin(), ix.end(), 0);
    std::iota(iy.begin(), iy.end(), 0);
    std::sort(ix.begin(), ix.end(), [&](int a, int b) { return x[a] < x[b]; });
    std::sort(iy.begin(), iy.end(), [&](int a, int b) { return y[a] < y[b]; });
    for (int i = 0; i < 30; ++i) {
      rx[ix[i]] = i;
      ry[iy[i]] = i;
    }
    double d2 = 0;
    for (int i = 0; i < 30; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    ASSERT_NEAR(spearman(x, y), 1 - 6 * d2 / (30.0 * (900 - 1)), 1e-12);
  }
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {3, 2, 1}), -1.0);
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 2, 3}), 1.0, 1e-12);
  EXPECT_THROW(spearman({1}, {1}), InvalidArgument);
}

TEST(Evalsuite, SweepCardinalityAndSeeds) {
  ExperimentConfig base = resolve_config({{"task", "arm"}, {"seed", 100}});
  std::vector<std::uint64_t> seeds;
  const auto rows = sweep_budget({100, 300, 1000, 3000}, base, 2, [&](const ExperimentConfig& c) {
    seeds.push_back(c.seed);
    MetricsRow m;
    m.qd_score_all = c.engine.budget_total;
    m.val_acc = 0.5;
    return m;
  });
  EXPECT_EQ(rows.size(), 16u);  // 2 strategies x 4 budgets x 2 trials
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  EXPECT_EQ(distinct.size(), 8u);  // one seed per (budget, trial)
  const std::string csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "budget,strategy,qd_score_all,val_acc");
  const auto one = sweep_budget({100}, base, 1, [](const ExperimentConfig&) { return MetricsRow{}; });
  EXPECT_EQ(one.size(), 2u);  // offline + online
  EXPECT_THROW(sweep_budget({}, base, 1, [](const ExperimentConfig&) { return MetricsRow{}; }),
               InvalidArgument);
  EXPECT_THROW(sweep_budget({300, 100}, base, 1, [](const ExperimentConfig&) { return MetricsRow{}; }),
               InvalidArgument);
}

TEST(Evalsuite, HeatmapEmptyAndSingle) {
  Archive a({50, 50}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::GroundTruth);
  std::string csv = heatmap_csv(a);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 50);
  EXPECT_EQ(csv.find_first_not_of(",\n"), std::string::npos);
  a.insert(gt_ind(1, -1, -1, 1.0));
  csv = heatmap_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find(',')), "1");
  int populated = 0;
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) populated += !cell.empty();
  }
  EXPECT_EQ(populated, 1);
  const std::string svg = heatmap_svg(a);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  // background rect + one cell
  std::size_t rects = 0;
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
  EXPECT_EQ(rects, 2u);

  Archive three({5, 5, 5}, MeasureBounds::uniform(3, -1, 1), MeasureSpace::GroundTruth);
  EXPECT_THROW(heatmap_csv(three), InvalidArgument);
}

TEST(Evalsuite, GroundTruthArmHeatmapIsDiskShaped) {
  const ExperimentConfig cfg = resolve_config({{"task", "arm"}, {"strategy", "gt"}, {"seed", 3}});
  const RunResult r = run_experiment(cfg);
  const Archive& a = r.eval.final_archive_view;
  int outside = 0;
  int inner_empty = 0;
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      // nearest point of the cell to the origin
      const double lo_x = -1 + 0.04 * i, lo_y = -1 + 0.04 * j;
      const double nx = std::clamp(0.0, lo_x, lo_x + 0.04), ny = std::clamp(0.0, lo_y, lo_y + 0.04);
      const double cx = lo_x + 0.02, cy = lo_y + 0.02;
      if (std::hypot(nx, ny) > 1.0 && a.at({i, j})) ++outside;
      if (std::hypot(cx, cy) < 0.6 && !a.at({i, j})) ++inner_empty;
    }
  }
  EXPECT_EQ(outside, 0);
  EXPECT_EQ(inner_empty, 0);
}

// ---- CLI ----------------------------------------------------------------------

TEST(Cli, RunWritesLayoutAndRefusesOverwrite) {
  const fs::path out = scratch("cli_run");
  ASSERT_EQ(run_cli("run --task arm --strategy gt --seed 1 -o " + out.string()), 0);
  for (const char* f : {"archive.json", "metrics.csv", "config.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  std::istringstream in(read_text(out / "metrics.csv"));
  EXPECT_EQ(parse_metrics_csv(in).size(), 1000u);
  EXPECT_EQ(read_json(out / "config.json")["seed"], 1);
  EXPECT_EQ(run_cli("run --task arm --strategy gt --seed 1 -o " + out.string()), 2);
  EXPECT_EQ(run_cli("run --task arm --strategy gt --seed 1 --iterations 5 --set schedule.update_iterations=[0] --force -o " +
                    out.string()),
            0);
  fs::remove_all(out);
}

TEST(Cli, InvalidConfigExitsTwo) {
  const fs::path out = scratch("cli_bad");
  EXPECT_EQ(run_cli("run --task arm --strategy nope -o " + out.string()), 2);
  EXPECT_EQ(run_cli("run --task arm --set bogus=1 -o " + out.string()), 2);
  EXPECT_EQ(run_cli("sweep --task arm --budgets '' -o " + out.string()), 2);
  EXPECT_EQ(run_cli("sweep --task arm -o " + out.string()), 2);
  fs::remove_all(out);
}

TEST(Cli, ConfigFileFlagsAndSeedEnv) {
  const fs::path out = scratch("cli_cfg");
  const fs::path cfg = scratch("cli_cfg.json");
  write_json(cfg, {{"task", "arm"}, {"strategy", "qdhf-offline"}, {"seed", 5}, {"schedule.total_iterations", 3},
                   {"schedule.update_iterations", {0}}, {"budget.total", 20}});
  ASSERT_EQ(run_cli("run -c " + cfg.string() + " --budget 30 -o " + out.string()), 0);
  json resolved = read_json(out / "config.json");
  EXPECT_EQ(resolved["budget.total"], 30);
  EXPECT_EQ(resolved["seed"], 5);
  EXPECT_EQ(resolved["strategy"], "qdhf-offline");
  ASSERT_EQ(std::system(("QDHF_SEED=99 " + std::string(QDHF_CLI_PATH) + " run -c " + cfg.string() +
                         " --force -o " + out.string() + " > /dev/null 2>&1").c_str()),
            0);
  EXPECT_EQ(read_json(out / "config.json")["seed"], 99);
  // The resolved config reproduces the run.
  const fs::path again = scratch("cli_cfg_again");
  ASSERT_EQ(run_cli("run -c " + (out / "config.json").string() + " -o " + again.string()), 0);
  EXPECT_EQ(read_text(again / "metrics.csv"), read_text(out / "metrics.csv"));
  fs::remove_all(out);
  fs::remove_all(again);
  fs::remove(cfg);
}

TEST(Cli, BenchSingleTrialHasZeroStd) {
  const fs::path out = scratch("cli_bench");
  ASSERT_EQ(run_cli("bench --task arm --trials 1 --strategies gt,qdhf-online --iterations 20 "
                    "--set schedule.update_iterations=[0,10] -o " + out.string()),
            0);
  const json s = read_json(out / "summary.json");
  ASSERT_EQ(s.size(), 2u);
  for (const auto& entry : s) {
    EXPECT_EQ(entry["trials"], 1);
    for (const char* m : {"qd_score_archive", "coverage_archive", "qd_score_all", "coverage_all"}) {
      EXPECT_EQ(entry["metrics"][m]["std"], 0.0);
    }
  }
  fs::remove_all(out);
}

TEST(Cli, SweepWritesRows) {
  const fs::path out = scratch("cli_sweep");
  ASSERT_EQ(run_cli("sweep --task arm --budgets 20,40 --trials 1 --iterations 20 "
                    "--set schedule.update_iterations=[0,10] -o " + out.string()),
            0);
  const std::string csv = read_text(out / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);  // header + 2 x 2
  fs::remove_all(out);
}

TEST(Cli, ExportHeatmap) {
  const fs::path run = scratch("cli_heat_run");
  const fs::path out = scratch("cli_heat");
  ASSERT_EQ(run_cli("run --task arm --strategy gt --iterations 10 --set schedule.update_iterations=[0] -o " +
                    run.string()),
            0);
  ASSERT_EQ(run_cli("export-heatmap " + run.string() + " -o " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "heatmap.csv"));
  EXPECT_TRUE(fs::exists(out / "heatmap.svg"));
  EXPECT_EQ(run_cli("export-heatmap " + run.string() + " -o " + out.string()), 2);
  fs::remove_all(run);
  fs::remove_all(out);
}

// ---- HTTP service --------------------------------------------------------------

TEST(Service, EndpointsAndStatusCodes) {
  FeedbackChannel ch;
  FeedbackService service(ch);
  const int port = service.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);

  auto next = cli.Get("/api/v1/triplets/next");
  ASSERT_TRUE(next);
  EXPECT_EQ(next->status, 200);
  EXPECT_EQ(next->get_header_value("Content-Type"), "application/json");
  json body = json::parse(next->body);
  EXPECT_TRUE(body["request_id"].is_null());
  EXPECT_EQ(body["state"], "running");

  const RequestId id = ch.enqueue({1, 2, 3}, {{"ref", {{"kind", "arm"}}}, {"a", 1}, {"b", 2}});
  auto status = cli.Get("/api/v1/status");
  ASSERT_TRUE(status);
  EXPECT_GE(json::parse(status->body)["pending"].get<int>(), 1);

  next = cli.Get("/api/triplets/next");
  body = json::parse(next->body);
  EXPECT_EQ(body["request_id"], id);
  EXPECT_EQ(body["ref"]["kind"], "arm");

  const std::string url = "/api/v1/triplets/" + std::to_string(id);
  EXPECT_EQ(cli.Post(url, "not json", "application/json")->status, 400);
  EXPECT_EQ(cli.Post(url, R"({"choice":"C"})", "application/json")->status, 400);
  EXPECT_EQ(cli.Post("/api/v1/triplets/999", R"({"choice":"A"})", "application/json")->status, 404);
  EXPECT_EQ(cli.Post(url, R"({"choice":"A"})", "application/json")->status, 200);
  EXPECT_EQ(cli.Post(url, R"({"choice":"B"})", "application/json")->status, 409);
  EXPECT_EQ(ch.pending_count(), 0u);

  RunStatus done;
  done.finished = true;
  ch.publish(done);
  body = json::parse(cli.Get("/api/v1/triplets/next")->body);
  EXPECT_EQ(body["state"], "finished");
  service.stop();
}

TEST(Service, HumanRunThroughHttpCompletes) {
  ExperimentConfig cfg = resolve_config({{"task", "arm"}, {"strategy", "qdhf-online"}, {"judge", "human"},
                                         {"schedule.total_iterations", 12},
                                         {"schedule.update_iterations", {0, 6}}, {"budget.total", 10}});
  FeedbackChannel ch;
  FeedbackService service(ch);
  const int port = service.start("127.0.0.1", 0);
  HumanJudge judge(ch, 10s);
  std::optional<RunResult> result;
  std::thread opt([&] { result = run_experiment(cfg, judge, service_hooks(ch, cfg, std::nullopt)); });
  httplib::Client cli("127.0.0.1", port);
  int answered = 0, skipped = 0;
  while (answered < 10) {
    auto res = cli.Get("/api/v1/triplets/next");
    ASSERT_TRUE(res);
    const json body = json::parse(res->body);
    if (body["request_id"].is_null()) {
      std::this_thread::sleep_for(2ms);
      continue;
    }
    const std::string choice = (skipped < 2) ? "skip" : "A";
    const auto post = cli.Post("/api/v1/triplets/" + std::to_string(body["request_id"].get<RequestId>()),
                               json{{"choice", choice}}.dump(), "application/json");
    ASSERT_EQ(post->status, 200);
    if (choice == "skip") {
      ++skipped;
    } else {
      ++answered;
    }
  }
  opt.join();
  ASSERT_TRUE(result);
  EXPECT_EQ(result->budget.used(), 10);
  EXPECT_EQ(result->judgments.size(), 10u);
  EXPECT_EQ(ch.log().size(), 12u);
  EXPECT_FALSE(result->metrics.back().val_acc);
  service.stop();
}
