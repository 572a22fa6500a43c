#include <gtest/gtest.h>

#include <numbers>

#include "qdhf/engine.hpp"
#include "qdhf/io.hpp"
#include "qdhf/tasks/arm.hpp"

using namespace qdhf;

namespace {

Individual make(IndividualId id, Vec features, double obj) {
  Individual ind;
  ind.id = id;
  ind.genome = Genome(features);
  ind.objective = obj;
  ind.features = features;
  ind.gt_measures = features;
  ind.latent_measures = features;
  return ind;
}

EngineConfig small_config(int iterations = 60) {
  EngineConfig cfg;
  cfg.schedule.total_iterations = iterations;
  cfg.schedule.update_iterations = {0, 10, 25, 40};
  std::erase_if(cfg.schedule.update_iterations, [&](int u) { return u >= iterations; });
  cfg.budget_total = 200;
  cfg.validation_size = 50;
  return cfg;
}

}  // namespace

TEST(EmitBatch, ColdStartIsUniformInDomain) {
  Archive empty({50, 50}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::GroundTruth);
  Schedule s;
  s.batch_size = 3;
  Rng rng(1);
  const ArmTask arm;
  const auto batch = emit_batch(empty, rng, s, arm.genome_domain());
  ASSERT_EQ(batch.size(), 3u);
  for (const auto& g : batch) {
    ASSERT_EQ(g.size(), 10);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      EXPECT_GE(g[i], -std::numbers::pi);
      EXPECT_LE(g[i], std::numbers::pi);
    }
  }
}

TEST(EmitBatch, ZeroSigmaCopiesElites) {
  Archive a({5, 5}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::GroundTruth);
  a.insert(make(1, Vec::Constant(2, 0.3), 0.5));
  a.insert(make(2, Vec::Constant(2, -0.7), 0.5));
  Schedule s;
  s.batch_size = 50;
  s.mutation_sigma = 0.0;
  Rng rng(2);
  for (const auto& g : emit_batch(a, rng, s, {{-1, 1}, {-1, 1}})) {
    EXPECT_TRUE(g == a.elite(0).genome || g == a.elite(1).genome);
  }
}

TEST(EmitBatch, ClipsToDomain) {
  Archive a({5, 5}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::GroundTruth);
  Individual ind = make(1, Vec::Zero(2), 1.0);
  ind.genome = Genome(Vec::Constant(10, std::numbers::pi));
  a.insert(ind);
  Schedule s;
  s.batch_size = 200;
  Rng rng(3);
  for (const auto& g : emit_batch(a, rng, s, ArmTask().genome_domain())) {
    for (Eigen::Index i = 0; i < g.size(); ++i) ASSERT_LE(g[i], std::numbers::pi);
  }
}

TEST(RebuildArchive, IdentityModelSameBounds) {
  const MeasureBounds b = MeasureBounds::uniform(2, -1, 1);
  Archive a({10, 10}, b, MeasureSpace::Latent);
  Rng rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (IndividualId id = 1; id <= 60; ++id) a.insert(make(id, Vec::NullaryExpr(2, [&] { return u(rng); }), u(rng) + 1));
  const LatentModel identity = LinearProjection{Mat::Identity(2, 2), Vec::Zero(2)};
  const Archive r = rebuild_archive(a, identity, b);
  ASSERT_EQ(r.filled(), a.filled());
  a.for_each_elite([&](const Individual& e) {
    const auto& got = r.at(a.index_of(e));
    ASSERT_TRUE(got);
    EXPECT_EQ(got->id, e.id);
  });
}

TEST(RebuildArchive, CollisionKeepsHigherObjective) {
  Archive a({10, 10}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::Latent);
  Vec f1(2), f2(2);
  f1 << -0.5, 0.2;
  f2 << 0.5, 0.2;
  a.insert(make(1, f1, 0.4));
  a.insert(make(2, f2, 0.8));
  // Projection onto the second coordinate only: both land in the same cell.
  Mat w(2, 2);
  w << 0, 1, 0, 1;
  const Archive r = rebuild_archive(a, LinearProjection{w, Vec::Zero(2)}, MeasureBounds::uniform(2, -1, 1));
  ASSERT_EQ(r.filled(), 1u);
  EXPECT_EQ(r.elite(0).id, 2u);
}

TEST(RebuildArchive, ConservationProperty) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(-1, 1), obj(0, 1);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 30; ++trial) {
    Archive a({50, 50}, MeasureBounds::uniform(2, -1, 1), MeasureSpace::Latent);
    for (IndividualId id = 1; id <= 400; ++id) {
      Individual ind = make(id, Vec::NullaryExpr(6, [&] { return u(rng); }), obj(rng));
      ind.latent_measures = ind.features.head(2);
      a.insert(ind);
    }
    const Mat w = Mat::NullaryExpr(2, 6, [&] { return n01(rng); });
    const Archive r = rebuild_archive(a, LinearProjection{w, Vec::Zero(6)},
                                      MeasureBounds::uniform(2, -0.5, 0.5));
    double best = -1;
    a.for_each_elite([&](const Individual& e) { best = std::max(best, e.objective); });
    double rbest = -1;
    r.for_each_elite([&](const Individual& e) { rbest = std::max(rbest, e.objective); });
    ASSERT_LE(r.filled(), a.filled());
    ASSERT_EQ(best, rbest);
  }
}

TEST(LatentBounds, MinMaxWidenedByMargin) {
  Vec a(2), b(2);
  a << 0.0, -2.0;
  b << 1.0, 2.0;
  const MeasureBounds mb = latent_bounds({a, b}, 2, 0.05);
  EXPECT_DOUBLE_EQ(mb[0].low, -0.05);
  EXPECT_DOUBLE_EQ(mb[0].high, 1.05);
  EXPECT_DOUBLE_EQ(mb[1].low, -2.2);
  EXPECT_DOUBLE_EQ(mb[1].high, 2.2);
}

TEST(LatentBounds, DegenerateRangeStaysValid) {
  const MeasureBounds mb = latent_bounds({Vec::Constant(2, 3.0), Vec::Constant(2, 3.0)}, 2, 0.05);
  EXPECT_LT(mb[0].low, 3.0);
  EXPECT_GT(mb[0].high, 3.0);
}

TEST(ScheduleTest, Validation) {
  Schedule s;
  EXPECT_NO_THROW(s.validate());
  s.update_iterations = {0, 100, 100};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.update_iterations = {0, 2000};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.update_iterations = {5, 10};
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(StrategyNames, RoundTrip) {
  for (Strategy s : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(s)), s);
  EXPECT_EQ(parse_strategy("gt"), Strategy::GroundTruth);
  EXPECT_THROW(parse_strategy("bogus"), InvalidArgument);
}

TEST(RunQd, ZeroIterations) {
  EngineConfig cfg;
  cfg.schedule.total_iterations = 0;
  OracleJudge judge;
  Rng rng(1);
  const RunResult r = run_qd(ArmTask(), Strategy::QdhfOnline, judge, cfg, rng);
  EXPECT_TRUE(r.archive.empty());
  EXPECT_TRUE(r.eval.all_solutions.empty());
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.budget.used(), 0);
}

TEST(RunQd, OnlineChargesQuarterBudgetAtEachUpdate) {
  EngineConfig cfg;
  OracleJudge judge;
  Rng rng(1);
  const RunResult r = run_qd(ArmTask(), Strategy::QdhfOnline, judge, cfg, rng);
  ASSERT_EQ(r.metrics.size(), 1000u);
  EXPECT_EQ(r.metrics[0].judgments_used, 250);
  EXPECT_EQ(r.metrics[99].judgments_used, 250);
  EXPECT_EQ(r.metrics[100].judgments_used, 500);
  EXPECT_EQ(r.metrics[250].judgments_used, 750);
  EXPECT_EQ(r.metrics[500].judgments_used, 1000);
  EXPECT_EQ(r.metrics.back().judgments_used, 1000);
  EXPECT_EQ(r.judgments.size(), 1000u);
  EXPECT_EQ(r.budget.used(), static_cast<int>(r.judgments.size()));
}

TEST(RunQd, OfflineSpendsFullBudgetAtStart) {
  EngineConfig cfg = small_config();
  OracleJudge judge;
  Rng rng(2);
  const RunResult r = run_qd(ArmTask(), Strategy::QdhfOffline, judge, cfg, rng);
  for (const auto& m : r.metrics) ASSERT_EQ(m.judgments_used, 200);
}

TEST(RunQd, NonJudgmentStrategiesUseNoBudget) {
  EngineConfig cfg = small_config(30);
  for (Strategy s : {Strategy::GroundTruth, Strategy::AuroraPcaIncremental, Strategy::AuroraAePretrained}) {
    OracleJudge judge;
    Rng rng(3);
    const RunResult r = run_qd(ArmTask(), s, judge, cfg, rng);
    EXPECT_EQ(r.budget.used(), 0);
    EXPECT_TRUE(r.judgments.empty());
    EXPECT_FALSE(r.metrics.back().val_acc.has_value());
  }
}

TEST(RunQd, DeterministicMetricsCsv) {
  for (Strategy s : kAllStrategies) {
    EngineConfig cfg = small_config();
    OracleJudge j1, j2;
    Rng r1(42), r2(42);
    const RunResult a = run_qd(ArmTask(), s, j1, cfg, r1);
    const RunResult b = run_qd(ArmTask(), s, j2, cfg, r2);
    EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics)) << to_string(s);
    EXPECT_EQ(archive_to_json(a.archive), archive_to_json(b.archive)) << to_string(s);
  }
}

TEST(RunQd, AllSolutionsDominateArchiveView) {
  for (Strategy s : kAllStrategies) {
    EngineConfig cfg = small_config();
    OracleJudge judge;
    Rng rng(7);
    const RunResult r = run_qd(ArmTask(), s, judge, cfg, rng);
    for (const auto& m : r.metrics) {
      ASSERT_GE(m.qd_score_all + 1e-9, m.qd_score_archive) << to_string(s);
      ASSERT_GE(m.coverage_all, m.coverage_archive) << to_string(s);
      ASSERT_GE(m.coverage_all, 0.0);
      ASSERT_LE(m.coverage_all, 100.0);
    }
  }
}

TEST(RunQd, EvalMetricsMonotone) {
  for (Strategy s : {Strategy::GroundTruth, Strategy::QdhfOnline, Strategy::AuroraPcaIncremental}) {
    EngineConfig cfg = small_config();
    OracleJudge judge;
    Rng rng(5);
    const RunResult r = run_qd(ArmTask(), s, judge, cfg, rng);
    // The ground-truth view of a GT archive is the archive itself.
    if (s == Strategy::GroundTruth) {
      for (std::size_t i = 1; i < r.metrics.size(); ++i) {
        ASSERT_GE(r.metrics[i].qd_score_archive, r.metrics[i - 1].qd_score_archive - 1e-12);
      }
    }
    for (std::size_t i = 1; i < r.metrics.size(); ++i) {
      ASSERT_GE(r.metrics[i].qd_score_all, r.metrics[i - 1].qd_score_all - 1e-12);
      ASSERT_GE(r.metrics[i].coverage_all, r.metrics[i - 1].coverage_all);
    }
  }
}

TEST(RunQd, WorkingArchiveQdMonotoneBetweenUpdates) {
  EngineConfig cfg = small_config();
  OracleJudge judge;
  Rng rng(6);
  // Own-space QD score right after the last rebuild vs. at the end.
  RunHooks hooks;
  std::optional<double> after_last_update;
  hooks.on_update = [&](const UpdateSnapshot& s) { after_last_update = qd_score(*s.archive); };
  const RunResult r = run_qd(ArmTask(), Strategy::QdhfOnline, judge, cfg, rng, hooks);
  ASSERT_TRUE(after_last_update);
  EXPECT_GE(qd_score(r.archive), *after_last_update);
}

TEST(RunQd, GroundTruthFinalCoverageMatchesAllSolutions) {
  EngineConfig cfg;
  cfg.schedule.total_iterations = 200;
  cfg.schedule.update_iterations = {0};
  OracleJudge judge;
  Rng rng(3);
  const RunResult r = run_qd(ArmTask(), Strategy::GroundTruth, judge, cfg, rng);
  EXPECT_DOUBLE_EQ(r.metrics.back().coverage_archive, r.metrics.back().coverage_all);
  // same elites, different summation order
  EXPECT_NEAR(r.metrics.back().qd_score_archive, r.metrics.back().qd_score_all, 1e-9);
}

TEST(RunQd, LatentMeasuresPresentIffModelApplied) {
  EngineConfig cfg = small_config(20);
  OracleJudge judge;
  Rng rng(1);
  const RunResult gt = run_qd(ArmTask(), Strategy::GroundTruth, judge, cfg, rng);
  gt.archive.for_each_elite([](const Individual& e) { ASSERT_FALSE(e.latent_measures); });
  const RunResult on = run_qd(ArmTask(), Strategy::QdhfOnline, judge, cfg, rng);
  on.archive.for_each_elite([](const Individual& e) { ASSERT_TRUE(e.latent_measures); });
}
