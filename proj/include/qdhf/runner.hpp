#pragma once

#include <chrono>
#include <optional>
#include <variant>

#include "qdhf/config.hpp"
#include "qdhf/engine.hpp"
#include "qdhf/feedback.hpp"
#include "qdhf/feedback_channel.hpp"
#include "qdhf/io.hpp"
#include "qdhf/tasks/arm.hpp"
#include "qdhf/tasks/maze.hpp"

namespace qdhf {

using AnyTask = std::variant<ArmTask, MazeTask>;

inline AnyTask make_task(const ExperimentConfig& cfg) {
  if (cfg.task == "arm") return ArmTask();
  MazeParams params;
  if (!cfg.maze_layout.empty()) params.walls = load_maze_layout(cfg.maze_layout);
  return MazeTask(std::move(params));
}

inline RunResult run_experiment(const ExperimentConfig& cfg, Judge& judge,
                                const RunHooks& hooks = {}) {
  cfg.validate();
  const AnyTask task = make_task(cfg);
  Rng rng(cfg.seed);
  return std::visit(
      [&](const auto& t) { return run_qd(t, cfg.strategy, judge, cfg.engine, rng, hooks); }, task);
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  OracleJudge judge;
  return run_experiment(cfg, judge, hooks);
}

/// Hooks that publish progress to `channel` and checkpoint into `dir`.
inline RunHooks service_hooks(FeedbackChannel& channel, const ExperimentConfig& cfg,
                              std::optional<fs::path> checkpoint_dir) {
  RunHooks hooks;
  const int total = cfg.engine.schedule.total_iterations;
  hooks.on_iteration = [&channel, total](const MetricsRow& row, const Budget& budget) {
    RunStatus s;
    s.iteration = row.iteration + 1;
    s.total_iterations = total;
    s.budget_used = budget.used();
    s.budget_total = budget.total();
    s.coverage_all = row.coverage_all;
    channel.publish(s);
  };
  hooks.on_feedback_wait = [&channel, &cfg](int it) {
    RunStatus s = channel.status();
    s.iteration = it;
    s.total_iterations = cfg.engine.schedule.total_iterations;
    s.budget_total = cfg.engine.budget_total;
    s.waiting_for_feedback = true;
    channel.publish(s);
  };
  if (checkpoint_dir) {
    hooks.on_update = [dir = *checkpoint_dir](const UpdateSnapshot& snap) {
      write_checkpoint(dir, snap);
    };
  }
  return hooks;
}

inline std::optional<std::chrono::milliseconds> judge_timeout(const ExperimentConfig& cfg) {
  if (cfg.judge_timeout_ms <= 0) return std::nullopt;
  return std::chrono::milliseconds(cfg.judge_timeout_ms);
}

}  // namespace qdhf
