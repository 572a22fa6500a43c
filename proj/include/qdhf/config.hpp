#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "qdhf/engine.hpp"

namespace qdhf {

/// Fully resolved experiment configuration. Serialized as a single JSON
/// object with flat dotted keys that mirror the CLI flags.
struct ExperimentConfig {
  std::string task = "arm";
  Strategy strategy = Strategy::QdhfOnline;
  std::uint64_t seed = 0;
  std::string judge = "oracle";  // oracle | human
  EngineConfig engine;
  std::string maze_layout;       // empty = built-in layout
  int judge_timeout_ms = 0;      // 0 = wait forever
  bool service_enabled = false;
  int service_port = 8080;
  std::string out = "runs/default";

  void validate() const {
    if (task != "arm" && task != "maze") throw InvalidArgument("task must be 'arm' or 'maze'");
    if (judge != "oracle" && judge != "human") {
      throw InvalidArgument("judge must be 'oracle' or 'human'");
    }
    if (judge == "human" && !uses_judgments(strategy)) {
      throw InvalidArgument("human judge requires a qdhf strategy");
    }
    if (judge_timeout_ms < 0) throw InvalidArgument("judge.timeout_ms must be >= 0");
    if (service_port < 0 || service_port > 65535) throw InvalidArgument("service.port out of range");
    engine.validate();
  }

  bool operator==(const ExperimentConfig&) const = default;
};

/// Defaults that depend on the task alone.
inline nlohmann::json task_defaults(const std::string& task) {
  const bool maze = task == "maze";
  return {{"schedule.batch_size", maze ? 200 : 100},
          {"schedule.mutation_sigma", maze ? 0.2 : 0.1},
          {"budget.total", maze ? 200 : 1000}};
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  const EngineConfig& e = c.engine;
  return {
      {"task", c.task},
      {"strategy", to_string(c.strategy)},
      {"seed", c.seed},
      {"judge", c.judge},
      {"judge.timeout_ms", c.judge_timeout_ms},
      {"schedule.total_iterations", e.schedule.total_iterations},
      {"schedule.update_iterations", e.schedule.update_iterations},
      {"schedule.batch_size", e.schedule.batch_size},
      {"schedule.mutation_sigma", e.schedule.mutation_sigma},
      {"budget.total", e.budget_total},
      {"train.margin", e.train.margin},
      {"train.learning_rate", e.train.learning_rate},
      {"train.epochs", e.train.epochs},
      {"train.fine_tune_epochs", e.train.fine_tune_epochs},
      {"train.minibatch", e.train.minibatch},
      {"autoencoder.learning_rate", e.autoencoder.learning_rate},
      {"autoencoder.epochs", e.autoencoder.epochs},
      {"autoencoder.fine_tune_epochs", e.autoencoder.fine_tune_epochs},
      {"autoencoder.minibatch", e.autoencoder.minibatch},
      {"autoencoder.hidden", e.autoencoder.hidden},
      {"autoencoder.min_width", e.autoencoder.min_width},
      {"archive.shape", e.archive_shape},
      {"archive.bounds_margin", e.bounds_margin},
      {"validation.size", e.validation_size},
      {"maze.layout", c.maze_layout},
      {"service.enabled", c.service_enabled},
      {"service.port", c.service_port},
      {"out", c.out},
  };
}

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Resolves a flat-key document into a config. Missing keys take defaults
/// derived from "task"; unknown keys are an error.
inline ExperimentConfig resolve_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidArgument("config must be a JSON object");
  const ExperimentConfig reference;
  const nlohmann::json known = to_json(reference);
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw InvalidArgument("unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  detail::take(doc, "task", c.task);
  if (c.task != "arm" && c.task != "maze") throw InvalidArgument("task must be 'arm' or 'maze'");
  nlohmann::json merged = task_defaults(c.task);
  merged.update(doc);

  std::string strategy = to_string(c.strategy);
  detail::take(merged, "strategy", strategy);
  c.strategy = parse_strategy(strategy);
  detail::take(merged, "seed", c.seed);
  detail::take(merged, "judge", c.judge);
  detail::take(merged, "judge.timeout_ms", c.judge_timeout_ms);
  EngineConfig& e = c.engine;
  detail::take(merged, "schedule.total_iterations", e.schedule.total_iterations);
  detail::take(merged, "schedule.update_iterations", e.schedule.update_iterations);
  detail::take(merged, "schedule.batch_size", e.schedule.batch_size);
  detail::take(merged, "schedule.mutation_sigma", e.schedule.mutation_sigma);
  detail::take(merged, "budget.total", e.budget_total);
  detail::take(merged, "train.margin", e.train.margin);
  detail::take(merged, "train.learning_rate", e.train.learning_rate);
  detail::take(merged, "train.epochs", e.train.epochs);
  detail::take(merged, "train.fine_tune_epochs", e.train.fine_tune_epochs);
  detail::take(merged, "train.minibatch", e.train.minibatch);
  detail::take(merged, "autoencoder.learning_rate", e.autoencoder.learning_rate);
  detail::take(merged, "autoencoder.epochs", e.autoencoder.epochs);
  detail::take(merged, "autoencoder.fine_tune_epochs", e.autoencoder.fine_tune_epochs);
  detail::take(merged, "autoencoder.minibatch", e.autoencoder.minibatch);
  detail::take(merged, "autoencoder.hidden", e.autoencoder.hidden);
  detail::take(merged, "autoencoder.min_width", e.autoencoder.min_width);
  detail::take(merged, "archive.shape", e.archive_shape);
  detail::take(merged, "archive.bounds_margin", e.bounds_margin);
  detail::take(merged, "validation.size", e.validation_size);
  detail::take(merged, "maze.layout", c.maze_layout);
  detail::take(merged, "service.enabled", c.service_enabled);
  detail::take(merged, "service.port", c.service_port);
  detail::take(merged, "out", c.out);
  e.latent_dim = static_cast<Eigen::Index>(e.archive_shape.size());
  c.validate();
  return c;
}

/// QDHF_SEED, when set, replaces the configured seed.
inline void apply_seed_env(nlohmann::json& doc) {
  if (const char* s = std::getenv("QDHF_SEED"); s && *s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (*end != '\0') throw InvalidArgument("QDHF_SEED must be a non-negative integer");
    doc["seed"] = static_cast<std::uint64_t>(v);
  }
}

}  // namespace qdhf
