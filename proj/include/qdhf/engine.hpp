#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qdhf/archive.hpp"
#include "qdhf/feedback.hpp"
#include "qdhf/latent/autoencoder.hpp"
#include "qdhf/latent/model.hpp"
#include "qdhf/latent/pca.hpp"
#include "qdhf/latent/triplet.hpp"
#include "qdhf/metrics.hpp"
#include "qdhf/tasks/task.hpp"

namespace qdhf {

enum class Strategy {
  GroundTruth,
  QdhfOffline,
  QdhfOnline,
  AuroraPcaPretrained,
  AuroraPcaIncremental,
  AuroraAePretrained,
  AuroraAeIncremental,
};

inline constexpr Strategy kAllStrategies[] = {
    Strategy::AuroraAePretrained,  Strategy::AuroraAeIncremental, Strategy::AuroraPcaPretrained,
    Strategy::AuroraPcaIncremental, Strategy::QdhfOffline,        Strategy::QdhfOnline,
    Strategy::GroundTruth,
};

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::GroundTruth: return "ground-truth";
    case Strategy::QdhfOffline: return "qdhf-offline";
    case Strategy::QdhfOnline: return "qdhf-online";
    case Strategy::AuroraPcaPretrained: return "aurora-pca-pretrained";
    case Strategy::AuroraPcaIncremental: return "aurora-pca-incremental";
    case Strategy::AuroraAePretrained: return "aurora-ae-pretrained";
    case Strategy::AuroraAeIncremental: return "aurora-ae-incremental";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  if (name == "gt") return Strategy::GroundTruth;
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown strategy '" + name + "'");
}

inline bool uses_judgments(Strategy s) {
  return s == Strategy::QdhfOffline || s == Strategy::QdhfOnline;
}

/// Strategies that refit their measures at every scheduled update.
inline bool refits_online(Strategy s) {
  return s == Strategy::QdhfOnline || s == Strategy::AuroraPcaIncremental ||
         s == Strategy::AuroraAeIncremental;
}

struct Schedule {
  int total_iterations = 1000;
  std::vector<int> update_iterations{0, 100, 250, 500};
  int batch_size = 100;
  double mutation_sigma = 0.1;

  void validate() const {
    if (total_iterations < 0) throw InvalidArgument("schedule: total_iterations must be >= 0");
    if (batch_size <= 0) throw InvalidArgument("schedule: batch_size must be positive");
    if (!(mutation_sigma >= 0.0)) throw InvalidArgument("schedule: mutation_sigma must be >= 0");
    if (update_iterations.empty()) throw InvalidArgument("schedule: need at least one update");
    for (std::size_t i = 0; i < update_iterations.size(); ++i) {
      if (update_iterations[i] < 0) throw InvalidArgument("schedule: negative update iteration");
      if (i > 0 && update_iterations[i] <= update_iterations[i - 1]) {
        throw InvalidArgument("schedule: update iterations must be strictly increasing");
      }
      if (total_iterations > 0 && update_iterations[i] >= total_iterations) {
        throw InvalidArgument("schedule: update iteration beyond total_iterations");
      }
    }
    if (update_iterations.front() != 0) throw InvalidArgument("schedule: first update must be 0");
  }

  [[nodiscard]] bool is_update(int it) const {
    return std::binary_search(update_iterations.begin(), update_iterations.end(), it);
  }

  bool operator==(const Schedule&) const = default;
};

struct EngineConfig {
  Schedule schedule;
  int budget_total = 1000;
  TrainConfig train;
  AutoEncoderConfig autoencoder;
  std::vector<int> archive_shape{50, 50};
  Eigen::Index latent_dim = 2;
  int validation_size = 200;
  double bounds_margin = 0.05;

  void validate() const {
    schedule.validate();
    train.validate();
    autoencoder.validate();
    if (budget_total < 0) throw InvalidArgument("budget must be >= 0");
    if (archive_shape.empty()) throw InvalidArgument("archive shape must be nonempty");
    for (int s : archive_shape) {
      if (s <= 0) throw InvalidArgument("archive shape entries must be positive");
    }
    if (latent_dim != static_cast<Eigen::Index>(archive_shape.size())) {
      throw InvalidArgument("latent_dim must equal the archive dimensionality");
    }
    if (validation_size < 0) throw InvalidArgument("validation_size must be >= 0");
    if (!(bounds_margin >= 0.0)) throw InvalidArgument("bounds_margin must be >= 0");
  }

  bool operator==(const EngineConfig&) const = default;
};

/// Uniform elite + N(0, sigma^2) per coordinate, clipped to the domain.
/// An empty archive yields uniform samples from the domain instead.
inline std::vector<Genome> emit_batch(const Archive& archive, Rng& rng, const Schedule& schedule,
                                      const std::vector<Interval>& domain) {
  std::vector<Genome> out;
  out.reserve(static_cast<std::size_t>(schedule.batch_size));
  const auto dim = static_cast<Eigen::Index>(domain.size());
  if (archive.empty()) {
    for (int i = 0; i < schedule.batch_size; ++i) {
      Genome g{Vec(dim)};
      for (Eigen::Index c = 0; c < dim; ++c) {
        const auto& d = domain[static_cast<std::size_t>(c)];
        g[c] = std::uniform_real_distribution<double>(d.low, d.high)(rng);
      }
      out.push_back(std::move(g));
    }
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, archive.filled() - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < schedule.batch_size; ++i) {
    Genome g = archive.elite(pick(rng)).genome;
    for (Eigen::Index c = 0; c < dim; ++c) g[c] += schedule.mutation_sigma * noise(rng);
    out.push_back(clip_to_domain(std::move(g), domain));
  }
  return out;
}

/// Re-measures every elite of `old` through `model` and inserts it into a
/// fresh latent archive with `new_bounds`.
inline Archive rebuild_archive(const Archive& old, const LatentModel& model,
                               const MeasureBounds& new_bounds) {
  Archive fresh(old.shape(), new_bounds, MeasureSpace::Latent);
  old.for_each_elite([&](const Individual& e) {
    Individual copy = e;
    copy.latent_measures = project(model, e.features);
    fresh.insert(std::move(copy));
  });
  return fresh;
}

/// [min, max] of the latent measures, widened by `margin` of the range on
/// each side.
inline MeasureBounds latent_bounds(const std::vector<Vec>& latents, Eigen::Index k,
                                   double margin) {
  std::vector<Interval> dims(static_cast<std::size_t>(k),
                             Interval{std::numeric_limits<double>::infinity(),
                                      -std::numeric_limits<double>::infinity()});
  for (const Vec& z : latents) {
    for (Eigen::Index i = 0; i < k; ++i) {
      auto& d = dims[static_cast<std::size_t>(i)];
      d.low = std::min(d.low, z[i]);
      d.high = std::max(d.high, z[i]);
    }
  }
  for (auto& d : dims) {
    if (!(d.low <= d.high)) d = {-1.0, 1.0};
    const double range = std::max(d.high - d.low, 1e-9);
    d.low -= margin * range;
    d.high += margin * range;
  }
  return MeasureBounds(std::move(dims));
}

struct RunResult {
  Strategy strategy = Strategy::GroundTruth;
  Archive archive;  // final working archive
  EvalArchives eval;
  std::vector<MetricsRow> metrics;
  std::optional<LatentModel> model;
  std::vector<Judgment> judgments;
  Budget budget;
};

/// State handed to checkpoint observers after every metric update.
struct UpdateSnapshot {
  int iteration = 0;
  const Archive* archive = nullptr;
  const LatentModel* model = nullptr;
  const Budget* budget = nullptr;
  const std::vector<Judgment>* judgments = nullptr;
};

struct RunHooks {
  std::function<void(const MetricsRow&, const Budget&)> on_iteration;
  std::function<void(const UpdateSnapshot&)> on_update;
  std::function<void(int iteration)> on_feedback_wait;
};

namespace detail {

inline Mat stack_features(const std::vector<const Individual*>& pop) {
  Mat m(static_cast<Eigen::Index>(pop.size()), pop.front()->features.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = pop[i]->features.transpose();
  }
  return m;
}

}  // namespace detail

/// MAP-Elites with scheduled diversity-metric updates. All randomness flows
/// from `rng`; the validation-set draws use a child stream seeded from it.
template <Task T>
RunResult run_qd(const T& task, Strategy strategy, Judge& judge, const EngineConfig& cfg,
                 Rng& rng, const RunHooks& hooks = {}) {
  cfg.validate();
  const Schedule& sched = cfg.schedule;
  const auto domain = task.genome_domain();
  const MeasureBounds gt_bounds = task.gt_bounds();
  const Eigen::Index k = cfg.latent_dim;
  const bool learned = strategy != Strategy::GroundTruth;

  Rng val_rng(rng());

  RunResult result;
  result.strategy = strategy;
  const int num_updates = refits_online(strategy) ? static_cast<int>(sched.update_iterations.size()) : 1;
  result.budget = Budget(uses_judgments(strategy) ? cfg.budget_total : 0, num_updates);
  result.eval.all_solutions = Archive(cfg.archive_shape, gt_bounds, MeasureSpace::GroundTruth);
  Archive working = learned ? Archive(cfg.archive_shape, MeasureBounds::uniform(cfg.archive_shape.size(), -1.0, 1.0),
                                      MeasureSpace::Latent)
                            : Archive(cfg.archive_shape, gt_bounds, MeasureSpace::GroundTruth);

  std::optional<LatentModel> model;
  std::optional<double> val_acc;
  FeatureStore judged_features;
  IndividualId next_id = 1;

  for (int it = 0; it < sched.total_iterations; ++it) {
    std::vector<Individual> batch;
    batch.reserve(static_cast<std::size_t>(sched.batch_size));
    for (auto& g : emit_batch(working, rng, sched, domain)) {
      Evaluation ev = task.evaluate(g);
      Individual ind{next_id++, std::move(g), ev.objective, std::move(ev.features),
                     std::move(ev.gt_measures), std::nullopt};
      result.eval.all_solutions.insert(Individual{ind.id, ind.genome, ind.objective, Vec(),
                                                  ind.gt_measures, std::nullopt});
      batch.push_back(std::move(ind));
    }

    const bool update =
        learned && (it == 0 || (refits_online(strategy) && sched.is_update(it)));
    if (update) {
      std::vector<const Individual*> pop;
      pop.reserve(working.filled() + batch.size());
      working.for_each_elite([&](const Individual& e) { pop.push_back(&e); });
      for (const auto& b : batch) pop.push_back(&b);

      std::vector<IndividualId> ids;
      FeatureStore pop_features;
      FeatureStore pop_gt;
      std::unordered_map<IndividualId, const Individual*> by_id;
      for (const Individual* p : pop) {
        ids.push_back(p->id);
        pop_features.emplace(p->id, p->features);
        pop_gt.emplace(p->id, p->gt_measures);
        by_id.emplace(p->id, p);
      }

      switch (strategy) {
        case Strategy::QdhfOffline:
        case Strategy::QdhfOnline: {
          const int wanted = strategy == Strategy::QdhfOffline ? result.budget.total()
                                                               : result.budget.per_update();
          TripletSource source;
          source.next = [&] { return sample_triplet(ids, rng); };
          source.render = [&](const Triplet& t) {
            return nlohmann::json{{"ref", task.render(by_id.at(t.ref)->genome)},
                                  {"a", task.render(by_id.at(t.a)->genome)},
                                  {"b", task.render(by_id.at(t.b)->genome)}};
          };
          source.gt_measures = &pop_gt;
          if (hooks.on_feedback_wait && judge.kind() == JudgeSource::Human) hooks.on_feedback_wait(it);
          std::vector<Judgment> fresh = wanted > 0 ? judge.collect(wanted, source)
                                                   : std::vector<Judgment>{};
          result.budget.charge(static_cast<int>(fresh.size()));
          for (const auto& j : fresh) {
            for (IndividualId id : {j.triplet.ref, j.triplet.a, j.triplet.b}) {
              judged_features.emplace(id, pop_features.at(id));
            }
          }
          result.judgments.insert(result.judgments.end(), fresh.begin(), fresh.end());

          std::optional<LinearProjection> init;
          TrainConfig tc = cfg.train;
          if (model) {
            init = std::get<LinearProjection>(*model);
            tc.epochs = cfg.train.fine_tune_epochs;
          }
          if (result.judgments.empty()) {
            model = init ? LatentModel(*init) : LatentModel(random_projection(static_cast<Eigen::Index>(task.feature_dim()), k, rng));
          } else {
            model = train_projection(judged_features, result.judgments, tc, init, rng, k);
          }

          if (judge.kind() == JudgeSource::Oracle && cfg.validation_size > 0) {
            std::vector<Judgment> val;
            int attempts = 0;
            while (static_cast<int>(val.size()) < cfg.validation_size) {
              if (++attempts > 1000 * cfg.validation_size) break;
              const Triplet t = sample_triplet(ids, val_rng);
              const bool in_train = std::any_of(fresh.begin(), fresh.end(),
                                                [&](const Judgment& j) { return j.triplet == t; });
              if (in_train) continue;
              if (auto j = oracle_judge(t, pop_gt)) val.push_back(*j);
            }
            if (!val.empty()) val_acc = validate_accuracy(*model, pop_features, val);
          }
          break;
        }
        case Strategy::AuroraPcaPretrained:
        case Strategy::AuroraPcaIncremental:
          model = fit_pca(detail::stack_features(pop), k);
          break;
        case Strategy::AuroraAePretrained:
        case Strategy::AuroraAeIncremental: {
          AutoEncoderConfig ac = cfg.autoencoder;
          ac.latent = k;
          const Mat data = detail::stack_features(pop);
          if (model) {
            model = train_autoencoder(std::get<AutoEncoder>(*model), data, ac.fine_tune_epochs, ac, rng);
          } else {
            model = fit_autoencoder(data, rng, ac);
          }
          break;
        }
        case Strategy::GroundTruth: break;
      }

      std::vector<Vec> latents;
      latents.reserve(pop.size());
      for (const Individual* p : pop) latents.push_back(project(*model, p->features));
      const MeasureBounds bounds = latent_bounds(latents, k, cfg.bounds_margin);
      Archive next = rebuild_archive(working, *model, bounds);
      for (auto& b : batch) {
        b.latent_measures = project(*model, b.features);
        next.insert(std::move(b));
      }
      working = std::move(next);

      if (hooks.on_update) {
        hooks.on_update(UpdateSnapshot{it, &working, &*model, &result.budget, &result.judgments});
      }
    } else {
      for (auto& b : batch) {
        if (learned) b.latent_measures = project(*model, b.features);
        working.insert(std::move(b));
      }
    }

    MetricsRow row;
    row.iteration = it;
    const ArchiveMetrics view = ground_truth_view_metrics(working, gt_bounds, cfg.archive_shape);
    row.qd_score_archive = view.qd_score;
    row.coverage_archive = view.coverage;
    row.qd_score_all = qd_score(result.eval.all_solutions);
    row.coverage_all = coverage(result.eval.all_solutions);
    row.judgments_used = result.budget.used();
    row.val_acc = val_acc;
    result.metrics.push_back(row);
    if (hooks.on_iteration) hooks.on_iteration(row, result.budget);
  }

  result.eval.final_archive_view = ground_truth_view(working, gt_bounds, cfg.archive_shape);
  result.archive = std::move(working);
  result.model = std::move(model);
  return result;
}

}  // namespace qdhf
