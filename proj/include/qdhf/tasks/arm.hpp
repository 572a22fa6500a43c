#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/tasks/task.hpp"

namespace qdhf {

/// Planar redundant arm. The genome holds joint angles; the objective rewards
/// low spread of the angles and the ground-truth measure is the endpoint.
///
/// Features are sin/cos of the cumulative angles, so the endpoint is an
/// exact linear function of the feature vector.
class ArmTask {
 public:
  explicit ArmTask(int num_joints = 10) : link_lengths_(num_joints, 1.0 / num_joints) {
    if (num_joints <= 0) throw InvalidArgument("ArmTask: need at least one joint");
  }

  explicit ArmTask(std::vector<double> link_lengths) : link_lengths_(std::move(link_lengths)) {
    if (link_lengths_.empty()) throw InvalidArgument("ArmTask: need at least one joint");
    for (double l : link_lengths_) {
      if (!(l > 0.0)) throw InvalidArgument("ArmTask: link lengths must be positive");
    }
  }

  [[nodiscard]] std::string name() const { return "arm"; }
  [[nodiscard]] std::size_t genome_dim() const { return link_lengths_.size(); }
  [[nodiscard]] std::size_t feature_dim() const { return 2 * link_lengths_.size(); }
  [[nodiscard]] const std::vector<double>& link_lengths() const { return link_lengths_; }

  [[nodiscard]] std::vector<Interval> genome_domain() const {
    return std::vector<Interval>(genome_dim(), Interval{-std::numbers::pi, std::numbers::pi});
  }

  [[nodiscard]] MeasureBounds gt_bounds() const { return MeasureBounds::uniform(2, -1.0, 1.0); }

  [[nodiscard]] Evaluation evaluate(const Genome& genome) const {
    const auto n = static_cast<Eigen::Index>(genome_dim());
    if (genome.size() != n) throw InvalidArgument("ArmTask::evaluate: wrong genome length");
    const Genome g = clip_to_domain(genome, genome_domain());

    Evaluation ev;
    ev.features.resize(2 * n);
    ev.gt_measures = Vec::Zero(2);
    double cum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      cum += g[i];
      const double s = std::sin(cum);
      const double c = std::cos(cum);
      ev.features[i] = s;
      ev.features[n + i] = c;
      ev.gt_measures[0] += link_lengths_[static_cast<std::size_t>(i)] * c;
      ev.gt_measures[1] += link_lengths_[static_cast<std::size_t>(i)] * s;
    }

    const double mean = g.values.mean();
    const double var = (g.values.array() - mean).square().sum() / static_cast<double>(n);
    ev.objective = std::clamp(1.0 - var / (std::numbers::pi * std::numbers::pi), 0.0, 1.0);
    return ev;
  }

  /// Joint positions from the base (origin) to the endpoint.
  [[nodiscard]] std::vector<std::array<double, 2>> joint_positions(const Genome& genome) const {
    const Genome g = clip_to_domain(genome, genome_domain());
    std::vector<std::array<double, 2>> pts{{0.0, 0.0}};
    double cum = 0.0;
    double x = 0.0;
    double y = 0.0;
    for (std::size_t i = 0; i < link_lengths_.size(); ++i) {
      cum += g[static_cast<Eigen::Index>(i)];
      x += link_lengths_[i] * std::cos(cum);
      y += link_lengths_[i] * std::sin(cum);
      pts.push_back({x, y});
    }
    return pts;
  }

  [[nodiscard]] nlohmann::json render(const Genome& genome) const {
    return {{"kind", "arm"}, {"joints", joint_positions(genome)}};
  }

 private:
  std::vector<double> link_lengths_;
};

}  // namespace qdhf
