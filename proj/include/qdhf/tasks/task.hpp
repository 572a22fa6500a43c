#pragma once

#include <algorithm>
#include <concepts>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/types.hpp"

namespace qdhf {

/// Contract every benchmark task satisfies. Evaluation must be a pure
/// function of the genome.
template <typename T>
concept Task = requires(const T& t, const Genome& g) {
  { t.name() } -> std::convertible_to<std::string>;
  { t.genome_dim() } -> std::convertible_to<std::size_t>;
  { t.feature_dim() } -> std::convertible_to<std::size_t>;
  { t.genome_domain() } -> std::same_as<std::vector<Interval>>;
  { t.gt_bounds() } -> std::same_as<MeasureBounds>;
  { t.evaluate(g) } -> std::same_as<Evaluation>;
  { t.render(g) } -> std::same_as<nlohmann::json>;
};

inline Genome clip_to_domain(Genome g, const std::vector<Interval>& domain) {
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const auto& d = domain[static_cast<std::size_t>(i)];
    g[i] = std::clamp(g[i], d.low, d.high);
  }
  return g;
}

}  // namespace qdhf
