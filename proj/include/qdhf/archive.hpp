#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "qdhf/types.hpp"

namespace qdhf {

using CellIndex = std::vector<int>;

/// Uniform lower-inclusive bins over [low, high); out-of-range values clamp
/// to the boundary bin.
inline CellIndex cell_index(const Vec& measures, const MeasureBounds& bounds,
                            const std::vector<int>& shape) {
  const auto k = static_cast<std::size_t>(measures.size());
  if (bounds.size() != k || shape.size() != k) {
    throw InvalidArgument("cell_index: measures, bounds and shape must share length");
  }
  CellIndex idx(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double m = measures[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(m)) throw InvalidArgument("cell_index: non-finite measure");
    const double low = bounds[i].low;
    const double width = (bounds[i].high - low) / shape[i];
    const double b = std::floor((m - low) / width);
    idx[i] = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(shape[i] - 1)));
  }
  return idx;
}

enum class InsertionOutcome { NewCell, Improved, Rejected };

/// Which measures of an Individual position it in an archive.
enum class MeasureSpace { GroundTruth, Latent };

/// Grid archive holding at most one elite per cell.
class Archive {
 public:
  Archive() = default;
  Archive(std::vector<int> shape, MeasureBounds bounds, MeasureSpace space)
      : shape_(std::move(shape)), bounds_(std::move(bounds)), space_(space) {
    if (shape_.size() != bounds_.size() || shape_.empty()) {
      throw InvalidArgument("Archive: shape and bounds must have equal nonzero length");
    }
    std::size_t n = 1;
    for (int s : shape_) {
      if (s <= 0) throw InvalidArgument("Archive: shape entries must be positive");
      n *= static_cast<std::size_t>(s);
    }
    cells_.resize(n);
  }

  [[nodiscard]] const std::vector<int>& shape() const { return shape_; }
  [[nodiscard]] const MeasureBounds& bounds() const { return bounds_; }
  [[nodiscard]] MeasureSpace space() const { return space_; }
  [[nodiscard]] std::size_t dims() const { return shape_.size(); }
  [[nodiscard]] std::size_t total_cells() const { return cells_.size(); }
  [[nodiscard]] std::size_t filled() const { return filled_.size(); }
  [[nodiscard]] bool empty() const { return filled_.empty(); }
  [[nodiscard]] double objective_sum() const { return objective_sum_; }

  [[nodiscard]] const Vec& measures_of(const Individual& ind) const {
    if (space_ == MeasureSpace::GroundTruth) return ind.gt_measures;
    if (!ind.latent_measures) {
      throw InvalidArgument("Archive: individual has no latent measures");
    }
    return *ind.latent_measures;
  }

  [[nodiscard]] std::size_t flat(const CellIndex& idx) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      f = f * static_cast<std::size_t>(shape_[i]) + static_cast<std::size_t>(idx[i]);
    }
    return f;
  }

  [[nodiscard]] CellIndex unflat(std::size_t f) const {
    CellIndex idx(shape_.size());
    for (std::size_t i = shape_.size(); i-- > 0;) {
      idx[i] = static_cast<int>(f % static_cast<std::size_t>(shape_[i]));
      f /= static_cast<std::size_t>(shape_[i]);
    }
    return idx;
  }

  [[nodiscard]] CellIndex index_of(const Individual& ind) const {
    return cell_index(measures_of(ind), bounds_, shape_);
  }

  InsertionOutcome insert(Individual ind) {
    const Vec& m = measures_of(ind);
    if (static_cast<std::size_t>(m.size()) != dims()) {
      throw InvalidArgument("Archive::insert: measure dimensionality mismatch");
    }
    const std::size_t f = flat(cell_index(m, bounds_, shape_));
    auto& cell = cells_[f];
    if (!cell) {
      objective_sum_ += ind.objective;
      cell = std::move(ind);
      filled_.push_back(f);
      return InsertionOutcome::NewCell;
    }
    if (ind.objective > cell->objective) {
      objective_sum_ += ind.objective - cell->objective;
      cell = std::move(ind);
      return InsertionOutcome::Improved;
    }
    return InsertionOutcome::Rejected;
  }

  [[nodiscard]] const std::optional<Individual>& at(const CellIndex& idx) const {
    return cells_.at(flat(idx));
  }

  /// Flat indices of filled cells in first-fill order.
  [[nodiscard]] const std::vector<std::size_t>& filled_cells() const { return filled_; }

  [[nodiscard]] const Individual& elite(std::size_t i) const { return *cells_[filled_[i]]; }

  template <typename Fn>
  void for_each_elite(Fn&& fn) const {
    for (std::size_t f : filled_) fn(*cells_[f]);
  }

  [[nodiscard]] std::vector<Individual> elites() const {
    std::vector<Individual> out;
    out.reserve(filled_.size());
    for_each_elite([&](const Individual& e) { out.push_back(e); });
    return out;
  }

 private:
  std::vector<int> shape_;
  MeasureBounds bounds_;
  MeasureSpace space_ = MeasureSpace::GroundTruth;
  std::vector<std::optional<Individual>> cells_;
  std::vector<std::size_t> filled_;
  double objective_sum_ = 0.0;
};

}  // namespace qdhf
