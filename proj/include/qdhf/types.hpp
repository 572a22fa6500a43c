#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace qdhf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

using IndividualId = std::uint64_t;

/// Thrown on violated preconditions (dimension mismatch, bad config, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A search-space point. Length is fixed by the task.
struct Genome {
  Vec values;

  Genome() = default;
  explicit Genome(Vec v) : values(std::move(v)) {}

  [[nodiscard]] Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  double& operator[](Eigen::Index i) { return values[i]; }
  bool operator==(const Genome& o) const {
    return values.size() == o.values.size() && values == o.values;
  }
};

/// Per-coordinate closed interval.
struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Result of evaluating one genome on a task.
struct Evaluation {
  double objective = 0.0;
  Vec features;
  Vec gt_measures;
};

struct Individual {
  IndividualId id = 0;
  Genome genome;
  double objective = 0.0;
  Vec features;
  Vec gt_measures;
  std::optional<Vec> latent_measures;
};

/// Per-dimension (low, high) pairs; low < high everywhere.
class MeasureBounds {
 public:
  MeasureBounds() = default;
  explicit MeasureBounds(std::vector<Interval> dims) : dims_(std::move(dims)) {
    for (const auto& d : dims_) {
      if (!(std::isfinite(d.low) && std::isfinite(d.high) && d.low < d.high)) {
        throw InvalidArgument("MeasureBounds: need finite low < high in every dimension");
      }
    }
  }

  static MeasureBounds uniform(std::size_t k, double low, double high) {
    return MeasureBounds(std::vector<Interval>(k, Interval{low, high}));
  }

  [[nodiscard]] std::size_t size() const { return dims_.size(); }
  [[nodiscard]] const Interval& operator[](std::size_t i) const { return dims_[i]; }
  [[nodiscard]] const std::vector<Interval>& dims() const { return dims_; }

  bool operator==(const MeasureBounds& o) const {
    if (dims_.size() != o.dims_.size()) return false;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i].low != o.dims_[i].low || dims_[i].high != o.dims_[i].high) return false;
    }
    return true;
  }

 private:
  std::vector<Interval> dims_;
};

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline Vec from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace qdhf
