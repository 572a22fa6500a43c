#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/judgment.hpp"
#include "qdhf/latent/model.hpp"

namespace qdhf {

/// Raised when a run tries to charge more judgments than its budget allows.
class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by judges that cannot deliver (timeout, cancelled service, ...).
class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Budget {
 public:
  Budget() = default;
  Budget(int total, int num_updates) : total_(total) {
    if (total < 0) throw InvalidArgument("budget: total must be >= 0");
    if (num_updates <= 0) throw InvalidArgument("budget: need at least one update");
    per_update_ = total / num_updates;
  }

  [[nodiscard]] int total() const { return total_; }
  [[nodiscard]] int used() const { return used_; }
  [[nodiscard]] int remaining() const { return total_ - used_; }
  [[nodiscard]] int per_update() const { return per_update_; }

  void charge(int n) {
    if (n < 0 || used_ + n > total_) {
      throw BudgetExhausted("feedback budget exhausted: " + std::to_string(used_) + " + " +
                            std::to_string(n) + " > " + std::to_string(total_));
    }
    used_ += n;
  }

 private:
  int total_ = 0;
  int used_ = 0;
  int per_update_ = 0;
};

/// Draws a triplet of three distinct ids uniformly from `population`.
inline Triplet sample_triplet(std::span<const IndividualId> population, Rng& rng) {
  if (population.size() < 3) throw InvalidArgument("sample_triplets: population needs >= 3 ids");
  std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
  std::size_t i = pick(rng);
  std::size_t j = pick(rng);
  while (j == i) j = pick(rng);
  std::size_t k = pick(rng);
  while (k == i || k == j) k = pick(rng);
  return {population[i], population[j], population[k]};
}

/// n independent triplets; ids may repeat across triplets.
inline std::vector<Triplet> sample_triplets(std::span<const IndividualId> population, int n,
                                            Rng& rng) {
  if (population.size() < 3) throw InvalidArgument("sample_triplets: population needs >= 3 ids");
  std::vector<Triplet> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) out.push_back(sample_triplet(population, rng));
  return out;
}

inline constexpr double kOracleTieTolerance = 1e-9;

/// Simulated 2AFC answer from ground-truth measures. Returns nullopt
/// (resample) when both candidates are equally far from the reference.
inline std::optional<Judgment> oracle_judge(const Triplet& t, const FeatureStore& gt_measures) {
  const Vec& r = lookup(gt_measures, t.ref);
  const double da = (r - lookup(gt_measures, t.a)).norm();
  const double db = (r - lookup(gt_measures, t.b)).norm();
  if (std::abs(da - db) <= kOracleTieTolerance) return std::nullopt;
  return Judgment{t, da < db ? Choice::ACloser : Choice::BCloser, JudgeSource::Oracle};
}

/// Fraction of judgments whose recorded choice matches the candidate nearer
/// to the reference in latent space.
inline double validate_accuracy(const LatentModel& model, const FeatureStore& features,
                                std::span<const Judgment> judgments) {
  if (judgments.empty()) throw InvalidArgument("validate_accuracy: empty validation set");
  std::size_t correct = 0;
  for (const auto& j : judgments) {
    const Vec zr = project(model, lookup(features, j.triplet.ref));
    const double da = (zr - project(model, lookup(features, j.triplet.a))).norm();
    const double db = (zr - project(model, lookup(features, j.triplet.b))).norm();
    const Choice predicted = da < db ? Choice::ACloser : Choice::BCloser;
    if (predicted == j.choice) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(judgments.size());
}

/// Supplies triplets to a judge. `next` draws from the optimizer's PRNG and
/// must only be called on the optimizer thread.
struct TripletSource {
  std::function<Triplet()> next;
  std::function<nlohmann::json(const Triplet&)> render;
  const FeatureStore* gt_measures = nullptr;
};

/// Answers batches of 2AFC queries. Implementations return exactly `n`
/// judgments ordered by draw order; uninformative triplets are replaced by
/// fresh draws from the source, and replacements are drawn in the order the
/// originals were rejected.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::vector<Judgment> collect(int n, const TripletSource& source) = 0;
  [[nodiscard]] virtual JudgeSource kind() const = 0;
};

class OracleJudge final : public Judge {
 public:
  explicit OracleJudge(int max_rounds = 1000) : max_rounds_(max_rounds) {}

  std::vector<Judgment> collect(int n, const TripletSource& source) override {
    if (source.gt_measures == nullptr) throw JudgeError("oracle judge needs ground-truth measures");
    std::vector<Judgment> out;
    out.reserve(static_cast<std::size_t>(std::max(n, 0)));
    std::vector<Triplet> pending;
    for (int i = 0; i < n; ++i) pending.push_back(source.next());
    for (int round = 0; !pending.empty(); ++round) {
      if (round >= max_rounds_) throw JudgeError("oracle judge: too many uninformative triplets");
      int rejected = 0;
      for (const auto& t : pending) {
        if (auto j = oracle_judge(t, *source.gt_measures)) {
          out.push_back(*j);
        } else {
          ++rejected;
        }
      }
      pending.clear();
      for (int i = 0; i < rejected; ++i) pending.push_back(source.next());
    }
    return out;
  }

  [[nodiscard]] JudgeSource kind() const override { return JudgeSource::Oracle; }

 private:
  int max_rounds_;
};

}  // namespace qdhf
