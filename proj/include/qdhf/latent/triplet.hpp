#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qdhf/judgment.hpp"
#include "qdhf/latent/model.hpp"

namespace qdhf {

struct TrainConfig {
  double margin = 0.05;
  double learning_rate = 1e-2;
  int epochs = 100;
  int fine_tune_epochs = 50;
  int minibatch = 32;

  void validate() const {
    if (!(margin > 0.0)) throw InvalidArgument("train: margin must be positive");
    if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning_rate must be positive");
    if (epochs < 0 || fine_tune_epochs < 0) throw InvalidArgument("train: epochs must be >= 0");
    if (minibatch <= 0) throw InvalidArgument("train: minibatch must be positive");
  }

  bool operator==(const TrainConfig&) const = default;
};

/// max(0, m + |ref - preferred| - |ref - other|) with Euclidean distance.
inline double triplet_loss(const Vec& z_ref, const Vec& z_preferred, const Vec& z_other,
                           double margin) {
  if (z_ref.size() != z_preferred.size() || z_ref.size() != z_other.size()) {
    throw InvalidArgument("triplet_loss: embeddings must have equal length");
  }
  return std::max(0.0, margin + (z_ref - z_preferred).norm() - (z_ref - z_other).norm());
}

/// Feature differences of a judgment set, stored column-wise so training
/// only touches contiguous memory. The projection offset cancels in every
/// distance, which is why only differences are needed.
struct TripletBatch {
  Mat near;  // d x n: f(ref) - f(preferred)
  Mat far;   // d x n: f(ref) - f(other)

  [[nodiscard]] Eigen::Index size() const { return near.cols(); }
};

inline TripletBatch make_triplet_batch(const FeatureStore& features,
                                       std::span<const Judgment> judgments) {
  TripletBatch batch;
  if (judgments.empty()) return batch;
  const Eigen::Index d = lookup(features, judgments.front().triplet.ref).size();
  const auto n = static_cast<Eigen::Index>(judgments.size());
  batch.near.resize(d, n);
  batch.far.resize(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Judgment& j = judgments[static_cast<std::size_t>(i)];
    const Vec& r = lookup(features, j.triplet.ref);
    const Vec& p = lookup(features, j.preferred());
    const Vec& o = lookup(features, j.other());
    if (r.size() != d || p.size() != d || o.size() != d) {
      throw InvalidArgument("train_projection: inconsistent feature lengths");
    }
    batch.near.col(i) = r - p;
    batch.far.col(i) = r - o;
  }
  return batch;
}

struct ProjectionGradient {
  double loss = 0.0;  // mean triplet loss over the selected columns
  Mat d_weights;
  Vec d_offset;  // identically zero: the offset cancels in distances
};

/// Mean loss and its exact gradient w.r.t. the projection parameters over the
/// columns `cols` of `batch` (all columns when empty).
inline ProjectionGradient projection_gradient(const LinearProjection& model,
                                              const TripletBatch& batch, double margin,
                                              std::span<const Eigen::Index> cols = {}) {
  ProjectionGradient g;
  g.d_weights = Mat::Zero(model.weights.rows(), model.weights.cols());
  g.d_offset = Vec::Zero(model.offset.size());
  const Eigen::Index n = cols.empty() ? batch.size() : static_cast<Eigen::Index>(cols.size());
  if (n == 0) return g;
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index c = cols.empty() ? t : cols[static_cast<std::size_t>(t)];
    const auto near = batch.near.col(c);
    const auto far = batch.far.col(c);
    const Vec zn = model.weights * near;
    const Vec zf = model.weights * far;
    const double dn = zn.norm();
    const double df = zf.norm();
    const double l = margin + dn - df;
    if (l <= 0.0) continue;
    g.loss += l;
    if (dn > 0.0) g.d_weights.noalias() += (zn / dn) * near.transpose();
    if (df > 0.0) g.d_weights.noalias() -= (zf / df) * far.transpose();
  }
  g.loss /= static_cast<double>(n);
  g.d_weights /= static_cast<double>(n);
  return g;
}

inline double mean_triplet_loss(const LinearProjection& model, const TripletBatch& batch,
                                double margin) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < batch.size(); ++c) {
    const double dn = (model.weights * batch.near.col(c)).norm();
    const double df = (model.weights * batch.far.col(c)).norm();
    total += std::max(0.0, margin + dn - df);
  }
  return batch.size() == 0 ? 0.0 : total / static_cast<double>(batch.size());
}

inline LinearProjection random_projection(Eigen::Index input_dim, Eigen::Index latent_dim,
                                          Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / static_cast<double>(input_dim)));
  LinearProjection p{Mat(latent_dim, input_dim), Vec::Zero(input_dim)};
  for (Eigen::Index r = 0; r < latent_dim; ++r) {
    for (Eigen::Index c = 0; c < input_dim; ++c) p.weights(r, c) = normal(rng);
  }
  return p;
}

/// Minibatch gradient descent on the mean triplet loss. Starts from `init`
/// when given (fine-tuning), else from N(0, 1/d) weights and zero offset.
/// Runs `cfg.epochs` epochs; callers fine-tuning pass a config with the
/// shorter epoch count.
inline LinearProjection train_projection(const FeatureStore& features,
                                         std::span<const Judgment> judgments,
                                         const TrainConfig& cfg,
                                         std::optional<LinearProjection> init, Rng& rng,
                                         Eigen::Index latent_dim = 2) {
  cfg.validate();
  if (judgments.empty()) throw InvalidArgument("train_projection: no judgments");
  const TripletBatch batch = make_triplet_batch(features, judgments);
  LinearProjection model =
      init ? std::move(*init) : random_projection(batch.near.rows(), latent_dim, rng);
  if (model.weights.cols() != batch.near.rows()) {
    throw InvalidArgument("train_projection: init model input dimension mismatch");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(batch.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t len = std::min(mb, order.size() - start);
      const auto g = projection_gradient(model, batch, cfg.margin,
                                         std::span<const Eigen::Index>(order).subspan(start, len));
      model.weights -= cfg.learning_rate * g.d_weights;
      model.offset -= cfg.learning_rate * g.d_offset;
    }
  }
  return model;
}

}  // namespace qdhf
