#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "qdhf/latent/model.hpp"

namespace qdhf {

struct AutoEncoderConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  int fine_tune_epochs = 50;
  int minibatch = 32;
  Eigen::Index hidden = 32;
  Eigen::Index latent = 2;
  Eigen::Index min_width = 64;  // inputs narrower than this are zero-padded

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("autoencoder: learning_rate must be positive");
    if (epochs < 0 || fine_tune_epochs < 0) throw InvalidArgument("autoencoder: epochs must be >= 0");
    if (minibatch <= 0 || hidden <= 0 || latent <= 0) {
      throw InvalidArgument("autoencoder: sizes must be positive");
    }
  }

  bool operator==(const AutoEncoderConfig&) const = default;
};

namespace detail {

inline Dense init_dense(Eigen::Index out, Eigen::Index in, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / static_cast<double>(in)));
  Dense d{Mat(out, in), Vec::Zero(out)};
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) d.w(r, c) = normal(rng);
  }
  return d;
}

}  // namespace detail

/// Fresh auto-encoder with N(0, 1/fan_in) weights and zero biases.
inline AutoEncoder init_autoencoder(Eigen::Index input_dim, const AutoEncoderConfig& cfg,
                                    Rng& rng) {
  AutoEncoder ae;
  ae.in_dim = input_dim;
  const Eigen::Index p = std::max(input_dim, cfg.min_width);
  ae.enc_hidden = detail::init_dense(cfg.hidden, p, rng);
  ae.enc_out = detail::init_dense(cfg.latent, cfg.hidden, rng);
  ae.dec_hidden = detail::init_dense(cfg.hidden, cfg.latent, rng);
  ae.dec_out = detail::init_dense(p, cfg.hidden, rng);
  return ae;
}

/// Mean squared reconstruction error (averaged over samples and padded
/// output coordinates) of the columns of `x` (d x n), plus its gradient
/// stored in an AutoEncoder-shaped container.
struct AutoEncoderGradient {
  double loss = 0.0;
  AutoEncoder grad;
};

inline AutoEncoderGradient autoencoder_gradient(const AutoEncoder& ae, const Mat& x) {
  const Mat in = ae.pad(x);
  const auto n = static_cast<double>(in.cols());
  const auto p = static_cast<double>(in.rows());

  const Mat h1 = ((ae.enc_hidden.w * in).colwise() + ae.enc_hidden.b).array().tanh().matrix();
  const Mat z = (ae.enc_out.w * h1).colwise() + ae.enc_out.b;
  const Mat h3 = ((ae.dec_hidden.w * z).colwise() + ae.dec_hidden.b).array().tanh().matrix();
  const Mat y = (ae.dec_out.w * h3).colwise() + ae.dec_out.b;

  const Mat err = y - in;
  AutoEncoderGradient out;
  out.loss = err.squaredNorm() / (n * p);

  const Mat dy = (2.0 / (n * p)) * err;
  auto& g = out.grad;
  g.in_dim = ae.in_dim;
  g.dec_out.w = dy * h3.transpose();
  g.dec_out.b = dy.rowwise().sum();
  const Mat da3 = ((ae.dec_out.w.transpose() * dy).array() * (1.0 - h3.array().square())).matrix();
  g.dec_hidden.w = da3 * z.transpose();
  g.dec_hidden.b = da3.rowwise().sum();
  const Mat dz = ae.dec_hidden.w.transpose() * da3;
  g.enc_out.w = dz * h1.transpose();
  g.enc_out.b = dz.rowwise().sum();
  const Mat da1 = ((ae.enc_out.w.transpose() * dz).array() * (1.0 - h1.array().square())).matrix();
  g.enc_hidden.w = da1 * in.transpose();
  g.enc_hidden.b = da1.rowwise().sum();
  return out;
}

inline double autoencoder_loss(const AutoEncoder& ae, const Mat& x) {
  const Mat in = ae.pad(x);
  return (ae.decode(ae.encode(x)) - in).squaredNorm() /
         (static_cast<double>(in.cols()) * static_cast<double>(in.rows()));
}

/// Minibatch gradient descent on reconstruction error for `epochs` epochs.
/// `data` is N x d (one sample per row).
inline AutoEncoder train_autoencoder(AutoEncoder ae, const Mat& data, int epochs,
                                     const AutoEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.rows() == 0) throw InvalidArgument("autoencoder: empty data");
  if (data.cols() != ae.input_dim()) throw InvalidArgument("autoencoder: input dimension mismatch");
  const Mat cols = data.transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(cols.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  const double lr = cfg.learning_rate;
  Mat batch;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t len = std::min(mb, order.size() - start);
      batch.resize(cols.rows(), static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        batch.col(static_cast<Eigen::Index>(i)) = cols.col(order[start + i]);
      }
      const auto g = autoencoder_gradient(ae, batch);
      ae.enc_hidden.w -= lr * g.grad.enc_hidden.w;
      ae.enc_hidden.b -= lr * g.grad.enc_hidden.b;
      ae.enc_out.w -= lr * g.grad.enc_out.w;
      ae.enc_out.b -= lr * g.grad.enc_out.b;
      ae.dec_hidden.w -= lr * g.grad.dec_hidden.w;
      ae.dec_hidden.b -= lr * g.grad.dec_hidden.b;
      ae.dec_out.w -= lr * g.grad.dec_out.w;
      ae.dec_out.b -= lr * g.grad.dec_out.b;
    }
  }
  return ae;
}

inline AutoEncoder fit_autoencoder(const Mat& data, Rng& rng, const AutoEncoderConfig& cfg = {}) {
  cfg.validate();
  if (data.rows() == 0) throw InvalidArgument("autoencoder: empty data");
  AutoEncoder ae = init_autoencoder(data.cols(), cfg, rng);
  return train_autoencoder(std::move(ae), data, cfg.epochs, cfg, rng);
}

}  // namespace qdhf
