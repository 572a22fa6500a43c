#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "qdhf/types.hpp"

namespace qdhf {

/// z = W (f - offset)
struct LinearProjection {
  Mat weights;  // k x d
  Vec offset;   // d

  [[nodiscard]] Eigen::Index input_dim() const { return weights.cols(); }
  [[nodiscard]] Eigen::Index latent_dim() const { return weights.rows(); }
};

/// z = C (f - mean); rows of C are orthonormal principal directions in
/// descending eigenvalue order.
struct PcaProjection {
  Vec mean;         // d
  Mat components;   // k x d
  Vec eigenvalues;  // k, sample-covariance eigenvalues

  [[nodiscard]] Eigen::Index input_dim() const { return components.cols(); }
  [[nodiscard]] Eigen::Index latent_dim() const { return components.rows(); }
};

/// Dense layer y = W x + b.
struct Dense {
  Mat w;
  Vec b;
};

/// Auto-encoder with topology p-32-2-32-p, tanh hidden layers, linear
/// bottleneck and output. Inputs shorter than 64 are zero-padded to 64
/// (p = max(d, 64)).
struct AutoEncoder {
  Eigen::Index in_dim = 0;      // d
  Dense enc_hidden;             // 32 x p
  Dense enc_out;                // 2 x 32
  Dense dec_hidden;             // 32 x 2
  Dense dec_out;                // p x 32

  [[nodiscard]] Eigen::Index input_dim() const { return in_dim; }
  [[nodiscard]] Eigen::Index padded_dim() const { return enc_hidden.w.cols(); }
  [[nodiscard]] Eigen::Index latent_dim() const { return enc_out.w.rows(); }

  /// Column-wise zero padding of a d x n block to p x n.
  [[nodiscard]] Mat pad(const Mat& x) const {
    Mat out = Mat::Zero(padded_dim(), x.cols());
    out.topRows(x.rows()) = x;
    return out;
  }

  /// Bottleneck codes for a d x n block of inputs.
  [[nodiscard]] Mat encode(const Mat& x) const {
    const Mat h = ((enc_hidden.w * pad(x)).colwise() + enc_hidden.b).array().tanh().matrix();
    return (enc_out.w * h).colwise() + enc_out.b;
  }

  [[nodiscard]] Mat decode(const Mat& z) const {
    const Mat h = ((dec_hidden.w * z).colwise() + dec_hidden.b).array().tanh().matrix();
    return (dec_out.w * h).colwise() + dec_out.b;
  }
};

using LatentModel = std::variant<LinearProjection, PcaProjection, AutoEncoder>;

inline Eigen::Index input_dim(const LatentModel& m) {
  return std::visit([](const auto& v) -> Eigen::Index { return v.input_dim(); }, m);
}

inline Eigen::Index latent_dim(const LatentModel& m) {
  return std::visit([](const auto& v) -> Eigen::Index { return v.latent_dim(); }, m);
}

inline std::string variant_name(const LatentModel& m) {
  switch (m.index()) {
    case 0: return "linear";
    case 1: return "pca";
    default: return "autoencoder";
  }
}

inline Vec project(const LatentModel& model, const Vec& features) {
  if (features.size() != input_dim(model)) {
    throw InvalidArgument("project: feature length " + std::to_string(features.size()) +
                          " does not match model input " + std::to_string(input_dim(model)));
  }
  struct Visitor {
    const Vec& f;
    Vec operator()(const LinearProjection& p) const { return p.weights * (f - p.offset); }
    Vec operator()(const PcaProjection& p) const { return p.components * (f - p.mean); }
    Vec operator()(const AutoEncoder& ae) const { return ae.encode(f); }
  };
  return std::visit(Visitor{features}, model);
}

// ---- JSON (model.json) ------------------------------------------------------

namespace detail {

inline nlohmann::json mat_json(const Mat& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Mat mat_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw InvalidArgument("model.json: matrix data length mismatch");
  }
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

inline nlohmann::json dense_json(const Dense& d) {
  return {{"w", mat_json(d.w)}, {"b", to_std(d.b)}};
}

inline Dense dense_from_json(const nlohmann::json& j) {
  return {mat_from_json(j.at("w")), from_std(j.at("b").get<std::vector<double>>())};
}

}  // namespace detail

inline nlohmann::json model_to_json(const LatentModel& model) {
  nlohmann::json j{{"variant", variant_name(model)},
                   {"input_dim", input_dim(model)},
                   {"latent_dim", latent_dim(model)}};
  if (const auto* p = std::get_if<LinearProjection>(&model)) {
    j["weights"] = detail::mat_json(p->weights);
    j["offset"] = to_std(p->offset);
  } else if (const auto* p = std::get_if<PcaProjection>(&model)) {
    j["mean"] = to_std(p->mean);
    j["components"] = detail::mat_json(p->components);
    j["eigenvalues"] = to_std(p->eigenvalues);
  } else {
    const auto& ae = std::get<AutoEncoder>(model);
    j["layers"] = {detail::dense_json(ae.enc_hidden), detail::dense_json(ae.enc_out),
                   detail::dense_json(ae.dec_hidden), detail::dense_json(ae.dec_out)};
  }
  return j;
}

inline LatentModel model_from_json(const nlohmann::json& j) {
  const auto variant = j.at("variant").get<std::string>();
  if (variant == "linear") {
    return LinearProjection{detail::mat_from_json(j.at("weights")),
                            from_std(j.at("offset").get<std::vector<double>>())};
  }
  if (variant == "pca") {
    return PcaProjection{from_std(j.at("mean").get<std::vector<double>>()),
                         detail::mat_from_json(j.at("components")),
                         from_std(j.at("eigenvalues").get<std::vector<double>>())};
  }
  if (variant == "autoencoder") {
    const auto& layers = j.at("layers");
    AutoEncoder ae;
    ae.in_dim = j.at("input_dim").get<Eigen::Index>();
    ae.enc_hidden = detail::dense_from_json(layers.at(0));
    ae.enc_out = detail::dense_from_json(layers.at(1));
    ae.dec_hidden = detail::dense_from_json(layers.at(2));
    ae.dec_out = detail::dense_from_json(layers.at(3));
    return ae;
  }
  throw InvalidArgument("model.json: unknown variant '" + variant + "'");
}

}  // namespace qdhf
