#pragma once

#include <Eigen/Eigenvalues>

#include "qdhf/latent/model.hpp"

namespace qdhf {

/// Principal components of the rows of `data` (N x d). Components are the
/// top-k eigenvectors of the sample covariance (N - 1 denominator), in
/// descending eigenvalue order, each signed so its largest-magnitude entry
/// is positive.
inline PcaProjection fit_pca(const Mat& data, Eigen::Index k) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (k < 1 || k > d) throw InvalidArgument("fit_pca: need 1 <= k <= d");
  if (n < k) throw InvalidArgument("fit_pca: need at least k samples");

  PcaProjection pca;
  pca.mean = data.colwise().mean().transpose();
  const Mat centered = data.rowwise() - pca.mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Mat cov = (centered.adjoint() * centered) / denom;

  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.info() != Eigen::Success) throw InvalidArgument("fit_pca: eigensolver failed");

  pca.components.resize(k, d);
  pca.eigenvalues.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index col = d - 1 - i;  // eigenvalues ascend
    Vec v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    pca.components.row(i) = v.transpose();
    pca.eigenvalues[i] = std::max(0.0, eig.eigenvalues()[col]);
  }
  return pca;
}

}  // namespace qdhf
