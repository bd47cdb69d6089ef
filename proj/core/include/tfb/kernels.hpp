#pragma once

#include "tfb/types.hpp"

#include <optional>

namespace tfb {

/// Gaussian kernel exp(-||x - y||^2 / bandwidth).
struct KernelSpec {
  double bandwidth = 1.0;

  /// Bandwidth equal to the number of covariate columns.
  static KernelSpec for_columns(Index p) { return KernelSpec{static_cast<double>(p)}; }
  double operator()(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) const;
};

/// Gram matrix of a control-first sample and its blocks:
/// K_c = first n_c columns, K_cc = its top n_c rows, K_tc = bottom n_t rows.
struct GramBlocks {
  Matrix K;
  Index n_control = 0;

  auto K_c() const { return K.leftCols(n_control); }
  auto K_cc() const { return K.topLeftCorner(n_control, n_control); }
  auto K_tc() const { return K.bottomLeftCorner(K.rows() - n_control, n_control); }
};

GramBlocks gram_matrix(const Matrix& covariates, Index n_control, const KernelSpec& spec);

/// Symmetric kernel matrix of the rows of `points` (upper triangle mirrored).
Matrix kernel_matrix(const Matrix& points, const KernelSpec& spec);

/// Similarity of `x` to each anchor row.
Vector kernel_features_for_new_point(const Vector& x, const Matrix& anchors,
                                     const KernelSpec& spec);

/// Row i holds kernel_features_for_new_point(points.row(i)).
Matrix kernel_features(const Matrix& points, const Matrix& anchors, const KernelSpec& spec);

}  // namespace tfb
