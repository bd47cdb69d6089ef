#include "tfb/kernels.hpp"

#include <cmath>
#include <sstream>

namespace tfb {

namespace {

void check_bandwidth(const KernelSpec& spec) {
  if (!(spec.bandwidth > 0.0) || !std::isfinite(spec.bandwidth)) {
    std::ostringstream msg;
    msg << "kernel bandwidth must be positive, got " << spec.bandwidth;
    throw UsageError(msg.str());
  }
}

}  // namespace

double KernelSpec::operator()(const Eigen::Ref<const Vector>& a,
                              const Eigen::Ref<const Vector>& b) const {
  return std::exp(-(a - b).squaredNorm() / bandwidth);
}

Matrix kernel_matrix(const Matrix& points, const KernelSpec& spec) {
  check_bandwidth(spec);
  const Index n = points.rows();
  Matrix K(n, n);
  for (Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-(points.row(i) - points.row(j)).squaredNorm() / spec.bandwidth);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

GramBlocks gram_matrix(const Matrix& covariates, Index n_control, const KernelSpec& spec) {
  if (n_control < 0 || n_control > covariates.rows()) {
    throw DataError("control count outside the sample");
  }
  return GramBlocks{kernel_matrix(covariates, spec), n_control};
}

Vector kernel_features_for_new_point(const Vector& x, const Matrix& anchors,
                                     const KernelSpec& spec) {
  check_bandwidth(spec);
  if (x.size() != anchors.cols()) {
    std::ostringstream msg;
    msg << "point has " << x.size() << " coordinates, anchors have " << anchors.cols();
    throw DataError(msg.str());
  }
  Vector k(anchors.rows());
  for (Index j = 0; j < anchors.rows(); ++j) {
    k(j) = std::exp(-(anchors.row(j).transpose() - x).squaredNorm() / spec.bandwidth);
  }
  return k;
}

Matrix kernel_features(const Matrix& points, const Matrix& anchors, const KernelSpec& spec) {
  check_bandwidth(spec);
  if (points.cols() != anchors.cols()) {
    std::ostringstream msg;
    msg << "points have " << points.cols() << " columns, anchors have " << anchors.cols();
    throw DataError(msg.str());
  }
  Matrix K(points.rows(), anchors.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < anchors.rows(); ++j) {
      K(i, j) = std::exp(-(points.row(i) - anchors.row(j)).squaredNorm() / spec.bandwidth);
    }
  }
  return K;
}

}  // namespace tfb
