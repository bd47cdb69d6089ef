#include "tfb/linalg.hpp"

#include <cmath>
#include <sstream>

namespace tfb {

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> checked_eigen(const Matrix& V) {
  if (V.rows() != V.cols()) throw NumericalError("covariance matrix is not square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(V));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const double trace = V.trace();
  const double floor = -1e-8 * std::max(std::abs(trace), 0.0);
  if (V.rows() > 0 && eig.eigenvalues().minCoeff() < floor &&
      eig.eigenvalues().minCoeff() < -1e-300) {
    std::ostringstream msg;
    msg << "covariance matrix is not positive semi-definite (smallest eigenvalue "
        << eig.eigenvalues().minCoeff() << ", trace " << trace << ")";
    throw NumericalError(msg.str());
  }
  return eig;
}

}  // namespace

Matrix symmetric_psd_sqrt(const Matrix& V) {
  if (V.size() == 0) return V;
  const auto eig = checked_eigen(V);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrize(eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose());
}

Matrix psd_factor(const Matrix& V) {
  if (V.size() == 0) return Matrix(0, V.cols());
  const auto eig = checked_eigen(V);
  const Vector& ev = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(ev.maxCoeff(), 0.0);
  Index rank = 0;
  for (Index i = 0; i < ev.size(); ++i) rank += ev(i) > cutoff ? 1 : 0;
  Matrix R(rank, V.cols());
  Index row = 0;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff) R.row(row++) = std::sqrt(ev(i)) * eig.eigenvectors().col(i).transpose();
  }
  return R;
}

}  // namespace tfb
