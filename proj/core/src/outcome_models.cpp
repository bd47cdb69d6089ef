#include "tfb/outcome_models.hpp"

#include "tfb/lasso.hpp"
#include "tfb/linalg.hpp"
#include "tfb/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tfb {

std::string_view to_string(ModelBackend b) {
  switch (b) {
    case ModelBackend::OLS: return "ols";
    case ModelBackend::KRLS: return "krls";
    case ModelBackend::LASSO: return "lasso";
  }
  return "ols";
}

ModelBackend parse_backend(std::string_view s) {
  if (s == "ols") return ModelBackend::OLS;
  if (s == "krls") return ModelBackend::KRLS;
  if (s == "lasso") return ModelBackend::LASSO;
  throw UsageError("unknown model backend '" + std::string(s) + "' (expected ols, krls or lasso)");
}

Matrix FeatureMap::design(const Matrix& covariates) const {
  if (covariates.cols() != input_dim) {
    std::ostringstream msg;
    msg << "covariates have " << covariates.cols() << " columns, model expects " << input_dim;
    throw DataError(msg.str());
  }
  if (kind == FeatureKind::Raw) return covariates;
  return kernel_features(covariates, anchors, kernel);
}

Vector FeatureMap::row(const Vector& x) const {
  if (x.size() != input_dim) {
    std::ostringstream msg;
    msg << "point has " << x.size() << " coordinates, model expects " << input_dim;
    throw DataError(msg.str());
  }
  if (kind == FeatureKind::Raw) return x;
  return kernel_features_for_new_point(x, anchors, kernel);
}

namespace {

void check_grid(const std::vector<double>& grid) {
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] > 0.0) || !std::isfinite(grid[k])) {
      throw UsageError("lambda grid values must be positive and finite");
    }
    if (k > 0 && !(grid[k] > grid[k - 1])) {
      throw UsageError("lambda grid must be strictly increasing");
    }
  }
}

std::vector<int> cv_folds(Index n, int folds, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(derive_seed(seed, 0xC5));
  rng.shuffle(perm);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % folds);
  }
  return fold_of;
}

std::string column_label(Index j) { return j == 0 ? "intercept" : "x" + std::to_string(j); }

}  // namespace

OutcomeModelFit fit_ols_sandwich(const Matrix& X, const Vector& y) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (y.size() != n) throw DataError("outcome length does not match design rows");
  if (n < p + 1) {
    throw DataError("OLS needs at least " + std::to_string(p + 1) + " rows, got " +
                    std::to_string(n));
  }
  Matrix Xt(n, p + 1);
  Xt.col(0).setOnes();
  Xt.rightCols(p) = X;

  Eigen::JacobiSVD<Matrix> svd(Xt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > 1e12) {
    const Vector v = svd.matrixV().col(s.size() - 1);
    std::ostringstream msg;
    msg << "design is rank deficient; near-dependent columns:";
    for (Index j = 0; j < v.size(); ++j) {
      if (std::abs(v(j)) > 0.1) msg << ' ' << column_label(j);
    }
    throw DataError(msg.str());
  }

  const Vector beta = svd.solve(y);
  const Vector resid = y - Xt * beta;
  const auto nd = static_cast<double>(n);
  // (X'X/n)^{-1} = n V S^{-2} V'
  const Vector inv_s2 = s.array().square().inverse();
  const Matrix A_inv = nd * svd.matrixV() * inv_s2.asDiagonal() * svd.matrixV().transpose();
  const Matrix meat = Xt.transpose() * resid.array().square().matrix().asDiagonal() * Xt / nd;
  const Matrix V_full = symmetrize(A_inv * meat * A_inv / nd);

  OutcomeModelFit fit;
  fit.backend = ModelBackend::OLS;
  fit.intercept = beta(0);
  fit.coefficients = beta.tail(p);
  fit.coef_covariance = V_full.bottomRightCorner(p, p);
  fit.cov_factor = psd_factor(fit.coef_covariance);
  fit.residual_variance = resid.squaredNorm() / nd;
  fit.feature_map.kind = FeatureKind::Raw;
  fit.feature_map.input_dim = p;
  return fit;
}

std::vector<double> krls_default_grid(const Matrix& K_cc) {
  const double scale = K_cc.trace() / static_cast<double>(K_cc.rows());
  return log_spaced(1e-4 * scale, 1e2 * scale, 50);
}

Vector krls_coefficients(const Matrix& K_cc, const Vector& y, double lambda) {
  Matrix A = K_cc;
  A.diagonal().array() += lambda;
  return A.ldlt().solve(y);
}

OutcomeModelFit fit_krls(const Matrix& K_cc, const Vector& y, const CvConfig& cv) {
  const Index n = K_cc.rows();
  if (K_cc.cols() != n) throw DataError("kernel block is not square");
  if (y.size() != n) throw DataError("outcome length does not match kernel block");
  check_grid(cv.lambda_grid);
  const std::vector<double> grid = cv.lambda_grid.empty() ? krls_default_grid(K_cc) : cv.lambda_grid;

  double lambda = grid.front();
  if (grid.size() > 1) {
    if (cv.folds < 2) throw UsageError("cross-validation needs at least 2 folds");
    if (n < 2 * cv.folds) {
      throw DataError("too few units (" + std::to_string(n) + ") for " +
                      std::to_string(cv.folds) + "-fold cross-validation");
    }
    const auto fold_of = cv_folds(n, cv.folds, cv.seed);
    std::vector<double> sse(grid.size(), 0.0);
    for (int f = 0; f < cv.folds; ++f) {
      std::vector<Index> train, test;
      for (Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
      const Matrix K_train = K_cc(train, train);
      const Matrix K_test = K_cc(test, train);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(K_train);
      if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in KRLS CV");
      const Vector Qty = eig.eigenvectors().transpose() * y(train);
      const Vector y_test = y(test);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const Vector scaled = Qty.cwiseQuotient((eig.eigenvalues().array() + grid[k]).matrix());
        const Vector alpha = eig.eigenvectors() * scaled;
        sse[k] += (y_test - K_test * alpha).squaredNorm();
      }
    }
    std::size_t best = grid.size();
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (std::isfinite(sse[k]) && sse[k] <= best_err) {
        best_err = sse[k];
        best = k;
      }
    }
    if (best == grid.size()) throw NumericalError("KRLS cross-validation errors are all non-finite");
    lambda = grid[best];
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(K_cc));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed in KRLS");
  const Matrix& Q = eig.eigenvectors();
  const Vector inv = (eig.eigenvalues().array() + lambda).inverse();
  const Vector alpha = Q * inv.cwiseProduct(Q.transpose() * y);
  const Vector resid = y - K_cc * alpha;

  OutcomeModelFit fit;
  fit.backend = ModelBackend::KRLS;
  fit.coefficients = alpha;
  fit.lambda = lambda;
  fit.residual_variance = resid.squaredNorm() / static_cast<double>(n);
  const double sigma = std::sqrt(fit.residual_variance);
  fit.coef_covariance =
      symmetrize(fit.residual_variance * Q * inv.array().square().matrix().asDiagonal() * Q.transpose());
  fit.cov_factor = sigma * inv.asDiagonal() * Q.transpose();
  fit.feature_map.kind = FeatureKind::Kernel;
  fit.feature_map.input_dim = 0;
  return fit;
}

OutcomeModelFit fit_krls(const Matrix& anchors, const Vector& y, const KernelSpec& kernel,
                         const CvConfig& cv) {
  OutcomeModelFit fit = fit_krls(kernel_matrix(anchors, kernel), y, cv);
  fit.feature_map.anchors = anchors;
  fit.feature_map.kernel = kernel;
  fit.feature_map.input_dim = anchors.cols();
  return fit;
}

OutcomeModelFit fit_lasso_bootstrap(const Matrix& X, const Vector& y, const CvConfig& cv,
                                    int bootstrap_reps) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (y.size() != n) throw DataError("outcome length does not match design rows");
  if (bootstrap_reps < 20) {
    throw UsageError("bootstrap needs at least 20 replicates, got " + std::to_string(bootstrap_reps));
  }
  check_grid(cv.lambda_grid);
  const double lambda = lasso_cv_lambda(X, y, cv.lambda_grid, cv.folds, cv.seed);

  const LassoDesign design(X);
  const double y_mean = y.mean();
  Vector b = Vector::Zero(p);
  lasso_solve(design, (y.array() - y_mean).matrix(), lambda, b);
  auto original = [&](const Vector& bs) {
    Vector beta = bs.cwiseQuotient(design.scale);
    for (Index j = 0; j < p; ++j) {
      if (!design.active[static_cast<std::size_t>(j)]) beta(j) = 0.0;
    }
    return beta;
  };
  const Vector beta = original(b);
  const double intercept = y_mean - design.mean.dot(beta);
  const Vector fitted = (X * beta).array() + intercept;
  const Vector resid = y - fitted;

  OutcomeModelFit fit;
  fit.backend = ModelBackend::LASSO;
  fit.coefficients = beta;
  fit.intercept = intercept;
  fit.lambda = lambda;
  fit.residual_variance = resid.squaredNorm() / static_cast<double>(n);
  fit.feature_map.kind = FeatureKind::Raw;
  fit.feature_map.input_dim = p;

  if (resid.cwiseAbs().maxCoeff() == 0.0) {
    fit.coef_covariance = Matrix::Zero(p, p);
    fit.cov_factor = Matrix(0, p);
    return fit;
  }

  const Vector centered = resid.array() - resid.mean();
  Rng rng(derive_seed(cv.seed, 0xB007));
  Matrix draws(bootstrap_reps, p);
  Vector y_star(n);
  Vector b_star;
  for (int r = 0; r < bootstrap_reps; ++r) {
    for (Index i = 0; i < n; ++i) {
      y_star(i) = fitted(i) + centered(static_cast<Index>(rng.index(static_cast<std::uint64_t>(n))));
    }
    b_star = b;
    lasso_solve(design, (y_star.array() - y_star.mean()).matrix(), lambda, b_star);
    draws.row(r) = original(b_star).transpose();
  }
  const Matrix dev = draws.rowwise() - draws.colwise().mean();
  fit.coef_covariance = symmetrize(dev.transpose() * dev / static_cast<double>(bootstrap_reps - 1));
  fit.cov_factor = psd_factor(fit.coef_covariance);
  return fit;
}

double predict(const OutcomeModelFit& fit, const Vector& x) {
  return fit.feature_map.row(x).dot(fit.coefficients) + fit.intercept;
}

Vector predict(const OutcomeModelFit& fit, const Matrix& covariates) {
  return (fit.feature_map.design(covariates) * fit.coefficients).array() + fit.intercept;
}

OutcomeModelFit fit_outcome(const Matrix& X, const Vector& y, const ModelSpec& spec) {
  switch (spec.backend) {
    case ModelBackend::OLS: return fit_ols_sandwich(X, y);
    case ModelBackend::KRLS: {
      const KernelSpec kernel{spec.bandwidth > 0.0 ? spec.bandwidth : static_cast<double>(X.cols())};
      return fit_krls(X, y, kernel, spec.cv);
    }
    case ModelBackend::LASSO: return fit_lasso_bootstrap(X, y, spec.cv, spec.bootstrap_reps);
  }
  throw UsageError("unknown model backend");
}

}  // namespace tfb
