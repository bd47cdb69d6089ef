#pragma once

#include "tfb/kernels.hpp"
#include "tfb/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tfb {

enum class FeatureKind { Raw, Kernel };

/// Maps a covariate row to the design row the coefficients act on.
/// Raw: the row itself. Kernel: similarities to the anchor rows.
struct FeatureMap {
  FeatureKind kind = FeatureKind::Raw;
  Index input_dim = 0;
  Matrix anchors;
  KernelSpec kernel;

  Index output_dim() const { return kind == FeatureKind::Raw ? input_dim : anchors.rows(); }
  Matrix design(const Matrix& covariates) const;
  Vector row(const Vector& x) const;
};

enum class ModelBackend { OLS, KRLS, LASSO };

std::string_view to_string(ModelBackend b);
ModelBackend parse_backend(std::string_view s);

struct OutcomeModelFit {
  ModelBackend backend = ModelBackend::OLS;
  Vector coefficients;
  double intercept = 0.0;
  Matrix coef_covariance;
  /// Factor R with R^T R = coef_covariance (rows may be fewer than columns).
  Matrix cov_factor;
  double residual_variance = 0.0;
  double lambda = 0.0;  // penalty chosen by CV (0 for OLS)
  FeatureMap feature_map;
  /// Degrees of freedom used for the chi-squared quantile.
  Index df() const { return coefficients.size(); }
};

struct CvConfig {
  std::vector<double> lambda_grid;  // empty means the data-driven default
  int folds = 5;
  std::uint64_t seed = 0;
};

/// OLS with a prepended intercept and the heteroscedasticity-robust
/// sandwich covariance (1/n) A^{-1} M A^{-1}, A = X'X/n,
/// M = sum e_i^2 x_i x_i' / n. The intercept row and column of the
/// covariance are dropped; its imbalance is always zero.
OutcomeModelFit fit_ols_sandwich(const Matrix& X, const Vector& y);

/// Kernel regularized least squares on a precomputed control gram block.
/// The returned feature map has no anchors; use the overload below to get
/// a fit that can predict.
OutcomeModelFit fit_krls(const Matrix& K_cc, const Vector& y, const CvConfig& cv);

/// KRLS with the gram block computed from `anchors`.
OutcomeModelFit fit_krls(const Matrix& anchors, const Vector& y, const KernelSpec& kernel,
                         const CvConfig& cv);

/// Default KRLS grid: 50 log-spaced values over [1e-4, 1e2] * trace(K)/n.
std::vector<double> krls_default_grid(const Matrix& K_cc);

/// Closed-form KRLS coefficients (K + lambda I)^{-1} y.
Vector krls_coefficients(const Matrix& K_cc, const Vector& y, double lambda);

/// LASSO (coordinate descent, penalty chosen by CV, unpenalized
/// intercept) with a residual-bootstrap coefficient covariance.
OutcomeModelFit fit_lasso_bootstrap(const Matrix& X, const Vector& y, const CvConfig& cv,
                                    int bootstrap_reps = 200);

double predict(const OutcomeModelFit& fit, const Vector& x);
Vector predict(const OutcomeModelFit& fit, const Matrix& covariates);

struct ModelSpec {
  ModelBackend backend = ModelBackend::OLS;
  CvConfig cv;
  int bootstrap_reps = 200;
  double bandwidth = 0.0;  // <= 0 means number of columns
};

/// Fits the chosen backend on (X, y). For KRLS the rows of X become anchors.
OutcomeModelFit fit_outcome(const Matrix& X, const Vector& y, const ModelSpec& spec);

}  // namespace tfb
