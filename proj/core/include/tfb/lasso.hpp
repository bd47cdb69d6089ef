#pragma once

#include "tfb/types.hpp"

#include <cstdint>
#include <vector>

namespace tfb {

/// Columns centered and scaled to unit mean square; zero-variance columns
/// are marked inactive and keep a zero coefficient.
struct LassoDesign {
  Matrix Xs;
  Vector mean;
  Vector scale;
  std::vector<bool> active;
  Matrix gram;  // Xs' Xs

  explicit LassoDesign(const Matrix& X);
};

struct LassoOptions {
  double tol = 1e-9;  // largest coordinate change, relative to rms(yc)
  int max_passes = 20000;
};

/// Minimizes (1/2n)||yc - Xs b||^2 + lambda ||b||_1 by cyclic coordinate
/// descent with an active-set strategy. `yc` must be centered. `warm`
/// (standardized scale) is the starting point and receives the solution.
void lasso_solve(const LassoDesign& design, const Vector& yc, double lambda, Vector& warm,
                 const LassoOptions& opts = {});

/// max_j |x_j' yc| / n over active standardized columns.
double lasso_lambda_max(const LassoDesign& design, const Vector& yc);

/// Largest KKT violation of a standardized-scale solution:
/// active coordinates |g_j - lambda sign(b_j)|, inactive max(|g_j| - lambda, 0),
/// with g = Xs'(yc - Xs b)/n.
double lasso_kkt_violation(const LassoDesign& design, const Vector& yc, const Vector& b,
                           double lambda);

struct LassoFit {
  Vector coefficients;  // original scale
  double intercept = 0.0;
  double lambda = 0.0;
};

/// Fit at a single penalty, coefficients mapped back to the original scale.
LassoFit lasso_fit(const Matrix& X, const Vector& y, double lambda, const LassoOptions& opts = {});

/// Penalty minimizing k-fold CV prediction error over `grid` (ties go to
/// the larger value). An empty grid selects the default 50-point grid
/// over [1e-4, 1e2] * lambda_max. Each fold's path stops once the training
/// R^2 reaches 0.999 or improves by less than 1e-5; smaller penalties then
/// reuse the last fit. Path fits are capped at 2000 passes.
double lasso_cv_lambda(const Matrix& X, const Vector& y, std::vector<double> grid, int folds,
                       std::uint64_t seed);

std::vector<double> log_spaced(double lo, double hi, int count);

}  // namespace tfb
