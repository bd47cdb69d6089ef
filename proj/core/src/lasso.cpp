#include "tfb/lasso.hpp"

#include "tfb/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tfb {

namespace {

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

}  // namespace

LassoDesign::LassoDesign(const Matrix& X)
    : Xs(X), mean(X.colwise().mean().transpose()), scale(X.cols()),
      active(static_cast<std::size_t>(X.cols()), true) {
  const auto n = static_cast<double>(X.rows());
  for (Index j = 0; j < X.cols(); ++j) {
    Xs.col(j).array() -= mean(j);
    const double s = std::sqrt(Xs.col(j).squaredNorm() / n);
    if (!(s > 1e-12 * (1.0 + std::abs(mean(j))))) {
      active[static_cast<std::size_t>(j)] = false;
      scale(j) = 1.0;
      Xs.col(j).setZero();
      continue;
    }
    scale(j) = s;
    Xs.col(j) /= s;
  }
  gram = Xs.transpose() * Xs;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (count - 1));
  }
  return out;
}

double lasso_lambda_max(const LassoDesign& design, const Vector& yc) {
  const auto n = static_cast<double>(design.Xs.rows());
  return (design.Xs.transpose() * yc).cwiseAbs().maxCoeff() / n;
}

void lasso_solve(const LassoDesign& design, const Vector& yc, double lambda, Vector& b,
                 const LassoOptions& opts) {
  const Matrix& X = design.Xs;
  const Index p = X.cols();
  const auto n = static_cast<double>(X.rows());
  if (b.size() != p) b = Vector::Zero(p);
  Vector r = yc - X * b;
  const double scale = std::max(1.0, std::sqrt(yc.squaredNorm() / n));
  const double tol = opts.tol * scale;

  auto sweep = [&](const std::vector<Index>& cols) {
    double max_change = 0.0;
    for (Index j : cols) {
      const double old = b(j);
      const double z = X.col(j).dot(r) / n + old;
      const double updated = soft_threshold(z, lambda);
      if (updated != old) {
        r.noalias() -= (updated - old) * X.col(j);
        b(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    return max_change;
  };

  std::vector<Index> all;
  for (Index j = 0; j < p; ++j) {
    if (design.active[static_cast<std::size_t>(j)]) all.push_back(j);
  }

  // Active-set step on the current support: the objective restricted to the
  // sign orthant is a quadratic with minimizer G_AA^{-1}(X_A' yc - n lambda s).
  // Move toward it, dropping coordinates that reach zero, until the signs
  // agree. Coordinate descent alone crawls on ill-conditioned supports.
  auto polish = [&](std::vector<Index> support) {
    for (int round = 0; round < 50 && !support.empty(); ++round) {
      const auto k = static_cast<Index>(support.size());
      Matrix GA(k, k);
      Vector rhs(k), bA(k);
      for (Index u = 0; u < k; ++u) {
        const Index j = support[static_cast<std::size_t>(u)];
        for (Index v = 0; v < k; ++v) GA(u, v) = design.gram(j, support[static_cast<std::size_t>(v)]);
        rhs(u) = X.col(j).dot(yc) - n * lambda * (b(j) > 0.0 ? 1.0 : -1.0);
        bA(u) = b(j);
      }
      Eigen::LDLT<Matrix> ldlt(GA);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
      const Vector target = ldlt.solve(rhs);
      if (!target.allFinite()) return false;
      double step = 1.0;
      Index blocking = -1;
      for (Index u = 0; u < k; ++u) {
        if ((target(u) > 0.0) != (bA(u) > 0.0) || target(u) == 0.0) {
          const double t = bA(u) / (bA(u) - target(u));
          if (t < step) {
            step = t;
            blocking = u;
          }
        }
      }
      for (Index u = 0; u < k; ++u) {
        b(support[static_cast<std::size_t>(u)]) = bA(u) + step * (target(u) - bA(u));
      }
      if (blocking < 0) {
        r = yc - X * b;
        return true;
      }
      b(support[static_cast<std::size_t>(blocking)]) = 0.0;
      support.erase(support.begin() + blocking);
    }
    r = yc - X * b;
    return false;
  };

  int passes = 0;
  while (passes < opts.max_passes) {
    const double full_change = sweep(all);
    ++passes;
    if (full_change < tol) break;
    std::vector<Index> support;
    for (Index j : all) {
      if (b(j) != 0.0) support.push_back(j);
    }
    int inner = 0;
    while (passes < opts.max_passes) {
      const double change = sweep(support);
      ++passes;
      if (change < tol) break;
      if (++inner % 20 == 0 && polish(support)) break;
    }
  }
}

double lasso_kkt_violation(const LassoDesign& design, const Vector& yc, const Vector& b,
                           double lambda) {
  const auto n = static_cast<double>(design.Xs.rows());
  const Vector g = design.Xs.transpose() * (yc - design.Xs * b) / n;
  double worst = 0.0;
  for (Index j = 0; j < b.size(); ++j) {
    if (!design.active[static_cast<std::size_t>(j)]) continue;
    const double v = b(j) != 0.0 ? std::abs(g(j) - lambda * (b(j) > 0 ? 1.0 : -1.0))
                                 : std::max(std::abs(g(j)) - lambda, 0.0);
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

LassoFit to_original_scale(const LassoDesign& design, const Vector& b, double y_mean,
                           double lambda) {
  LassoFit fit;
  fit.lambda = lambda;
  fit.coefficients = b.cwiseQuotient(design.scale);
  for (Index j = 0; j < b.size(); ++j) {
    if (!design.active[static_cast<std::size_t>(j)]) fit.coefficients(j) = 0.0;
  }
  fit.intercept = y_mean - design.mean.dot(fit.coefficients);
  return fit;
}

}  // namespace

LassoFit lasso_fit(const Matrix& X, const Vector& y, double lambda, const LassoOptions& opts) {
  const LassoDesign design(X);
  const double y_mean = y.mean();
  const Vector yc = y.array() - y_mean;
  Vector b = Vector::Zero(X.cols());
  lasso_solve(design, yc, lambda, b, opts);
  return to_original_scale(design, b, y_mean, lambda);
}

double lasso_cv_lambda(const Matrix& X, const Vector& y, std::vector<double> grid, int folds,
                       std::uint64_t seed) {
  const Index n = X.rows();
  if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  if (grid.empty()) {
    const LassoDesign full(X);
    const double lmax = lasso_lambda_max(full, (y.array() - y.mean()).matrix());
    if (!(lmax > 0.0)) return 0.0;
    grid = log_spaced(1e-4 * lmax, 1e2 * lmax, 50);
  }
  if (grid.size() == 1) return grid[0];
  if (n < 2 * folds) {
    throw DataError("too few units (" + std::to_string(n) + ") for " + std::to_string(folds) +
                    "-fold cross-validation");
  }

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(derive_seed(seed, 0xC5));
  rng.shuffle(perm);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % folds);
  }

  std::vector<double> sse(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    const Matrix X_train = X(train, Eigen::all);
    const Vector y_train = y(train);
    const Matrix X_test = X(test, Eigen::all);
    const Vector y_test = y(test);
    const LassoDesign design(X_train);
    const double y_mean = y_train.mean();
    const Vector yc = y_train.array() - y_mean;
    const double tss = yc.squaredNorm();
    Vector b = Vector::Zero(X.cols());
    LassoOptions path_opts;
    path_opts.max_passes = 2000;
    double last_r2 = 0.0, last_sse = 0.0;
    bool saturated = false;
    for (std::size_t k = grid.size(); k-- > 0;) {
      if (!saturated) {
        lasso_solve(design, yc, grid[k], b, path_opts);
        const LassoFit fit = to_original_scale(design, b, y_mean, grid[k]);
        const Vector resid = (y_test - X_test * fit.coefficients).array() - fit.intercept;
        last_sse = resid.squaredNorm();
        // Path truncation: once the training fit is saturated, smaller
        // penalties reuse the last fit.
        const double r2 = tss > 0.0 ? 1.0 - (yc - design.Xs * b).squaredNorm() / tss : 1.0;
        if (k + 1 < grid.size() && (r2 >= 0.999 || (r2 > 0.0 && r2 - last_r2 < 1e-5))) {
          saturated = true;
        }
        last_r2 = r2;
      }
      sse[k] += last_sse;
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
  if (best == grid.size()) throw NumericalError("LASSO cross-validation errors are all non-finite");
  return grid[best];
}

}  // namespace tfb
