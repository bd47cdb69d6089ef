#pragma once

#include "tfb/types.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

using tfb::Index;
using tfb::Matrix;
using tfb::Vector;

inline double chi_sq_quantile(double q, long df) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(static_cast<double>(df)), q);
}

/// |P(df/2, x/2) - q| from Boost's incomplete gamma.
inline double chi_sq_cdf_residual(double x, long df, double q) {
  return std::abs(boost::math::gamma_p(0.5 * static_cast<double>(df), 0.5 * x) - q);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Bisection on the normal CDF to machine precision.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// One-group TFB instance stated in its raw form.
struct TfbInstance {
  Matrix rows;    // n_g x P design rows of the weighted group
  Vector target;  // mean the weighted rows are compared with
  Vector beta;
  Matrix V;
  double q = 0.95;
  double sigma2 = 0.0;
};

/// (sqrt(Q_q) sqrt(d' V d) + |d' beta|)^2 + sigma2 / n^2 ||w||^2 with
/// d = target - rows' w / n.
inline double tfb_objective(const TfbInstance& inst, const Vector& w) {
  const auto n = static_cast<double>(inst.rows.rows());
  const Vector d = inst.target - inst.rows.transpose() * w / n;
  const double c = std::sqrt(chi_sq_quantile(inst.q, static_cast<long>(inst.beta.size())));
  const double t = c * std::sqrt(std::max(0.0, d.dot(inst.V * d))) + std::abs(d.dot(inst.beta));
  return t * t + inst.sigma2 / (n * n) * w.squaredNorm();
}

/// Minimum of `f` over the grid {w = n k / K : k nonnegative integers
/// summing to K} on the scaled simplex of dimension `n`.
inline double simplex_grid_minimum(Index n, int K, const std::function<double(const Vector&)>& f,
                                   Vector* argmin = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  Vector w(n);
  std::vector<int> k(static_cast<std::size_t>(n), 0);
  const double scale = static_cast<double>(n) / K;
  std::function<void(Index, int)> rec = [&](Index i, int left) {
    if (i == n - 1) {
      w(i) = left * scale;
      const double v = f(w);
      if (v < best) {
        best = v;
        if (argmin) *argmin = w;
      }
      return;
    }
    for (int ki = 0; ki <= left; ++ki) {
      w(i) = ki * scale;
      rec(i + 1, left - ki);
    }
  };
  rec(0, K);
  return best;
}

/// Fast grid minimum of the one-group TFB objective with incremental
/// sums (n <= 4, P <= 4).
inline double tfb_grid_minimum(const TfbInstance& inst, int K) {
  constexpr int kMax = 4;
  const Index n = inst.rows.rows();
  const Index p = inst.rows.cols();
  if (n < 1 || n > kMax || p > kMax) throw std::invalid_argument("grid oracle needs n, P <= 4");
  const double nd = static_cast<double>(n);
  const double c = std::sqrt(chi_sq_quantile(inst.q, static_cast<long>(p)));
  const double scale = nd / K;
  const double pen = inst.sigma2 / (nd * nd) * scale * scale;
  double G[kMax][kMax] = {}, V[kMax][kMax] = {}, beta[kMax] = {}, target[kMax] = {};
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) G[i][j] = inst.rows(i, j) * scale / nd;
  }
  for (Index j = 0; j < p; ++j) {
    beta[j] = inst.beta(j);
    target[j] = inst.target(j);
    for (Index k = 0; k < p; ++k) V[j][k] = inst.V(j, k);
  }
  double best = std::numeric_limits<double>::infinity();
  auto eval = [&](const double* s, double w2) {
    double d[kMax], quad = 0.0, lin = 0.0;
    for (Index j = 0; j < p; ++j) d[j] = target[j] - s[j];
    for (Index j = 0; j < p; ++j) {
      lin += d[j] * beta[j];
      for (Index k = 0; k < p; ++k) quad += d[j] * V[j][k] * d[k];
    }
    const double t = c * std::sqrt(std::max(0.0, quad)) + std::abs(lin);
    return t * t + pen * w2;
  };
  std::function<void(Index, int, const double*, double)> rec = [&](Index i, int left, const double* s,
                                                                   double w2) {
    double si[kMax];
    if (i == n - 1) {
      for (Index j = 0; j < p; ++j) si[j] = s[j] + left * G[i][j];
      best = std::min(best, eval(si, w2 + double(left) * left));
      return;
    }
    for (Index j = 0; j < p; ++j) si[j] = s[j];
    for (int ki = 0; ki <= left; ++ki) {
      if (i == n - 2) {
        // unrolled innermost pair of coordinates
        const int rest = left - ki;
        double sl[kMax];
        for (Index j = 0; j < p; ++j) sl[j] = si[j] + rest * G[n - 1][j];
        best = std::min(best, eval(sl, w2 + double(ki) * ki + double(rest) * rest));
      } else {
        rec(i + 1, left - ki, si, w2 + double(ki) * ki);
      }
      for (Index j = 0; j < p; ++j) si[j] += G[i][j];
    }
  };
  const double zero[kMax] = {};
  if (n == 1) {
    double s[kMax];
    for (Index j = 0; j < p; ++j) s[j] = K * G[0][j];
    return eval(s, double(K) * K);
  }
  rec(0, K, zero, 0.0);
  return best;
}

/// Exhaustive best-subset least squares: the smallest column subset whose
/// OLS fit (with intercept) leaves residual sum of squares <= tol.
inline std::vector<Index> exact_support(const Matrix& X, const Vector& y, double tol) {
  const Index p = X.cols();
  const Index n = X.rows();
  std::vector<Index> best_set;
  int best_size = static_cast<int>(p) + 1;
  for (unsigned mask = 0; mask < (1u << p); ++mask) {
    std::vector<Index> cols;
    for (Index j = 0; j < p; ++j) {
      if (mask & (1u << j)) cols.push_back(j);
    }
    if (static_cast<int>(cols.size()) >= best_size) continue;
    Matrix A(n, static_cast<Index>(cols.size()) + 1);
    A.col(0).setOnes();
    for (std::size_t u = 0; u < cols.size(); ++u) A.col(static_cast<Index>(u) + 1) = X.col(cols[u]);
    const Vector b = A.colPivHouseholderQr().solve(y);
    if ((y - A * b).squaredNorm() <= tol) {
      best_size = static_cast<int>(cols.size());
      best_set = cols;
    }
  }
  return best_set;
}

}  // namespace oracle
