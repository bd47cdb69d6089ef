#pragma once

#include "tfb/dataset.hpp"
#include "tfb/types.hpp"

#include <optional>
#include <string_view>

namespace tfb {

enum class BaselineMethod { DIM, EBAL, ABAL1, OraclePS };

std::string_view to_string(BaselineMethod m);
BaselineMethod parse_baseline(std::string_view s);

struct EbalOptions {
  int max_iters = 200;
  double tol = 1e-10;  // largest |imbalance| on the column-scaled design
};

/// Weights on `rows` with (1/n_g) rows' w = target, sum w = n_g, w > 0,
/// minimizing sum w log w. Solved by damped Newton on the log-sum-exp dual.
/// Throws NumericalError when the target is not reachable.
Vector entropy_balancing(const Matrix& rows, const Vector& target, const EbalOptions& opts = {});

/// Entropy balancing for the groups `estimand` weights (design rows
/// control-first): controls to the treated mean for ATT, treated to the
/// control mean for ATC, each group to the full-sample mean for ATE.
GroupWeights entropy_balancing(const Matrix& design, Index n_control, Estimand estimand,
                               const EbalOptions& opts = {});

struct StableBalancingOptions {
  int max_iters = 100;
  double tol = 1e-9;       // primal residual, column-scaled units
  double dual_tol = 1e-6;  // dual residual relative to the objective gradient
  double gap_tol = 1e-6;   // duality gap relative to the objective
};

/// Minimizes ||w||^2 subject to |(1/n_g) rows' w - target| <= delta
/// elementwise, sum w = n_g, w >= 0, by a primal-dual interior-point
/// method. Throws NumericalError when the tolerances cannot be met.
Vector stable_balancing(const Matrix& rows, const Vector& target, const Vector& delta,
                        const StableBalancingOptions& opts = {});

/// Penalized form with a common tolerance: minimizes
/// (1 - zeta) ||w / n_g||^2 + zeta max_j |(1/n_g) rows' w - target|_j^2
/// over the scaled simplex. The attained largest imbalance is the implied
/// delta (written to `implied_delta` when given); the weights solve
/// stable balancing at that delta.
Vector approx_balancing(const Matrix& rows, const Vector& target, double zeta = 0.5,
                        double* implied_delta = nullptr, const StableBalancingOptions& opts = {});

/// approx_balancing per weighted group on `design` with columns scaled by
/// their full-sample sd.
GroupWeights approx_balancing(const Matrix& design, Index n_control, Estimand estimand,
                              double zeta = 0.5, const StableBalancingOptions& opts = {});

/// 0.1 * sqrt((var_c + var_t) / 2) per column (n-1 denominators).
Vector default_delta(const Matrix& design, Index n_control);

GroupWeights stable_balancing(const Matrix& design, Index n_control, Estimand estimand,
                              const Vector& delta, const StableBalancingOptions& opts = {});

/// Inverse-propensity weights from known propensities (control-first):
///   ATT: controls (n_c / n_t) pi / (1 - pi)
///   ATC: treated  (n_t / n_c) (1 - pi) / pi
///   ATE: controls n_c / (n (1 - pi)), treated n_t / (n pi)
/// With `normalize`, each weighted group is rescaled to sum to its size.
GroupWeights oracle_propensity_weights(const Vector& propensity, Index n_control,
                                       Estimand estimand, bool normalize = false);

/// Unweighted difference in group means.
double dim(const Dataset& data, Estimand estimand);

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::DIM;
  std::optional<Vector> delta;  // ABAL1; a single entry broadcasts
  bool implied_delta = false;   // ABAL1 without delta: penalized form
  double zeta = 0.5;
  bool normalize = false;       // OraclePS
  EbalOptions ebal;
  StableBalancingOptions abal;
};

/// Weights for `config.method` on `design` (control-first rows of the
/// dataset the weights apply to). `propensity` is required for OraclePS.
GroupWeights baseline_weights(const Matrix& design, Index n_control, Estimand estimand,
                              const BaselineConfig& config,
                              const Vector* propensity = nullptr);

}  // namespace tfb
