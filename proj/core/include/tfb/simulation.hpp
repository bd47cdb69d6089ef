#pragma once

#include "tfb/dataset.hpp"
#include "tfb/effect_estimators.hpp"
#include "tfb/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tfb {

/// One simulated sample. Every per-unit vector follows the dataset's
/// internal (control-first) order.
struct DgpDraw {
  int dgp = 1;
  Dataset data;        // raw covariates: X (DGP 1) or [Z, A, U] (DGP 2)
  Vector f0;           // untreated outcome mean
  Vector propensity;   // true P(D = 1 | X)
  Matrix latent;       // Z^(1..4)
  Eigen::VectorXi cluster;  // DGP 1 center index 0..3; empty for DGP 2
  double true_att = 0.0;
};

/// Centers (0,0), (0,5), (5,0), (5,5); X ~ N(C, I_2); Z_l = 1/(||X - c_l|| + 1);
/// log-odds 4 (Z_1 - 0.47) in cluster 1 and 20 (Z_l - 0.47) in cluster l > 1;
/// Y = 10 Z_1 + Z_2 + Z_3 + Z_4 + N(0, 1.5).
DgpDraw draw_dgp1(Index n, std::uint64_t seed);

/// Z ~ N(0, I_4); log-odds (Z_1 + ... + Z_4) / 5; Y = 8 Z_1 + 4 Z_2 + 2 Z_3
/// + Z_4 + N(0, 9.21^2); A | D ~ N(D 1_5, I_5); U ~ N(0, I_10).
DgpDraw draw_dgp2(Index n, std::uint64_t seed);

DgpDraw draw_dgp(int dgp, Index n, std::uint64_t seed);

/// Names of the tracked leftover-imbalance variables for a DGP.
std::vector<std::string> tracked_variable_names(int dgp);

/// Tracked variables per unit (internal order): Z_1..Z_4 and the mean of
/// Z_2..Z_4, plus the mean of the distractors for DGP 2.
Matrix tracked_variables(const DgpDraw& draw);

/// Supported method names.
const std::vector<std::string>& supported_methods();

struct MonteCarloConfig {
  int dgp = 1;
  Index n = 1000;
  int replicates = 200;
  std::vector<std::string> methods{"dim", "tfb_k"};
  std::uint64_t seed = 0;
  Estimand estimand = Estimand::ATT;
  double q = 0.95;
  double gamma = 0.95;
  double bandwidth = 0.0;   // TFB-K; <= 0 means 2 for DGP 1, P for DGP 2
  int bootstrap_reps = 200;  // TFB-L
  int cv_folds = 5;
  SolverConfig solver;
  std::optional<Vector> abal_delta;  // unset: delta implied by the penalized form
  double abal_zeta = 0.5;
  bool keep_replicates = true;
  unsigned workers = 0;  // 0 means worker_count()
};

struct ReplicateRecord {
  int replicate = 0;
  std::string method;
  bool failed = false;
  std::string error;
  double estimate = 0.0;
  double variance = 0.0;  // TFB methods only
  double ci_lo = 0.0, ci_hi = 0.0;
  double fold_estimates[2] = {0.0, 0.0};
  bool has_ci = false;
  bool converged = true;
  double ress = 1.0;
  Vector leftover;
};

struct MethodMetrics {
  std::string method;
  int successes = 0;
  int failures = 0;
  int unconverged = 0;
  double bias = 0.0;
  double rmse = 0.0;
  double ress = 1.0;
  Vector leftover;  // mean leftover imbalance per tracked variable
  std::optional<double> coverage;
  std::optional<double> split_correlation;
};

struct MetricsReport {
  MonteCarloConfig config;
  std::vector<std::string> tracked;
  Vector initial_imbalance;  // mean unweighted imbalance per tracked variable
  std::vector<MethodMetrics> methods;
  std::vector<ReplicateRecord> replicates;  // replicate-major, method order

  const MethodMetrics& metrics(const std::string& method) const;
};

/// Replicate m draws with seed + m; methods named "<tfb>_aug" report the
/// augmented point of the matching TFB method. TFB methods use a single
/// cross-fit split; baselines weight the full sample.
MetricsReport run_monte_carlo(const MonteCarloConfig& config);

/// Pearson correlation, NaN when either input is constant.
double sample_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// Correlation across replicates of the two fold estimates of `method`
/// (default: TFB-K for DGP 1, TFB-L for DGP 2).
double split_correlation(int dgp, Index n, int replicates, std::uint64_t seed,
                         const std::string& method = "");

}  // namespace tfb
