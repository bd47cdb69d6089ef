#pragma once

#include "tfb/balance_metrics.hpp"
#include "tfb/dataset.hpp"
#include "tfb/outcome_models.hpp"
#include "tfb/tfb_solver.hpp"
#include "tfb/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tfb {

/// Outcome regressions per group: control for ATT, treated for ATC, both
/// for ATE.
struct OutcomeFits {
  std::optional<OutcomeModelFit> control;
  std::optional<OutcomeModelFit> treated;
};

/// Uniform weights for both groups of `data`.
GroupWeights uniform_weights(const Dataset& data);

/// Weighted difference in means.
///   ATT: mean_t(Y) - (1/n_c) sum_c w Y
///   ATC: (1/n_t) sum_t w Y - mean_c(Y)
///   ATE: (1/n_t) sum_t w Y - (1/n_c) sum_c w Y
double wdim(const Dataset& data, const GroupWeights& weights, Estimand estimand);

/// wdim minus the imbalance in the fitted values f_hat(X).
double augmented(const Dataset& data, const GroupWeights& weights, const OutcomeFits& fits,
                 Estimand estimand);

/// Plug-in asymptotic variance of `point` (the wdim estimate).
///   ATT: (1/n_t^2) sum_t (Y - f0 - tau)^2 + (1/n_c^2) sum_c w^2 (Y - f0)^2
///   ATC: (1/n_c^2) sum_c (f1 - Y - tau)^2 + (1/n_t^2) sum_t w^2 (Y - f1)^2
///   ATE: (1/n^2) sum (f1 - f0 - tau)^2 + (1/n_c^2) sum_c w^2 (Y - f0)^2
///        + (1/n_t^2) sum_t w^2 (Y - f1)^2
double variance_hat(const Dataset& data, const GroupWeights& weights, const OutcomeFits& fits,
                    double point, Estimand estimand);

/// point -/+ Phi^{-1}((1 + gamma) / 2) sqrt(variance).
std::pair<double, double> confidence_interval(double point, double variance, double gamma);

/// Fits the models `estimand` needs on the matching groups of `train`.
OutcomeFits fit_group_models(const Dataset& train, const ModelSpec& spec, Estimand estimand);

/// Evaluates each fit's feature map on `covariates`.
BalanceModels balance_models(const OutcomeFits& fits, const Matrix& covariates);

struct TfbConfig {
  ModelSpec model;
  double q = 0.95;
  Estimand estimand = Estimand::ATT;
  SolverConfig solver;
};

/// TFB weights and estimates on one sample, using outcome fits obtained
/// elsewhere (or on the same sample).
struct FoldResult {
  GroupWeights weights;
  double point = 0.0;
  double variance = 0.0;
  double augmented_point = 0.0;
  double ewc_bias = 0.0;
  TfiReport tfi;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double ress_control = 1.0;
  double ress_treated = 1.0;
};

FoldResult tfb_on_sample(const Dataset& sample, const OutcomeFits& fits, const TfbConfig& config);

/// Fits on `data` and weights the same units (no sample splitting).
FoldResult tfb_in_sample(const Dataset& data, const TfbConfig& config);

/// One cross-fit split: folds[k] holds the internal rows (of the full
/// sample) of fold k, and fold_results[k] the estimate on fold k using the
/// fit from the other fold.
struct SplitResult {
  std::uint64_t seed = 0;
  FoldAssignment assignment;
  FoldResult fold_results[2];
  std::vector<Index> folds[2];
  double point = 0.0;     // (tau1 + tau2) / 2
  double variance = 0.0;  // V1 / 4 + V2 / 4
  double augmented_point = 0.0;
  bool converged = true;
};

SplitResult cross_fit_estimate(const Dataset& data, const TfbConfig& config, std::uint64_t seed);

struct MedianAggregate {
  double point = 0.0;
  double variance = 0.0;
};

/// Median of the split points (mean of the two central values for an even
/// count); variance = median over splits of V_s + (tau_s - tau_med)^2 / n.
MedianAggregate median_aggregate(const std::vector<double>& points,
                                 const std::vector<double>& variances, Index n);

double median(std::vector<double> values);

struct ImbalanceRow {
  std::string name;
  double pre = 0.0;   // unweighted mean difference / sd
  double post = 0.0;  // weighted mean difference / sd, averaged over folds
};

struct EstimateConfig {
  TfbConfig tfb;
  int splits = 100;
  std::uint64_t seed = 0;
  double gamma = 0.95;
};

struct EstimateReport {
  Estimand estimand = Estimand::ATT;
  Index n_control = 0;
  Index n_treated = 0;
  double point = 0.0;
  double variance = 0.0;
  double gamma = 0.95;
  std::pair<double, double> ci{0.0, 0.0};
  double augmented_point = 0.0;
  double ress_control = 1.0;  // mean over fold solves
  double ress_treated = 1.0;
  std::vector<ImbalanceRow> imbalance_table;
  std::vector<SplitResult> splits;
  int unconverged_solves = 0;
};

/// Mean difference (treated minus control) of each covariate after
/// weighting, scaled by the full-sample sd. Groups an estimand does not
/// weight enter unweighted.
Vector weighted_mean_difference(const Dataset& data, const GroupWeights& weights);

/// Runs `splits` cross-fit splits (split s uses seed + s) in parallel and
/// median-aggregates them.
EstimateReport run_estimate(const Dataset& data, const EstimateConfig& config);

}  // namespace tfb
