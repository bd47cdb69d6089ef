#pragma once

#include "tfb/balance_metrics.hpp"
#include "tfb/types.hpp"

#include <vector>

namespace tfb {

/// Euclidean projection onto {w >= 0, sum w = total} (sort and threshold).
Vector project_scaled_simplex(const Vector& v, double total);

/// One TFI term: the weighted group's design rows, the mean they are
/// compared against, and the fitted model's coefficients and covariance
/// factor. The imbalance is target - rows' w / n_g (the ATC sign flip
/// leaves the TFI value unchanged).
struct TfbTerm {
  int group = 0;  // 0: control weights, 1: treated weights
  Matrix rows;
  Vector target;
  Vector beta;
  Matrix cov_factor;  // R with R'R = V
  long df = 1;
};

struct TfbProblem {
  Estimand estimand = Estimand::ATT;
  Index n_control = 0;
  Index n_treated = 0;
  double q = 0.95;
  std::vector<TfbTerm> terms;
  double sigma2_control = 0.0;
  double sigma2_treated = 0.0;

  bool weights_control() const { return estimand != Estimand::ATC; }
  bool weights_treated() const { return estimand != Estimand::ATT; }
};

/// Builds the program from fitted designs evaluated on the problem
/// sample; residual variances are taken from the fits.
TfbProblem make_tfb_problem(const BalanceModels& models, Index n_control, double q,
                            Estimand estimand);

struct SolverConfig {
  int max_iters = 50000;
  double tol = 1e-10;  // relative objective decrease
  int patience = 10;   // consecutive small-decrease iterations
  double epsilon_scale = 1e-8;
  std::size_t trace_length = 100;
};

struct WeightSolution {
  GroupWeights weights;
  double objective = 0.0;  // exact objective at the returned weights
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double smoothing_epsilon = 0.0;  // largest per-term smoothing constant
};

/// (sum of TFI terms)^2 + sum_g sigma2_g / n_g^2 * ||w_g||^2, unsmoothed.
double tfb_objective(const GroupWeights& weights, const TfbProblem& problem);

/// Smoothed accelerated projected gradient from uniform weights.
WeightSolution solve(const TfbProblem& problem, const SolverConfig& config = {});

}  // namespace tfb
