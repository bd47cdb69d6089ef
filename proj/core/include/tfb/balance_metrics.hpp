#pragma once

#include "tfb/outcome_models.hpp"
#include "tfb/types.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace tfb {

enum class ImbalanceSide { Single, AteControl, AteTreated };

std::string_view to_string(ImbalanceSide s);

struct ImbalanceVector {
  Vector values;
  Estimand estimand = Estimand::ATT;
  ImbalanceSide side = ImbalanceSide::Single;
};

/// Imbalance of the columns of `design` (rows in control-first order, the
/// first n_control of them controls). `weights` covers the weighted group:
/// controls for ATT and the ATE control side, treated units for ATC and
/// the ATE treated side.
///   ATT:       mean_t(G) - (1/n_c) sum_c w G
///   ATC:       (1/n_t) sum_t w G - mean_c(G)
///   ATE, d:    mean_all(G) - (1/n_d) sum_{D=d} w G
ImbalanceVector imbalance(const Vector& weights, const Matrix& design, Index n_control,
                          Estimand estimand, ImbalanceSide side = ImbalanceSide::Single);

/// sqrt(Q_q(chi2_df)) * ||V^{1/2} imbal|| + |imbal' beta|, V^{1/2} the
/// symmetric PSD root of `coef_covariance`.
struct TfiTerm {
  ImbalanceSide side = ImbalanceSide::Single;
  Vector imbalance;
  double chi_sq_term = 0.0;
  double prediction_term = 0.0;
  double total = 0.0;
};

TfiTerm tfi_term(const Vector& imbal, const Matrix& coef_covariance, const Vector& beta, double q,
                 long df);

struct TfiReport {
  Estimand estimand = Estimand::ATT;
  double q = 0.95;
  std::vector<TfiTerm> sides;  // one entry, or control then treated for ATE
  double chi_sq_term = 0.0;
  double prediction_term = 0.0;
  double total = 0.0;
};

/// Design matrix of a fitted outcome model evaluated on every unit of a
/// sample (control-first rows).
struct FittedDesign {
  Matrix design;
  OutcomeModelFit fit;
};

/// The models an estimand needs: control fit for ATT, treated fit for
/// ATC, both for ATE.
struct BalanceModels {
  std::optional<FittedDesign> control;
  std::optional<FittedDesign> treated;
};

/// Evaluates each fit's feature map on `covariates` (control-first).
FittedDesign make_fitted_design(const OutcomeModelFit& fit, const Matrix& covariates);

TfiReport tfi(const GroupWeights& weights, const BalanceModels& models, Index n_control, double q,
              Estimand estimand);

/// Signed estimate of the weighting bias: imbal' beta for ATT and ATC;
/// imbal_0' beta_0 - imbal_1' beta_1 for ATE.
double ewc_bias_estimate(const GroupWeights& weights, const BalanceModels& models, Index n_control,
                         Estimand estimand);

/// (sum w)^2 / (n_g sum w^2).
double ress(const Vector& weights);

}  // namespace tfb
