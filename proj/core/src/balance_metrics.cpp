#include "tfb/balance_metrics.hpp"

#include "tfb/linalg.hpp"
#include "tfb/quantiles.hpp"

#include <cmath>
#include <sstream>

namespace tfb {

std::string_view to_string(ImbalanceSide s) {
  switch (s) {
    case ImbalanceSide::Single: return "single";
    case ImbalanceSide::AteControl: return "ate_control";
    case ImbalanceSide::AteTreated: return "ate_treated";
  }
  return "single";
}

ImbalanceVector imbalance(const Vector& weights, const Matrix& design, Index n_control,
                          Estimand estimand, ImbalanceSide side) {
  const Index n = design.rows();
  const Index n_treated = n - n_control;
  if (n_control < 1 || n_treated < 1) throw DataError("imbalance needs both groups");
  if ((estimand == Estimand::ATE) != (side != ImbalanceSide::Single)) {
    throw UsageError("ATE imbalance needs a side; ATT and ATC do not take one");
  }
  const bool weights_control =
      estimand == Estimand::ATT || side == ImbalanceSide::AteControl;
  const Index n_w = weights_control ? n_control : n_treated;
  if (weights.size() != n_w) {
    std::ostringstream msg;
    msg << "weight vector has length " << weights.size() << ", weighted group has " << n_w
        << " units";
    throw DataError(msg.str());
  }
  const auto block = weights_control ? design.topRows(n_control) : design.bottomRows(n_treated);
  const Vector weighted = block.transpose() * weights / static_cast<double>(n_w);

  ImbalanceVector out;
  out.estimand = estimand;
  out.side = side;
  switch (estimand) {
    case Estimand::ATT:
      out.values = design.bottomRows(n_treated).colwise().mean().transpose() - weighted;
      break;
    case Estimand::ATC:
      out.values = weighted - design.topRows(n_control).colwise().mean().transpose();
      break;
    case Estimand::ATE:
      out.values = design.colwise().mean().transpose() - weighted;
      break;
  }
  return out;
}

TfiTerm tfi_term(const Vector& imbal, const Matrix& coef_covariance, const Vector& beta, double q,
                 long df) {
  if (imbal.size() != beta.size() || coef_covariance.rows() != beta.size()) {
    throw DataError("TFI inputs have inconsistent dimensions");
  }
  TfiTerm t;
  t.imbalance = imbal;
  t.chi_sq_term = std::sqrt(chi_sq_quantile(q, df)) * (symmetric_psd_sqrt(coef_covariance) * imbal).norm();
  t.prediction_term = std::abs(imbal.dot(beta));
  t.total = t.chi_sq_term + t.prediction_term;
  return t;
}

FittedDesign make_fitted_design(const OutcomeModelFit& fit, const Matrix& covariates) {
  return FittedDesign{fit.feature_map.design(covariates), fit};
}

namespace {

struct SideSpec {
  ImbalanceSide side;
  const FittedDesign* model;
  const Vector* weights;
};

std::vector<SideSpec> sides_for(const GroupWeights& w, const BalanceModels& m, Estimand e) {
  auto need = [](const std::optional<FittedDesign>& d, const char* what) {
    if (!d) throw UsageError(std::string("estimand needs a ") + what + "-group outcome model");
    return &*d;
  };
  switch (e) {
    case Estimand::ATT: return {{ImbalanceSide::Single, need(m.control, "control"), &w.control}};
    case Estimand::ATC: return {{ImbalanceSide::Single, need(m.treated, "treated"), &w.treated}};
    case Estimand::ATE:
      return {{ImbalanceSide::AteControl, need(m.control, "control"), &w.control},
              {ImbalanceSide::AteTreated, need(m.treated, "treated"), &w.treated}};
  }
  return {};
}

}  // namespace

TfiReport tfi(const GroupWeights& weights, const BalanceModels& models, Index n_control, double q,
              Estimand estimand) {
  TfiReport report;
  report.estimand = estimand;
  report.q = q;
  for (const auto& s : sides_for(weights, models, estimand)) {
    const Vector imbal =
        imbalance(*s.weights, s.model->design, n_control, estimand, s.side).values;
    TfiTerm term = tfi_term(imbal, s.model->fit.coef_covariance, s.model->fit.coefficients, q,
                            static_cast<long>(s.model->fit.df()));
    term.side = s.side;
    report.chi_sq_term += term.chi_sq_term;
    report.prediction_term += term.prediction_term;
    report.sides.push_back(std::move(term));
  }
  report.total = report.chi_sq_term + report.prediction_term;
  return report;
}

double ewc_bias_estimate(const GroupWeights& weights, const BalanceModels& models, Index n_control,
                         Estimand estimand) {
  double bias = 0.0;
  for (const auto& s : sides_for(weights, models, estimand)) {
    const Vector imbal =
        imbalance(*s.weights, s.model->design, n_control, estimand, s.side).values;
    const double v = imbal.dot(s.model->fit.coefficients);
    bias += s.side == ImbalanceSide::AteTreated ? -v : v;
  }
  return bias;
}

double ress(const Vector& weights) {
  const double s = weights.sum();
  const double s2 = weights.squaredNorm();
  if (weights.size() == 0 || !(s2 > 0.0)) throw DataError("RESS needs weights that are not all zero");
  if (weights.minCoeff() < 0.0) throw DataError("RESS needs nonnegative weights");
  return s * s / (static_cast<double>(weights.size()) * s2);
}

}  // namespace tfb
