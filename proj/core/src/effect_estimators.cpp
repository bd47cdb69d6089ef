#include "tfb/effect_estimators.hpp"

#include "tfb/parallel.hpp"
#include "tfb/quantiles.hpp"
#include "tfb/random.hpp"

#include <algorithm>
#include <cmath>

namespace tfb {

namespace {

void check_weights(const Dataset& data, const GroupWeights& w) {
  if (w.control.size() != data.n_control || w.treated.size() != data.n_treated) {
    throw DataError("weight vectors do not match the group sizes (" +
                    std::to_string(w.control.size()) + "/" + std::to_string(w.treated.size()) +
                    " vs " + std::to_string(data.n_control) + "/" +
                    std::to_string(data.n_treated) + ")");
  }
}

const OutcomeModelFit& need(const std::optional<OutcomeModelFit>& fit, const char* group) {
  if (!fit) throw UsageError(std::string("estimand needs a ") + group + "-group outcome model");
  return *fit;
}

// Weighted group means of v, with the unweighted group using its ones.
double weighted_control_mean(const Dataset& data, const Vector& w, const Vector& v) {
  return w.dot(v.head(data.n_control)) / static_cast<double>(data.n_control);
}

double weighted_treated_mean(const Dataset& data, const Vector& w, const Vector& v) {
  return w.dot(v.tail(data.n_treated)) / static_cast<double>(data.n_treated);
}

}  // namespace

GroupWeights uniform_weights(const Dataset& data) {
  return {Vector::Ones(data.n_control), Vector::Ones(data.n_treated)};
}

double wdim(const Dataset& data, const GroupWeights& weights, Estimand estimand) {
  check_weights(data, weights);
  const Vector ones_c = Vector::Ones(data.n_control), ones_t = Vector::Ones(data.n_treated);
  const Vector& wc = estimand == Estimand::ATC ? ones_c : weights.control;
  const Vector& wt = estimand == Estimand::ATT ? ones_t : weights.treated;
  return weighted_treated_mean(data, wt, data.outcomes) -
         weighted_control_mean(data, wc, data.outcomes);
}

double augmented(const Dataset& data, const GroupWeights& weights, const OutcomeFits& fits,
                 Estimand estimand) {
  const double tau = wdim(data, weights, estimand);
  const Vector ones_c = Vector::Ones(data.n_control), ones_t = Vector::Ones(data.n_treated);
  switch (estimand) {
    case Estimand::ATT: {
      const Vector f0 = predict(need(fits.control, "control"), data.covariates);
      return tau - (weighted_treated_mean(data, ones_t, f0) -
                    weighted_control_mean(data, weights.control, f0));
    }
    case Estimand::ATC: {
      const Vector f1 = predict(need(fits.treated, "treated"), data.covariates);
      return tau - (weighted_treated_mean(data, weights.treated, f1) -
                    weighted_control_mean(data, ones_c, f1));
    }
    case Estimand::ATE: {
      const Vector f0 = predict(need(fits.control, "control"), data.covariates);
      const Vector f1 = predict(need(fits.treated, "treated"), data.covariates);
      const double imbal0 = f0.mean() - weighted_control_mean(data, weights.control, f0);
      const double imbal1 = f1.mean() - weighted_treated_mean(data, weights.treated, f1);
      return tau + imbal1 - imbal0;
    }
  }
  return tau;
}

double variance_hat(const Dataset& data, const GroupWeights& weights, const OutcomeFits& fits,
                    double point, Estimand estimand) {
  check_weights(data, weights);
  const auto nc = static_cast<double>(data.n_control), nt = static_cast<double>(data.n_treated);
  const auto yc = data.control_outcomes();
  const auto yt = data.treated_outcomes();
  switch (estimand) {
    case Estimand::ATT: {
      const Vector f0 = predict(need(fits.control, "control"), data.covariates);
      const double treated = ((yt - f0.tail(data.n_treated)).array() - point).square().sum();
      const double control =
          (weights.control.array().square() * (yc - f0.head(data.n_control)).array().square()).sum();
      return treated / (nt * nt) + control / (nc * nc);
    }
    case Estimand::ATC: {
      const Vector f1 = predict(need(fits.treated, "treated"), data.covariates);
      const double control = ((f1.head(data.n_control) - yc).array() - point).square().sum();
      const double treated =
          (weights.treated.array().square() * (yt - f1.tail(data.n_treated)).array().square()).sum();
      return control / (nc * nc) + treated / (nt * nt);
    }
    case Estimand::ATE: {
      const Vector f0 = predict(need(fits.control, "control"), data.covariates);
      const Vector f1 = predict(need(fits.treated, "treated"), data.covariates);
      const auto n = static_cast<double>(data.n());
      const double effect = ((f1 - f0).array() - point).square().sum();
      const double control =
          (weights.control.array().square() * (yc - f0.head(data.n_control)).array().square()).sum();
      const double treated =
          (weights.treated.array().square() * (yt - f1.tail(data.n_treated)).array().square()).sum();
      return effect / (n * n) + control / (nc * nc) + treated / (nt * nt);
    }
  }
  return 0.0;
}

std::pair<double, double> confidence_interval(double point, double variance, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
  if (!(variance >= 0.0)) throw NumericalError("variance must be nonnegative");
  const double half = normal_quantile(0.5 * (1.0 + gamma)) * std::sqrt(variance);
  return {point - half, point + half};
}

OutcomeFits fit_group_models(const Dataset& train, const ModelSpec& spec, Estimand estimand) {
  OutcomeFits fits;
  if (estimand != Estimand::ATC) {
    fits.control = fit_outcome(train.control_covariates(), train.control_outcomes(), spec);
  }
  if (estimand != Estimand::ATT) {
    ModelSpec treated_spec = spec;
    treated_spec.cv.seed = derive_seed(spec.cv.seed, 1);
    fits.treated = fit_outcome(train.treated_covariates(), train.treated_outcomes(), treated_spec);
  }
  return fits;
}

BalanceModels balance_models(const OutcomeFits& fits, const Matrix& covariates) {
  BalanceModels m;
  if (fits.control) m.control = make_fitted_design(*fits.control, covariates);
  if (fits.treated) m.treated = make_fitted_design(*fits.treated, covariates);
  return m;
}

FoldResult tfb_on_sample(const Dataset& sample, const OutcomeFits& fits, const TfbConfig& config) {
  const Estimand e = config.estimand;
  const BalanceModels models = balance_models(fits, sample.covariates);
  const TfbProblem problem = make_tfb_problem(models, sample.n_control, config.q, e);
  WeightSolution sol = solve(problem, config.solver);

  FoldResult r;
  r.weights = std::move(sol.weights);
  r.objective = sol.objective;
  r.iterations = sol.iterations;
  r.converged = sol.converged;
  r.point = wdim(sample, r.weights, e);
  r.variance = variance_hat(sample, r.weights, fits, r.point, e);
  r.augmented_point = augmented(sample, r.weights, fits, e);
  r.ewc_bias = ewc_bias_estimate(r.weights, models, sample.n_control, e);
  r.tfi = tfi(r.weights, models, sample.n_control, config.q, e);
  if (problem.weights_control()) r.ress_control = ress(r.weights.control);
  if (problem.weights_treated()) r.ress_treated = ress(r.weights.treated);
  return r;
}

FoldResult tfb_in_sample(const Dataset& data, const TfbConfig& config) {
  return tfb_on_sample(data, fit_group_models(data, config.model, config.estimand), config);
}

SplitResult cross_fit_estimate(const Dataset& data, const TfbConfig& config, std::uint64_t seed) {
  SplitResult s;
  s.seed = seed;
  s.assignment = split_sample(data, seed);
  Dataset parts[2];
  for (int k = 0; k < 2; ++k) {
    for (Index i = 0; i < data.n(); ++i) {
      if (s.assignment.fold_of_unit[static_cast<std::size_t>(i)] == k) s.folds[k].push_back(i);
    }
    parts[k] = subset(data, s.folds[k]);
  }
  for (int k = 0; k < 2; ++k) {
    TfbConfig fold_config = config;
    fold_config.model.cv.seed = derive_seed(seed, 0xF0 + static_cast<std::uint64_t>(k));
    const OutcomeFits fits = fit_group_models(parts[1 - k], fold_config.model, config.estimand);
    s.fold_results[k] = tfb_on_sample(parts[k], fits, fold_config);
  }
  s.point = 0.5 * (s.fold_results[0].point + s.fold_results[1].point);
  s.variance = 0.25 * s.fold_results[0].variance + 0.25 * s.fold_results[1].variance;
  s.augmented_point =
      0.5 * (s.fold_results[0].augmented_point + s.fold_results[1].augmented_point);
  s.converged = s.fold_results[0].converged && s.fold_results[1].converged;
  return s;
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

MedianAggregate median_aggregate(const std::vector<double>& points,
                                 const std::vector<double>& variances, Index n) {
  if (points.empty()) throw UsageError("median aggregation needs at least one split");
  if (points.size() != variances.size()) throw UsageError("points and variances differ in length");
  if (n < 1) throw UsageError("sample size must be positive");
  MedianAggregate out;
  out.point = median(points);
  std::vector<double> adjusted(points.size());
  for (std::size_t s = 0; s < points.size(); ++s) {
    const double d = points[s] - out.point;
    adjusted[s] = variances[s] + d * d / static_cast<double>(n);
  }
  out.variance = median(std::move(adjusted));
  return out;
}

Vector weighted_mean_difference(const Dataset& data, const GroupWeights& weights) {
  check_weights(data, weights);
  return data.treated_covariates().transpose() * weights.treated /
             static_cast<double>(data.n_treated) -
         data.control_covariates().transpose() * weights.control /
             static_cast<double>(data.n_control);
}

EstimateReport run_estimate(const Dataset& data, const EstimateConfig& config) {
  if (config.splits < 1) throw UsageError("need at least one split");
  EstimateReport report;
  report.estimand = config.tfb.estimand;
  report.n_control = data.n_control;
  report.n_treated = data.n_treated;
  report.gamma = config.gamma;
  report.splits.resize(static_cast<std::size_t>(config.splits));
  parallel_for(report.splits.size(), [&](std::size_t s) {
    report.splits[s] = cross_fit_estimate(data, config.tfb, config.seed + s);
  });

  std::vector<double> points, variances, aug;
  for (const auto& s : report.splits) {
    points.push_back(s.point);
    variances.push_back(s.variance);
    aug.push_back(s.augmented_point);
  }
  const MedianAggregate agg = median_aggregate(points, variances, data.n());
  report.point = agg.point;
  report.variance = agg.variance;
  report.ci = confidence_interval(agg.point, agg.variance, config.gamma);
  report.augmented_point = median(aug);

  const Index p = data.p();
  Vector sd(p);
  for (Index j = 0; j < p; ++j) {
    const auto col = data.covariates.col(j);
    const double var = (col.array() - col.mean()).square().sum() / static_cast<double>(data.n() - 1);
    sd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  const Vector pre = weighted_mean_difference(data, uniform_weights(data));
  Vector post = Vector::Zero(p);
  double ress_c = 0.0, ress_t = 0.0;
  int solves = 0;
  for (const auto& s : report.splits) {
    for (int k = 0; k < 2; ++k) {
      const Dataset part = subset(data, s.folds[k]);
      post += weighted_mean_difference(part, s.fold_results[k].weights);
      ress_c += s.fold_results[k].ress_control;
      ress_t += s.fold_results[k].ress_treated;
      if (!s.fold_results[k].converged) ++report.unconverged_solves;
      ++solves;
    }
  }
  post /= static_cast<double>(solves);
  report.ress_control = ress_c / solves;
  report.ress_treated = ress_t / solves;
  for (Index j = 0; j < p; ++j) {
    report.imbalance_table.push_back(
        {data.column_names[static_cast<std::size_t>(j)], pre(j) / sd(j), post(j) / sd(j)});
  }
  return report;
}

}  // namespace tfb
