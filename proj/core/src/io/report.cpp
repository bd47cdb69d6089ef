#include "tfb/io/report.hpp"

#include "tfb/io/csv.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace tfb::io {

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fold_json(const FoldResult& f, int fold, const std::vector<Index>& rows, Index n_control) {
  Index nc = 0;
  for (Index i : rows) nc += i < n_control ? 1 : 0;
  return {{"fold", fold},
          {"n_control", nc},
          {"n_treated", static_cast<Index>(rows.size()) - nc},
          {"point", number(f.point)},
          {"variance", number(f.variance)},
          {"augmented_point", number(f.augmented_point)},
          {"ewc_bias", number(f.ewc_bias)},
          {"tfi", to_json(f.tfi)},
          {"objective", number(f.objective)},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"ress_control", number(f.ress_control)},
          {"ress_treated", number(f.ress_treated)}};
}

}  // namespace

json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

json to_json(const SolverConfig& c) {
  return {{"max_iters", c.max_iters},
          {"tol", c.tol},
          {"patience", c.patience},
          {"epsilon_scale", c.epsilon_scale},
          {"trace_length", c.trace_length}};
}

json to_json(const TfiReport& r) {
  json sides = json::array();
  for (const auto& s : r.sides) {
    sides.push_back({{"side", to_string(s.side)},
                     {"chi_sq_term", number(s.chi_sq_term)},
                     {"prediction_term", number(s.prediction_term)},
                     {"total", number(s.total)},
                     {"imbalance", to_json(s.imbalance)}});
  }
  return {{"estimand", to_string(r.estimand)},
          {"q", r.q},
          {"chi_sq_term", number(r.chi_sq_term)},
          {"prediction_term", number(r.prediction_term)},
          {"total", number(r.total)},
          {"sides", sides}};
}

json to_json(const std::vector<ImbalanceRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) {
    a.push_back({{"covariate", r.name}, {"pre", number(r.pre)}, {"post", number(r.post)}});
  }
  return a;
}

json to_json(const MonteCarloConfig& c) {
  return {{"dgp", c.dgp},
          {"n", c.n},
          {"replicates", c.replicates},
          {"methods", c.methods},
          {"seed", c.seed},
          {"estimand", to_string(c.estimand)},
          {"q", c.q},
          {"gamma", c.gamma},
          {"bandwidth", c.bandwidth > 0.0 ? json(c.bandwidth) : json(nullptr)},
          {"bootstrap_reps", c.bootstrap_reps},
          {"cv_folds", c.cv_folds},
          {"solver", to_json(c.solver)},
          {"abal_delta", c.abal_delta ? to_json(*c.abal_delta) : json(nullptr)},
          {"abal_zeta", c.abal_zeta},
          {"keep_replicates", c.keep_replicates}};
}

json to_json(const MethodMetrics& m, const std::vector<std::string>& tracked) {
  json leftover = json::object();
  for (std::size_t j = 0; j < tracked.size() && static_cast<Index>(j) < m.leftover.size(); ++j) {
    leftover[tracked[j]] = number(m.leftover(static_cast<Index>(j)));
  }
  return {{"method", m.method},
          {"successes", m.successes},
          {"failures", m.failures},
          {"unconverged", m.unconverged},
          {"bias", number(m.bias)},
          {"rmse", number(m.rmse)},
          {"ress", number(m.ress)},
          {"leftover_imbalance", leftover},
          {"coverage", m.coverage ? number(*m.coverage) : json(nullptr)},
          {"split_correlation", m.split_correlation ? number(*m.split_correlation) : json(nullptr)}};
}

json to_json(const MetricsReport& r) {
  json initial = json::object();
  for (std::size_t j = 0; j < r.tracked.size(); ++j) {
    initial[r.tracked[j]] = number(r.initial_imbalance(static_cast<Index>(j)));
  }
  json methods = json::array();
  for (const auto& m : r.methods) methods.push_back(to_json(m, r.tracked));
  return {{"tracked", r.tracked}, {"initial_imbalance", initial}, {"methods", methods}};
}

json to_json(const EstimateReport& r) {
  json splits = json::array();
  for (std::size_t s = 0; s < r.splits.size(); ++s) {
    const auto& sp = r.splits[s];
    json folds = json::array();
    for (int k = 0; k < 2; ++k) folds.push_back(fold_json(sp.fold_results[k], k, sp.folds[k], r.n_control));
    splits.push_back({{"split", s},
                      {"seed", sp.seed},
                      {"point", number(sp.point)},
                      {"variance", number(sp.variance)},
                      {"augmented_point", number(sp.augmented_point)},
                      {"converged", sp.converged},
                      {"folds", folds}});
  }
  return {{"estimand", to_string(r.estimand)},
          {"n_control", r.n_control},
          {"n_treated", r.n_treated},
          {"point", number(r.point)},
          {"variance", number(r.variance)},
          {"std_error", number(std::sqrt(r.variance))},
          {"gamma", r.gamma},
          {"ci", {number(r.ci.first), number(r.ci.second)}},
          {"augmented_point", number(r.augmented_point)},
          {"ress_control", number(r.ress_control)},
          {"ress_treated", number(r.ress_treated)},
          {"unconverged_solves", r.unconverged_solves},
          {"imbalance_table", to_json(r.imbalance_table)},
          {"splits", splits}};
}

std::vector<ImbalanceRow> imbalance_table(const Dataset& data, const GroupWeights& weights) {
  const Vector pre = weighted_mean_difference(data, uniform_weights(data));
  const Vector post = weighted_mean_difference(data, weights);
  std::vector<ImbalanceRow> rows;
  for (Index j = 0; j < data.p(); ++j) {
    const auto col = data.covariates.col(j);
    const double var =
        (col.array() - col.mean()).square().sum() / static_cast<double>(data.n() - 1);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    rows.push_back({data.column_names[static_cast<std::size_t>(j)], pre(j) / sd, post(j) / sd});
  }
  return rows;
}

void write_replicates_csv(std::ostream& out, const MetricsReport& r) {
  out << "replicate,method,failed,error,estimate,variance,ci_lo,ci_hi,fold_estimate_0,"
         "fold_estimate_1,converged,ress";
  for (const auto& t : r.tracked) out << ",leftover_" << t;
  out << '\n';
  for (const auto& rec : r.replicates) {
    out << rec.replicate << ',' << rec.method << ',' << (rec.failed ? 1 : 0) << ','
        << quote_csv(rec.error) << ',';
    if (rec.failed) {
      out << ",,,,,,,";
      for (std::size_t j = 0; j < r.tracked.size(); ++j) out << ',';
      out << '\n';
      continue;
    }
    out << format_double(rec.estimate) << ',';
    if (rec.has_ci) {
      out << format_double(rec.variance) << ',' << format_double(rec.ci_lo) << ','
          << format_double(rec.ci_hi) << ',' << format_double(rec.fold_estimates[0]) << ','
          << format_double(rec.fold_estimates[1]);
    } else {
      out << ",,,,";
    }
    out << ',' << (rec.converged ? 1 : 0) << ',' << format_double(rec.ress);
    for (Index j = 0; j < static_cast<Index>(r.tracked.size()); ++j) {
      out << ',' << (j < rec.leftover.size() ? format_double(rec.leftover(j)) : "");
    }
    out << '\n';
  }
}

void write_replicates_csv(const std::string& path, const MetricsReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_replicates_csv(out, r);
  if (!out) throw DataError("error writing '" + path + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace tfb::io
