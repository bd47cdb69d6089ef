#include "tfb/simulation.hpp"

#include "tfb/baselines.hpp"
#include "tfb/parallel.hpp"
#include "tfb/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace tfb {

namespace {

constexpr double kCenters[4][2] = {{0.0, 0.0}, {0.0, 5.0}, {5.0, 0.0}, {5.0, 5.0}};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Reorders raw per-unit quantities into the dataset's internal order.
Vector internal_order(const Dataset& data, const Vector& raw) {
  Vector out(raw.size());
  for (Index i = 0; i < raw.size(); ++i) out(i) = raw(data.input_index[static_cast<std::size_t>(i)]);
  return out;
}

Matrix internal_order(const Dataset& data, const Matrix& raw) {
  Matrix out(raw.rows(), raw.cols());
  for (Index i = 0; i < raw.rows(); ++i) out.row(i) = raw.row(data.input_index[static_cast<std::size_t>(i)]);
  return out;
}

void check_n(Index n) {
  if (n < 8) throw UsageError("simulated samples need n >= 8");
}

}  // namespace

DgpDraw draw_dgp1(Index n, std::uint64_t seed) {
  check_n(n);
  Rng rng(seed);
  Matrix X(n, 2), Z(n, 4);
  Vector y(n), d(n), f0(n), pi(n);
  Eigen::VectorXi cluster(n);
  const double noise_sd = std::sqrt(1.5);
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.index(4));
    cluster(i) = c;
    X(i, 0) = kCenters[c][0] + rng.normal();
    X(i, 1) = kCenters[c][1] + rng.normal();
    for (int l = 0; l < 4; ++l) {
      const double dx = X(i, 0) - kCenters[l][0], dy = X(i, 1) - kCenters[l][1];
      Z(i, l) = 1.0 / (std::sqrt(dx * dx + dy * dy) + 1.0);
    }
    const double slope = c == 0 ? 4.0 : 20.0;
    pi(i) = logistic(slope * (Z(i, c) - 0.47));
    d(i) = rng.bernoulli(pi(i)) ? 1.0 : 0.0;
    f0(i) = 10.0 * Z(i, 0) + Z(i, 1) + Z(i, 2) + Z(i, 3);
    y(i) = f0(i) + noise_sd * rng.normal();
  }
  DgpDraw draw;
  draw.dgp = 1;
  draw.data = validate(y, d, X);
  draw.f0 = internal_order(draw.data, f0);
  draw.propensity = internal_order(draw.data, pi);
  draw.latent = internal_order(draw.data, Z);
  Eigen::VectorXi cl(n);
  for (Index i = 0; i < n; ++i) cl(i) = cluster(draw.data.input_index[static_cast<std::size_t>(i)]);
  draw.cluster = cl;
  return draw;
}

DgpDraw draw_dgp2(Index n, std::uint64_t seed) {
  check_n(n);
  Rng rng(seed);
  Matrix X(n, 19);
  Vector y(n), d(n), f0(n), pi(n);
  for (Index i = 0; i < n; ++i) {
    double z[4];
    for (double& v : z) v = rng.normal();
    pi(i) = logistic(0.2 * (z[0] + z[1] + z[2] + z[3]));
    const bool treated = rng.bernoulli(pi(i));
    d(i) = treated ? 1.0 : 0.0;
    for (int j = 0; j < 4; ++j) X(i, j) = z[j];
    for (int j = 0; j < 5; ++j) X(i, 4 + j) = (treated ? 1.0 : 0.0) + rng.normal();
    for (int j = 0; j < 10; ++j) X(i, 9 + j) = rng.normal();
    f0(i) = 8.0 * z[0] + 4.0 * z[1] + 2.0 * z[2] + z[3];
    y(i) = f0(i) + 9.21 * rng.normal();
  }
  std::vector<std::string> names;
  for (int j = 1; j <= 4; ++j) names.push_back("z" + std::to_string(j));
  for (int j = 1; j <= 5; ++j) names.push_back("a" + std::to_string(j));
  for (int j = 1; j <= 10; ++j) names.push_back("u" + std::to_string(j));
  DgpDraw draw;
  draw.dgp = 2;
  draw.data = validate(y, d, X, names);
  draw.f0 = internal_order(draw.data, f0);
  draw.propensity = internal_order(draw.data, pi);
  draw.latent = draw.data.covariates.leftCols(4);
  return draw;
}

DgpDraw draw_dgp(int dgp, Index n, std::uint64_t seed) {
  if (dgp == 1) return draw_dgp1(n, seed);
  if (dgp == 2) return draw_dgp2(n, seed);
  throw UsageError("unknown dgp " + std::to_string(dgp) + " (supported: 1, 2)");
}

std::vector<std::string> tracked_variable_names(int dgp) {
  std::vector<std::string> names{"z1", "z2", "z3", "z4", "z2_z4_mean"};
  if (dgp == 2) names.push_back("distractor_mean");
  return names;
}

Matrix tracked_variables(const DgpDraw& draw) {
  const Index n = draw.data.n();
  Matrix T(n, draw.dgp == 2 ? 6 : 5);
  T.leftCols(4) = draw.latent;
  T.col(4) = draw.latent.rightCols(3).rowwise().mean();
  if (draw.dgp == 2) T.col(5) = draw.data.covariates.middleCols(4, 5).rowwise().mean();
  return T;
}

const std::vector<std::string>& supported_methods() {
  static const std::vector<std::string> methods{
      "dim", "ebal", "abal1", "oracle_ps", "tfb_k", "tfb_l", "tfb_ols",
      "tfb_k_aug", "tfb_l_aug", "tfb_ols_aug"};
  return methods;
}

const MethodMetrics& MetricsReport::metrics(const std::string& method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw UsageError("method '" + method + "' was not run");
}

namespace {

Vector tracked_difference(const Matrix& T, Index n_control, const GroupWeights& w) {
  const Index n_treated = T.rows() - n_control;
  return T.bottomRows(n_treated).transpose() * w.treated / static_cast<double>(n_treated) -
         T.topRows(n_control).transpose() * w.control / static_cast<double>(n_control);
}

double weighted_ress(const GroupWeights& w, Estimand e) {
  switch (e) {
    case Estimand::ATT: return ress(w.control);
    case Estimand::ATC: return ress(w.treated);
    case Estimand::ATE: return 0.5 * (ress(w.control) + ress(w.treated));
  }
  return 1.0;
}

Matrix subset_rows(const Matrix& M, const std::vector<Index>& rows) { return M(rows, Eigen::all); }

struct Prepared {
  DgpDraw draw;
  Dataset standardized;
  std::optional<Dataset> expanded;
  Matrix tracked;

  const Dataset& expanded_data() {
    if (!expanded) expanded = standardize_covariates(expand_features(standardized)).first;
    return *expanded;
  }
};

bool is_tfb(const std::string& m) { return m.rfind("tfb_", 0) == 0; }

std::string base_tfb(const std::string& m) {
  return m.size() > 4 && m.compare(m.size() - 4, 4, "_aug") == 0 ? m.substr(0, m.size() - 4) : m;
}

}  // namespace

MetricsReport run_monte_carlo(const MonteCarloConfig& config) {
  if (config.replicates < 1) throw UsageError("need at least one replicate");
  if (config.dgp != 1 && config.dgp != 2) {
    throw UsageError("unknown dgp " + std::to_string(config.dgp) + " (supported: 1, 2)");
  }
  const auto& supported = supported_methods();
  for (const auto& m : config.methods) {
    if (std::find(supported.begin(), supported.end(), m) == supported.end()) {
      std::string list;
      for (const auto& s : supported) list += (list.empty() ? "" : ", ") + s;
      throw UsageError("unknown method '" + m + "' (supported: " + list + ")");
    }
  }
  if (config.methods.empty()) throw UsageError("no methods requested");

  const std::size_t M = static_cast<std::size_t>(config.replicates);
  const std::size_t K = config.methods.size();
  std::vector<std::vector<ReplicateRecord>> records(M);
  std::vector<Vector> initial(M);

  parallel_for(M, [&](std::size_t m) {
    const std::uint64_t rep_seed = config.seed + m;
    Prepared prep;
    prep.draw = draw_dgp(config.dgp, config.n, rep_seed);
    prep.standardized = standardize_covariates(prep.draw.data).first;
    prep.tracked = tracked_variables(prep.draw);
    const Index nc = prep.draw.data.n_control;
    const Estimand e = config.estimand;
    initial[m] = tracked_difference(prep.tracked, nc, uniform_weights(prep.draw.data));

    std::map<std::string, std::pair<SplitResult, std::string>> tfb_runs;
    auto run_tfb = [&](const std::string& name) -> const std::pair<SplitResult, std::string>& {
      auto it = tfb_runs.find(name);
      if (it != tfb_runs.end()) return it->second;
      auto& slot = tfb_runs[name];
      try {
        TfbConfig tc;
        tc.q = config.q;
        tc.estimand = e;
        tc.solver = config.solver;
        tc.model.cv.folds = config.cv_folds;
        tc.model.bootstrap_reps = config.bootstrap_reps;
        const Dataset* sample = &prep.standardized;
        if (name == "tfb_k") {
          tc.model.backend = ModelBackend::KRLS;
          tc.model.bandwidth = config.bandwidth > 0.0 ? config.bandwidth
                               : config.dgp == 1      ? 2.0
                                                      : static_cast<double>(prep.standardized.p());
        } else if (name == "tfb_l") {
          tc.model.backend = ModelBackend::LASSO;
          sample = &prep.expanded_data();
        } else {
          tc.model.backend = ModelBackend::OLS;
        }
        const auto idx = static_cast<std::uint64_t>(
            std::find(supported.begin(), supported.end(), name) - supported.begin());
        slot.first = cross_fit_estimate(*sample, tc, derive_seed(rep_seed, 0x5EED + idx));
      } catch (const std::exception& ex) {
        slot.second = ex.what();
      }
      return slot;
    };

    auto& out = records[m];
    out.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
      const std::string& name = config.methods[k];
      ReplicateRecord& r = out[k];
      r.replicate = static_cast<int>(m);
      r.method = name;
      try {
        if (is_tfb(name)) {
          const auto& [split, error] = run_tfb(base_tfb(name));
          if (!error.empty()) throw NumericalError(error);
          const bool aug = name != base_tfb(name);
          r.estimate = aug ? split.augmented_point : split.point;
          r.variance = split.variance;
          r.has_ci = !aug;
          const auto ci = confidence_interval(split.point, split.variance, config.gamma);
          r.ci_lo = ci.first;
          r.ci_hi = ci.second;
          r.converged = split.converged;
          r.leftover = Vector::Zero(prep.tracked.cols());
          r.ress = 0.0;
          for (int f = 0; f < 2; ++f) {
            const auto& fr = split.fold_results[f];
            const auto& rows = split.folds[f];
            Index fold_nc = 0;
            for (Index i : rows) fold_nc += i < nc ? 1 : 0;
            r.leftover += 0.5 * tracked_difference(subset_rows(prep.tracked, rows), fold_nc, fr.weights);
            r.ress += 0.5 * weighted_ress(fr.weights, e);
            r.fold_estimates[f] = aug ? fr.augmented_point : fr.point;
          }
        } else {
          const Dataset& data = prep.standardized;
          BaselineConfig bc;
          bc.method = parse_baseline(name);
          bc.delta = config.abal_delta;
          bc.implied_delta = true;
          bc.zeta = config.abal_zeta;
          const Matrix& design = bc.method == BaselineMethod::ABAL1 && config.dgp == 2
                                     ? prep.expanded_data().covariates
                                     : data.covariates;
          const GroupWeights w = baseline_weights(design, nc, e, bc, &prep.draw.propensity);
          r.estimate = wdim(data, w, e);
          r.leftover = tracked_difference(prep.tracked, nc, w);
          r.ress = weighted_ress(w, e);
        }
      } catch (const std::exception& ex) {
        r.failed = true;
        r.error = ex.what();
      }
    }
  }, config.workers);

  MetricsReport report;
  report.config = config;
  report.tracked = tracked_variable_names(config.dgp);
  report.initial_imbalance = Vector::Zero(static_cast<Index>(report.tracked.size()));
  for (const auto& v : initial) report.initial_imbalance += v;
  report.initial_imbalance /= static_cast<double>(M);

  for (std::size_t k = 0; k < K; ++k) {
    MethodMetrics mm;
    mm.method = config.methods[k];
    mm.leftover = Vector::Zero(static_cast<Index>(report.tracked.size()));
    double sum = 0.0, sum_sq = 0.0, sum_ress = 0.0;
    int covered = 0, with_ci = 0;
    std::vector<double> fa, fb;
    for (std::size_t m = 0; m < M; ++m) {
      const ReplicateRecord& r = records[m][k];
      if (r.failed) {
        ++mm.failures;
        continue;
      }
      ++mm.successes;
      if (!r.converged) ++mm.unconverged;
      const double err = r.estimate - 0.0;
      sum += err;
      sum_sq += err * err;
      sum_ress += r.ress;
      mm.leftover += r.leftover;
      if (r.has_ci) {
        ++with_ci;
        if (r.ci_lo <= 0.0 && 0.0 <= r.ci_hi) ++covered;
      }
      if (is_tfb(mm.method)) {
        fa.push_back(r.fold_estimates[0]);
        fb.push_back(r.fold_estimates[1]);
      }
    }
    if (mm.successes > 0) {
      const auto s = static_cast<double>(mm.successes);
      mm.bias = sum / s;
      mm.rmse = std::sqrt(sum_sq / s);
      mm.ress = sum_ress / s;
      mm.leftover /= s;
    } else {
      mm.bias = mm.rmse = mm.ress = std::numeric_limits<double>::quiet_NaN();
    }
    if (with_ci > 0) mm.coverage = static_cast<double>(covered) / with_ci;
    if (fa.size() >= 2) mm.split_correlation = sample_correlation(fa, fb);
    report.methods.push_back(std::move(mm));
  }
  if (config.keep_replicates) {
    for (auto& rs : records) {
      for (auto& r : rs) report.replicates.push_back(std::move(r));
    }
  }
  return report;
}

double sample_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw UsageError("correlation needs paired samples");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

double split_correlation(int dgp, Index n, int replicates, std::uint64_t seed,
                         const std::string& method) {
  if (replicates < 30) throw UsageError("split correlation needs at least 30 replicates");
  MonteCarloConfig config;
  config.dgp = dgp;
  config.n = n;
  config.replicates = replicates;
  config.seed = seed;
  config.methods = {method.empty() ? (dgp == 1 ? "tfb_k" : "tfb_l") : method};
  config.keep_replicates = false;
  const MetricsReport report = run_monte_carlo(config);
  const auto& m = report.methods.front();
  if (!m.split_correlation) throw NumericalError("split correlation needs a TFB method");
  return *m.split_correlation;
}

}  // namespace tfb
