#include "tfb/balance_metrics.hpp"
#include "tfb/baselines.hpp"
#include "tfb/effect_estimators.hpp"
#include "tfb/kernels.hpp"
#include "tfb/lasso.hpp"
#include "tfb/outcome_models.hpp"
#include "tfb/quantiles.hpp"
#include "tfb/random.hpp"
#include "tfb/simulation.hpp"
#include "tfb/tfb_solver.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>

using namespace tfb;

namespace {

// Tolerances and Monte Carlo sizes.
constexpr double kOracleRelTol = 1e-4;
constexpr int kOracleGrid = 1000;
constexpr int kEstimationReps = 200;
constexpr double kBiasRatio = 0.25;
constexpr double kRmseRatio = 0.6;
constexpr int kSignatureReps = 200;
constexpr double kLeftoverRatio = 0.5;
constexpr int kCoverageReps = 300;
constexpr double kCoverageLo = 0.90, kCoverageHi = 0.99;
constexpr Index kCalibrationDraws = 100000;
constexpr double kR2Tol = 0.02, kTreatedShareTol = 0.01;
constexpr double kIdentityTol = 1e-10;
constexpr int kAgreementReps = 25;
constexpr double kAgreementRatio = 0.05;
constexpr double kChiResidualTol = 1e-10, kNormalTol = 1e-9;
constexpr std::uint64_t kSeed = 1;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void report(int id, const char* name, const Outcome& o, double seconds) {
  std::printf("criterion %d %s: %s (%s; %.1f s)\n", id, name, o.pass ? "PASS" : "FAIL",
              o.detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

TfbProblem att_problem(const oracle::TfbInstance& inst) {
  TfbProblem p;
  p.estimand = Estimand::ATT;
  p.n_control = inst.rows.rows();
  p.n_treated = 1;
  p.q = inst.q;
  TfbTerm t;
  t.rows = inst.rows;
  t.target = inst.target;
  t.beta = inst.beta;
  t.cov_factor = inst.V.llt().matrixU();
  t.df = static_cast<long>(inst.beta.size());
  p.terms.push_back(t);
  p.sigma2_control = inst.sigma2;
  return p;
}

Outcome solver_oracle() {
  Rng rng(derive_seed(kSeed, 1));
  Outcome o;
  double worst = -1e300, best = 1e300;
  for (int r = 0; r < 25; ++r) {
    const Index nc = 2 + r % 3, P = 1 + (r / 3) % 2;
    oracle::TfbInstance inst;
    inst.rows.resize(nc, P);
    inst.target.resize(P);
    inst.beta.resize(P);
    Matrix L(P, P);
    for (Index i = 0; i < nc; ++i) {
      for (Index j = 0; j < P; ++j) inst.rows(i, j) = rng.normal();
    }
    for (Index j = 0; j < P; ++j) {
      inst.target(j) = 0.5 * rng.normal();
      inst.beta(j) = rng.normal();
      for (Index k = 0; k < P; ++k) L(j, k) = 0.3 * rng.normal();
    }
    inst.V = L * L.transpose() + 0.01 * Matrix::Identity(P, P);
    inst.sigma2 = 0.05 + rng.uniform();
    const WeightSolution s = solve(att_problem(inst));
    const double exact = oracle::tfb_objective(inst, s.weights.control);
    const double grid = oracle::tfb_grid_minimum(inst, kOracleGrid);
    const double rel = (exact - grid) / grid;
    worst = std::max(worst, rel);
    best = std::min(best, rel);
    // a value below the grid minimum is a better feasible point, not an error
    if (rel > kOracleRelTol) o.pass = false;
  }
  o.detail = "relative gap to grid minimum in [" + fmt("%.3g", best) + ", " + fmt("%.3g", worst) +
             "], gate <= " + fmt("%g", kOracleRelTol);
  return o;
}

MetricsReport monte_carlo(int dgp, int reps, std::vector<std::string> methods, Index n = 1000) {
  MonteCarloConfig cfg;
  cfg.dgp = dgp;
  cfg.n = n;
  cfg.replicates = reps;
  cfg.methods = std::move(methods);
  cfg.seed = kSeed;
  return run_monte_carlo(cfg);
}

Outcome estimation_quality() {
  const MetricsReport r = monte_carlo(2, kEstimationReps, {"dim", "abal1", "tfb_l"});
  const auto& dim = r.metrics("dim");
  const auto& abal = r.metrics("abal1");
  const auto& tfb = r.metrics("tfb_l");
  Outcome o;
  o.pass = std::abs(tfb.bias) <= kBiasRatio * std::abs(dim.bias) && tfb.rmse <= kRmseRatio * abal.rmse &&
           tfb.successes > 0 && abal.successes > 0;
  o.detail = "bias tfb_l " + fmt("%.4f", tfb.bias) + " dim " + fmt("%.4f", dim.bias) + "; rmse tfb_l " +
             fmt("%.4f", tfb.rmse) + " abal1 " + fmt("%.4f", abal.rmse) + "; failures tfb_l " +
             std::to_string(tfb.failures) + " abal1 " + std::to_string(abal.failures);
  return o;
}

Outcome offsetting_signature() {
  const MetricsReport r = monte_carlo(1, kSignatureReps, {"tfb_k"});
  const auto& m = r.metrics("tfb_k");
  Outcome o;
  o.pass = m.successes > 0 && r.initial_imbalance(0) * m.leftover(0) < 0.0;
  std::string d = "z1 initial " + fmt("%.4f", r.initial_imbalance(0)) + " leftover " + fmt("%.4f", m.leftover(0));
  for (Index l = 0; l < 4; ++l) {
    const double ratio = std::abs(m.leftover(l)) / std::abs(r.initial_imbalance(l));
    if (!(ratio <= kLeftoverRatio)) o.pass = false;
    d += "; z" + std::to_string(l + 1) + " ratio " + fmt("%.3f", ratio);
  }
  o.detail = d;
  return o;
}

Outcome coverage() {
  const MetricsReport r = monte_carlo(2, kCoverageReps, {"tfb_l"});
  const auto& m = r.metrics("tfb_l");
  Outcome o;
  const double c = m.coverage.value_or(std::nan(""));
  o.pass = c >= kCoverageLo && c <= kCoverageHi;
  o.detail = "coverage " + fmt("%.4f", c) + " over " + std::to_string(m.successes) + " replicates, gate [" +
             fmt("%.2f", kCoverageLo) + ", " + fmt("%.2f", kCoverageHi) + "]";
  return o;
}

double r_squared(const DgpDraw& d) {
  auto var = [](const Vector& v) { return (v.array() - v.mean()).square().sum() / (v.size() - 1); };
  return var(d.f0) / var(d.data.outcomes);
}

Outcome calibration() {
  const DgpDraw d1 = draw_dgp1(kCalibrationDraws, derive_seed(kSeed, 5));
  const DgpDraw d2 = draw_dgp2(kCalibrationDraws, derive_seed(kSeed, 6));
  const double r1 = r_squared(d1), r2 = r_squared(d2);
  const double share = static_cast<double>(d1.data.n_treated) / d1.data.n();
  Outcome o;
  o.pass = std::abs(r1 - 0.60) <= kR2Tol && std::abs(r2 - 0.50) <= kR2Tol && std::abs(share - 0.5) <= kTreatedShareTol;
  o.detail = "R2 dgp1 " + fmt("%.4f", r1) + " dgp2 " + fmt("%.4f", r2) + "; P(D=1) dgp1 " + fmt("%.4f", share);
  return o;
}

Outcome decomposition() {
  Rng rng(derive_seed(kSeed, 7));
  double worst = 0.0;
  for (int r = 0; r < 100; ++r) {
    const Index n = 20 + static_cast<Index>(rng.index(60));
    Vector y(n), d(n), f0(n), eps(n), effect(n);
    Matrix X(n, 2);
    for (Index i = 0; i < n; ++i) {
      d(i) = i < 5 ? 1.0 : (i < 10 ? 0.0 : (rng.bernoulli(0.4) ? 1.0 : 0.0));
      X.row(i) << rng.normal() + 0.5 * d(i), rng.normal();
      f0(i) = std::sin(X(i, 0)) + X(i, 1) * X(i, 1);
      eps(i) = rng.normal();
      effect(i) = 1.0 + X(i, 0);
      y(i) = f0(i) + d(i) * effect(i) + eps(i);
    }
    Matrix extra(n, 3);
    extra << X, f0;
    const Dataset data = validate(y, d, extra);
    // internal order: recover the per-unit effect and noise
    Vector eff(n), e(n);
    for (Index i = 0; i < n; ++i) {
      const Index src = data.input_index[static_cast<std::size_t>(i)];
      eff(i) = effect(src);
      e(i) = eps(src);
    }
    GroupWeights w = uniform_weights(data);
    for (Index i = 0; i < w.control.size(); ++i) w.control(i) = rng.uniform() * 2.0;
    w.control *= static_cast<double>(data.n_control) / w.control.sum();
    const double satt = eff.tail(data.n_treated).mean();
    const Matrix f0col = data.covariates.col(2);
    const double ewc = imbalance(w.control, f0col, data.n_control, Estimand::ATT).values(0);
    const double eps_t = e.tail(data.n_treated).mean();
    const double eps_c = e.head(data.n_control).dot(w.control) / data.n_control;
    const double lhs = wdim(data, w, Estimand::ATT) - satt;
    worst = std::max(worst, std::abs(lhs - (ewc + eps_t - eps_c)));
  }
  Outcome o;
  o.pass = worst <= kIdentityTol;
  o.detail = "largest residual " + fmt("%.3g", worst);
  return o;
}

Outcome agreement() {
  Outcome o;
  std::string d;
  int solves = 0;
  for (auto [dgp, method] : {std::pair{1, std::string("tfb_k")}, std::pair{2, std::string("tfb_l")}}) {
    const MetricsReport r = monte_carlo(dgp, kAgreementReps, {method, method + "_aug"}, 500);
    const double scale = r.metrics(method).rmse;
    std::map<int, double> wdim_est, aug_est;
    for (const auto& rec : r.replicates) {
      if (rec.failed) continue;
      (rec.method == method ? wdim_est : aug_est)[rec.replicate] = rec.estimate;
    }
    double worst = 0.0;
    for (const auto& [rep, est] : wdim_est) {
      if (!aug_est.count(rep)) continue;
      worst = std::max(worst, std::abs(aug_est[rep] - est));
      ++solves;
    }
    if (!(worst <= kAgreementRatio * scale)) o.pass = false;
    d += "dgp" + std::to_string(dgp) + " " + method + " max gap " + fmt("%.3g", worst) + " vs " +
         fmt("%.4f", kAgreementRatio * scale) + "; ";
  }
  if (solves != 2 * kAgreementReps) o.pass = false;
  o.detail = d + std::to_string(solves) + " paired estimates";
  return o;
}

Outcome quantiles() {
  double chi_worst = 0.0, norm_worst = 0.0;
  const double qs[10] = {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999};
  const long dfs[20] = {1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 50, 75, 100, 200, 500, 1000, 2000, 5000, 20000, 100000};
  for (double q : qs) {
    for (long df : dfs) {
      chi_worst = std::max(chi_worst, std::abs(oracle::chi_sq_cdf_residual(chi_sq_quantile(q, df), df, q)));
    }
  }
  for (int k = 1; k < 1000; ++k) {
    const double p = k / 1000.0;
    norm_worst = std::max(norm_worst, std::abs(normal_quantile(p) - oracle::normal_quantile(p)));
  }
  for (double p : {1e-10, 1e-6, 1 - 1e-6}) {
    norm_worst = std::max(norm_worst, std::abs(normal_quantile(p) - oracle::normal_quantile(p)));
  }
  Outcome o;
  o.pass = chi_worst < kChiResidualTol && norm_worst < kNormalTol;
  o.detail = "chi-squared CDF residual " + fmt("%.3g", chi_worst) + " on 200 points; normal error " + fmt("%.3g", norm_worst);
  return o;
}

Outcome invariants() {
  Rng rng(derive_seed(kSeed, 9));
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };

  for (int r = 0; r < 200; ++r) {
    Vector v(10);
    for (Index i = 0; i < 10; ++i) v(i) = 2.0 * rng.normal();
    const Vector w = project_scaled_simplex(v, 10.0);
    check(w.minCoeff() >= 0.0 && std::abs(w.sum() - 10.0) < 1e-10, "simplex feasibility");
  }

  {
    Matrix G(30, 3);
    for (Index i = 0; i < 30; ++i) G.row(i) << rng.normal(), rng.normal(), rng.normal() + (i >= 20);
    OutcomeModelFit fit;
    fit.coefficients = (Vector(3) << 1.0, -0.5, 2.0).finished();
    Matrix A(3, 3);
    for (Index j = 0; j < 9; ++j) A(j / 3, j % 3) = 0.2 * rng.normal();
    fit.coef_covariance = A * A.transpose();
    fit.cov_factor = fit.coef_covariance.llt().matrixU();
    BalanceModels m;
    m.control = FittedDesign{G, fit};
    auto value = [&](const Vector& w) { return tfi({w, Vector::Ones(10)}, m, 20, 0.95, Estimand::ATT).total; };
    bool convex = true;
    for (int t = 0; t < 200; ++t) {
      Vector a(20), b(20);
      for (Index i = 0; i < 20; ++i) {
        a(i) = rng.uniform();
        b(i) = rng.uniform();
      }
      a *= 20.0 / a.sum();
      b *= 20.0 / b.sum();
      const double lam = rng.uniform();
      convex = convex && value(lam * a + (1 - lam) * b) <= lam * value(a) + (1 - lam) * value(b) + 1e-12;
    }
    check(convex, "TFI convexity");
  }

  {
    Matrix X(40, 2);
    for (Index i = 0; i < 40; ++i) X.row(i) << rng.normal(), rng.normal();
    const GramBlocks g = gram_matrix(X, 25, KernelSpec::for_columns(2));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(g.K);
    check((g.K - g.K.transpose()).cwiseAbs().maxCoeff() == 0.0, "gram symmetry");
    check(es.eigenvalues().minCoeff() > -1e-10, "gram PSD");
  }

  {
    Matrix design(60, 3);
    for (Index i = 0; i < 60; ++i) design.row(i) << rng.normal() + 0.3 * (i >= 40), rng.normal(), rng.normal();
    const GroupWeights w = entropy_balancing(design, 40, Estimand::ATT);
    const Vector gap = design.topRows(40).transpose() * w.control / 40.0 -
                       design.bottomRows(20).colwise().mean().transpose();
    check(gap.cwiseAbs().maxCoeff() < 1e-8, "entropy balancing exact balance");
  }

  {
    Matrix X(100, 8);
    Vector y(100);
    for (Index i = 0; i < 100; ++i) {
      for (Index j = 0; j < 8; ++j) X(i, j) = rng.normal();
      y(i) = 2.0 * X(i, 0) - X(i, 3) + 0.5 * rng.normal();
    }
    const LassoDesign design(X);
    const Vector yc = y.array() - y.mean();
    const double lmax = lasso_lambda_max(design, yc);
    bool ok = true;
    for (double f : {0.5, 0.1, 0.01}) {
      Vector b = Vector::Zero(8);
      lasso_solve(design, yc, f * lmax, b);
      ok = ok && lasso_kkt_violation(design, yc, b, f * lmax) < 1e-6;
    }
    check(ok, "LASSO KKT");

    const OutcomeModelFit ols = fit_ols_sandwich(X, y);
    const Vector resid = y - predict(ols, X);
    check(std::abs(resid.sum()) < 1e-9 && (X.transpose() * resid).cwiseAbs().maxCoeff() < 1e-9,
          "OLS normal equations");
  }

  Outcome o;
  o.pass = failed.empty();
  if (failed.empty()) {
    o.detail = "simplex, TFI convexity, gram, entropy balancing, LASSO KKT, OLS normal equations";
  } else {
    for (const auto& f : failed) o.detail += (o.detail.empty() ? "" : ", ") + f;
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "solver-oracle", solver_oracle},
      {2, "dgp2-estimation", estimation_quality},
      {3, "dgp1-offsetting", offsetting_signature},
      {4, "coverage", coverage},
      {5, "dgp-calibration", calibration},
      {6, "decomposition", decomposition},
      {7, "augmented-agreement", agreement},
      {8, "quantiles", quantiles},
      {9, "invariants", invariants},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty()) {
    for (const auto& c : criteria()) ids.push_back(c.id);
  }
  bool all_pass = true;
  for (int id : ids) {
    bool found = false;
    for (const auto& c : criteria()) {
      if (c.id != id) continue;
      found = true;
      const auto start = std::chrono::steady_clock::now();
      Outcome o;
      try {
        o = c.run();
      } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("error: ") + e.what();
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report(c.id, c.name, o, secs);
      all_pass = all_pass && o.pass;
    }
    if (!found) {
      std::fprintf(stderr, "unknown criterion %d (expected 1-9)\n", id);
      return 2;
    }
  }
  return all_pass ? 0 : 1;
}
