#include "tfb/simulation.hpp"

#include <doctest.h>

#include <cmath>

using namespace tfb;

TEST_SUITE("simulation") {

TEST_CASE("first design: clusters, latent features and noise") {
  const DgpDraw draw = draw_dgp1(40000, 1);
  const Index n = draw.data.n();
  int counts[4] = {0, 0, 0, 0};
  for (Index i = 0; i < n; ++i) ++counts[draw.cluster(i)];
  for (int c : counts) CHECK(std::abs(c / 40000.0 - 0.25) < 0.01);
  // Z is largest at the center nearest to X; that is the own center unless
  // the draw crossed a midline, which happens with probability about 0.012
  int own_max = 0;
  const double centers[4][2] = {{0, 0}, {0, 5}, {5, 0}, {5, 5}};
  for (Index i = 0; i < n; ++i) {
    Index best;
    draw.latent.row(i).maxCoeff(&best);
    Index nearest = 0;
    double dmin = 1e300;
    for (Index l = 0; l < 4; ++l) {
      const double dx = draw.data.covariates(i, 0) - centers[l][0];
      const double dy = draw.data.covariates(i, 1) - centers[l][1];
      if (dx * dx + dy * dy < dmin) {
        dmin = dx * dx + dy * dy;
        nearest = l;
      }
    }
    CHECK(best == nearest);
    own_max += best == draw.cluster(i);
  }
  CHECK(std::abs(own_max / 40000.0 - (1.0 - 0.0124)) < 0.003);
  CHECK(draw.latent.maxCoeff() <= 1.0);
  CHECK(draw.latent.minCoeff() > 0.0);
  const Vector resid = draw.data.outcomes - draw.f0;
  const double var = (resid.array() - resid.mean()).square().sum() / (n - 1);
  CHECK(std::abs(var - 1.5) < 0.05);
  CHECK(draw.propensity.minCoeff() > 0.0);
  CHECK(draw.propensity.maxCoeff() < 1.0);
  CHECK(draw.true_att == 0.0);
}

TEST_CASE("second design: distractors shift with treatment") {
  const DgpDraw draw = draw_dgp2(20000, 2);
  const Dataset& d = draw.data;
  REQUIRE(d.p() == 19);
  const Vector diff = d.treated_covariates().colwise().mean() - d.control_covariates().colwise().mean();
  for (Index j = 4; j < 9; ++j) CHECK(std::abs(diff(j) - 1.0) < 0.05);
  for (Index j = 9; j < 19; ++j) CHECK(std::abs(diff(j)) < 0.05);
  for (Index j = 0; j < 4; ++j) CHECK(diff(j) > 0.1);
  const Vector resid = d.outcomes - draw.f0;
  const double sd = std::sqrt((resid.array() - resid.mean()).square().sum() / (d.n() - 1));
  CHECK(std::abs(sd - 9.21) < 0.15);
  CHECK(d.column_names[4] == "a1");
  const Matrix T = tracked_variables(draw);
  CHECK(T.cols() == 6);
  CHECK(T(0, 5) == doctest::Approx(d.covariates.row(0).segment(4, 5).mean()));
  CHECK(tracked_variable_names(2).back() == "distractor_mean");
}

TEST_CASE("draws are reproducible") {
  const DgpDraw a = draw_dgp(1, 200, 7), b = draw_dgp(1, 200, 7), c = draw_dgp(1, 200, 8);
  CHECK(a.data.outcomes == b.data.outcomes);
  CHECK(a.data.covariates == b.data.covariates);
  CHECK(a.data.outcomes != c.data.outcomes);
  CHECK_THROWS_AS(draw_dgp(3, 200, 1), UsageError);
  CHECK_THROWS_AS(draw_dgp1(4, 1), UsageError);
}

TEST_CASE("single replicate difference in means") {
  MonteCarloConfig cfg;
  cfg.dgp = 2;
  cfg.n = 300;
  cfg.replicates = 1;
  cfg.methods = {"dim"};
  cfg.seed = 3;
  const MetricsReport r = run_monte_carlo(cfg);
  const DgpDraw draw = draw_dgp2(300, 3);
  const double expected =
      draw.data.treated_outcomes().mean() - draw.data.control_outcomes().mean();
  const MethodMetrics& m = r.metrics("dim");
  CHECK(m.bias == doctest::Approx(expected));
  CHECK(m.rmse == doctest::Approx(std::abs(expected)));
  CHECK(!m.coverage.has_value());
  CHECK(r.replicates.size() == 1);
}

TEST_CASE("Monte Carlo metrics") {
  MonteCarloConfig cfg;
  cfg.dgp = 2;
  cfg.n = 200;
  cfg.replicates = 20;
  cfg.methods = {"dim", "ebal", "tfb_ols", "tfb_ols_aug"};
  cfg.seed = 100;
  const MetricsReport r = run_monte_carlo(cfg);
  CHECK(r.tracked == tracked_variable_names(2));
  CHECK(r.replicates.size() == 80);
  for (const auto& m : r.methods) {
    CHECK(m.successes + m.failures == 20);
    if (m.successes > 0) CHECK(m.rmse >= std::abs(m.bias) - 1e-12);
  }
  // the 19 covariate treated mean lies outside the control hull at this size:
  // entropy balancing fails on every replicate and the failures are tallied
  CHECK(r.metrics("ebal").failures == 20);
  for (const auto& rec : r.replicates) {
    if (rec.method == "ebal") CHECK(rec.error.find("entropy balancing") != std::string::npos);
  }
  CHECK(r.metrics("dim").bias > 0.0);
  CHECK(r.metrics("tfb_ols").coverage.has_value());
  for (Index j = 0; j < r.initial_imbalance.size(); ++j) CHECK(std::isfinite(r.initial_imbalance(j)));
  const MetricsReport again = run_monte_carlo(cfg);
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    if (r.methods[k].successes == 0) continue;
    CHECK(again.methods[k].bias == r.methods[k].bias);
    CHECK(again.methods[k].rmse == r.methods[k].rmse);
  }
  cfg.methods = {"kom"};
  CHECK_THROWS_AS(run_monte_carlo(cfg), UsageError);
}

TEST_CASE("sample correlation") {
  CHECK(sample_correlation({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(sample_correlation({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(std::isnan(sample_correlation({1, 1, 1}, {1, 2, 3})));
  CHECK(std::abs(split_correlation(2, 200, 30, 1, "tfb_ols")) <= 1.0);
  CHECK_THROWS_AS(split_correlation(2, 200, 6, 1, "tfb_ols"), UsageError);
}

}
