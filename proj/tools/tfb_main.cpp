#include "tfb/io/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

struct Options {
  tfb::io::RunConfig config;
  std::string estimand = "att";
  std::string backend = "ols";
  double bandwidth = 0.0;
  double abal_delta = 0.0;
  int split = -1;
  long long n = 1000;
};

void add_common(CLI::App* app, Options& o) {
  auto& c = o.config;
  app->add_option("--estimand", o.estimand, "att, atc or ate")->capture_default_str();
  app->add_option("--seed", c.seed, "Base seed")->capture_default_str();
  app->add_option("--q", c.q, "TFI quantile level")->capture_default_str();
  app->add_option("--gamma", c.gamma, "Confidence level")->capture_default_str();
  app->add_option("--cv-folds", c.cv_folds, "Cross-validation folds")->capture_default_str();
  app->add_option("--bootstrap-reps", c.bootstrap_reps, "LASSO residual-bootstrap replications")
      ->capture_default_str();
  app->add_option("--bandwidth", o.bandwidth, "Gaussian kernel bandwidth (krls)");
  app->add_option("--max-iters", c.solver.max_iters, "Solver iteration cap")->capture_default_str();
  app->add_option("--tol", c.solver.tol, "Solver relative objective tolerance")->capture_default_str();
  app->add_option("--epsilon-scale", c.solver.epsilon_scale, "Solver smoothing scale")
      ->capture_default_str();
  app->add_option("-o,--output", c.output_path, "JSON report path (default: stdout)");
}

void add_data(CLI::App* app, Options& o) {
  auto& c = o.config;
  app->add_option("--data", c.data_path, "Input CSV with columns y, d and covariates")->required();
  app->add_option("--model", o.backend, "Outcome model: ols, krls or lasso")->capture_default_str();
  app->add_flag("--standardize", c.standardize, "Standardize covariates");
  app->add_flag("--expand", c.expand, "Append squares and pairwise interactions");
  app->add_option("--exclude", c.exclusions, "Expansion terms to leave out, e.g. x1:x2");
  app->add_option("--lambda-grid", c.lambda_grid, "Penalty grid for cross-validation");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Targeted function balancing: weights, estimates, diagnostics and simulations"};
  app.require_subcommand(1);
  Options o;
  auto& c = o.config;

  auto* estimate = app.add_subcommand("estimate", "Cross-fit TFB estimate with median aggregation");
  add_common(estimate, o);
  add_data(estimate, o);
  estimate->add_option("--splits", c.splits, "Number of random splits")->capture_default_str();
  estimate->add_option("--weights-out", c.weights_output, "Weights CSV path");

  auto* diagnose = app.add_subcommand("diagnose", "TFI and imbalance of supplied weights");
  add_common(diagnose, o);
  add_data(diagnose, o);
  diagnose->add_option("--weights", c.weights_path, "Weights CSV (unit_index, weight)")->required();
  diagnose->add_option("--split", o.split, "Split to read from a multi-split weights file");

  auto* weights = app.add_subcommand("weights", "Full-sample weights from TFB or a baseline");
  add_common(weights, o);
  add_data(weights, o);
  weights->add_option("--method", c.method, "tfb, dim, ebal or abal1")->capture_default_str();
  weights->add_option("--abal-delta", o.abal_delta, "ABAL1 tolerance in sd units");
  weights->add_option("--abal-zeta", c.abal_zeta, "ABAL1 penalty mix")->capture_default_str();
  weights->add_option("--weights-out", c.weights_output, "Weights CSV path");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on a simulated design");
  add_common(simulate, o);
  simulate->add_option("--dgp", c.dgp, "Design: 1 or 2")->capture_default_str();
  simulate->add_option("--n", o.n, "Sample size")->capture_default_str();
  simulate->add_option("--reps", c.replicates, "Replicates")->capture_default_str();
  simulate->add_option("--methods", c.methods, "Methods to compare (space or comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--abal-delta", o.abal_delta, "ABAL1 tolerance in sd units");
  simulate->add_option("--abal-zeta", c.abal_zeta, "ABAL1 penalty mix")->capture_default_str();
  simulate->add_option("--replicates-out", c.replicates_output, "Per-replicate CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << tfb::io::error_json("usage", e.what()).dump() << '\n';
    return 1;
  }

  try {
    if (estimate->parsed()) c.command = tfb::io::Subcommand::Estimate;
    if (diagnose->parsed()) c.command = tfb::io::Subcommand::Diagnose;
    if (weights->parsed()) c.command = tfb::io::Subcommand::Weights;
    if (simulate->parsed()) c.command = tfb::io::Subcommand::Simulate;
    c.estimand = tfb::parse_estimand(o.estimand);
    c.backend = tfb::parse_backend(o.backend);
    c.n = static_cast<tfb::Index>(o.n);
    const auto* sub = app.get_subcommands().front();
    if (sub->count("--bandwidth")) c.bandwidth = o.bandwidth;
    if (sub->get_option_no_throw("--abal-delta") && sub->count("--abal-delta")) c.abal_delta = o.abal_delta;
    if (sub->get_option_no_throw("--split") && sub->count("--split")) c.split = o.split;
  } catch (const tfb::Error& e) {
    std::cerr << tfb::io::error_json(e.kind(), e.what()).dump() << '\n';
    return tfb::io::exit_code(e.kind());
  }
  return tfb::io::run_command(c, std::cout, std::cerr);
}
