#include "tfb/io/commands.hpp"

#include "tfb/balance_metrics.hpp"
#include "tfb/effect_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace tfb::io {

namespace {

const std::vector<std::string> kWeightMethods{"tfb", "dim", "ebal", "abal1"};

bool uses_data(Subcommand c) { return c != Subcommand::Simulate; }

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

json envelope(const RunConfig& config, std::optional<Index> p) {
  return {{"schema_version", kSchemaVersion},
          {"command", to_string(config.command)},
          {"config", config_json(config, p)}};
}

json data_json(const Dataset& data) {
  return {{"n", data.n()},
          {"n_control", data.n_control},
          {"n_treated", data.n_treated},
          {"covariates", data.column_names}};
}

MonteCarloConfig monte_carlo_config(const RunConfig& c) {
  MonteCarloConfig mc;
  mc.dgp = c.dgp;
  mc.n = c.n;
  mc.replicates = c.replicates;
  mc.methods = c.methods;
  mc.seed = c.seed;
  mc.estimand = c.estimand;
  mc.q = c.q;
  mc.gamma = c.gamma;
  mc.bandwidth = c.bandwidth.value_or(0.0);
  mc.bootstrap_reps = c.bootstrap_reps;
  mc.cv_folds = c.cv_folds;
  mc.solver = c.solver;
  if (c.abal_delta) mc.abal_delta = Vector::Constant(1, *c.abal_delta);
  mc.abal_zeta = c.abal_zeta;
  mc.keep_replicates = true;
  return mc;
}

TfbConfig tfb_config(const RunConfig& c) {
  TfbConfig t;
  t.model = model_spec(c);
  t.q = c.q;
  t.estimand = c.estimand;
  t.solver = c.solver;
  return t;
}

/// Scales each weighted group to sum to its size; reports whether any
/// group needed it.
bool normalize_weights(GroupWeights& w, Estimand e) {
  bool changed = false;
  auto fix = [&](Vector& v, const char* group) {
    const double s = v.sum();
    if (!(s > 0.0)) throw DataError(std::string(group) + " weights sum to zero");
    const double target = static_cast<double>(v.size());
    if (std::abs(s - target) > 1e-9 * target) {
      v *= target / s;
      changed = true;
    }
  };
  if (e != Estimand::ATC) fix(w.control, "control");
  if (e != Estimand::ATT) fix(w.treated, "treated");
  return changed;
}

json weight_summary(const Dataset& data, const GroupWeights& w, const OutcomeFits& fits,
                    const RunConfig& c) {
  const BalanceModels models = balance_models(fits, data.covariates);
  const double point = wdim(data, w, c.estimand);
  json j{{"point", point},
         {"augmented_point", augmented(data, w, fits, c.estimand)},
         {"ewc_bias", ewc_bias_estimate(w, models, data.n_control, c.estimand)},
         {"tfi", to_json(tfi(w, models, data.n_control, c.q, c.estimand))},
         {"imbalance_table", to_json(imbalance_table(data, w))}};
  j["ress_control"] = c.estimand != Estimand::ATC ? json(ress(w.control)) : json(nullptr);
  j["ress_treated"] = c.estimand != Estimand::ATT ? json(ress(w.treated)) : json(nullptr);
  return j;
}

json input_order_weights(const Dataset& data, const GroupWeights& w) {
  std::vector<double> out(static_cast<std::size_t>(data.n()));
  for (const auto& r : weight_records(data, w)) out[static_cast<std::size_t>(r.unit_index)] = r.weight;
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  if (!f) throw DataError("error writing '" + path + "'");
}

}  // namespace

std::string_view to_string(Subcommand c) {
  switch (c) {
    case Subcommand::Estimate: return "estimate";
    case Subcommand::Simulate: return "simulate";
    case Subcommand::Diagnose: return "diagnose";
    case Subcommand::Weights: return "weights";
  }
  return "estimate";
}

Subcommand parse_subcommand(std::string_view s) {
  if (s == "estimate") return Subcommand::Estimate;
  if (s == "simulate") return Subcommand::Simulate;
  if (s == "diagnose") return Subcommand::Diagnose;
  if (s == "weights") return Subcommand::Weights;
  throw UsageError("unknown subcommand '" + std::string(s) +
                   "' (expected estimate, simulate, diagnose or weights)");
}

void check_config(const RunConfig& c) {
  require(c.q > 0.0 && c.q < 1.0, "q must lie in (0, 1)");
  require(c.gamma > 0.0 && c.gamma < 1.0, "gamma must lie in (0, 1)");
  require(c.cv_folds >= 2, "cv folds must be at least 2");
  require(c.bootstrap_reps >= 1, "bootstrap replications must be at least 1");
  require(c.solver.max_iters >= 1, "solver max_iters must be at least 1");
  require(c.solver.tol > 0.0, "solver tol must be positive");
  require(c.solver.epsilon_scale > 0.0, "solver epsilon_scale must be positive");
  require(!c.bandwidth || *c.bandwidth > 0.0, "bandwidth must be positive");
  for (double l : c.lambda_grid) require(l > 0.0 && std::isfinite(l), "lambda grid values must be positive");
  require(c.exclusions.empty() || c.expand, "--exclude needs --expand");
  require(!c.split || c.command == Subcommand::Diagnose, "--split applies to diagnose only");
  require(c.weights_path.empty() || c.command == Subcommand::Diagnose,
          "--weights applies to diagnose only");
  require(c.replicates_output.empty() || c.command == Subcommand::Simulate,
          "--replicates-out applies to simulate only");
  require(c.weights_output.empty() || c.command == Subcommand::Estimate ||
              c.command == Subcommand::Weights,
          "--weights-out applies to estimate and weights only");

  if (uses_data(c.command)) {
    require(!c.data_path.empty(), std::string(to_string(c.command)) + " needs --data");
    require(!c.bandwidth || c.backend == ModelBackend::KRLS, "--bandwidth applies to the krls backend only");
    require(c.lambda_grid.empty() || c.backend != ModelBackend::OLS,
            "--lambda-grid applies to the krls and lasso backends only");
  } else {
    require(c.data_path.empty(), "simulate draws its own data and does not take --data");
    require(!c.standardize && !c.expand, "simulate does not take preprocessing flags");
  }

  switch (c.command) {
    case Subcommand::Estimate:
      require(c.splits >= 1, "splits must be at least 1");
      break;
    case Subcommand::Diagnose:
      require(!c.weights_path.empty(), "diagnose needs --weights");
      require(!c.split || *c.split >= 0, "--split must be nonnegative");
      break;
    case Subcommand::Weights:
      require(std::find(kWeightMethods.begin(), kWeightMethods.end(), c.method) != kWeightMethods.end(),
              "unknown weights method '" + c.method + "' (supported: " + join(kWeightMethods) + ")");
      require(!c.abal_delta || c.method == "abal1", "--abal-delta applies to abal1 only");
      break;
    case Subcommand::Simulate: {
      require(c.dgp == 1 || c.dgp == 2, "unknown dgp " + std::to_string(c.dgp) + " (supported: 1, 2)");
      require(c.n >= 8, "simulated samples need n >= 8");
      require(c.replicates >= 1, "replicates must be at least 1");
      require(!c.methods.empty(), "no methods requested");
      const auto& supported = supported_methods();
      for (const auto& m : c.methods) {
        require(std::find(supported.begin(), supported.end(), m) != supported.end(),
                "unknown method '" + m + "' (supported: " + join(supported) + ")");
      }
      break;
    }
  }
  if (c.command == Subcommand::Weights || c.command == Subcommand::Simulate) {
    require(!c.abal_delta || *c.abal_delta > 0.0, "--abal-delta must be positive");
    require(c.abal_zeta > 0.0 && c.abal_zeta < 1.0, "--abal-zeta must lie in (0, 1)");
  }
}

json config_json(const RunConfig& c, std::optional<Index> p) {
  json j{{"command", to_string(c.command)},
         {"seed", c.seed},
         {"estimand", to_string(c.estimand)},
         {"q", c.q},
         {"gamma", c.gamma},
         {"solver", to_json(c.solver)},
         {"output", c.output_path.empty() ? json(nullptr) : json(c.output_path)}};
  if (c.command == Subcommand::Simulate) {
    MonteCarloConfig mc = monte_carlo_config(c);
    if (mc.bandwidth <= 0.0) mc.bandwidth = c.dgp == 1 ? 2.0 : static_cast<double>(draw_dgp(2, 8, 0).data.p());
    j["simulation"] = to_json(mc);
    j["replicates_output"] = c.replicates_output.empty() ? json(nullptr) : json(c.replicates_output);
    return j;
  }
  json model{{"backend", to_string(c.backend)}, {"cv_folds", c.cv_folds}};
  if (c.backend == ModelBackend::KRLS) {
    model["bandwidth"] = c.bandwidth ? json(*c.bandwidth) : p ? json(static_cast<double>(*p)) : json(nullptr);
  }
  if (c.backend != ModelBackend::OLS) {
    model["lambda_grid"] = c.lambda_grid.empty() ? json("default") : json(c.lambda_grid);
  }
  if (c.backend == ModelBackend::LASSO) model["bootstrap_reps"] = c.bootstrap_reps;
  j["data"] = c.data_path;
  j["standardize"] = c.standardize;
  j["expand"] = c.expand;
  j["exclusions"] = c.exclusions;
  j["model"] = model;
  switch (c.command) {
    case Subcommand::Estimate:
      j["splits"] = c.splits;
      break;
    case Subcommand::Diagnose:
      j["weights"] = c.weights_path;
      j["split"] = c.split ? json(*c.split) : json(nullptr);
      break;
    case Subcommand::Weights:
      j["method"] = c.method;
      if (c.method == "abal1") {
        j["abal_delta"] = c.abal_delta ? json(*c.abal_delta) : json("implied");
        j["abal_zeta"] = c.abal_zeta;
      }
      break;
    case Subcommand::Simulate: break;
  }
  if (c.command != Subcommand::Diagnose) {
    j["weights_output"] = c.weights_output.empty() ? json(nullptr) : json(c.weights_output);
  }
  return j;
}

Dataset prepare_data(const RunConfig& c) {
  Dataset data = read_csv(c.data_path);
  if (data.p() < 1) throw DataError("dataset has no covariate columns");
  if (c.standardize) data = standardize_covariates(data).first;
  if (c.expand) data = expand_features(data, c.exclusions);
  return data;
}

ModelSpec model_spec(const RunConfig& c) {
  ModelSpec spec;
  spec.backend = c.backend;
  spec.cv.folds = c.cv_folds;
  spec.cv.lambda_grid = c.lambda_grid;
  spec.cv.seed = c.seed;
  spec.bootstrap_reps = c.bootstrap_reps;
  spec.bandwidth = c.bandwidth.value_or(0.0);
  return spec;
}

CommandOutput estimate_command(const RunConfig& c, const Dataset& data) {
  EstimateConfig ec;
  ec.tfb = tfb_config(c);
  ec.splits = c.splits;
  ec.seed = c.seed;
  ec.gamma = c.gamma;
  const EstimateReport r = run_estimate(data, ec);

  CommandOutput out;
  out.report = envelope(c, data.p());
  out.report["data"] = data_json(data);
  json result = to_json(r);
  std::vector<double> bias;
  for (const auto& s : r.splits) {
    bias.push_back(0.5 * (s.fold_results[0].ewc_bias + s.fold_results[1].ewc_bias));
  }
  result["ewc_bias"] = median(bias);
  out.report["result"] = result;
  if (!c.weights_output.empty()) {
    for (std::size_t s = 0; s < r.splits.size(); ++s) {
      for (int k = 0; k < 2; ++k) {
        const Dataset part = subset(data, r.splits[s].folds[k]);
        auto rows = weight_records(part, r.splits[s].fold_results[k].weights, k, static_cast<int>(s));
        out.weights.insert(out.weights.end(), rows.begin(), rows.end());
      }
    }
    std::stable_sort(out.weights.begin(), out.weights.end(), [](const auto& a, const auto& b) {
      return a.split != b.split ? a.split < b.split : a.unit_index < b.unit_index;
    });
  }
  return out;
}

CommandOutput diagnose_command(const RunConfig& c, const Dataset& data,
                               const std::vector<WeightRecord>& records) {
  GroupWeights w = align_weights(records, data, c.estimand, c.split);
  const bool rescaled = normalize_weights(w, c.estimand);
  const OutcomeFits fits = fit_group_models(data, model_spec(c), c.estimand);

  CommandOutput out;
  out.report = envelope(c, data.p());
  out.report["data"] = data_json(data);
  json result = weight_summary(data, w, fits, c);
  result["weights_rescaled"] = rescaled;
  out.report["result"] = result;
  return out;
}

CommandOutput weights_command(const RunConfig& c, const Dataset& data) {
  CommandOutput out;
  out.report = envelope(c, data.p());
  out.report["data"] = data_json(data);
  json result;
  GroupWeights w;
  if (c.method == "tfb") {
    const TfbConfig tc = tfb_config(c);
    const OutcomeFits fits = fit_group_models(data, tc.model, c.estimand);
    const FoldResult r = tfb_on_sample(data, fits, tc);
    w = r.weights;
    result = weight_summary(data, w, fits, c);
    result["variance"] = r.variance;
    const auto ci = confidence_interval(r.point, r.variance, c.gamma);
    result["ci"] = {ci.first, ci.second};
    result["objective"] = r.objective;
    result["iterations"] = r.iterations;
    result["converged"] = r.converged;
  } else {
    BaselineConfig bc;
    bc.method = parse_baseline(c.method);
    if (c.abal_delta) bc.delta = Vector::Constant(1, *c.abal_delta);
    bc.implied_delta = true;
    bc.zeta = c.abal_zeta;
    w = baseline_weights(data.covariates, data.n_control, c.estimand, bc);
    const OutcomeFits fits = fit_group_models(data, model_spec(c), c.estimand);
    result = weight_summary(data, w, fits, c);
  }
  result["method"] = c.method;
  result["weights"] = input_order_weights(data, w);
  out.report["result"] = result;
  out.weights = weight_records(data, w);
  std::sort(out.weights.begin(), out.weights.end(),
            [](const auto& a, const auto& b) { return a.unit_index < b.unit_index; });
  return out;
}

CommandOutput simulate_command(const RunConfig& c) {
  CommandOutput out;
  out.metrics = run_monte_carlo(monte_carlo_config(c));
  out.report = envelope(c, std::nullopt);
  json result = to_json(out.metrics);
  result["replicate_rows"] = out.metrics.replicates.size();
  out.report["result"] = result;
  return out;
}

json error_json(std::string_view kind, std::string_view message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

int exit_code(std::string_view kind) {
  if (kind == "usage") return 1;
  if (kind == "data") return 2;
  return 3;
}

int run_command(const RunConfig& c, std::ostream& out, std::ostream& err) {
  std::string kind, message;
  try {
    check_config(c);
    CommandOutput result;
    switch (c.command) {
      case Subcommand::Estimate: result = estimate_command(c, prepare_data(c)); break;
      case Subcommand::Diagnose: {
        const Dataset data = prepare_data(c);
        result = diagnose_command(c, data, read_weights_csv(c.weights_path));
        break;
      }
      case Subcommand::Weights: result = weights_command(c, prepare_data(c)); break;
      case Subcommand::Simulate: result = simulate_command(c); break;
    }
    if (!c.weights_output.empty()) write_weights_csv(c.weights_output, result.weights);
    if (!c.replicates_output.empty()) write_replicates_csv(c.replicates_output, result.metrics);
    const std::string text = dump(result.report);
    if (c.output_path.empty()) {
      out << text;
    } else {
      write_text(c.output_path, text);
    }
    return 0;
  } catch (const Error& e) {
    kind = e.kind();
    message = e.what();
  } catch (const std::exception& e) {
    kind = "numerical";
    message = e.what();
  }
  err << error_json(kind, message).dump() << '\n';
  return exit_code(kind);
}

}  // namespace tfb::io
