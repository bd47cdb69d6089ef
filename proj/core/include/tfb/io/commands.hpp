#pragma once

#include "tfb/baselines.hpp"
#include "tfb/dataset.hpp"
#include "tfb/io/csv.hpp"
#include "tfb/io/report.hpp"
#include "tfb/outcome_models.hpp"
#include "tfb/simulation.hpp"
#include "tfb/tfb_solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tfb::io {

enum class Subcommand { Estimate, Simulate, Diagnose, Weights };

std::string_view to_string(Subcommand c);
Subcommand parse_subcommand(std::string_view s);

struct RunConfig {
  Subcommand command = Subcommand::Estimate;

  // data and preprocessing (estimate, diagnose, weights)
  std::string data_path;
  bool standardize = false;       // applied before expansion
  bool expand = false;
  std::vector<std::string> exclusions;

  // outcome model and TFB
  Estimand estimand = Estimand::ATT;
  ModelBackend backend = ModelBackend::OLS;
  double q = 0.95;
  std::optional<double> bandwidth;  // krls; unset means number of covariates
  int cv_folds = 5;
  std::vector<double> lambda_grid;  // empty means the data-driven grid
  int bootstrap_reps = 200;         // lasso
  SolverConfig solver;

  // estimation
  int splits = 100;
  std::uint64_t seed = 0;
  double gamma = 0.95;

  // weights: "tfb" or a baseline (dim, ebal, abal1)
  std::string method = "tfb";
  std::optional<double> abal_delta;  // unset: implied by the penalized form
  double abal_zeta = 0.5;

  // diagnose
  std::string weights_path;
  std::optional<int> split;

  // simulate
  int dgp = 1;
  Index n = 1000;
  int replicates = 200;
  std::vector<std::string> methods{"dim", "tfb_k"};

  // outputs; an empty report path means the output stream
  std::string output_path;
  std::string weights_output;
  std::string replicates_output;
};

/// Throws UsageError on inconsistent settings.
void check_config(const RunConfig& config);

/// Every setting of `config` relevant to its subcommand, defaults included.
/// `p` (covariates after preprocessing) resolves the default bandwidth.
json config_json(const RunConfig& config, std::optional<Index> p = std::nullopt);

/// Reads the CSV and applies the standardize / expand steps.
Dataset prepare_data(const RunConfig& config);

ModelSpec model_spec(const RunConfig& config);

struct CommandOutput {
  json report;
  std::vector<WeightRecord> weights;
  MetricsReport metrics;  // simulate only
};

/// Full reports, including schema_version and the resolved config.
CommandOutput estimate_command(const RunConfig& config, const Dataset& data);
CommandOutput diagnose_command(const RunConfig& config, const Dataset& data,
                               const std::vector<WeightRecord>& weights);
CommandOutput weights_command(const RunConfig& config, const Dataset& data);
CommandOutput simulate_command(const RunConfig& config);

/// Runs the subcommand, writes the report to `output_path` (or `out`) and
/// any CSV outputs. Failures print {"error": {"kind", "message"}} to `err`
/// and return 1 (usage), 2 (data) or 3 (numerical).
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Error object printed on failure.
json error_json(std::string_view kind, std::string_view message);

int exit_code(std::string_view kind);

}  // namespace tfb::io
