#pragma once

#include "tfb/balance_metrics.hpp"
#include "tfb/dataset.hpp"
#include "tfb/effect_estimators.hpp"
#include "tfb/simulation.hpp"
#include "tfb/tfb_solver.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace tfb::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json to_json(const Vector& v);
json to_json(const SolverConfig& c);
json to_json(const TfiReport& r);
json to_json(const std::vector<ImbalanceRow>& rows);
json to_json(const MonteCarloConfig& c);
json to_json(const MethodMetrics& m, const std::vector<std::string>& tracked);
json to_json(const MetricsReport& r);

/// Point summary, CI, RESS, imbalance table and the per-split table.
json to_json(const EstimateReport& r);

/// Imbalance rows: pre uses uniform weights, post `weights`; both are
/// treated-minus-control mean differences over the full-sample sd.
std::vector<ImbalanceRow> imbalance_table(const Dataset& data, const GroupWeights& weights);

/// One row per replicate and method.
void write_replicates_csv(std::ostream& out, const MetricsReport& r);
void write_replicates_csv(const std::string& path, const MetricsReport& r);

/// Pretty-printed with a trailing newline.
std::string dump(const json& j);

}  // namespace tfb::io
