#pragma once

#include "tfb/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tfb {

/// A validated sample stored in control-first order: rows
/// [0, n_control) are control units, the remaining rows are treated.
/// `input_index[i]` is the caller's row number for internal row i.
struct Dataset {
  Vector outcomes;
  Eigen::VectorXi treatment;
  Matrix covariates;
  std::vector<Index> input_index;
  std::vector<std::string> column_names;
  Index n_control = 0;
  Index n_treated = 0;

  Index n() const { return outcomes.size(); }
  Index p() const { return covariates.cols(); }

  auto control_covariates() const { return covariates.topRows(n_control); }
  auto treated_covariates() const { return covariates.bottomRows(n_treated); }
  auto control_outcomes() const { return outcomes.head(n_control); }
  auto treated_outcomes() const { return outcomes.tail(n_treated); }
};

/// Checks shapes, binary treatment, nonempty groups and finiteness, then
/// reorders rows control-first (stable within each group). Column names
/// default to x1..xP.
Dataset validate(const Vector& outcomes, const Vector& treatment,
                 const Matrix& covariates,
                 std::vector<std::string> column_names = {});

struct StandardizationRecord {
  Vector mean;
  Vector sd;
  std::vector<bool> constant;  // column left unscaled

  bool any_constant() const;
  /// Maps a standardized row back to the original scale.
  Vector invert(const Vector& standardized_row) const;
  Vector apply(const Vector& raw_row) const;
};

/// Centers and scales each column to mean 0 and sample sd 1 (n-1
/// denominator). Columns with zero sd pass through and are flagged.
std::pair<Dataset, StandardizationRecord> standardize_covariates(const Dataset& data);

/// Appends x_j * x_k for all j <= k ("x3^2", "x1:x4"), minus the
/// excluded terms, named the same way ("x4:x1" also matches).
Dataset expand_features(const Dataset& data,
                        const std::vector<std::string>& exclusions = {});

struct FoldAssignment {
  std::vector<int> fold_of_unit;  // internal row order, values 0/1
  std::uint64_t seed = 0;
};

/// Stratified random halves: each group is shuffled and its first
/// ceil(n_g / 2) units go to fold 0.
FoldAssignment split_sample(const Dataset& data, std::uint64_t seed);

/// Units of `data` in fold `fold`, keeping control-first order.
Dataset fold_subset(const Dataset& data, const FoldAssignment& folds, int fold);

/// Rows selected by internal index (must be sorted so controls stay first).
Dataset subset(const Dataset& data, const std::vector<Index>& rows);

}  // namespace tfb
