#include "tfb/dataset.hpp"

#include "tfb/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace tfb {

std::string_view to_string(Estimand e) {
  switch (e) {
    case Estimand::ATT: return "att";
    case Estimand::ATC: return "atc";
    case Estimand::ATE: return "ate";
  }
  return "att";
}

Estimand parse_estimand(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "att") return Estimand::ATT;
  if (lower == "atc") return Estimand::ATC;
  if (lower == "ate") return Estimand::ATE;
  throw UsageError("unknown estimand '" + std::string(s) + "' (expected att, atc or ate)");
}

Dataset validate(const Vector& outcomes, const Vector& treatment, const Matrix& covariates,
                 std::vector<std::string> column_names) {
  const Index n = outcomes.size();
  if (treatment.size() != n || covariates.rows() != n) {
    std::ostringstream msg;
    msg << "dimension mismatch: " << n << " outcomes, " << treatment.size()
        << " treatment values, " << covariates.rows() << " covariate rows";
    throw DataError(msg.str());
  }
  if (n < 2) throw DataError("need at least 2 units, got " + std::to_string(n));
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != covariates.cols()) {
    throw DataError("column name count does not match covariate columns");
  }
  if (column_names.empty()) {
    for (Index j = 0; j < covariates.cols(); ++j) column_names.push_back("x" + std::to_string(j + 1));
  }

  std::vector<Index> controls, treated;
  for (Index i = 0; i < n; ++i) {
    const double d = treatment(i);
    if (d == 0.0) {
      controls.push_back(i);
    } else if (d == 1.0) {
      treated.push_back(i);
    } else {
      std::ostringstream msg;
      msg << "non-binary treatment value " << d << " at row " << i;
      throw DataError(msg.str());
    }
    if (!std::isfinite(outcomes(i))) {
      throw DataError("non-finite outcome at row " + std::to_string(i));
    }
    for (Index j = 0; j < covariates.cols(); ++j) {
      if (!std::isfinite(covariates(i, j))) {
        throw DataError("non-finite covariate at row " + std::to_string(i) + ", column " +
                        std::to_string(j));
      }
    }
  }
  if (treated.empty()) throw DataError("no treated units");
  if (controls.empty()) throw DataError("no control units");

  Dataset out;
  out.column_names = std::move(column_names);
  out.n_control = static_cast<Index>(controls.size());
  out.n_treated = static_cast<Index>(treated.size());
  out.outcomes.resize(n);
  out.treatment.resize(n);
  out.covariates.resize(n, covariates.cols());
  out.input_index.reserve(static_cast<std::size_t>(n));
  Index row = 0;
  for (const auto& group : {controls, treated}) {
    for (Index src : group) {
      out.outcomes(row) = outcomes(src);
      out.treatment(row) = treatment(src) == 1.0 ? 1 : 0;
      out.covariates.row(row) = covariates.row(src);
      out.input_index.push_back(src);
      ++row;
    }
  }
  return out;
}

bool StandardizationRecord::any_constant() const {
  return std::any_of(constant.begin(), constant.end(), [](bool b) { return b; });
}

Vector StandardizationRecord::invert(const Vector& z) const {
  Vector x(z.size());
  for (Index j = 0; j < z.size(); ++j) {
    x(j) = constant[static_cast<std::size_t>(j)] ? z(j) : z(j) * sd(j) + mean(j);
  }
  return x;
}

Vector StandardizationRecord::apply(const Vector& x) const {
  Vector z(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    z(j) = constant[static_cast<std::size_t>(j)] ? x(j) : (x(j) - mean(j)) / sd(j);
  }
  return z;
}

std::pair<Dataset, StandardizationRecord> standardize_covariates(const Dataset& data) {
  const Index n = data.n();
  const Index p = data.p();
  StandardizationRecord rec;
  rec.mean = data.covariates.colwise().mean().transpose();
  rec.sd.resize(p);
  rec.constant.assign(static_cast<std::size_t>(p), false);
  Dataset out = data;
  for (Index j = 0; j < p; ++j) {
    const double ss = (data.covariates.col(j).array() - rec.mean(j)).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    rec.sd(j) = sd;
    if (!(sd > 0.0) || sd <= 1e-14 * (1.0 + std::abs(rec.mean(j)))) {
      rec.constant[static_cast<std::size_t>(j)] = true;
      continue;
    }
    out.covariates.col(j) = (data.covariates.col(j).array() - rec.mean(j)) / sd;
  }
  return {std::move(out), std::move(rec)};
}

Dataset expand_features(const Dataset& data, const std::vector<std::string>& exclusions) {
  const Index p = data.p();
  if (p < 1) throw DataError("feature expansion needs at least one covariate");

  std::map<std::string, Index> by_name;
  for (Index j = 0; j < p; ++j) by_name[data.column_names[static_cast<std::size_t>(j)]] = j;

  auto lookup = [&](const std::string& name, const std::string& term) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw DataError("exclusion '" + term + "' references unknown column '" + name + "'");
    }
    return it->second;
  };

  std::vector<std::pair<Index, Index>> excluded;
  for (const auto& term : exclusions) {
    Index a = 0, b = 0;
    if (auto pos = term.find('^'); pos != std::string::npos) {
      if (term.substr(pos) != "^2") throw DataError("malformed exclusion '" + term + "'");
      a = b = lookup(term.substr(0, pos), term);
    } else if (auto colon = term.find(':'); colon != std::string::npos) {
      a = lookup(term.substr(0, colon), term);
      b = lookup(term.substr(colon + 1), term);
    } else {
      throw DataError("malformed exclusion '" + term + "' (use a^2 or a:b)");
    }
    excluded.emplace_back(std::min(a, b), std::max(a, b));
  }
  auto is_excluded = [&](Index j, Index k) {
    return std::find(excluded.begin(), excluded.end(), std::pair{j, k}) != excluded.end();
  };

  std::vector<std::pair<Index, Index>> terms;
  for (Index j = 0; j < p; ++j) {
    for (Index k = j; k < p; ++k) {
      if (!is_excluded(j, k)) terms.emplace_back(j, k);
    }
  }

  Dataset out = data;
  out.covariates.conservativeResize(Eigen::NoChange, p + static_cast<Index>(terms.size()));
  Index col = p;
  for (auto [j, k] : terms) {
    out.covariates.col(col++) = data.covariates.col(j).cwiseProduct(data.covariates.col(k));
    const auto& nj = data.column_names[static_cast<std::size_t>(j)];
    const auto& nk = data.column_names[static_cast<std::size_t>(k)];
    out.column_names.push_back(j == k ? nj + "^2" : nj + ":" + nk);
  }
  return out;
}

FoldAssignment split_sample(const Dataset& data, std::uint64_t seed) {
  if (data.n_control < 4 || data.n_treated < 4) {
    throw DataError("sample splitting needs at least 4 control and 4 treated units (have " +
                    std::to_string(data.n_control) + " and " + std::to_string(data.n_treated) +
                    ")");
  }
  FoldAssignment folds;
  folds.seed = seed;
  folds.fold_of_unit.assign(static_cast<std::size_t>(data.n()), 0);
  Rng rng(derive_seed(seed, 0x5117));
  auto assign = [&](Index begin, Index count) {
    std::vector<Index> idx(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
    rng.shuffle(idx);
    const Index first = (count + 1) / 2;
    for (Index i = 0; i < count; ++i) {
      folds.fold_of_unit[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] =
          i < first ? 0 : 1;
    }
  };
  assign(0, data.n_control);
  assign(data.n_control, data.n_treated);
  return folds;
}

Dataset subset(const Dataset& data, const std::vector<Index>& rows) {
  Dataset out;
  const auto m = static_cast<Index>(rows.size());
  out.column_names = data.column_names;
  out.outcomes.resize(m);
  out.treatment.resize(m);
  out.covariates.resize(m, data.p());
  out.input_index.reserve(rows.size());
  bool seen_treated = false;
  for (Index r = 0; r < m; ++r) {
    const Index src = rows[static_cast<std::size_t>(r)];
    if (r > 0 && src <= rows[static_cast<std::size_t>(r - 1)]) {
      throw DataError("subset rows must be strictly increasing");
    }
    out.outcomes(r) = data.outcomes(src);
    out.treatment(r) = data.treatment(src);
    out.covariates.row(r) = data.covariates.row(src);
    out.input_index.push_back(data.input_index[static_cast<std::size_t>(src)]);
    if (data.treatment(src) == 1) {
      seen_treated = true;
      ++out.n_treated;
    } else {
      if (seen_treated) throw DataError("subset rows break control-first order");
      ++out.n_control;
    }
  }
  if (out.n_control == 0 || out.n_treated == 0) throw DataError("subset has an empty group");
  return out;
}

Dataset fold_subset(const Dataset& data, const FoldAssignment& folds, int fold) {
  std::vector<Index> rows;
  for (Index i = 0; i < data.n(); ++i) {
    if (folds.fold_of_unit[static_cast<std::size_t>(i)] == fold) rows.push_back(i);
  }
  return subset(data, rows);
}

}  // namespace tfb
