#pragma once

#include "tfb/dataset.hpp"
#include "tfb/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tfb::io {

/// RFC-4180 table: a header row and data rows of equal width. `line` holds
/// the 1-based line on which each data row starts.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;
};

/// Parses comma-delimited text with double-quote quoting ("" escapes a
/// quote; quoted fields may hold commas and line breaks). CRLF and LF line
/// endings are accepted; a trailing line break and blank lines are ignored.
CsvTable parse_csv(std::istream& in);

CsvTable read_csv_table(const std::string& path);

/// Columns `y` (real) and `d` (0/1) are required; all other columns are
/// covariates in header order. Needs at least 2 data rows.
Dataset dataset_from_csv(const CsvTable& table);

Dataset read_csv(const std::string& path);

/// 17 significant digits (parses back to the same double); "nan", "inf"
/// and "-inf" for non-finite values.
std::string format_double(double v);

/// Parses a whole cell as a finite double; nullopt otherwise.
std::optional<double> parse_double(const std::string& cell);

std::string quote_csv(const std::string& field);

/// One row of a weights file. `fold` and `split` are -1 for full-sample
/// weights, which are written without those columns.
struct WeightRecord {
  Index unit_index = 0;  // 0-based data row of the input CSV
  double weight = 0.0;
  int fold = -1;
  int split = -1;
};

void write_weights_csv(std::ostream& out, const std::vector<WeightRecord>& records);
void write_weights_csv(const std::string& path, const std::vector<WeightRecord>& records);

/// Reads unit_index and weight, plus fold and split when present.
std::vector<WeightRecord> read_weights_csv(const std::string& path);
std::vector<WeightRecord> read_weights_csv(std::istream& in);

/// Records for every unit of `data` (input-order unit indices).
std::vector<WeightRecord> weight_records(const Dataset& data, const GroupWeights& weights,
                                         int fold = -1, int split = -1);

/// Maps records onto `data`'s internal order. Each unit of a group the
/// estimand weights must appear exactly once; units of the other group may
/// be omitted and default to 1. With `split`, only rows of that split are
/// used; a file holding several splits needs one.
GroupWeights align_weights(const std::vector<WeightRecord>& records, const Dataset& data,
                           Estimand estimand, std::optional<int> split = std::nullopt);

}  // namespace tfb::io
