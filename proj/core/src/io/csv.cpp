#include "tfb/io/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace tfb::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_line;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, field_started = false, after_quote = false;
  std::size_t line = 1, start_line = 1;

  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_started = after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = fields.size() == 1 && fields[0].empty();
    if (!blank) {
      records.push_back(std::move(fields));
      record_line.push_back(start_line);
    }
    fields.clear();
  };

  std::size_t i = 0;
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      start_line = ++line;
    } else if (c == '"' && !field_started) {
      quoted = field_started = true;
    } else {
      if (after_quote) {
        std::ostringstream msg;
        msg << "line " << line << ": text after closing quote";
        throw DataError(msg.str());
      }
      field += c;
      field_started = true;
    }
  }
  if (quoted) {
    std::ostringstream msg;
    msg << "line " << start_line << ": unterminated quoted field";
    throw DataError(msg.str());
  }
  if (field_started || !fields.empty()) end_record();

  if (records.empty()) throw DataError("CSV input has no header row");
  CsvTable table;
  table.header = std::move(records[0]);
  for (auto& h : table.header) h = trim(h);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      std::ostringstream msg;
      msg << "line " << record_line[r] << ": expected " << table.header.size()
          << " fields, found " << records[r].size();
      throw DataError(msg.str());
    }
    table.rows.push_back(std::move(records[r]));
    table.line.push_back(record_line[r]);
  }
  return table;
}

CsvTable read_csv_table(const std::string& path) {
  auto in = open_input(path);
  return parse_csv(in);
}

std::optional<double> parse_double(const std::string& cell) {
  const std::string s = trim(cell);
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

Dataset dataset_from_csv(const CsvTable& table) {
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].empty()) throw DataError("column " + std::to_string(j + 1) + " has an empty name");
    if (!col.emplace(table.header[j], j).second) {
      throw DataError("duplicate column name '" + table.header[j] + "'");
    }
  }
  for (const char* required : {"y", "d"}) {
    if (!col.count(required)) throw DataError(std::string("missing required column '") + required + "'");
  }
  const Index n = static_cast<Index>(table.rows.size());
  if (n < 2) throw DataError("need at least 2 data rows, found " + std::to_string(n));

  const std::size_t jy = col["y"], jd = col["d"];
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == jy || j == jd) continue;
    cov_cols.push_back(j);
    names.push_back(table.header[j]);
  }

  Vector y(n), d(n);
  Matrix X(n, static_cast<Index>(cov_cols.size()));
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    auto cell = [&](std::size_t j) {
      const auto v = parse_double(row[j]);
      if (!v) {
        std::ostringstream msg;
        msg << "row " << i + 1 << " (line " << table.line[static_cast<std::size_t>(i)]
            << "), column '" << table.header[j] << "': cannot parse '" << row[j]
            << "' as a finite number";
        throw DataError(msg.str());
      }
      return *v;
    };
    y(i) = cell(jy);
    d(i) = cell(jd);
    if (d(i) != 0.0 && d(i) != 1.0) {
      std::ostringstream msg;
      msg << "row " << i + 1 << " (line " << table.line[static_cast<std::size_t>(i)]
          << "), column 'd': treatment must be 0 or 1, found '" << row[jd] << "'";
      throw DataError(msg.str());
    }
    for (std::size_t k = 0; k < cov_cols.size(); ++k) X(i, static_cast<Index>(k)) = cell(cov_cols[k]);
  }
  return validate(y, d, X, names);
}

Dataset read_csv(const std::string& path) { return dataset_from_csv(read_csv_table(path)); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void write_weights_csv(std::ostream& out, const std::vector<WeightRecord>& records) {
  bool split_columns = false;
  for (const auto& r : records) split_columns = split_columns || r.fold >= 0 || r.split >= 0;
  out << (split_columns ? "unit_index,weight,fold,split\n" : "unit_index,weight\n");
  for (const auto& r : records) {
    out << r.unit_index << ',' << format_double(r.weight);
    if (split_columns) out << ',' << r.fold << ',' << r.split;
    out << '\n';
  }
}

void write_weights_csv(const std::string& path, const std::vector<WeightRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_weights_csv(out, records);
  if (!out) throw DataError("error writing '" + path + "'");
}

std::vector<WeightRecord> read_weights_csv(std::istream& in) {
  const CsvTable table = parse_csv(in);
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < table.header.size(); ++j) col.emplace(table.header[j], j);
  for (const char* required : {"unit_index", "weight"}) {
    if (!col.count(required)) {
      throw DataError(std::string("weights file is missing column '") + required + "'");
    }
  }
  std::vector<WeightRecord> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto cell = [&](const char* name) {
      const auto v = parse_double(row[col.at(name)]);
      if (!v) {
        std::ostringstream msg;
        msg << "weights file line " << table.line[r] << ", column '" << name
            << "': cannot parse '" << row[col.at(name)] << "'";
        throw DataError(msg.str());
      }
      return *v;
    };
    auto integer = [&](const char* name) {
      const double v = cell(name);
      if (v != std::floor(v) || v < -1.0) {
        std::ostringstream msg;
        msg << "weights file line " << table.line[r] << ", column '" << name
            << "': expected a nonnegative integer";
        throw DataError(msg.str());
      }
      return v;
    };
    WeightRecord rec;
    rec.unit_index = static_cast<Index>(integer("unit_index"));
    rec.weight = cell("weight");
    if (col.count("fold")) rec.fold = static_cast<int>(integer("fold"));
    if (col.count("split")) rec.split = static_cast<int>(integer("split"));
    out.push_back(rec);
  }
  return out;
}

std::vector<WeightRecord> read_weights_csv(const std::string& path) {
  auto in = open_input(path);
  return read_weights_csv(in);
}

std::vector<WeightRecord> weight_records(const Dataset& data, const GroupWeights& weights,
                                         int fold, int split) {
  std::vector<WeightRecord> out;
  out.reserve(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) {
    const double w = i < data.n_control ? weights.control(i) : weights.treated(i - data.n_control);
    out.push_back({data.input_index[static_cast<std::size_t>(i)], w, fold, split});
  }
  return out;
}

GroupWeights align_weights(const std::vector<WeightRecord>& records, const Dataset& data,
                           Estimand estimand, std::optional<int> split) {
  if (!split) {
    int seen = -2;
    for (const auto& r : records) {
      if (seen != -2 && r.split != seen) {
        throw UsageError("weights file holds several splits; choose one with --split");
      }
      seen = r.split;
    }
  }
  std::vector<Index> internal_of(data.input_index.size());
  for (std::size_t i = 0; i < data.input_index.size(); ++i) {
    internal_of[static_cast<std::size_t>(data.input_index[i])] = static_cast<Index>(i);
  }
  GroupWeights w{Vector::Ones(data.n_control), Vector::Ones(data.n_treated)};
  std::vector<bool> seen(static_cast<std::size_t>(data.n()), false);
  for (const auto& r : records) {
    if (split && r.split != *split) continue;
    if (r.unit_index < 0 || r.unit_index >= data.n()) {
      throw DataError("weights file refers to unit " + std::to_string(r.unit_index) +
                      ", dataset has " + std::to_string(data.n()) + " units");
    }
    const Index i = internal_of[static_cast<std::size_t>(r.unit_index)];
    if (seen[static_cast<std::size_t>(i)]) {
      throw DataError("weights file lists unit " + std::to_string(r.unit_index) + " twice");
    }
    seen[static_cast<std::size_t>(i)] = true;
    if (!(r.weight >= 0.0)) {
      throw DataError("negative weight for unit " + std::to_string(r.unit_index));
    }
    if (i < data.n_control) {
      w.control(i) = r.weight;
    } else {
      w.treated(i - data.n_control) = r.weight;
    }
  }
  const bool need_control = estimand != Estimand::ATC;
  const bool need_treated = estimand != Estimand::ATT;
  for (Index i = 0; i < data.n(); ++i) {
    const bool control = i < data.n_control;
    if (!seen[static_cast<std::size_t>(i)] && (control ? need_control : need_treated)) {
      throw DataError("weights file has no weight for " +
                      std::string(control ? "control" : "treated") + " unit " +
                      std::to_string(data.input_index[static_cast<std::size_t>(i)]));
    }
  }
  return w;
}

}  // namespace tfb::io
