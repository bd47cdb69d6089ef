#include "tfb/io/commands.hpp"
#include "tfb/io/csv.hpp"
#include "tfb/io/report.hpp"
#include "tfb/random.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tfb;
using namespace tfb::io;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "tfb_unit_io";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = (scratch_dir() / name).string();
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

std::size_t count_lines(const std::string& path) {
  std::ifstream f(path);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return dataset_from_csv(parse_csv(in));
}

// y = 1 + 2 x1 - x2 exactly, treated units shifted in x1
std::string linear_csv(Index n, std::uint64_t seed, bool exact) {
  Rng rng(seed);
  std::ostringstream out;
  out << "x1,x2,d,y\n";
  for (Index i = 0; i < n; ++i) {
    const int d = i % 3 == 0 ? 1 : 0;
    const double x1 = rng.normal() + 0.5 * d, x2 = rng.normal();
    const double y = 1 + 2 * x1 - x2 + (exact ? 0.0 : rng.normal());
    out << format_double(x1) << ',' << format_double(x2) << ',' << d << ',' << format_double(y) << '\n';
  }
  return out.str();
}

std::string error_message(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("read a small table") {
  const Dataset d = parse("y,d,x1\n1.5,0,0.5\n2.5,1,-1\n");
  CHECK(d.n() == 2);
  CHECK(d.p() == 1);
  CHECK(d.column_names == std::vector<std::string>{"x1"});
  CHECK(d.treated_outcomes()(0) == 2.5);
}

TEST_CASE("quoting, line endings and byte order mark") {
  const Dataset d = parse("\xEF\xBB\xBF\"x,1\",y,d\r\n\"1\",2,0\r\n\r\n3,\"4\",1\r\n");
  CHECK(d.n() == 2);
  CHECK(d.column_names[0] == "x,1");
  CHECK(d.control_outcomes()(0) == 2.0);
  std::istringstream in("a,b\n\"say \"\"hi\"\"\",\"two\nlines\"\n");
  const CsvTable t = parse_csv(in);
  CHECK(t.rows[0][0] == "say \"hi\"");
  CHECK(t.rows[0][1] == "two\nlines");
  CHECK(quote_csv("a,b") == "\"a,b\"");
  CHECK(quote_csv("plain") == "plain");
}

TEST_CASE("bad tables") {
  CHECK(error_message("y,d,x\n1,0,1\n2,2,1\n").find("row 2 (line 3), column 'd'") != std::string::npos);
  CHECK(error_message("y,d,x\n1,0,1\n2,1,abc\n").find("column 'x'") != std::string::npos);
  CHECK(error_message("y,x\n1,0\n2,1\n").find("'d'") != std::string::npos);
  CHECK(error_message("y,d,x,x\n1,0,1,1\n2,1,1,1\n").find("duplicate") != std::string::npos);
  CHECK(error_message("y,d,x\n1,0,1\n").find("at least 2") != std::string::npos);
  CHECK(error_message("y,d,x\n1,0,1\n2,1\n") != "");
  CHECK(error_message("y,d,x\n1,0,1\n2,1,\"open\n") != "");
  CHECK_THROWS_AS(read_csv((scratch_dir() / "missing.csv").string()), DataError);
}

TEST_CASE("number formatting") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.123456789}) {
    CHECK(*parse_double(format_double(v)) == v);
  }
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(!parse_double("1.5x").has_value());
  CHECK(!parse_double("inf").has_value());
  CHECK(!parse_double("").has_value());
}

TEST_CASE("weights round trip at full precision") {
  const Dataset d = parse("y,d,x\n1,0,1\n2,1,2\n3,0,0\n4,0,5\n");
  const GroupWeights w{(Vector(3) << 1.0 / 3.0, 2.0 / 3.0 + 1e-16, 2.0).finished(), Vector::Ones(1)};
  std::stringstream buf;
  write_weights_csv(buf, weight_records(d, w));
  const auto records = read_weights_csv(buf);
  CHECK(records.size() == 4);
  const GroupWeights back = align_weights(records, d, Estimand::ATT);
  CHECK(back.control == w.control);
  // unit_index refers to input rows: row 1 is the treated unit
  for (const auto& r : records) {
    if (r.unit_index == 1) CHECK(r.weight == 1.0);
  }
}

TEST_CASE("weight alignment errors") {
  const Dataset d = parse("y,d,x\n1,0,1\n2,1,2\n3,0,0\n");
  auto records = [](std::vector<std::pair<Index, double>> rows) {
    std::vector<WeightRecord> out;
    for (auto [i, w] : rows) out.push_back({i, w});
    return out;
  };
  CHECK_NOTHROW(align_weights(records({{0, 1.0}, {2, 1.0}}), d, Estimand::ATT));
  CHECK_THROWS_AS(align_weights(records({{0, 1.0}}), d, Estimand::ATT), DataError);
  CHECK_THROWS_AS(align_weights(records({{0, 1.0}, {2, 1.0}, {5, 1.0}}), d, Estimand::ATT), DataError);
  CHECK_THROWS_AS(align_weights(records({{0, 1.0}, {0, 1.0}, {2, 1.0}}), d, Estimand::ATT), DataError);
  CHECK_THROWS_AS(align_weights(records({{0, -1.0}, {2, 1.0}}), d, Estimand::ATT), DataError);
  std::vector<WeightRecord> two_splits{{0, 1.0, 0, 0}, {2, 1.0, 1, 0}, {0, 1.0, 0, 1}, {2, 1.0, 1, 1}};
  CHECK_THROWS_AS(align_weights(two_splits, d, Estimand::ATT), UsageError);
  CHECK_NOTHROW(align_weights(two_splits, d, Estimand::ATT, 1));
}

TEST_CASE("command exit codes") {
  std::ostringstream out, err;
  RunConfig c;
  c.data_path = (scratch_dir() / "missing.csv").string();
  CHECK(run_command(c, out, err) == 2);
  const json e = json::parse(err.str());
  CHECK(e["error"]["kind"] == "data");
  CHECK(out.str().empty());

  err.str("");
  c.data_path = write_file("lin.csv", linear_csv(60, 1, false));
  c.bandwidth = 2.0;  // only valid for krls
  CHECK(run_command(c, out, err) == 1);
  CHECK(json::parse(err.str())["error"]["kind"] == "usage");

  RunConfig s;
  s.command = Subcommand::Simulate;
  s.methods = {"kom"};
  err.str("");
  CHECK(run_command(s, out, err) == 1);
  CHECK(json::parse(err.str())["error"]["message"].get<std::string>().find("tfb_k") != std::string::npos);
  CHECK(exit_code("numerical") == 3);
}

TEST_CASE("estimate writes a versioned report and is deterministic") {
  RunConfig c;
  c.data_path = write_file("lin.csv", linear_csv(60, 1, false));
  c.splits = 3;
  c.seed = 4;
  c.weights_output = (scratch_dir() / "w.csv").string();
  std::ostringstream a, b, err;
  REQUIRE(run_command(c, a, err) == 0);
  CHECK(run_command(c, b, err) == 0);
  CHECK(a.str() == b.str());
  const json r = json::parse(a.str());
  CHECK(r["schema_version"] == kSchemaVersion);
  CHECK(r["command"] == "estimate");
  CHECK(r["result"]["splits"].size() == 3);
  CHECK(r["result"]["ci"].size() == 2);
  // one row per unit and split
  CHECK(count_lines(c.weights_output) == 1 + 3 * 60);
  const auto records = read_weights_csv(c.weights_output);
  CHECK(records.front().split == 0);
  CHECK(records.back().split == 2);
}

TEST_CASE("estimate on identical groups recovers the mean difference") {
  Rng rng(8);
  std::ostringstream csv;
  csv << "y,d,x1,x2\n";
  for (int i = 0; i < 30; ++i) {
    const double x1 = rng.normal(), x2 = rng.normal();
    for (int d = 0; d < 2; ++d) {
      csv << format_double(1 + x1 - 0.5 * x2 + 2.0 * d) << ',' << d << ',' << format_double(x1) << ','
          << format_double(x2) << '\n';
    }
  }
  RunConfig c;
  c.data_path = write_file("twins.csv", csv.str());
  c.splits = 5;
  std::ostringstream out, err;
  REQUIRE(run_command(c, out, err) == 0);
  const json r = json::parse(out.str())["result"];
  CHECK(r["point"].get<double>() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(r["ewc_bias"].get<double>()) < 1e-6);
}

TEST_CASE("diagnose with uniform weights reproduces the raw imbalance") {
  const std::string csv = linear_csv(45, 2, true);
  RunConfig c;
  c.command = Subcommand::Diagnose;
  c.data_path = write_file("exact.csv", csv);
  std::ostringstream w;
  w << "unit_index,weight\n";
  for (int i = 0; i < 45; ++i) w << i << ",1\n";
  c.weights_path = write_file("uniform.csv", w.str());
  std::ostringstream out, err;
  REQUIRE(run_command(c, out, err) == 0);
  const json r = json::parse(out.str())["result"];
  for (const auto& row : r["imbalance_table"]) {
    CHECK(row["post"].get<double>() == doctest::Approx(row["pre"].get<double>()).epsilon(1e-12));
  }
  // an exact linear fit has zero residuals and a zero sandwich covariance
  CHECK(r["tfi"]["chi_sq_term"].get<double>() == doctest::Approx(0.0));
  CHECK(r["point"].get<double>() - r["augmented_point"].get<double>() ==
        doctest::Approx(r["ewc_bias"].get<double>()).epsilon(1e-9));
  CHECK(r["weights_rescaled"] == false);
}

TEST_CASE("weights then diagnose agree") {
  RunConfig c;
  c.command = Subcommand::Weights;
  c.data_path = write_file("lin2.csv", linear_csv(60, 3, false));
  c.weights_output = (scratch_dir() / "tfb_w.csv").string();
  std::ostringstream out, err;
  REQUIRE(run_command(c, out, err) == 0);
  const json wr = json::parse(out.str())["result"];
  CHECK(wr["weights"].size() == 60);
  RunConfig d = c;
  d.command = Subcommand::Diagnose;
  d.weights_path = c.weights_output;
  d.weights_output.clear();
  std::ostringstream out2;
  REQUIRE(run_command(d, out2, err) == 0);
  const json dr = json::parse(out2.str())["result"];
  CHECK(dr["tfi"]["total"].get<double>() == doctest::Approx(wr["tfi"]["total"].get<double>()).epsilon(1e-9));
  CHECK(dr["point"].get<double>() == doctest::Approx(wr["point"].get<double>()).epsilon(1e-9));
}

TEST_CASE("simulate writes one row per replicate and method") {
  RunConfig c;
  c.command = Subcommand::Simulate;
  c.dgp = 2;
  c.n = 100;
  c.replicates = 10;
  c.methods = {"dim"};
  c.replicates_output = (scratch_dir() / "reps.csv").string();
  std::ostringstream out, err;
  REQUIRE(run_command(c, out, err) == 0);
  CHECK(count_lines(c.replicates_output) == 11);
  const json r = json::parse(out.str());
  CHECK(r["result"]["replicate_rows"] == 10);
  CHECK(r["config"]["simulation"]["dgp"] == 2);
}

TEST_CASE("configuration checks") {
  RunConfig c;
  c.data_path = "data.csv";
  CHECK_NOTHROW(check_config(c));
  c.splits = 0;
  CHECK_THROWS_AS(check_config(c), UsageError);
  c.splits = 1;
  c.exclusions = {"x1"};
  CHECK_THROWS_AS(check_config(c), UsageError);
  c.exclusions.clear();
  c.command = Subcommand::Weights;
  c.method = "oracle_ps";
  CHECK_THROWS_AS(check_config(c), UsageError);
  CHECK(parse_subcommand("diagnose") == Subcommand::Diagnose);
  CHECK_THROWS_AS(parse_subcommand("fit"), UsageError);
}

}
