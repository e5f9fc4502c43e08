#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "pdlearn/io.hpp"

using namespace pdlearn;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("pdlearn_io_" + name); }

MetricRecord record(long iter, double value) {
  MetricRecord r;
  r.iter = iter;
  r.objective_g0x = value;
  r.realized_utility = value / 3.0;
  r.constraint_residual_norm = 0.1;
  r.power_residual = -0.25;
  r.lambda_norm = 2.5;
  r.mu_norm = 0.0;
  r.residual = (Vec(2) << 0.1, -0.25).finished();
  return r;
}

}  // namespace

TEST_CASE("doubles print in shortest round-trip form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("metrics round trip") {
  const auto path = temp_file("metrics.jsonl");
  {
    MetricsWriter w(path.string(), {{"format", "pdlearn-metrics"}, {"seed", 3}}, false);
    w.write(record(0, 1.0 / 7.0));
    MetricRecord nan_row = record(1, std::numeric_limits<double>::quiet_NaN());
    w.write(nan_row);
    CHECK_THROWS_AS(w.write(record(1, 0.0)), ContractViolation);
  }
  const MetricsFile f = read_metrics(path.string());
  CHECK(f.header["seed"] == 3);
  REQUIRE(f.rows.size() == 2);
  CHECK(f.rows[0].objective_g0x == 1.0 / 7.0);
  CHECK(f.rows[0].realized_utility == (1.0 / 7.0) / 3.0);
  CHECK(f.rows[0].residual == record(0, 0).residual);
  CHECK(std::isnan(f.rows[1].objective_g0x));
  CHECK_FALSE(f.aborted);
  fs::remove(path);
}

TEST_CASE("wall time is written only on request") {
  MetricRecord r = record(4, 1.0);
  r.wall_ms = 12.5;
  CHECK_FALSE(metric_to_json(r, false).contains("wall_ms"));
  CHECK(metric_to_json(r, true)["wall_ms"] == 12.5);
}

TEST_CASE("abort line is recognized") {
  const auto path = temp_file("abort.jsonl");
  {
    MetricsWriter w(path.string(), {{"format", "pdlearn-metrics"}}, false);
    w.write(record(0, 1.0));
    w.write_abort("non-finite theta", record(1, 1.0));
  }
  const MetricsFile f = read_metrics(path.string());
  CHECK(f.aborted);
  CHECK(f.abort_message == "non-finite theta");
  CHECK(f.rows.size() == 1);
  fs::remove(path);
}

TEST_CASE("malformed metrics are rejected") {
  const auto path = temp_file("bad.jsonl");
  const std::string header = R"({"format":"pdlearn-metrics"})";
  const std::string row0 = metric_to_json(record(5, 1.0), false).dump();
  const std::string row1 = metric_to_json(record(5, 2.0), false).dump();
  for (const std::string& body :
       {std::string("{\"format\":\"other\"}\n"), header + "\n" + row0 + "\n" + row1 + "\n",
        header + "\n{not json\n", std::string()}) {
    std::ofstream(path) << body;
    CHECK_THROWS_AS(read_metrics(path.string()), FormatError);
  }
  fs::remove(path);
}

TEST_CASE("CSV round trip") {
  const auto path = temp_file("table.csv");
  {
    CsvWriter w(path.string(), {{"format", "pdlearn-summary"}}, {"a", "b"});
    w.row({"1", "x"});
    w.row({format_double(0.1), "y"});
    CHECK_THROWS_AS(w.row({"1,2", "z"}), ContractViolation);
    CHECK_THROWS_AS(w.row({"1"}), ContractViolation);
  }
  const CsvTable t = read_csv(path.string());
  CHECK(t.header["format"] == "pdlearn-summary");
  CHECK(t.columns == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == "0.1");
  fs::remove(path);
}

TEST_CASE("grid spec parsing") {
  const GridSpec g = parse_grid_spec("0.1:2:20");
  CHECK(g.lower == 0.1);
  CHECK(g.upper == 2.0);
  CHECK(g.points == 20);
  CHECK(to_string(g) == "0.1:2:20");
  CHECK(g.values().size() == 20);
  CHECK_THROWS(parse_grid_spec("1:0.5:10"));
  CHECK_THROWS(parse_grid_spec("abc"));
}

TEST_CASE("run config survives JSON") {
  RunConfig c = defaults_for(ProblemKind::interference_mac);
  c.trainer.seed = 99;
  c.hidden = {6, 3};
  const RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.problem == ProblemKind::interference_mac);
}
