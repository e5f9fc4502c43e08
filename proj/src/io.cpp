#include "pdlearn/io.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace pdlearn {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json number(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double read_number(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream os(path, std::ios::out | mode);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

}  // namespace

nlohmann::json metric_to_json(const MetricRecord& r, bool include_wall_time) {
  nlohmann::json j;
  j["iter"] = r.iter;
  j["objective_g0x"] = number(r.objective_g0x);
  j["realized_utility"] = number(r.realized_utility);
  j["constraint_residual_norm"] = number(r.constraint_residual_norm);
  j["power_residual"] = number(r.power_residual);
  j["lambda_norm"] = number(r.lambda_norm);
  j["mu_norm"] = number(r.mu_norm);
  if (include_wall_time) j["wall_ms"] = number(r.wall_ms);
  nlohmann::json res = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.residual.size(); ++i) res.push_back(number(r.residual(i)));
  j["residual"] = std::move(res);
  return j;
}

MetricRecord metric_from_json(const nlohmann::json& j) {
  try {
    MetricRecord r;
    r.iter = j.at("iter").get<long>();
    r.objective_g0x = read_number(j, "objective_g0x");
    r.realized_utility = read_number(j, "realized_utility");
    r.constraint_residual_norm = read_number(j, "constraint_residual_norm");
    r.power_residual = read_number(j, "power_residual");
    r.lambda_norm = read_number(j, "lambda_norm");
    r.mu_norm = read_number(j, "mu_norm");
    r.wall_ms = j.contains("wall_ms") ? read_number(j, "wall_ms") : 0.0;
    const auto& res = j.at("residual");
    r.residual.resize(static_cast<Eigen::Index>(res.size()));
    for (std::size_t i = 0; i < res.size(); ++i)
      r.residual(static_cast<Eigen::Index>(i)) =
          res[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : res[i].get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric row: ") + e.what());
  }
}

MetricsWriter::MetricsWriter(const std::string& path, const nlohmann::json& header,
                             bool include_wall_time)
    : os_(open_out(path)), wall_(include_wall_time) {
  os_ << header.dump() << '\n';
  os_.flush();
}

void MetricsWriter::write(const MetricRecord& r) {
  require(r.iter > last_iter_, "metrics: iterations must be strictly increasing");
  last_iter_ = r.iter;
  os_ << metric_to_json(r, wall_).dump() << '\n';
  os_.flush();
}

void MetricsWriter::write_abort(const std::string& message, const MetricRecord& r) {
  nlohmann::json j;
  j["event"] = "aborted";
  j["message"] = message;
  j["record"] = metric_to_json(r, wall_);
  os_ << j.dump() << '\n';
  os_.flush();
}

MetricsFile read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open metrics file '" + path + "'");
  MetricsFile out;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("metrics: missing header line");
  try {
    out.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics header: ") + e.what());
  }
  if (!out.header.contains("format") || out.header["format"] != "pdlearn-metrics")
    throw FormatError("metrics: header is not a pdlearn-metrics header");
  long last = -1;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("metrics line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("event")) {
      out.aborted = j["event"] == "aborted";
      if (j.contains("message")) out.abort_message = j["message"].get<std::string>();
      continue;
    }
    MetricRecord r = metric_from_json(j);
    if (r.iter <= last)
      throw FormatError("metrics line " + std::to_string(lineno) + ": iter not increasing");
    last = r.iter;
    out.rows.push_back(std::move(r));
  }
  return out;
}

CsvWriter::CsvWriter(const std::string& path, const nlohmann::json& header,
                     const std::vector<std::string>& columns)
    : os_(open_out(path)), width_(columns.size()) {
  require(!columns.empty(), "csv: need at least one column");
  os_ << "# " << header.dump() << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
  os_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  require(cells.size() == width_, "csv: row width does not match the columns");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    require(cells[i].find_first_of(",\n\"") == std::string::npos,
            "csv: cells may not contain commas, quotes or newlines");
    os_ << (i ? "," : "") << cells[i];
  }
  os_ << '\n';
  os_.flush();
}

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open csv '" + path + "'");
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (t.header.is_null()) {
        try {
          t.header = nlohmann::json::parse(line.substr(1));
        } catch (const nlohmann::json::exception& e) {
          throw FormatError(std::string("csv header: ") + e.what());
        }
      }
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.columns.size()) throw FormatError("csv: ragged row");
    t.rows.push_back(std::move(cells));
  }
  if (t.columns.empty()) throw FormatError("csv: missing column row");
  return t;
}

void write_policy_grid(const std::string& path, const nlohmann::json& header,
                       const std::vector<PolicyGridRow>& rows) {
  CsvWriter csv(path, header, {"user", "h", "mu", "sigma", "prob", "mean_action"});
  for (const auto& r : rows)
    csv.row({std::to_string(r.user), format_double(r.h), format_double(r.mu),
             format_double(r.sigma), format_double(r.prob), format_double(r.mean_action)});
}

nlohmann::json report_to_json(const DualityGapReport& r) {
  nlohmann::json j;
  j["p_star_hat"] = number(r.p_star_hat);
  j["d_phi_hat"] = number(r.d_phi_hat);
  j["d_phi_se"] = number(r.d_phi_se);
  j["lambda_norm_bound"] = number(r.lambda_norm_bound);
  j["lambda_norm_oracle"] = number(r.lambda_norm_oracle);
  j["lipschitz_hat"] = number(r.lipschitz_hat);
  j["eps_hat"] = number(r.eps_hat);
  j["refinement_residual"] = number(r.refinement_residual);
  j["mc_tol"] = number(r.mc_tol);
  j["lower_bound"] = number(r.lower_bound);
  j["upper_bound"] = number(r.upper_bound);
  j["upper_ok"] = r.upper_ok;
  j["lower_ok"] = r.lower_ok;
  j["sandwich_ok"] = r.sandwich_ok;
  return j;
}

void append_report(const std::string& path, const nlohmann::json& header,
                   const DualityGapReport& r) {
  std::ofstream os = open_out(path, std::ios::app);
  nlohmann::json line;
  line["header"] = header;
  line["report"] = report_to_json(r);
  os << line.dump() << '\n';
}

}  // namespace pdlearn
