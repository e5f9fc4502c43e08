#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdlearn/oracle.hpp"
#include "pdlearn/run.hpp"
#include "pdlearn/trainer.hpp"

namespace pdlearn {

/// Shortest decimal text that reads back to the same double; "nan", "inf"
/// and "-inf" for non-finite values.
std::string format_double(double v);

// metrics.jsonl: a header object on the first line, then one object per
// iteration. Non-finite values are written as null and read back as NaN.

nlohmann::json metric_to_json(const MetricRecord& r, bool include_wall_time);
MetricRecord metric_from_json(const nlohmann::json& j);

class MetricsWriter {
 public:
  /// Truncates `path` and writes the header line.
  MetricsWriter(const std::string& path, const nlohmann::json& header, bool include_wall_time);

  /// Appends one row and flushes it. Rows must arrive in increasing iter order.
  void write(const MetricRecord& r);
  /// Terminal line recording why a run stopped early.
  void write_abort(const std::string& message, const MetricRecord& r);

 private:
  std::ofstream os_;
  bool wall_;
  long last_iter_ = -1;
};

struct MetricsFile {
  nlohmann::json header;
  std::vector<MetricRecord> rows;
  bool aborted = false;
  std::string abort_message;
};

/// Throws FormatError on a missing header, a malformed line or a
/// non-increasing iteration counter.
MetricsFile read_metrics(const std::string& path);

/// CSV with a '#' comment block holding the header object, then a column
/// row, then data rows.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const nlohmann::json& header,
            const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream os_;
  std::size_t width_;
};

struct CsvTable {
  nlohmann::json header;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

void write_policy_grid(const std::string& path, const nlohmann::json& header,
                       const std::vector<PolicyGridRow>& rows);

nlohmann::json report_to_json(const DualityGapReport& r);
/// Appends one line {"header": ..., "report": ...} to a JSONL file.
void append_report(const std::string& path, const nlohmann::json& header,
                   const DualityGapReport& r);

}  // namespace pdlearn
