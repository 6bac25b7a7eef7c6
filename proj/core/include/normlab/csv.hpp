// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace normlab {

// Doubles are printed with the shortest representation that round-trips
// exactly, '.' decimal separator, so emit -> parse -> emit is bit-stable.
std::string format_double(double v);
double parse_double(const std::string& text);

// One evaluation point of a training run.
struct MetricRow {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double test_nll = 0.0;
  double test_error_rate = 0.0;
  double wall_time_seconds = 0.0;

  bool operator==(const MetricRow& other) const = default;
};

inline constexpr const char* kMetricHeader =
    "epoch,train_nll,test_nll,test_error_rate,wall_time_seconds";

std::string format_metric_row(const MetricRow& row);

// Writes header + one line per row, LF endings. Empty rows rejected;
// unwritable path raises DataError naming the path.
void emit_plotdata(const std::vector<MetricRow>& rows, const std::string& path);
std::vector<MetricRow> parse_plotdata(const std::string& path);

// Incremental writer: header on open, then one flushed line per append, so a
// run that aborts mid-training leaves a readable partial file behind.
class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::string& header);

  void append(const std::string& line);
  void append(const MetricRow& row) { append(format_metric_row(row)); }
  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::ofstream out_;
};

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace normlab
