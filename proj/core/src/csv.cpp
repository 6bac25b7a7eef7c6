// SPDX-License-Identifier: Apache-2.0
#include "normlab/csv.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "normlab/errors.hpp"

namespace normlab {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("parse_double: malformed number '" + text + "'");
  }
  return v;
}

std::string format_metric_row(const MetricRow& row) {
  std::string line = std::to_string(row.epoch);
  line += ',';
  line += format_double(row.train_nll);
  line += ',';
  line += format_double(row.test_nll);
  line += ',';
  line += format_double(row.test_error_rate);
  line += ',';
  line += format_double(row.wall_time_seconds);
  return line;
}

void emit_plotdata(const std::vector<MetricRow>& rows, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("emit_plotdata: no rows to write");
  CsvWriter writer(path, kMetricHeader);
  for (const MetricRow& row : rows) writer.append(row);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<MetricRow> parse_plotdata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (line != kMetricHeader) throw DataError(path + ": unexpected header '" + line + "'");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 5) {
      throw DataError(path + ": expected 5 fields, found " + std::to_string(fields.size()));
    }
    MetricRow row;
    row.epoch = static_cast<std::size_t>(std::stoull(fields[0]));
    row.train_nll = parse_double(fields[1]);
    row.test_nll = parse_double(fields[2]);
    row.test_error_rate = parse_double(fields[3]);
    row.wall_time_seconds = parse_double(fields[4]);
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError(path + ": header but no data rows");
  return rows;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header) : path_(path) {
  out_.open(path, std::ios::trunc);
  if (!out_) throw DataError(path + ": cannot open for writing");
  out_ << header << '\n';
  out_.flush();
  if (!out_) throw DataError(path + ": write failed");
}

void CsvWriter::append(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw DataError(path_ + ": write failed");
}

}  // namespace normlab
