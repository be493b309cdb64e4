#pragma once

// CSV formats:
//   logit file       header logit_0,...,logit_{K-1},label; one record per row
//   binary features  header x_0,...,x_{d-1},label
//   reliability      header bin_low,bin_high,count,mean_confidence,mean_accuracy
//
// Doubles in data files are written in shortest round-trip form; reliability
// rows use 9 significant digits.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calibkit/core.hpp"
#include "calibkit/metrics.hpp"
#include "calibkit/synthetic.hpp"

namespace calibkit {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void parse_fail(const std::string& source, std::size_t line, const std::string& message) {
  throw Error(ErrorKind::format, source + ":" + std::to_string(line) + ": " + message);
}

inline double parse_double(std::string_view token, const std::string& source, std::size_t line) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (token.empty() || ec != std::errc() || ptr != last) {
    parse_fail(source, line, "cannot parse number '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) parse_fail(source, line, "non-finite value '" + std::string(token) + "'");
  return value;
}

inline int parse_label(std::string_view token, const std::string& source, std::size_t line) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    parse_fail(source, line, "cannot parse label '" + std::string(token) + "'");
  }
  return value;
}

inline void append_double(std::string& out, double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, ptr);
}

}  // namespace detail

/// Parses a logit CSV. `source` names the input in error messages.
inline LogitDataset read_logit_csv(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) detail::parse_fail(source, 1, "missing header");
  ++line_no;
  const auto header = detail::split_commas(line);
  if (header.size() < 3 || header.back() != "label") {
    detail::parse_fail(source, line_no, "header must be logit_0,...,logit_{K-1},label with K >= 2");
  }
  const int k = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < k; ++j) {
    if (header[static_cast<std::size_t>(j)] != "logit_" + std::to_string(j)) {
      detail::parse_fail(source, line_no, "unexpected header column '" + std::string(header[static_cast<std::size_t>(j)]) + "'");
    }
  }
  std::vector<double> logits;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size()) {
      detail::parse_fail(source, line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                                              std::to_string(fields.size()));
    }
    for (int j = 0; j < k; ++j) logits.push_back(detail::parse_double(fields[static_cast<std::size_t>(j)], source, line_no));
    const int label = detail::parse_label(fields.back(), source, line_no);
    if (label < 0 || label >= k) {
      detail::parse_fail(source, line_no, "label " + std::to_string(label) + " outside [0, " + std::to_string(k) + ")");
    }
    labels.push_back(label);
  }
  return LogitDataset(k, std::move(logits), std::move(labels));
}

inline LogitDataset read_logit_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::format, "cannot open '" + path + "'");
  return read_logit_csv(in, path);
}

inline void write_logit_csv(std::ostream& out, const LogitDataset& data) {
  std::string buf;
  for (int j = 0; j < data.num_classes(); ++j) buf += "logit_" + std::to_string(j) + ",";
  buf += "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.logits(i)) {
      detail::append_double(buf, v);
      buf += ',';
    }
    buf += std::to_string(data.label(i));
    buf += '\n';
  }
  out << buf;
}

inline void write_binary_csv(std::ostream& out, const BinaryDataset& data) {
  std::string buf;
  for (std::size_t j = 0; j < data.dim; ++j) buf += "x_" + std::to_string(j) + ",";
  buf += "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) {
      detail::append_double(buf, v);
      buf += ',';
    }
    buf += std::to_string(data.y[i]);
    buf += '\n';
  }
  out << buf;
}

/// %.9g formatting used by the reliability export.
inline std::string format_sig9(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

inline void write_reliability_csv(std::ostream& out, const std::vector<ReliabilityRow>& rows) {
  out << "bin_low,bin_high,count,mean_confidence,mean_accuracy\n";
  for (const auto& row : rows) {
    out << format_sig9(row.bin_low) << ',' << format_sig9(row.bin_high) << ',' << row.count << ',';
    if (row.mean_confidence) out << format_sig9(*row.mean_confidence);
    out << ',';
    if (row.mean_accuracy) out << format_sig9(*row.mean_accuracy);
    out << '\n';
  }
}

}  // namespace calibkit
