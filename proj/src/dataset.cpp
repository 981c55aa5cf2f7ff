#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "rblab/io.hpp"

namespace rblab {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void bad_line(const std::string& source, std::size_t line, const std::string& why) {
  throw std::invalid_argument(source + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf, ptr);
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "anchor") return Provenance::anchor;
  if (s == "synthetic") return Provenance::synthetic;
  if (s == "resampled") return Provenance::resampled;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

void write_csv(std::ostream& out, const DatasetMatrix& data) {
  for (Index j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "component,provenance\n";
  const char* prov = to_string(data.provenance);
  for (Index r = 0; r < data.size(); ++r) {
    for (Index j = 0; j < data.dim(); ++j) out << format_real(data.rows(r, j)) << ',';
    out << (data.has_labels() ? data.component_labels[std::size_t(r)] : -1) << ',' << prov << '\n';
  }
}

DatasetMatrix read_csv(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(source_name + ": empty file");
  const auto header = split_commas(line);
  std::vector<std::size_t> value_cols;
  std::ptrdiff_t label_col = -1, prov_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "component") label_col = std::ptrdiff_t(i);
    else if (header[i] == "provenance") prov_col = std::ptrdiff_t(i);
    else if (!header[i].empty() && header[i][0] == 'x') value_cols.push_back(i);
    else bad_line(source_name, 1, "unexpected column '" + header[i] + "'");
  }
  if (value_cols.empty()) bad_line(source_name, 1, "no x0.. columns in header");

  std::vector<std::vector<double>> values;
  std::vector<int> labels;
  bool all_labelled = label_col >= 0;
  Provenance provenance = Provenance::resampled;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size())
      bad_line(source_name, line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                         std::to_string(fields.size()));
    std::vector<double> row;
    for (std::size_t c : value_cols) {
      const std::string& f = fields[c];
      double v = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        bad_line(source_name, line_no, "cannot parse '" + f + "' as a real");
      row.push_back(v);
    }
    values.push_back(std::move(row));
    if (label_col >= 0) {
      const std::string& f = fields[std::size_t(label_col)];
      int k = -1;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), k);
      if (ec != std::errc() || ptr != f.data() + f.size())
        bad_line(source_name, line_no, "cannot parse component '" + f + "'");
      if (k < 0) all_labelled = false;
      labels.push_back(k);
    }
    if (prov_col >= 0) {
      try {
        provenance = provenance_from_string(fields[std::size_t(prov_col)]);
      } catch (const std::invalid_argument& e) {
        bad_line(source_name, line_no, e.what());
      }
    }
  }
  if (values.empty()) throw std::invalid_argument(source_name + ": no data rows");

  DatasetMatrix data;
  data.rows.resize(Index(values.size()), Index(value_cols.size()));
  for (std::size_t r = 0; r < values.size(); ++r)
    for (std::size_t j = 0; j < value_cols.size(); ++j) data.rows(Index(r), Index(j)) = values[r][j];
  data.provenance = provenance;
  if (all_labelled) data.component_labels = std::move(labels);
  return data;
}

DatasetMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  return read_csv(in, path.string());
}

}  // namespace rblab
