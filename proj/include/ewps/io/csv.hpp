#pragma once

// Minimal numeric CSV: UTF-8, header row, ',' separator, '.' decimal point.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ewps/errors.hpp"
#include "ewps/likelihood.hpp"

namespace ewps::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw InputError("column '" + name + "' not found in input header");
  }

  const std::vector<double>& column(const std::string& name) const { return columns[index_of(name)]; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

inline bool looks_numeric(const std::vector<std::string>& cells) {
  for (const auto& c : cells) {
    double v;
    if (!parse_number(c, v)) return false;
  }
  return true;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source = "input") {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    if (t.header.empty()) {
      t.header = detail::split(line);
      if (detail::looks_numeric(t.header)) {
        throw InputError(source + ": missing header row (first line is numeric)");
      }
      for (const auto& h : t.header) {
        if (h.empty()) throw InputError(source + ": empty column name in header");
      }
      t.columns.assign(t.header.size(), {});
      continue;
    }
    const auto cells = detail::split(line);
    if (cells.size() != t.header.size()) {
      throw InputError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " fields, expected " + std::to_string(t.header.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      double v;
      if (!detail::parse_number(cells[j], v)) {
        throw InputError(source + ": non-numeric value '" + cells[j] + "' at line " + std::to_string(line_no) +
                         ", column '" + t.header[j] + "'");
      }
      t.columns[j].push_back(v);
    }
  }
  if (t.header.empty()) throw InputError(source + ": empty file (missing header row)");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

inline constexpr const char* kInterceptName = "(intercept)";

inline RegressionData regression_data(const CsvTable& t, const std::string& response,
                                      const std::vector<std::string>& covariates, bool intercept, Link link = {}) {
  for (const auto& c : covariates) {
    if (c == response) throw InputError("covariate '" + c + "' is also the response column");
  }
  const auto& y = t.column(response);
  const std::size_t n = y.size();
  const Eigen::Index k = static_cast<Eigen::Index>(covariates.size()) + (intercept ? 1 : 0);
  RegressionData d;
  d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
  d.X.resize(static_cast<Eigen::Index>(n), k);
  Eigen::Index col = 0;
  if (intercept) {
    d.X.col(col++).setOnes();
    d.covariate_names.emplace_back(kInterceptName);
  }
  for (const auto& c : covariates) {
    const auto& v = t.column(c);
    d.X.col(col++) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(n));
    d.covariate_names.push_back(c);
  }
  d.link = link;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] > 0.0)) {
      throw InputError("response '" + response + "' must be positive; row " + std::to_string(i + 1) + " has " +
                       std::to_string(y[i]));
    }
  }
  return d;
}

}  // namespace ewps::io
