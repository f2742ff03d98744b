#include "gpcde/data.hpp"

#include "gpcde/error.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace gpcde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Eigen::Index Table::column_index(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<Eigen::Index>(j);
  }
  throw FormatError("no column named '" + name + "'");
}

Vector Table::column(const std::string& name) const { return values.col(column_index(name)); }

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header row");
  t.header = split_line(line);
  for (const auto& h : t.header) {
    if (h.empty()) throw FormatError(path + ": empty column name in header");
  }
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v)) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad numeric value '" + c + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return t;
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace '" + path + "'");
  }
}

void write_csv(const std::string& path, const Table& table) {
  if (table.values.cols() != static_cast<Eigen::Index>(table.header.size())) {
    throw DimensionError("write_csv: header and values disagree");
  }
  std::string s;
  for (size_t j = 0; j < table.header.size(); ++j) s += (j ? "," : "") + table.header[j];
  s += '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", table.values(i, j));
      if (j) s += ',';
      s += buf;
    }
    s += '\n';
  }
  write_file_atomic(path, s);
}

ColumnStats column_stats(const Matrix& m) {
  if (m.rows() < 1) throw FormatError("cannot compute statistics of an empty column");
  ColumnStats s;
  s.mean = m.colwise().mean().transpose();
  s.std = ((m.rowwise() - s.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) {
    if (!(s.std(j) > 0.0)) s.std(j) = 1.0;
  }
  return s;
}

Matrix standardize(const Matrix& m, const ColumnStats& s) {
  if (m.cols() != s.mean.size()) throw DimensionError("standardize: column count mismatch");
  return ((m.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array()).matrix();
}

Matrix unstandardize(const Matrix& m, const ColumnStats& s) {
  if (m.cols() != s.mean.size()) throw DimensionError("unstandardize: column count mismatch");
  return ((m.array().rowwise() * s.std.transpose().array()).rowwise() + s.mean.transpose().array()).matrix();
}

ConditionedDataset ConditionedDataset::subset(const std::vector<int>& rows) const {
  ConditionedDataset d;
  d.x_names = x_names;
  d.y_names = y_names;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  d.y.resize(static_cast<Eigen::Index>(rows.size()), y.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= y.rows()) throw DimensionError("subset: row index out of range");
    if (x.cols() > 0) d.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    d.y.row(static_cast<Eigen::Index>(i)) = y.row(rows[i]);
  }
  return d;
}

Standardizer Standardizer::fit(const ConditionedDataset& train) {
  Standardizer s;
  s.y = column_stats(train.y);
  if (train.x.cols() > 0) {
    s.x = column_stats(train.x);
  } else {
    s.x.mean = Vector::Zero(0);
    s.x.std = Vector::Zero(0);
  }
  return s;
}

ConditionedDataset Standardizer::apply(const ConditionedDataset& d) const {
  ConditionedDataset out = d;
  if (d.x.cols() > 0) out.x = standardize(d.x, x);
  out.y = standardize(d.y, y);
  return out;
}

double Standardizer::log_jacobian() const { return -y.std.array().log().sum(); }

Matrix encode_periodic(const Vector& v, double period) {
  if (!(period > 0.0)) throw ConfigError("period must be > 0");
  const double two_pi = 2.0 * std::acos(-1.0);
  Matrix out(v.size(), 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = two_pi * v(i) / period;
    out(i, 0) = std::sin(a);
    out(i, 1) = std::cos(a);
  }
  return out;
}

ConditionedDataset make_dataset(const Table& table, const ColumnSpec& spec) {
  if (spec.outputs.empty()) throw ConfigError("at least one output column is required");
  ConditionedDataset d;
  const Eigen::Index n = table.values.rows();
  const Eigen::Index dx = static_cast<Eigen::Index>(spec.inputs.size() + 2 * spec.periodic.size());
  d.x.resize(n, dx);
  Eigen::Index col = 0;
  for (const auto& name : spec.inputs) {
    d.x.col(col++) = table.column(name);
    d.x_names.push_back(name);
  }
  for (const auto& [name, period] : spec.periodic) {
    d.x.middleCols(col, 2) = encode_periodic(table.column(name), period);
    col += 2;
    d.x_names.push_back(name + "_sin");
    d.x_names.push_back(name + "_cos");
  }
  d.y.resize(n, static_cast<Eigen::Index>(spec.outputs.size()));
  for (size_t j = 0; j < spec.outputs.size(); ++j) {
    d.y.col(static_cast<Eigen::Index>(j)) = table.column(spec.outputs[j]);
    d.y_names.push_back(spec.outputs[j]);
  }
  return d;
}

Table to_table(const ConditionedDataset& d) {
  Table t;
  t.header = d.x_names;
  t.header.insert(t.header.end(), d.y_names.begin(), d.y_names.end());
  t.values.resize(d.size(), d.x.cols() + d.y.cols());
  if (d.x.cols() > 0) t.values.leftCols(d.x.cols()) = d.x;
  t.values.rightCols(d.y.cols()) = d.y;
  return t;
}

Split split_farthest_point(const Matrix& x, Eigen::Index test_size, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  if (test_size < 1 || test_size >= n) throw ConfigError("test size must be in [1, N)");
  std::vector<bool> in_test(static_cast<size_t>(n), false);
  Vector min_d = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Eigen::Index next = static_cast<Eigen::Index>(seed % static_cast<std::uint64_t>(n));
  for (Eigen::Index t = 0; t < test_size; ++t) {
    in_test[static_cast<size_t>(next)] = true;
    const Vector d = (x.rowwise() - x.row(next)).rowwise().norm();
    min_d = min_d.cwiseMin(d);
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_test[static_cast<size_t>(i)]) continue;
      if (best < 0 || min_d(i) > min_d(best)) best = i;
    }
    next = best;
  }
  Split s;
  for (Eigen::Index i = 0; i < n; ++i) (in_test[static_cast<size_t>(i)] ? s.test : s.train).push_back(static_cast<int>(i));
  return s;
}

}  // namespace gpcde
