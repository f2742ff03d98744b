#pragma once

// Tabular data: CSV ingestion, standardization, feature encoding and splits.

#include "gpcde/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gpcde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> header;
  Matrix values;

  Eigen::Index column_index(const std::string& name) const;
  Vector column(const std::string& name) const;
};

/// Throws IoError on a missing file and FormatError on ragged rows, non-numeric or
/// non-finite cells.
Table read_csv(const std::string& path);
/// Written with 17 significant digits via a temporary file and a rename.
void write_csv(const std::string& path, const Table& table);

/// Replace the contents of `path` atomically.
void write_file_atomic(const std::string& path, const std::string& bytes);

struct ColumnStats {
  Vector mean;
  Vector std;
};

/// Column means and population standard deviations. Constant columns get
/// std = 1 so that they standardize to zero.
ColumnStats column_stats(const Matrix& m);
Matrix standardize(const Matrix& m, const ColumnStats& s);
Matrix unstandardize(const Matrix& m, const ColumnStats& s);

struct ConditionedDataset {
  Matrix x;  // N x D_x (may have zero columns)
  Matrix y;  // N x D_y
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  Eigen::Index size() const { return y.rows(); }
  ConditionedDataset subset(const std::vector<int>& rows) const;
};

/// Standardization fitted on training data only.
struct Standardizer {
  ColumnStats x;
  ColumnStats y;

  static Standardizer fit(const ConditionedDataset& train);
  ConditionedDataset apply(const ConditionedDataset& d) const;
  /// log-density correction for mapping a density on standardized outputs
  /// back to original units: -sum(log std_y).
  double log_jacobian() const;
};

/// (sin(2 pi v / period), cos(2 pi v / period)) per value.
Matrix encode_periodic(const Vector& v, double period);

struct ColumnSpec {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  /// Input columns replaced by their sine and cosine, with their periods.
  std::vector<std::pair<std::string, double>> periodic;
};

/// Select and encode columns. Periodic columns become "<name>_sin" and
/// "<name>_cos" and are appended after the plain inputs.
ConditionedDataset make_dataset(const Table& table, const ColumnSpec& spec);

Table to_table(const ConditionedDataset& d);

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

/// Greedy farthest-point test set: the first point is seed mod N, then each
/// step adds the point with the largest minimum distance to the test set
/// (ties to the lowest index). Both index lists are sorted ascending.
Split split_farthest_point(const Matrix& x, Eigen::Index test_size, std::uint64_t seed);

}  // namespace gpcde
