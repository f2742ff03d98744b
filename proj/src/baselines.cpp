#include "gpcde/baselines.hpp"

#include "gpcde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gpcde {

namespace {

const double kLog2Pi = std::log(2.0 * std::acos(-1.0));

double mixture_logpdf(const Matrix& centres, const std::vector<int>& rows, const Vector& y, double h) {
  const double d = static_cast<double>(y.size());
  Vector lp(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    lp(static_cast<Eigen::Index>(i)) = -0.5 * (centres.row(rows[i]).transpose() - y).squaredNorm() / (h * h);
  }
  const double m = lp.maxCoeff();
  return m + std::log((lp.array() - m).exp().mean()) - 0.5 * d * (kLog2Pi + 2.0 * std::log(h));
}

}  // namespace

void KdeModel::validate() const {
  if (y.rows() < 1) throw ConfigError("KDE needs at least one training point");
  if (!(bandwidth > 0.0)) throw ConfigError("KDE bandwidth must be > 0");
  if (neighbours < 0) throw ConfigError("KDE neighbour count must be >= 0");
  if (conditional()) {
    if (x.rows() != y.rows()) throw DimensionError("KDE inputs and outputs disagree");
    if (neighbours > y.rows()) throw ConfigError("KDE neighbour count exceeds the training size");
  }
}

KdeModel make_ukde(const Matrix& y, double bandwidth) {
  KdeModel m;
  m.y = y;
  m.bandwidth = bandwidth;
  m.validate();
  return m;
}

KdeModel make_ckde(const Matrix& x, const Matrix& y, double bandwidth, Eigen::Index neighbours) {
  if (neighbours < 1) throw ConfigError("conditional KDE needs at least one neighbour");
  KdeModel m;
  m.x = x;
  m.y = y;
  m.bandwidth = bandwidth;
  m.neighbours = neighbours;
  m.validate();
  return m;
}

std::vector<int> nearest_neighbours(const Matrix& x, const Vector& query, Eigen::Index k) {
  if (query.size() != x.cols()) throw DimensionError("neighbour query has the wrong length");
  if (k < 1 || k > x.rows()) throw ConfigError("neighbour count out of range");
  const Vector d = (x.rowwise() - query.transpose()).rowwise().squaredNorm();
  std::vector<int> idx(static_cast<size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    return d(a) < d(b) || (d(a) == d(b) && a < b);
  });
  idx.resize(static_cast<size_t>(k));
  return idx;
}

double kde_logpdf(const KdeModel& model, const std::optional<Vector>& x, const Vector& y) {
  if (y.size() != model.y.cols()) throw DimensionError("KDE query has the wrong output dimension");
  if (model.conditional()) {
    if (!x) throw ConfigError("conditional KDE needs a condition");
    return mixture_logpdf(model.y, nearest_neighbours(model.x, *x, model.neighbours), y, model.bandwidth);
  }
  std::vector<int> all(static_cast<size_t>(model.y.rows()));
  std::iota(all.begin(), all.end(), 0);
  return mixture_logpdf(model.y, all, y, model.bandwidth);
}

double kde_nlpp(const KdeModel& model, const Matrix& x, const Matrix& y) {
  const Eigen::Index n = y.rows();
  if (n < 1) throw ConfigError("nlpp needs a non-empty test set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::optional<Vector> xi = model.conditional() ? std::optional<Vector>(x.row(i).transpose()) : std::nullopt;
    total += kde_logpdf(model, xi, y.row(i).transpose());
  }
  return -total / static_cast<double>(n);
}

std::vector<double> default_bandwidth_grid(const Matrix& y) {
  const double s = column_stats(y).std.mean();
  std::vector<double> grid;
  for (int i = 0; i < 20; ++i) grid.push_back(s * std::pow(10.0, -2.0 + 3.0 * i / 19.0));
  return grid;
}

double kde_select_bandwidth(const Matrix& y, int folds, const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("bandwidth grid is empty");
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  const Eigen::Index n = y.rows();
  if (n < folds) throw ConfigError("fewer data points than folds");
  for (double h : grid) {
    if (!(h > 0.0)) throw ConfigError("bandwidth candidates must be > 0");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(grid.size());
  const double d = static_cast<double>(y.cols());
  const Eigen::ArrayXd h = Eigen::Map<const Eigen::ArrayXd>(grid.data(), k);
  const Eigen::ArrayXd inv2h2 = 0.5 / h.square();
  const Eigen::ArrayXd norm = -0.5 * d * (kLog2Pi + 2.0 * h.log());

  Eigen::ArrayXd score = Eigen::ArrayXd::Zero(k);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    for (Eigen::Index i = 0; i < n; ++i) (i % folds == f ? test_rows : train_rows).push_back(static_cast<int>(i));
    Matrix train(static_cast<Eigen::Index>(train_rows.size()), y.cols());
    for (size_t i = 0; i < train_rows.size(); ++i) train.row(static_cast<Eigen::Index>(i)) = y.row(train_rows[i]);
    const double log_n = std::log(static_cast<double>(train.rows()));
    Eigen::ArrayXd fold = Eigen::ArrayXd::Zero(k);
    for (int t : test_rows) {
      const Eigen::ArrayXd d2 = (train.rowwise() - y.row(t)).rowwise().squaredNorm().array();
      const double dmin = d2.minCoeff();
      for (Eigen::Index c = 0; c < k; ++c) {
        // log-sum-exp shifted by the nearest training point.
        fold(c) += -dmin * inv2h2(c) + std::log((-(d2 - dmin) * inv2h2(c)).exp().sum()) - log_n + norm(c);
      }
    }
    score += fold / static_cast<double>(test_rows.size());
  }
  score /= folds;

  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < k; ++c) {
    if (score(c) > score(best) || (score(c) == score(best) && h(c) > h(best))) best = c;
  }
  return grid[static_cast<size_t>(best)];
}

}  // namespace gpcde
