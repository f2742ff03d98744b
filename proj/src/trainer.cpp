#include "gpcde/trainer.hpp"

#include "gpcde/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

namespace gpcde {

MinibatchSampler::MinibatchSampler(Eigen::Index n, Eigen::Index batch, Rng& rng)
    : n_(n), batch_(batch), rng_(&rng) {
  if (n < 1) throw ConfigError("minibatches need at least one data point");
  if (batch < 1 || batch > n) throw ConfigError("batch size must be in [1, N]");
  perm_.resize(static_cast<size_t>(n));
  std::iota(perm_.begin(), perm_.end(), 0);
  pos_ = perm_.size();
}

std::vector<int> MinibatchSampler::next() {
  if (pos_ >= perm_.size()) {
    if (batch_ < n_) std::shuffle(perm_.begin(), perm_.end(), *rng_);
    pos_ = 0;
  }
  const size_t end = std::min(perm_.size(), pos_ + static_cast<size_t>(batch_));
  std::vector<int> out(perm_.begin() + static_cast<std::ptrdiff_t>(pos_),
                       perm_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  return out;
}

std::vector<std::vector<int>> minibatches(Eigen::Index n, Eigen::Index batch, Rng& rng) {
  MinibatchSampler s(n, batch, rng);
  std::vector<std::vector<int>> out;
  Eigen::Index covered = 0;
  while (covered < n) {
    out.push_back(s.next());
    covered += static_cast<Eigen::Index>(out.back().size());
  }
  return out;
}

Matrix kmeans(const Matrix& points, Eigen::Index k, Rng& rng, int iterations) {
  const Eigen::Index n = points.rows();
  if (n < 1 || k < 1) throw ConfigError("kmeans needs points and k >= 1");
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix centroids(k, points.cols());
  for (Eigen::Index c = 0; c < k; ++c) {
    centroids.row(c) = points.row(order[static_cast<size_t>(c % n)]);
    if (c >= n) centroids.row(c) += 0.1 * standard_normal(1, points.cols(), rng);
  }
  if (k >= n) return centroids;

  std::vector<Eigen::Index> assign(static_cast<size_t>(n), -1);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centroids.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<size_t>(i)] != best) {
        assign[static_cast<size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, points.cols());
    Vector counts = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<size_t>(i)]) += points.row(i);
      counts(assign[static_cast<size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts(c) > 0.0) centroids.row(c) = sums.row(c) / counts(c);
    }
  }
  return centroids;
}

GpCdeModel initialize_model(const ModelConfig& config, const Matrix& x, const Matrix& y, Rng& rng) {
  config.validate();
  const Eigen::Index n = y.rows();
  if (n < 1) throw ConfigError("training data is empty");
  if (y.cols() != config.output_dim) throw DimensionError("y has the wrong number of columns");
  if (config.use_conditions && (x.rows() != n || x.cols() != config.input_dim)) {
    throw DimensionError("x must be N x input_dim");
  }
  if (config.batch_size > n) throw ConfigError("batch_size exceeds the number of data points");

  Matrix a_mean;
  if (config.projection_dim > 0) {
    a_mean = standard_normal(config.projection_dim, config.input_dim, rng) /
             std::sqrt(static_cast<double>(config.input_dim));
  }
  const Eigen::Index sub = std::min<Eigen::Index>(n, 2000);
  std::vector<int> rows(static_cast<size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  Matrix pts(sub, config.gp_input_dim());
  for (Eigen::Index i = 0; i < sub; ++i) {
    Eigen::Index col = 0;
    if (config.use_conditions) {
      const Vector xi = x.row(rows[static_cast<size_t>(i)]).transpose();
      const Vector cond = config.projection_dim > 0 ? Vector(a_mean * xi) : xi;
      pts.row(i).head(cond.size()) = cond.transpose();
      col = cond.size();
    }
    if (config.latent_dim > 0) pts.row(i).segment(col, config.latent_dim) = standard_normal(1, config.latent_dim, rng);
  }
  const Matrix z = kmeans(pts, config.num_inducing, rng);

  KernelSpec k;
  k.family = config.kernel;
  k.signal_variance = 1.0;
  k.lengthscales = Vector::Ones(config.gp_input_dim());
  GpCdeModel model = make_model(config, n, z, k, rng);
  if (config.projection_dim > 0) model.params.set_value(param_names::kProjMean, a_mean);
  return model;
}

std::vector<std::string> adam_param_names(const GpCdeModel& model) {
  std::set<std::string> excluded;
  if (model.config.variational_update != VariationalUpdate::kAdam) {
    for (const auto& name : model.variational_param_names()) excluded.insert(name);
  }
  if (!model.config.train_noise) excluded.insert(param_names::kNoise);
  std::vector<std::string> names;
  for (const auto& name : model.params.names()) {
    if (excluded.count(name) == 0) names.push_back(name);
  }
  return names;
}

double full_batch_elbo(const GpCdeModel& model, const Matrix& x, const Matrix& y) {
  Rng unused(0);
  const Eigen::Index n = y.rows();
  return model_elbo(model, x, y, all_indices(n), draw_for_model(model, n, unused, true));
}

namespace {

std::uint64_t training_stream(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL; }

}  // namespace

TrainedModel train(GpCdeModel model, const Matrix& x, const Matrix& y, const TrainOptions& options) {
  const ModelConfig& c = model.config;
  c.validate();
  const Eigen::Index n = y.rows();
  if (model.num_data != n) throw DimensionError("model was laid out for a different number of data points");
  const Eigen::Index batch = c.batch_size == 0 ? n : c.batch_size;
  if (batch > n) throw ConfigError("batch_size exceeds the number of data points");

  Rng rng(training_stream(c.seed));
  MinibatchSampler sampler(n, batch, rng);
  AdamOptions ao;
  ao.learning_rate = c.learning_rate;
  ao.decay = c.lr_decay;
  ao.decay_steps = static_cast<long>(c.lr_decay_steps);
  Adam adam(ao);
  std::vector<std::string> adam_names = adam_param_names(model);
  // q(u) gets its own Adam instance when it has its own learning rate.
  std::vector<std::string> qu_names;
  if (c.variational_update == VariationalUpdate::kAdam && c.variational_learning_rate > 0.0) {
    qu_names = model.variational_param_names();
    std::erase_if(adam_names, [&](const std::string& n) {
      return std::find(qu_names.begin(), qu_names.end(), n) != qu_names.end();
    });
  }
  AdamOptions qo = ao;
  qo.learning_rate = c.variational_learning_rate > 0.0 ? c.variational_learning_rate : c.learning_rate;
  Adam qu_adam(qo);
  const NatGradOptions ng{c.natgrad_step, 5};

  const auto start = std::chrono::steady_clock::now();
  TrainedModel out;
  double smoothed = 0.0;
  bool have_smoothed = false;

  for (long it = 1; it <= static_cast<long>(c.iterations); ++it) {
    const std::vector<int> idx = sampler.next();
    const LatentDraws draws = draw_for_model(model, static_cast<Eigen::Index>(idx.size()), rng);
    double estimate = 0.0;
    try {
      GraphBuilder build = [&](ad::Tape& tape, const BoundParams& bound) {
        return model_bound(tape, bound, model_vars(model, tape, bound), model, x, y, idx, draws).elbo;
      };
      const ValueAndGrad vg = evaluate_with_grad(build, model.params);
      estimate = vg.value;
      std::map<std::string, Matrix> grads;
      for (const auto& name : adam_names) grads[name] = -vg.grads.at(name);
      adam.step(model.params, grads);
      if (!qu_names.empty()) {
        std::map<std::string, Matrix> qgrads;
        for (const auto& name : qu_names) qgrads[name] = -vg.grads.at(name);
        qu_adam.step(model.params, qgrads);
      }

      if (c.variational_update == VariationalUpdate::kNatGrad) {
        natgrad_update(model, variational_gradients(model, x, y, idx, draws), ng);
      } else if (c.variational_update == VariationalUpdate::kAnalytic) {
        set_optimal_qu(model, x, y, draw_for_model(model, n, rng, true));
      }
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(estimate)) {
      throw NumericalError("training diverged at iteration " + std::to_string(it) + ": non-finite bound");
    }
    smoothed = have_smoothed ? 0.9 * smoothed + 0.1 * estimate : estimate;
    have_smoothed = true;

    if (it % options.record_every == 0 || it == static_cast<long>(c.iterations)) {
      CurvePoint p;
      p.iteration = it;
      p.elbo = options.full_batch_curve ? full_batch_elbo(model, x, y) : smoothed;
      p.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      out.curve.push_back(p);
      if (options.on_record) options.on_record(p);
    }
  }
  out.model = std::move(model);
  return out;
}

TrainedModel train(const ModelConfig& config, const Matrix& x, const Matrix& y, const TrainOptions& options) {
  Rng rng(config.seed);
  return train(initialize_model(config, x, y, rng), x, y, options);
}

}  // namespace gpcde
