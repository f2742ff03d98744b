#include "gpcde/pipeline.hpp"

#include "gpcde/density.hpp"
#include "gpcde/error.hpp"
#include "gpcde/synthetic.hpp"

#include <chrono>

namespace gpcde {

ConditionedDataset load_dataset(const std::string& path, const ColumnSpec& columns, bool use_conditions) {
  ConditionedDataset d = make_dataset(read_csv(path), columns);
  if (!use_conditions) {
    d.x = Matrix(d.size(), 0);
    d.x_names.clear();
  }
  return d;
}

Split split_dataset(const ConditionedDataset& d, Eigen::Index test_size, std::uint64_t seed) {
  return split_farthest_point(d.x.cols() > 0 ? d.x : d.y, test_size, seed);
}

PreparedData prepare_data(const RunConfig& rc) {
  ConditionedDataset train = load_dataset(rc.data.train, rc.data.columns, rc.model.use_conditions);
  std::optional<ConditionedDataset> test;
  if (rc.split.test_size > 0) {
    const Split s = split_dataset(train, rc.split.test_size, rc.split.seed);
    test = train.subset(s.test);
    train = train.subset(s.train);
  }
  if (!rc.data.test.empty()) {
    if (test) throw ConfigError("config: use either data.test or split.test_size, not both");
    test = load_dataset(rc.data.test, rc.data.columns, rc.model.use_conditions);
  }
  PreparedData out;
  out.standardizer = rc.data.standardize ? Standardizer::fit(train)
                                         : identity_standardizer(train.x.cols(), train.y.cols());
  out.train = out.standardizer.apply(train);
  if (test) out.test = out.standardizer.apply(*test);
  return out;
}

double evaluate_nlpp(const SavedModel& saved, const ConditionedDataset& raw, Eigen::Index samples, Rng& rng) {
  const ConditionedDataset d = saved.standardizer.apply(raw);
  return nlpp(saved.trained.model, d.x, d.y, samples, rng) - saved.standardizer.log_jacobian();
}

RunResult run_training(const RunConfig& rc, const TrainOptions& options) {
  const PreparedData data = prepare_data(rc);
  RunResult out;
  out.saved.trained = train(rc.model, data.train.x, data.train.y, options);
  out.saved.standardizer = data.standardizer;
  out.saved.columns = rc.data.columns;
  if (data.test) {
    Rng rng(rc.model.seed);
    out.test_nlpp = nlpp(out.saved.trained.model, data.test->x, data.test->y, rc.eval_samples, rng) -
                    data.standardizer.log_jacobian();
  }
  return out;
}

std::vector<NatgradDemoArm> natgrad_demo(const NatgradDemoOptions& options) {
  const ConditionedDataset train_set = digit_like(options.train_size, options.seed * 2 + 11);
  const ConditionedDataset test_set = digit_like(options.test_size, options.seed * 2 + 12);

  ModelConfig c;
  c.use_conditions = false;
  c.input_dim = 0;
  c.output_dim = train_set.y.cols();
  c.num_inducing = 10;
  c.latent_dim = 1;
  c.latent_mode = LatentMode::kPerPointGaussian;
  c.expectation = LatentExpectation::kQuadrature;
  c.quadrature_points = 20;
  c.natgrad_step = options.natgrad_step;
  c.learning_rate = options.learning_rate;
  c.batch_size = 0;
  c.iterations = options.iterations;
  c.seed = options.seed;

  const std::pair<const char*, VariationalUpdate> arms[] = {
      {"analytic", VariationalUpdate::kAnalytic},
      {"natgrad", VariationalUpdate::kNatGrad},
      {"adam", VariationalUpdate::kAdam},
  };
  std::vector<NatgradDemoArm> out;
  for (const auto& [name, update] : arms) {
    ModelConfig arm = c;
    arm.variational_update = update;
    if (update == VariationalUpdate::kAdam) arm.variational_learning_rate = options.adam_variational_learning_rate;
    TrainOptions o;
    o.record_every = options.record_every;
    o.full_batch_curve = true;
    const auto t0 = std::chrono::steady_clock::now();
    NatgradDemoArm result;
    result.name = name;
    result.trained = train(arm, train_set.x, train_set.y, o);
    Rng rng(options.seed + 7);
    result.test_loglik = -nlpp(result.trained.model, test_set.x, test_set.y, options.eval_samples, rng);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace gpcde
