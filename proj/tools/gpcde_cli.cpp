// gpcde: train, evaluate and query conditional density models from the shell.

#include "gpcde/baselines.hpp"
#include "gpcde/density.hpp"
#include "gpcde/error.hpp"
#include "gpcde/pipeline.hpp"
#include "gpcde/synthetic.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using namespace gpcde;

std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("'" + cell + "' is not a number");
    }
  }
  return out;
}

// "lo:hi:n" -> n evenly spaced values.
Vector parse_range(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) throw ConfigError("range '" + text + "' must be lo:hi:n");
  const double lo = parse_numbers(parts[0]).at(0);
  const double hi = parse_numbers(parts[1]).at(0);
  const double n = parse_numbers(parts[2]).at(0);
  if (!(n >= 1) || n != std::floor(n)) throw ConfigError("range '" + text + "' needs a positive integer count");
  if (n == 1) return Vector::Constant(1, lo);
  return Vector::LinSpaced(static_cast<Eigen::Index>(n), lo, hi);
}

// Raw condition values in the order of the model's inputs followed by its
// periodic columns, encoded and standardized like the training data.
Vector encode_condition(const SavedModel& saved, const std::string& text) {
  const ColumnSpec& cols = saved.columns;
  const GpCdeModel& model = saved.trained.model;
  if (!model.config.use_conditions || model.config.input_dim == 0) {
    if (!text.empty()) throw ConfigError("this model takes no condition");
    return Vector(0);
  }
  const std::vector<double> values = parse_numbers(text);
  const size_t expected = cols.inputs.size() + cols.periodic.size();
  if (values.size() != expected) {
    throw ConfigError("--condition needs " + std::to_string(expected) + " values");
  }
  Table t;
  t.header = cols.inputs;
  for (const auto& p : cols.periodic) t.header.push_back(p.first);
  t.header.insert(t.header.end(), cols.outputs.begin(), cols.outputs.end());
  t.values = Matrix::Zero(1, static_cast<Eigen::Index>(t.header.size()));
  for (size_t j = 0; j < values.size(); ++j) t.values(0, static_cast<Eigen::Index>(j)) = values[j];
  const ConditionedDataset d = saved.standardizer.apply(make_dataset(t, cols));
  return d.x.row(0).transpose();
}

void write_curve(const std::string& path, const std::vector<CurvePoint>& curve) {
  Table t;
  t.header = {"iteration", "elbo_estimate", "wall_ms"};
  t.values.resize(static_cast<Eigen::Index>(curve.size()), 3);
  for (size_t i = 0; i < curve.size(); ++i) {
    t.values.row(static_cast<Eigen::Index>(i)) << static_cast<double>(curve[i].iteration), curve[i].elbo,
        curve[i].wall_ms;
  }
  write_csv(path, t);
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (!name.empty()) out.push_back(name);
  }
  return out;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const FormatError*>(&e)) return 4;
  if (dynamic_cast<const NumericalError*>(&e)) return 5;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process conditional density estimation"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a bundled synthetic dataset as CSV");
  std::string gen_name;
  Eigen::Index gen_n = 0;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("dataset", gen_name, "heteroscedastic, mini-taxi or digits")
      ->required()
      ->check(CLI::IsMember({"heteroscedastic", "mini-taxi", "digits"}));
  gen->add_option("--n", gen_n, "Number of rows")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // split
  auto* split = app.add_subcommand("split", "Farthest-point train/test split of a CSV");
  std::string split_data, split_columns, split_train, split_test;
  Eigen::Index split_size = 0;
  std::uint64_t split_seed = 0;
  split->add_option("--data", split_data, "Input CSV")->required();
  split->add_option("--columns", split_columns, "Comma-separated columns for distances (default: all)");
  split->add_option("--test-size", split_size, "Number of test rows")->required();
  split->add_option("--seed", split_seed, "Index of the first test point (mod N)");
  split->add_option("--train-out", split_train, "Training CSV")->required();
  split->add_option("--test-out", split_test, "Test CSV")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model from a JSON run configuration");
  std::string tr_config, tr_out;
  std::optional<std::uint64_t> tr_seed;
  bool tr_quiet = false;
  tr->add_option("--config", tr_config, "Run configuration")->required();
  tr->add_option("--seed", tr_seed, "Override the configured seed");
  tr->add_option("--output-dir", tr_out, "Override the configured output directory");
  tr->add_flag("--quiet", tr_quiet, "Do not print the curve while training");

  // eval
  auto* ev = app.add_subcommand("eval", "Mean negative log predictive density on a CSV");
  std::string ev_model, ev_data;
  Eigen::Index ev_samples = 1000;
  std::uint64_t ev_seed = 0;
  ev->add_option("--model", ev_model, "Model file")->required();
  ev->add_option("--data", ev_data, "Test CSV with the model's columns")->required();
  ev->add_option("--samples", ev_samples, "Monte Carlo draws per point")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed, "Random seed");

  // density
  auto* dens = app.add_subcommand("density", "Predictive log-density on a grid of outputs");
  std::string dens_model, dens_condition, dens_out;
  std::vector<std::string> dens_ranges;
  Eigen::Index dens_samples = 1000;
  std::uint64_t dens_seed = 0;
  dens->add_option("--model", dens_model, "Model file")->required();
  dens->add_option("--condition", dens_condition, "Comma-separated raw input values");
  dens->add_option("--range", dens_ranges, "lo:hi:n per output dimension")->required();
  dens->add_option("--samples", dens_samples, "Monte Carlo draws")->check(CLI::PositiveNumber);
  dens->add_option("--seed", dens_seed, "Random seed");
  dens->add_option("--out", dens_out, "Output CSV")->required();

  // sample
  auto* samp = app.add_subcommand("sample", "Draw outputs from the predictive distribution");
  std::string samp_model, samp_condition, samp_out;
  Eigen::Index samp_n = 100;
  std::uint64_t samp_seed = 0;
  samp->add_option("--model", samp_model, "Model file")->required();
  samp->add_option("--condition", samp_condition, "Comma-separated raw input values");
  samp->add_option("--n", samp_n, "Number of samples")->check(CLI::PositiveNumber);
  samp->add_option("--seed", samp_seed, "Random seed");
  samp->add_option("--out", samp_out, "Output CSV")->required();

  // baseline
  auto* base = app.add_subcommand("baseline", "Kernel density baselines on a run configuration's data");
  std::string base_kind, base_config;
  Eigen::Index base_k = 50;
  int base_folds = 5;
  base->add_option("kind", base_kind, "ukde or ckde")->required()->check(CLI::IsMember({"ukde", "ckde"}));
  base->add_option("--config", base_config, "Run configuration (data and split are used)")->required();
  base->add_option("--neighbours", base_k, "Neighbours for the conditional KDE")->check(CLI::PositiveNumber);
  base->add_option("--folds", base_folds, "Cross-validation folds for the bandwidth")->check(CLI::Range(2, 1000));

  // natgrad-demo
  auto* demo = app.add_subcommand("natgrad-demo", "Compare owners of q(u) on the digit-like GP-LVM");
  NatgradDemoOptions demo_opts;
  std::string demo_out = ".";
  demo->add_option("--iterations", demo_opts.iterations, "Iterations per arm")->check(CLI::PositiveNumber);
  demo->add_option("--seed", demo_opts.seed, "Random seed");
  demo->add_option("--step", demo_opts.natgrad_step, "Natural gradient step size");
  demo->add_option("--output-dir", demo_out, "Directory for the per-arm curves");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      ConditionedDataset d;
      if (gen_name == "heteroscedastic") d = heteroscedastic_sinusoid(gen_n, gen_seed);
      if (gen_name == "mini-taxi") d = mini_taxi(gen_n, gen_seed);
      if (gen_name == "digits") d = digit_like(gen_n, gen_seed);
      write_csv(gen_out, to_table(d));
    } else if (*split) {
      const Table t = read_csv(split_data);
      Matrix x = t.values;
      if (!split_columns.empty()) {
        const auto names = split_names(split_columns);
        x.resize(t.values.rows(), static_cast<Eigen::Index>(names.size()));
        for (size_t j = 0; j < names.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = t.column(names[j]);
      }
      if (split_size < 1 || split_size >= t.values.rows()) {
        throw ConfigError("--test-size must be between 1 and " + std::to_string(t.values.rows() - 1));
      }
      const Split s = split_farthest_point(x, split_size, split_seed);
      auto rows = [&](const std::vector<int>& idx) {
        Table out;
        out.header = t.header;
        out.values.resize(static_cast<Eigen::Index>(idx.size()), t.values.cols());
        for (size_t i = 0; i < idx.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = t.values.row(idx[i]);
        return out;
      };
      write_csv(split_train, rows(s.train));
      write_csv(split_test, rows(s.test));
    } else if (*tr) {
      RunConfig rc = load_run_config(tr_config);
      // Relative data paths are resolved against the configuration file.
      const std::filesystem::path base_dir = std::filesystem::path(tr_config).parent_path();
      auto resolve = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base_dir / p).string();
      };
      resolve(rc.data.train);
      resolve(rc.data.test);
      if (tr_seed) rc.model.seed = *tr_seed;
      if (!tr_out.empty()) rc.output_dir = tr_out;
      std::filesystem::create_directories(rc.output_dir);
      TrainOptions o;
      o.record_every = rc.record_every;
      if (!tr_quiet) {
        o.on_record = [](const CurvePoint& p) {
          std::fprintf(stderr, "iteration %ld  elbo %.6g  %.0f ms\n", p.iteration, p.elbo, p.wall_ms);
        };
      }
      const RunResult r = run_training(rc, o);
      const std::filesystem::path out(rc.output_dir);
      save_model((out / "model.gpcde").string(), r.saved);
      write_curve((out / "curve.csv").string(), r.saved.trained.curve);
      std::printf("model %s\n", (out / "model.gpcde").string().c_str());
      if (r.test_nlpp) std::printf("test_nlpp %.6f\n", *r.test_nlpp);
    } else if (*ev) {
      const SavedModel saved = load_model(ev_model);
      const ConditionedDataset d =
          load_dataset(ev_data, saved.columns, saved.trained.model.config.use_conditions);
      Rng rng(ev_seed);
      std::printf("nlpp %.6f\n", evaluate_nlpp(saved, d, ev_samples, rng));
    } else if (*dens) {
      const SavedModel saved = load_model(dens_model);
      const Vector x = encode_condition(saved, dens_condition);
      const Eigen::Index dy = saved.trained.model.config.output_dim;
      if (dy > 2) throw ConfigError("density grids need 1 or 2 outputs; this model has " + std::to_string(dy));
      if (static_cast<Eigen::Index>(dens_ranges.size()) != dy) {
        throw ConfigError("give one --range per output (" + std::to_string(dy) + ")");
      }
      std::vector<Vector> axes, std_axes;
      for (Eigen::Index j = 0; j < dy; ++j) {
        axes.push_back(parse_range(dens_ranges[static_cast<size_t>(j)]));
        std_axes.push_back(
            ((axes.back().array() - saved.standardizer.y.mean(j)) / saved.standardizer.y.std(j)).matrix());
      }
      Rng rng(dens_seed);
      DensityGrid g = density_grid(saved.trained.model, x, std_axes, dens_samples, rng);
      g.axes = axes;
      g.logdens.array() += saved.standardizer.log_jacobian();
      Table t;
      t.header = saved.columns.outputs;
      t.header.push_back("log_density");
      t.values = g.long_format();
      write_csv(dens_out, t);
    } else if (*samp) {
      const SavedModel saved = load_model(samp_model);
      const Vector x = encode_condition(saved, samp_condition);
      Rng rng(samp_seed);
      Table t;
      t.header = saved.columns.outputs;
      t.values = unstandardize(sample_conditional(saved.trained.model, x, samp_n, rng), saved.standardizer.y);
      write_csv(samp_out, t);
    } else if (*base) {
      RunConfig rc = load_run_config(base_config);
      const std::filesystem::path base_dir = std::filesystem::path(base_config).parent_path();
      for (std::string* p : {&rc.data.train, &rc.data.test}) {
        if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base_dir / *p).string();
      }
      const PreparedData data = prepare_data(rc);
      if (!data.test) throw ConfigError("the configuration has no test set (data.test or split.test_size)");
      const double h = kde_select_bandwidth(data.train.y, base_folds, default_bandwidth_grid(data.train.y));
      double score = 0.0;
      if (base_kind == "ukde") {
        score = kde_nlpp(make_ukde(data.train.y, h), data.test->x, data.test->y);
      } else {
        if (data.train.x.cols() == 0) throw ConfigError("ckde needs input columns");
        const Eigen::Index k = std::min(base_k, data.train.size());
        score = kde_nlpp(make_ckde(data.train.x, data.train.y, h, k), data.test->x, data.test->y);
      }
      std::printf("bandwidth %.6g\nnlpp %.6f\n", h, score - data.standardizer.log_jacobian());
    } else if (*demo) {
      std::filesystem::create_directories(demo_out);
      for (const NatgradDemoArm& arm : natgrad_demo(demo_opts)) {
        write_curve((std::filesystem::path(demo_out) / ("curve_" + arm.name + ".csv")).string(), arm.trained.curve);
        std::printf("%-9s test_loglik %.4f  final_elbo %.4f  %.1f s\n", arm.name.c_str(), arm.test_loglik,
                    arm.trained.curve.empty() ? NAN : arm.trained.curve.back().elbo, arm.seconds);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  }
  return 0;
}
