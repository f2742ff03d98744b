#include "gpcde/config.hpp"

#include "gpcde/error.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace gpcde {

namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be a JSON object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  void read_index(const std::string& key, Eigen::Index& out) {
    long long v = out;
    read(key, v);
    out = static_cast<Eigen::Index>(v);
  }

  Section sub(const std::string& key) {
    known_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, where_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.count(key)) throw ConfigError("unknown key '" + where_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> known_;
};

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

void read_model_fields(Section& s, ModelConfig& c) {
  std::string mode = to_string(c.latent_mode);
  std::string kernel = to_string(c.kernel);
  std::string expectation = to_string(c.expectation);
  std::vector<long long> hidden(c.encoder_hidden.begin(), c.encoder_hidden.end());
  s.read_index("latent_dim", c.latent_dim);
  s.read("use_conditions", c.use_conditions);
  s.read("latent_mode", mode);
  s.read("kernel", kernel);
  s.read_index("num_inducing", c.num_inducing);
  s.read_index("projection_dim", c.projection_dim);
  s.read_index("mixing_dim", c.mixing_dim);
  s.read("noise_variance", c.noise_variance);
  s.read("train_noise", c.train_noise);
  s.read("encoder_hidden", hidden);
  s.read("expectation", expectation);
  s.read("mc_samples", c.mc_samples);
  s.read("eval_mc_samples", c.eval_mc_samples);
  s.read("quadrature_points", c.quadrature_points);
  c.latent_mode = latent_mode_from_string(mode);
  c.kernel = kernel_family_from_string(kernel);
  c.expectation = latent_expectation_from_string(expectation);
  c.encoder_hidden.assign(hidden.begin(), hidden.end());
}

void read_training_fields(Section& s, ModelConfig& c) {
  std::string update = to_string(c.variational_update);
  s.read("variational_update", update);
  s.read("natgrad_step", c.natgrad_step);
  s.read("learning_rate", c.learning_rate);
  s.read("variational_learning_rate", c.variational_learning_rate);
  s.read("lr_decay", c.lr_decay);
  s.read_index("lr_decay_steps", c.lr_decay_steps);
  s.read_index("batch_size", c.batch_size);
  s.read_index("iterations", c.iterations);
  c.variational_update = variational_update_from_string(update);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json j = parse(json_text);
  RunConfig rc;
  Section top(j, "config");

  Section data = top.sub("data");
  data.read("train", rc.data.train);
  data.read("test", rc.data.test);
  data.read("inputs", rc.data.columns.inputs);
  data.read("outputs", rc.data.columns.outputs);
  std::map<std::string, double> periodic;
  data.read("periodic", periodic);
  rc.data.columns.periodic.assign(periodic.begin(), periodic.end());
  data.read("standardize", rc.data.standardize);
  data.finish();
  if (rc.data.train.empty()) throw ConfigError("config.data.train is required");
  if (rc.data.columns.outputs.empty()) throw ConfigError("config.data.outputs must list at least one column");

  Section split = top.sub("split");
  split.read_index("test_size", rc.split.test_size);
  split.read("seed", rc.split.seed);
  split.finish();

  Section model = top.sub("model");
  read_model_fields(model, rc.model);
  model.finish();

  Section training = top.sub("training");
  read_training_fields(training, rc.model);
  training.read("record_every", rc.record_every);
  training.finish();

  top.read("seed", rc.model.seed);
  top.read_index("eval_samples", rc.eval_samples);
  top.read("output_dir", rc.output_dir);
  top.finish();

  if (rc.record_every < 1) throw ConfigError("config.training.record_every must be >= 1");
  if (rc.eval_samples < 1) throw ConfigError("config.eval_samples must be >= 1");
  if (rc.split.test_size < 0) throw ConfigError("config.split.test_size must be >= 0");
  rc.model.input_dim = static_cast<Eigen::Index>(rc.data.columns.inputs.size() + 2 * rc.data.columns.periodic.size());
  rc.model.output_dim = static_cast<Eigen::Index>(rc.data.columns.outputs.size());
  if (!rc.model.use_conditions) rc.model.input_dim = 0;
  rc.model.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string model_config_to_json(const ModelConfig& c) {
  json j;
  j["input_dim"] = c.input_dim;
  j["output_dim"] = c.output_dim;
  j["latent_dim"] = c.latent_dim;
  j["use_conditions"] = c.use_conditions;
  j["latent_mode"] = to_string(c.latent_mode);
  j["kernel"] = to_string(c.kernel);
  j["num_inducing"] = c.num_inducing;
  j["projection_dim"] = c.projection_dim;
  j["mixing_dim"] = c.mixing_dim;
  j["noise_variance"] = c.noise_variance;
  j["train_noise"] = c.train_noise;
  j["encoder_hidden"] = std::vector<long long>(c.encoder_hidden.begin(), c.encoder_hidden.end());
  j["expectation"] = to_string(c.expectation);
  j["mc_samples"] = c.mc_samples;
  j["eval_mc_samples"] = c.eval_mc_samples;
  j["quadrature_points"] = c.quadrature_points;
  j["variational_update"] = to_string(c.variational_update);
  j["natgrad_step"] = c.natgrad_step;
  j["learning_rate"] = c.learning_rate;
  j["variational_learning_rate"] = c.variational_learning_rate;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_steps"] = c.lr_decay_steps;
  j["batch_size"] = c.batch_size;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  const json j = parse(json_text);
  ModelConfig c;
  Section s(j, "model");
  s.read_index("input_dim", c.input_dim);
  s.read_index("output_dim", c.output_dim);
  read_model_fields(s, c);
  read_training_fields(s, c);
  s.read("seed", c.seed);
  s.finish();
  c.validate();
  return c;
}

}  // namespace gpcde
