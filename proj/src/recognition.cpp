#include "gpcde/recognition.hpp"

#include "gpcde/error.hpp"

#include <cmath>

namespace gpcde {

EncoderNetwork make_encoder(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                            Eigen::Index latent_dim, Rng& rng) {
  if (input_dim < 1 || latent_dim < 1) throw ConfigError("encoder needs positive input and latent sizes");
  std::vector<Eigen::Index> widths;
  widths.push_back(input_dim);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * latent_dim);
  EncoderNetwork net;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[i] + widths[i + 1]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(widths[i], widths[i + 1]);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Matrix::Zero(1, widths[i + 1]));
  }
  return net;
}

EncodedLatent encode(const EncoderNetwork& net, const Vector& x, const Vector& y) {
  if (x.size() + y.size() != net.input_dim()) throw DimensionError("encode: input size mismatch");
  Matrix h(1, net.input_dim());
  h << x.transpose(), y.transpose();
  for (size_t i = 0; i < net.num_layers(); ++i) {
    h = h * net.weights[i] + net.biases[i];
    if (i + 1 < net.num_layers()) h = h.array().tanh().matrix();
  }
  const Eigen::Index dw = net.latent_dim();
  EncodedLatent out;
  out.mean = h.leftCols(dw).transpose();
  out.scale = h.rightCols(dw).array().exp().transpose();
  return out;
}

void register_encoder(ParamRegistry& registry, const EncoderNetwork& net, const std::string& prefix) {
  for (size_t i = 0; i < net.num_layers(); ++i) {
    const auto& w = net.weights[i];
    const auto& b = net.biases[i];
    registry.add({prefix + "w" + std::to_string(i), w.rows(), w.cols(), Constraint::kFree}, w);
    registry.add({prefix + "b" + std::to_string(i), b.rows(), b.cols(), Constraint::kFree}, b);
  }
}

EncoderNetwork encoder_from_registry(const ParamRegistry& registry, size_t num_layers,
                                     const std::string& prefix) {
  EncoderNetwork net;
  for (size_t i = 0; i < num_layers; ++i) {
    net.weights.push_back(registry.value(prefix + "w" + std::to_string(i)));
    net.biases.push_back(registry.value(prefix + "b" + std::to_string(i)));
  }
  return net;
}

EncoderVars encoder_vars(const BoundParams& bound, size_t num_layers, const std::string& prefix) {
  EncoderVars vars;
  for (size_t i = 0; i < num_layers; ++i) {
    vars.weights.push_back(bound[prefix + "w" + std::to_string(i)]);
    vars.biases.push_back(bound[prefix + "b" + std::to_string(i)]);
  }
  return vars;
}

EncodedLatentVars encode(const EncoderVars& net, ad::Var inputs) {
  ad::Var h = inputs;
  for (size_t i = 0; i < net.weights.size(); ++i) {
    h = ad::matmul(h, net.weights[i]) + net.biases[i];
    if (i + 1 < net.weights.size()) h = ad::tanh(h);
  }
  const Eigen::Index dw = h.cols() / 2;
  return {ad::cols(h, 0, dw), ad::cols(h, dw, dw)};
}

}  // namespace gpcde
