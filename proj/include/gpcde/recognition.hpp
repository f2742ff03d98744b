#pragma once

// Amortized encoder h_phi: (x_n, y_n) -> (mu_w, scale_w) with diagonal
// covariance. Hidden layers use tanh, the output layer is linear and its second
// half is a log-scale.

#include "gpcde/params.hpp"
#include "gpcde/random.hpp"

#include <vector>

namespace gpcde {

struct EncoderNetwork {
  std::vector<Matrix> weights;  // layer i maps width_i -> width_{i+1}; shape in x out
  std::vector<Matrix> biases;   // 1 x out

  Eigen::Index input_dim() const { return weights.front().rows(); }
  Eigen::Index latent_dim() const { return weights.back().cols() / 2; }
  size_t num_layers() const { return weights.size(); }
};

/// Xavier-uniform weights and zero biases. `hidden` lists hidden widths.
EncoderNetwork make_encoder(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                            Eigen::Index latent_dim, Rng& rng);

struct EncodedLatent {
  Vector mean;
  Vector scale;
};

EncodedLatent encode(const EncoderNetwork& net, const Vector& x, const Vector& y);

/// Registry names: "<prefix>w<i>", "<prefix>b<i>".
void register_encoder(ParamRegistry& registry, const EncoderNetwork& net,
                      const std::string& prefix = "encoder.");
EncoderNetwork encoder_from_registry(const ParamRegistry& registry, size_t num_layers,
                                     const std::string& prefix = "encoder.");

struct EncoderVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
};

EncoderVars encoder_vars(const BoundParams& bound, size_t num_layers,
                         const std::string& prefix = "encoder.");

struct EncodedLatentVars {
  ad::Var mean;      // B x D_w
  ad::Var logscale;  // B x D_w
};

/// `inputs` holds rows [x_n, y_n].
EncodedLatentVars encode(const EncoderVars& net, ad::Var inputs);

}  // namespace gpcde
