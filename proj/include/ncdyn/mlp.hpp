// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ncdyn/rng.hpp"
#include "ncdyn/tape.hpp"
#include "ncdyn/tensor.hpp"

namespace ncdyn {

enum class Activation { none, relu };

struct LayerSpec {
  int in = 0;
  int out = 0;
  bool layer_norm = false;  // applied after the linear map, before the activation
  Activation act = Activation::none;
};

struct MlpSpec {
  std::vector<LayerSpec> layers;
  int input_dim() const { return layers.front().in; }
  int output_dim() const { return layers.back().out; }
};

// Named parameter registry. Order of insertion is the canonical parameter
// order used for optimizer state, gradient vectors and checkpoints.
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor> values;

  int add(const std::string& name, Tensor value);
  int find(const std::string& name) const;  // -1 when absent
  std::size_t count() const { return values.size(); }
  std::size_t scalar_count() const;
};

// Binds every parameter in `store` as a gradient-tracked leaf on `tape`.
// The result is indexed parallel to the store.
std::vector<Var> bind_params(Tape& tape, const ParamStore& store);

// Parameter handles for one MLP, indices into a ParamStore.
struct Mlp {
  struct Layer {
    LayerSpec spec;
    int weight = -1;   // [in, out]
    int bias = -1;     // [out]
    int ln_gain = -1;  // [out], when spec.layer_norm
    int ln_bias = -1;
  };
  std::vector<Layer> layers;
};

// Registers parameters for `spec` under `prefix`. Weights are uniform
// +-1/sqrt(fan_in); biases zero. When `zero_output_layer` the last layer's
// weight and bias start at exactly zero.
Mlp init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng,
             bool zero_output_layer = false);

// Forward pass of `x` ([rows, spec.input_dim]) through the MLP on `tape`.
Var mlp_forward(Tape& tape, const Mlp& mlp, const std::vector<Var>& bound, Var x);

}  // namespace ncdyn
