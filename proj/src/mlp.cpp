// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace ncdyn {

int ParamStore::add(const std::string& name, Tensor value) {
  if (find(name) >= 0) throw std::invalid_argument("param store: duplicate name " + name);
  names.push_back(name);
  values.push_back(std::move(value));
  return static_cast<int>(values.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values) n += t.size();
  return n;
}

std::vector<Var> bind_params(Tape& tape, const ParamStore& store) {
  std::vector<Var> vars;
  vars.reserve(store.count());
  for (const Tensor& t : store.values) vars.push_back(tape.leaf(t, /*requires_grad=*/true));
  return vars;
}

Mlp init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, Rng& rng,
             bool zero_output_layer) {
  if (spec.layers.empty()) throw std::invalid_argument("mlp: empty spec");
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i) {
    if (spec.layers[i].out != spec.layers[i + 1].in) {
      throw std::invalid_argument("mlp: layer " + std::to_string(i) + " output dim " +
                                  std::to_string(spec.layers[i].out) + " does not chain into layer " +
                                  std::to_string(i + 1) + " input dim " +
                                  std::to_string(spec.layers[i + 1].in));
    }
  }
  Mlp mlp;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[i];
    bool zero = zero_output_layer && i + 1 == spec.layers.size();
    double bound = 1.0 / std::sqrt(static_cast<double>(ls.in));
    Tensor w({ls.in, ls.out});
    if (!zero) {
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform(-bound, bound);
    }
    Mlp::Layer layer;
    layer.spec = ls;
    std::string base = prefix + "." + std::to_string(i);
    layer.weight = store.add(base + ".w", std::move(w));
    layer.bias = store.add(base + ".b", Tensor({ls.out}));
    if (ls.layer_norm) {
      layer.ln_gain = store.add(base + ".ln_g", Tensor::filled({ls.out}, 1.0));
      layer.ln_bias = store.add(base + ".ln_b", Tensor({ls.out}));
    }
    mlp.layers.push_back(layer);
  }
  return mlp;
}

Var mlp_forward(Tape& tape, const Mlp& mlp, const std::vector<Var>& bound, Var x) {
  Var h = x;
  for (const Mlp::Layer& layer : mlp.layers) {
    h = tape.add_bias(tape.matmul(h, bound[static_cast<std::size_t>(layer.weight)]),
                      bound[static_cast<std::size_t>(layer.bias)]);
    if (layer.spec.layer_norm) {
      h = tape.layer_norm(h, bound[static_cast<std::size_t>(layer.ln_gain)],
                          bound[static_cast<std::size_t>(layer.ln_bias)]);
    }
    if (layer.spec.act == Activation::relu) h = tape.relu(h);
  }
  return h;
}

}  // namespace ncdyn
