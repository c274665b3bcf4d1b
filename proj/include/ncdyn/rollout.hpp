// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ncdyn/models.hpp"
#include "ncdyn/quadrature.hpp"
#include "ncdyn/tape.hpp"

namespace ncdyn {

struct RolloutConfig {
  int order = 2;                  // K, capped at kMaxNcOrder
  bool use_velocity_reg = false;  // supervise intermediate velocities (the "+" variant)
  double reg_weight = 1e-3;       // lambda_r
  double reg_decay = 0.999;       // multiplicative, per epoch
  double t_window = 1.0;
  // Rescale fed-back velocities by their batch RMS (to the input velocity's
  // batch RMS) before re-input, so every recurrence step sees inputs at the
  // data scale.
  bool normalize_feedback = true;

  // Which velocity fills quadrature node 0 for K >= 1: `inputs` (default)
  // anchors it at the known instantaneous input velocity, exactly the
  // recurrence's initialization; `outputs` runs the backbone on the initial
  // state for it. Nodes 1..K are backbone outputs either way, and K = 0
  // always uses the backbone output (the single node is the model's estimate
  // of the window-average velocity -- with the raw input there would be
  // nothing to learn).
  enum class QuadratureNodes { outputs, inputs };
  QuadratureNodes nodes = QuadratureNodes::inputs;
};

// The K+1 node velocities and the intermediate Euler coordinates produced by
// running the backbone recurrently over one window.
struct RolloutTrace {
  int order = 0;
  double t_window = 0.0;
  Var x0;
  std::vector<Var> velocities;  // order+1 quadrature nodes
  std::vector<Var> coords;      // intermediate coordinates x^1..x^K
};

// A backbone bound to one tape: maps a state (x, v) to a velocity.
using BackboneFn = std::function<Var(Tape&, Var x, Var v)>;

// Runs the backbone recurrently: each step feeds the previous coordinate and
// velocity back in, the coordinate advancing by x^i = x^{i-1} + v^{i-1} * T/K.
// Gradients flow through the whole chain. Throws on non-finite intermediates,
// naming the step.
RolloutTrace rollout(Tape& tape, const BackboneFn& backbone, Var x0, Var v0,
                     const RolloutConfig& cfg);

// x^T = x^0 + (T/K) * sum_k w^k v^k  (x^0 + T v^0 for K = 0).
Var predict(Tape& tape, const RolloutTrace& trace, const NcWeights& weights);

struct RolloutLoss {
  Var main;                     // MSE(x^T, target)
  std::optional<Var> velocity_reg;  // MSE over all K+1 node velocities, when frames exist
};

// `true_velocities` are the ground-truth velocities at the K+1 nodes (empty
// when the sample has no intermediate frames). With use_velocity_reg set,
// missing velocities are an error; otherwise the reg term is a diagnostic
// that callers exclude from the optimized total.
RolloutLoss rollout_loss(Tape& tape, const RolloutTrace& trace, const NcWeights& weights,
                         Var target_x, const std::vector<Var>& true_velocities,
                         const RolloutConfig& cfg);

// ---------------------------------------------------------------------------
// consecutive long-horizon prediction

struct PredictedState {
  Tensor x, v;  // [n, 3]
};

// Plain forward velocity map (no gradients), e.g. a trained backbone.
using VelocityFn = std::function<Tensor(const Tensor& x, const Tensor& v)>;

// Chains `horizon_windows` windows, emitting one state per intermediate time
// point (max(K,1) per window). The first window runs the standard rollout +
// quadrature prediction; subsequent windows feed the mean of the K+1 most
// recent states into the backbone for every step. If a coordinate leaves
// [-divergence_bound, divergence_bound] (or turns non-finite) the sequence
// is truncated with a warning and the prefix is returned.
std::vector<PredictedState> consecutive_predict(const VelocityFn& velocity,
                                                const PredictedState& initial,
                                                const RolloutConfig& cfg, int horizon_windows,
                                                double divergence_bound = 1e6);

// Wraps a trained model into a VelocityFn for one system's graph.
VelocityFn make_velocity_fn(const ModelParams& params, const SystemState& s);

}  // namespace ncdyn
