// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace ncdyn {

namespace {

void check_finite(const Tape& tape, Var v, const char* what, int step) {
  if (!tape.value(v).all_finite()) {
    throw std::runtime_error(std::string("rollout: non-finite ") + what + " at step " +
                             std::to_string(step));
  }
}

// v * target_rms / sqrt(mean(v^2) + eps): pins the fed-back velocity to the
// input's batch scale so the backbone sees a stationary input distribution
// across recurrence steps. Gradients flow through the statistic of v itself;
// target_rms comes from the (constant) window input.
Var rms_normalize(Tape& tape, Var v, double target_rms) {
  const std::size_t numel = tape.value(v).size();
  Var ms = tape.scale(tape.squared_norm(v), 1.0 / static_cast<double>(numel));
  Var inv_rms = tape.rsqrt(tape.add(ms, tape.constant(Tensor::scalar(1e-12))));
  return tape.mul(v, tape.scale(inv_rms, target_rms));
}

double batch_rms(const Tensor& t) {
  double ms = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) ms += t[i] * t[i];
  return std::sqrt(ms / static_cast<double>(t.size()) + 1e-12);
}

}  // namespace

RolloutTrace rollout(Tape& tape, const BackboneFn& backbone, Var x0, Var v0,
                     const RolloutConfig& cfg) {
  if (cfg.order < 0 || cfg.order > kMaxNcOrder) {
    throw std::invalid_argument("rollout: order " + std::to_string(cfg.order) + " outside [0, " +
                                std::to_string(kMaxNcOrder) + "]");
  }
  if (!(cfg.t_window > 0.0)) throw std::invalid_argument("rollout: t_window must be positive");
  RolloutTrace trace;
  trace.order = cfg.order;
  trace.t_window = cfg.t_window;
  trace.x0 = x0;

  // K = 0 has no recurrence; its single node is always the backbone output.
  const bool input_node0 =
      cfg.nodes == RolloutConfig::QuadratureNodes::inputs && cfg.order >= 1;
  Var v_node;  // velocity at the newest node
  if (input_node0) {
    v_node = v0;
  } else {
    v_node = backbone(tape, x0, v0);
    check_finite(tape, v_node, "velocity", 0);
  }
  trace.velocities.push_back(v_node);

  const int k = cfg.order;
  if (k == 0) return trace;
  const double h = cfg.t_window / k;
  const double input_rms = batch_rms(tape.value(v0));
  Var x_state = x0;  // coordinate at the newest node
  for (int i = 1; i <= k; ++i) {
    Var v_in = v_node;
    bool fed_back = !input_node0 || i > 1;  // the raw input velocity is never normalized
    if (cfg.normalize_feedback && fed_back) v_in = rms_normalize(tape, v_node, input_rms);
    Var v_next = backbone(tape, x_state, v_in);
    check_finite(tape, v_next, "velocity", i);
    Var x_next = tape.add(x_state, tape.scale(v_node, h));
    check_finite(tape, x_next, "coordinate", i);
    trace.velocities.push_back(v_next);
    trace.coords.push_back(x_next);
    v_node = v_next;
    x_state = x_next;
  }
  return trace;
}

Var predict(Tape& tape, const RolloutTrace& trace, const NcWeights& weights) {
  if (weights.order != trace.order) {
    throw std::invalid_argument("predict: trace order " + std::to_string(trace.order) +
                                " does not match weights order " + std::to_string(weights.order));
  }
  if (static_cast<int>(trace.velocities.size()) != trace.order + 1) {
    throw std::invalid_argument("predict: trace has " + std::to_string(trace.velocities.size()) +
                                " velocities for order " + std::to_string(trace.order));
  }
  if (trace.order == 0) {
    return tape.add(trace.x0, tape.scale(trace.velocities[0], trace.t_window));
  }
  const double step = trace.t_window / trace.order;
  Var acc = tape.scale(trace.velocities[0], step * weights.as_double[0]);
  for (int k = 1; k <= trace.order; ++k) {
    acc = tape.add(acc, tape.scale(trace.velocities[static_cast<std::size_t>(k)],
                                   step * weights.as_double[static_cast<std::size_t>(k)]));
  }
  return tape.add(trace.x0, acc);
}

RolloutLoss rollout_loss(Tape& tape, const RolloutTrace& trace, const NcWeights& weights,
                         Var target_x, const std::vector<Var>& true_velocities,
                         const RolloutConfig& cfg) {
  RolloutLoss loss;
  loss.main = tape.mse_loss(predict(tape, trace, weights), target_x);
  if (true_velocities.empty()) {
    if (cfg.use_velocity_reg) {
      throw std::invalid_argument(
          "rollout_loss: velocity regularization requested but the sample has no intermediate "
          "velocity frames");
    }
    return loss;
  }
  if (true_velocities.size() != trace.velocities.size()) {
    throw std::invalid_argument("rollout_loss: got " + std::to_string(true_velocities.size()) +
                                " true velocities for " + std::to_string(trace.velocities.size()) +
                                " nodes");
  }
  // Squared L2 averaged over particles, dimensions and the K+1 nodes.
  Var acc;
  for (std::size_t k = 0; k < trace.velocities.size(); ++k) {
    Var term = tape.mse_loss(trace.velocities[k], true_velocities[k]);
    acc = k == 0 ? term : tape.add(acc, term);
  }
  loss.velocity_reg = tape.scale(acc, 1.0 / static_cast<double>(trace.velocities.size()));
  return loss;
}

// ---------------------------------------------------------------------------
// consecutive prediction

namespace {

bool state_ok(const Tensor& x, double bound) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || std::abs(x[i]) > bound) return false;
  }
  return true;
}

Tensor mean_of(const std::vector<const Tensor*>& ts) {
  Tensor out(ts.front()->shape());
  for (const Tensor* t : ts)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*t)[i];
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= static_cast<double>(ts.size());
  return out;
}

Tensor rms_normalize_plain(const Tensor& v, double target_rms) {
  double ms = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) ms += v[i] * v[i];
  ms /= static_cast<double>(v.size());
  double s = target_rms / std::sqrt(ms + 1e-12);
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * s;
  return out;
}

}  // namespace

std::vector<PredictedState> consecutive_predict(const VelocityFn& velocity,
                                                const PredictedState& initial,
                                                const RolloutConfig& cfg, int horizon_windows,
                                                double divergence_bound) {
  if (horizon_windows < 1) throw std::invalid_argument("consecutive_predict: horizon must be >= 1");
  const int k = cfg.order;
  const int steps_per_window = k > 0 ? k : 1;
  const double h = cfg.t_window / steps_per_window;
  const NcWeights weights = nc_weights(k);
  const double input_rms = batch_rms(initial.v);  // stationary scale reference

  std::vector<PredictedState> history;  // emitted states, most recent last
  auto truncated = [&](int window) {
    std::fprintf(stderr,
                 "consecutive_predict: divergence at window %d (coordinate bound %g); returning "
                 "%zu states\n",
                 window, divergence_bound, history.size());
    return history;
  };

  // Window 1 is the plain rollout + quadrature prediction (the sliding window
  // has no history to average yet).
  {
    Tape tape;
    BackboneFn fn = [&velocity](Tape& t, Var x, Var v) {
      return t.constant(velocity(t.value(x), t.value(v)));
    };
    RolloutTrace trace = rollout(tape, fn, tape.constant(initial.x), tape.constant(initial.v), cfg);
    for (int i = 1; i < k; ++i) {
      history.push_back({tape.value(trace.coords[static_cast<std::size_t>(i - 1)]),
                         tape.value(trace.velocities[static_cast<std::size_t>(i)])});
    }
    Var xT = predict(tape, trace, weights);
    history.push_back({tape.value(xT), tape.value(trace.velocities.back())});
    for (const auto& st : history) {
      if (!state_ok(st.x, divergence_bound) || !state_ok(st.v, divergence_bound)) return truncated(1);
    }
  }

  for (int window = 2; window <= horizon_windows; ++window) {
    for (int step = 0; step < steps_per_window; ++step) {
      // Mean over the k+1 most recent states; the sequence seen so far is the
      // initial state followed by everything emitted.
      std::vector<const Tensor*> xs, vs;
      const int total = 1 + static_cast<int>(history.size());
      const int take = std::min(k + 1, total);
      for (int idx = total - take; idx < total; ++idx) {
        const PredictedState& st = idx == 0 ? initial : history[static_cast<std::size_t>(idx - 1)];
        xs.push_back(&st.x);
        vs.push_back(&st.v);
      }
      Tensor mean_x = mean_of(xs);
      Tensor mean_v = mean_of(vs);
      Tensor v_in = mean_v;
      if (cfg.normalize_feedback && step > 0) v_in = rms_normalize_plain(mean_v, input_rms);
      Tensor v_hat = velocity(mean_x, v_in);
      Tensor x_next(history.back().x.shape());
      const Tensor& x_last = history.back().x;
      for (std::size_t i = 0; i < x_next.size(); ++i) x_next[i] = x_last[i] + v_hat[i] * h;
      if (!state_ok(x_next, divergence_bound) || !state_ok(v_hat, divergence_bound)) {
        return truncated(window);
      }
      history.push_back({std::move(x_next), std::move(v_hat)});
    }
  }
  return history;
}

VelocityFn make_velocity_fn(const ModelParams& params, const SystemState& s) {
  GraphBatch g = make_graph_single(params.cfg, s);
  ModelParams copy = params;  // self-contained closure
  return [g, copy](const Tensor& x, const Tensor& v) {
    Tape tape;
    BoundModel bm = bind_model(tape, copy, g);
    return tape.value(model_velocity(tape, bm, g, tape.constant(x), tape.constant(v)));
  };
}

}  // namespace ncdyn
