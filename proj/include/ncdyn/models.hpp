// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ncdyn/mlp.hpp"
#include "ncdyn/nbody.hpp"
#include "ncdyn/rng.hpp"
#include "ncdyn/tape.hpp"

namespace ncdyn {

enum class BackboneKind { egnn, rf };

const char* backbone_name(BackboneKind k);
BackboneKind backbone_from_name(const std::string& name);

struct ModelConfig {
  BackboneKind kind = BackboneKind::egnn;
  int hidden = 64;  // embedding / message width D
  int layers = 4;   // message-passing depth; the RF backbone is single-stage
  // Optional z-scoring of the scalar node feature (the charge) computed over
  // the training set; off for the default N-body setup.
  bool input_feature_norm = false;
  double feat_mean = 0.0;
  double feat_std = 1.0;
};

// All learnable state of one backbone. Parameter layout (names and order in
// `store`) is fixed by init_model and is the checkpoint format's contract.
struct ModelParams {
  ModelConfig cfg;
  ParamStore store;
  int embed = -1;           // [2, D] charge-sign embedding table
  std::vector<Mlp> phi_e;   // edge message MLP, one per layer
  std::vector<Mlp> phi_h;   // node update MLP, layers-1 entries
  Mlp phi_x;                // message -> coordinate weight (output layer zero-init)
  Mlp phi_v;                // node feature -> velocity gate
};

ModelParams init_model(const ModelConfig& cfg, Rng& rng);

// Fully connected interaction graph over a batch of identical-size systems,
// plus the per-node/per-edge constant features.
struct GraphBatch {
  int batch = 0;
  int n = 0;  // particles per system
  RowIndex edge_src;           // aggregation center i, length batch*n*(n-1)
  RowIndex edge_dst;           // neighbor j
  RowIndex charge_row;         // embedding row per node (0: q>0, 1: q<0)
  Tensor edge_attr;            // [E, 1] product of (possibly z-scored) charges
  Tensor x0, v0;               // [batch*n, 3] input state
  int nodes() const { return batch * n; }
};

GraphBatch make_graph_single(const ModelConfig& cfg, const SystemState& s);
// Input frame is frames.front() of each sample.
GraphBatch make_graph_batch(const ModelConfig& cfg, const std::vector<const TrajectorySample*>& samples);

// Model parameters bound to one tape, plus the per-call constant features.
struct BoundModel {
  const ModelParams* params = nullptr;
  std::vector<Var> vars;  // parallel to params->store
  Var h0;                 // [nodes, D] gathered charge embeddings
  Var edge_attr;          // constant leaf
};

BoundModel bind_model(Tape& tape, const ModelParams& params, const GraphBatch& g);

// Predicted per-particle velocity for state (x, v) on the bound graph.
//
// EGNN: `layers` rounds of message passing over constant coordinates where
// only the hidden features evolve; the final round emits
//   v_i = phi_v(h_i) * v_i + 1/(n-1) * sum_{j != i} (x_i - x_j) * m_ij.
// RF: single stage whose messages see only the squared distance and the edge
// attribute, with the update scaled by the L2 norm of the input velocity.
Var model_velocity(Tape& tape, const BoundModel& bm, const GraphBatch& g, Var x, Var v);

// Convenience single-system forward; returns the [n, 3] velocity.
Tensor velocity_single(const ModelParams& params, const SystemState& s);

// Scalar edge weight m_ij = phi_x(phi_e(h_i, h_j, |x_i-x_j|^2, e_ij)) for one
// edge, with explicit feature vectors (test/instrumentation surface).
double egnn_message(const ModelParams& params, const Tensor& h_i, const Tensor& h_j,
                    const Vec3& x_i, const Vec3& x_j, double e_ij);

}  // namespace ncdyn
