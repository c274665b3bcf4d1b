// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/models.hpp"

#include <memory>
#include <stdexcept>

namespace ncdyn {

const char* backbone_name(BackboneKind k) { return k == BackboneKind::egnn ? "egnn" : "rf"; }

BackboneKind backbone_from_name(const std::string& name) {
  if (name == "egnn") return BackboneKind::egnn;
  if (name == "rf") return BackboneKind::rf;
  throw std::invalid_argument("unknown backbone '" + name + "' (expected egnn or rf)");
}

namespace {

MlpSpec edge_mlp_spec(int in, int hidden) {
  // Both stages keep layer norm + ReLU; the message feeds further MLPs.
  return MlpSpec{{{in, hidden, true, Activation::relu}, {hidden, hidden, true, Activation::relu}}};
}

MlpSpec node_mlp_spec(int hidden) {
  return MlpSpec{{{2 * hidden, hidden, true, Activation::relu}, {hidden, hidden, false, Activation::none}}};
}

MlpSpec head_mlp_spec(int hidden) {
  return MlpSpec{{{hidden, hidden, true, Activation::relu}, {hidden, 1, false, Activation::none}}};
}

double normalized_charge(const ModelConfig& cfg, double q) {
  return cfg.input_feature_norm ? (q - cfg.feat_mean) / cfg.feat_std : q;
}

}  // namespace

ModelParams init_model(const ModelConfig& cfg, Rng& rng) {
  if (cfg.hidden < 1) throw std::invalid_argument("init_model: hidden must be >= 1");
  if (cfg.layers < 1) throw std::invalid_argument("init_model: layers must be >= 1");
  ModelParams p;
  p.cfg = cfg;
  const int d = cfg.hidden;
  {
    Tensor emb({2, d});
    double bound = 1.0;  // fan-in of a table lookup is 1
    for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = rng.uniform(-bound, bound);
    p.embed = p.store.add("embed", std::move(emb));
  }
  const int depth = cfg.kind == BackboneKind::rf ? 1 : cfg.layers;
  const int edge_in = cfg.kind == BackboneKind::rf ? 2 : 2 * d + 2;
  for (int l = 0; l < depth; ++l) {
    p.phi_e.push_back(init_mlp(p.store, "phi_e." + std::to_string(l), edge_mlp_spec(edge_in, d), rng));
    if (l + 1 < depth) {
      p.phi_h.push_back(init_mlp(p.store, "phi_h." + std::to_string(l), node_mlp_spec(d), rng));
    }
  }
  p.phi_x = init_mlp(p.store, "phi_x", head_mlp_spec(d), rng, /*zero_output_layer=*/true);
  p.phi_v = init_mlp(p.store, "phi_v", head_mlp_spec(d), rng);
  return p;
}

GraphBatch make_graph_single(const ModelConfig& cfg, const SystemState& s) {
  const int n = s.size();
  GraphBatch g;
  g.batch = 1;
  g.n = n;
  auto src = std::make_shared<std::vector<int>>();
  auto dst = std::make_shared<std::vector<int>>();
  auto crow = std::make_shared<std::vector<int>>();
  std::vector<double> attr;
  for (int i = 0; i < n; ++i) {
    crow->push_back(s.charge[static_cast<std::size_t>(i)] > 0.0 ? 0 : 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      src->push_back(i);
      dst->push_back(j);
      attr.push_back(normalized_charge(cfg, s.charge[static_cast<std::size_t>(i)]) *
                     normalized_charge(cfg, s.charge[static_cast<std::size_t>(j)]));
    }
  }
  g.edge_src = src;
  g.edge_dst = dst;
  g.charge_row = crow;
  const int edge_count = static_cast<int>(attr.size());
  g.edge_attr = Tensor({edge_count, 1}, std::move(attr));
  std::vector<double> xs, vs;
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      xs.push_back(s.pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
      vs.push_back(s.vel[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
    }
  }
  g.x0 = Tensor({n, 3}, std::move(xs));
  g.v0 = Tensor({n, 3}, std::move(vs));
  return g;
}

GraphBatch make_graph_batch(const ModelConfig& cfg, const std::vector<const TrajectorySample*>& samples) {
  if (samples.empty()) throw std::invalid_argument("make_graph_batch: empty batch");
  const int n = samples[0]->n;
  const int b = static_cast<int>(samples.size());
  GraphBatch g;
  g.batch = b;
  g.n = n;
  auto src = std::make_shared<std::vector<int>>();
  auto dst = std::make_shared<std::vector<int>>();
  auto crow = std::make_shared<std::vector<int>>();
  std::vector<double> attr, xs, vs;
  for (int s = 0; s < b; ++s) {
    const TrajectorySample& ts = *samples[static_cast<std::size_t>(s)];
    if (ts.n != n) throw std::invalid_argument("make_graph_batch: mixed particle counts");
    const int base = s * n;
    for (int i = 0; i < n; ++i) {
      crow->push_back(ts.charges[static_cast<std::size_t>(i)] > 0.0 ? 0 : 1);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        src->push_back(base + i);
        dst->push_back(base + j);
        attr.push_back(normalized_charge(cfg, ts.charges[static_cast<std::size_t>(i)]) *
                       normalized_charge(cfg, ts.charges[static_cast<std::size_t>(j)]));
      }
    }
    const auto& f0 = ts.frames.front();
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) {
        xs.push_back(f0.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
        vs.push_back(f0.v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
      }
    }
  }
  g.edge_src = src;
  g.edge_dst = dst;
  g.charge_row = crow;
  const int edge_count = static_cast<int>(attr.size());
  g.edge_attr = Tensor({edge_count, 1}, std::move(attr));
  g.x0 = Tensor({b * n, 3}, std::move(xs));
  g.v0 = Tensor({b * n, 3}, std::move(vs));
  return g;
}

BoundModel bind_model(Tape& tape, const ModelParams& params, const GraphBatch& g) {
  BoundModel bm;
  bm.params = &params;
  bm.vars = bind_params(tape, params.store);
  bm.h0 = tape.gather_rows(bm.vars[static_cast<std::size_t>(params.embed)], g.charge_row);
  bm.edge_attr = tape.constant(g.edge_attr);
  return bm;
}

Var model_velocity(Tape& tape, const BoundModel& bm, const GraphBatch& g, Var x, Var v) {
  if (g.n < 2) throw std::invalid_argument("model_velocity: need at least 2 particles per system");
  const ModelParams& p = *bm.params;
  const int nodes = g.nodes();
  const double inv_nm1 = 1.0 / static_cast<double>(g.n - 1);

  Var xi = tape.gather_rows(x, g.edge_src);
  Var xj = tape.gather_rows(x, g.edge_dst);
  Var dx = tape.sub(xi, xj);
  Var d2 = tape.rows_sum_sq(dx);

  if (p.cfg.kind == BackboneKind::rf) {
    Var msg = mlp_forward(tape, p.phi_e[0], bm.vars, tape.concat({d2, bm.edge_attr}, 1));
    Var edge_w = mlp_forward(tape, p.phi_x, bm.vars, msg);
    Var coord = tape.scale(tape.scatter_add_rows(tape.row_scale(edge_w, dx), g.edge_src, nodes), inv_nm1);
    Var gate = mlp_forward(tape, p.phi_v, bm.vars, bm.h0);
    Var inner = tape.add(tape.row_scale(gate, v), coord);
    return tape.row_scale(tape.rows_norm(v), inner);
  }

  Var h = bm.h0;
  Var msg;
  const int depth = static_cast<int>(p.phi_e.size());
  for (int l = 0; l < depth; ++l) {
    Var hi = tape.gather_rows(h, g.edge_src);
    Var hj = tape.gather_rows(h, g.edge_dst);
    msg = mlp_forward(tape, p.phi_e[static_cast<std::size_t>(l)], bm.vars,
                      tape.concat({hi, hj, d2, bm.edge_attr}, 1));
    if (l + 1 < depth) {
      Var agg = tape.scatter_add_rows(msg, g.edge_src, nodes);
      h = mlp_forward(tape, p.phi_h[static_cast<std::size_t>(l)], bm.vars, tape.concat({h, agg}, 1));
    }
  }
  Var edge_w = mlp_forward(tape, p.phi_x, bm.vars, msg);
  Var coord = tape.scale(tape.scatter_add_rows(tape.row_scale(edge_w, dx), g.edge_src, nodes), inv_nm1);
  Var gate = mlp_forward(tape, p.phi_v, bm.vars, h);
  return tape.add(tape.row_scale(gate, v), coord);
}

Tensor velocity_single(const ModelParams& params, const SystemState& s) {
  GraphBatch g = make_graph_single(params.cfg, s);
  Tape tape;
  BoundModel bm = bind_model(tape, params, g);
  Var out = model_velocity(tape, bm, g, tape.constant(g.x0), tape.constant(g.v0));
  return tape.value(out);
}

double egnn_message(const ModelParams& params, const Tensor& h_i, const Tensor& h_j,
                    const Vec3& x_i, const Vec3& x_j, double e_ij) {
  if (params.cfg.kind != BackboneKind::egnn) {
    throw std::invalid_argument("egnn_message: egnn backbone required");
  }
  const int d = params.cfg.hidden;
  if (h_i.rank() != 1 || h_i.dim(0) != d || h_j.rank() != 1 || h_j.dim(0) != d) {
    throw std::invalid_argument("egnn_message: embeddings must have dimension " + std::to_string(d));
  }
  double dx = x_i[0] - x_j[0], dy = x_i[1] - x_j[1], dz = x_i[2] - x_j[2];
  double dist2 = dx * dx + dy * dy + dz * dz;
  std::vector<double> row;
  row.reserve(static_cast<std::size_t>(2 * d + 2));
  for (int c = 0; c < d; ++c) row.push_back(h_i[static_cast<std::size_t>(c)]);
  for (int c = 0; c < d; ++c) row.push_back(h_j[static_cast<std::size_t>(c)]);
  row.push_back(dist2);
  row.push_back(e_ij);
  Tape tape;
  std::vector<Var> vars = bind_params(tape, params.store);
  Var in = tape.constant(Tensor({1, 2 * d + 2}, std::move(row)));
  Var msg = mlp_forward(tape, params.phi_e[0], vars, in);
  Var w = mlp_forward(tape, params.phi_x, vars, msg);
  return tape.value(w)[0];
}

}  // namespace ncdyn
