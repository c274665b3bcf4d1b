// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ncdyn/quadrature.hpp"
#include "ncdyn/rng.hpp"

namespace ncdyn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

namespace {

RolloutConfig rollout_from_json(const json& j) {
  RolloutConfig r;
  r.order = j.value("order", r.order);
  r.use_velocity_reg = j.value("use_velocity_reg", r.use_velocity_reg);
  r.reg_weight = j.value("reg_weight", r.reg_weight);
  r.reg_decay = j.value("reg_decay", r.reg_decay);
  r.normalize_feedback = j.value("normalize_feedback", r.normalize_feedback);
  std::string nodes = j.value(
      "quadrature_nodes",
      std::string(r.nodes == RolloutConfig::QuadratureNodes::inputs ? "inputs" : "outputs"));
  if (nodes == "outputs") {
    r.nodes = RolloutConfig::QuadratureNodes::outputs;
  } else if (nodes == "inputs") {
    r.nodes = RolloutConfig::QuadratureNodes::inputs;
  } else {
    throw std::invalid_argument("config: quadrature_nodes must be 'outputs' or 'inputs'");
  }
  return r;
}

json rollout_to_json(const RolloutConfig& r) {
  return json{{"order", r.order},
              {"use_velocity_reg", r.use_velocity_reg},
              {"reg_weight", r.reg_weight},
              {"reg_decay", r.reg_decay},
              {"normalize_feedback", r.normalize_feedback},
              {"quadrature_nodes",
               r.nodes == RolloutConfig::QuadratureNodes::outputs ? "outputs" : "inputs"}};
}

}  // namespace

TrainConfig train_config_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  TrainConfig c;
  c.data_path = j.value("data", std::string());
  c.train_path = j.value("train_data", std::string());
  c.valid_path = j.value("valid_data", std::string());
  c.test_path = j.value("test_data", std::string());
  if (j.contains("split")) {
    auto split = j.at("split").get<std::vector<int>>();
    if (split.size() != 3) throw std::invalid_argument("config: split must have 3 entries");
    c.split_train = split[0];
    c.split_valid = split[1];
    c.split_test = split[2];
  }
  c.backbone = backbone_from_name(j.value("backbone", std::string("egnn")));
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.input_feature_norm = j.value("input_feature_norm", c.input_feature_norm);
  if (j.contains("rollout")) c.rollout = rollout_from_json(j.at("rollout"));
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_grad_norm = j.value("clip_grad_norm", c.clip_grad_norm);
  c.param_reg = j.value("param_reg", c.param_reg);
  c.param_reg_decay = j.value("param_reg_decay", c.param_reg_decay);
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.quiet = j.value("quiet", c.quiet);
  return c;
}

TrainConfig train_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

std::string train_config_to_json(const TrainConfig& c) {
  json j{{"data", c.data_path},
         {"train_data", c.train_path},
         {"valid_data", c.valid_path},
         {"test_data", c.test_path},
         {"split", {c.split_train, c.split_valid, c.split_test}},
         {"backbone", backbone_name(c.backbone)},
         {"hidden", c.hidden},
         {"layers", c.layers},
         {"input_feature_norm", c.input_feature_norm},
         {"rollout", rollout_to_json(c.rollout)},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"lr", c.lr},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"adam_eps", c.adam_eps},
         {"clip_grad_norm", c.clip_grad_norm},
         {"param_reg", c.param_reg},
         {"param_reg_decay", c.param_reg_decay},
         {"seed", c.seed},
         {"eval_every", c.eval_every},
         {"out_dir", c.out_dir},
         {"quiet", c.quiet}};
  return j.dump(2);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows, int order) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("metrics: cannot open " + path);
  out << "# " << kMetricsCsvVersion << "\n";
  out << "epoch,train_loss,valid_mse,test_mse";
  for (int k = 0; k <= order; ++k) out << ",vel_mse_k" << k;
  out << ",wall_clock_seconds\n";
  out.precision(17);
  for (const MetricsRow& r : rows) {
    out << r.epoch << ',' << r.train_loss << ',' << r.valid_mse << ',' << r.test_mse;
    for (int k = 0; k <= order; ++k) {
      out << ',';
      if (k < static_cast<int>(r.vel_mse_per_k.size())) out << r.vel_mse_per_k[static_cast<std::size_t>(k)];
    }
    out << ',' << r.wall_clock_seconds << '\n';
  }
}

// ---------------------------------------------------------------------------
// optimizer

AdamState make_adam_state(const ParamStore& store) {
  AdamState s;
  for (const Tensor& t : store.values) {
    s.m.emplace_back(t.shape());
    s.v.emplace_back(t.shape());
  }
  return s;
}

void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (grads.size() != params.count()) throw std::invalid_argument("adam_step: gradient count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.count(); ++p) {
    Tensor& w = params.values[p];
    const Tensor& g = grads[p];
    if (!w.same_shape(g)) {
      throw std::invalid_argument("adam_step: shape mismatch for " + params.names[p] + " " +
                                  w.shape_str() + " vs " + g.shape_str());
    }
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double clip_gradients(std::vector<Tensor>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be positive");
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (Tensor& g : grads)
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// batching

namespace {

// Frames of `sample` at the rollout's K+1 nodes; stride of the sample's finer
// grid. Requires compatibility checked by check_dataset_order.
int node_stride(const TrajectorySample& sample, int order) {
  return order == 0 ? 0 : sample.order / order;
}

void check_dataset_order(const std::vector<TrajectorySample>& samples, int order,
                         const char* which) {
  for (const TrajectorySample& s : samples) {
    if (static_cast<int>(s.frames.size()) != s.order + 1) {
      throw std::invalid_argument(std::string(which) + ": sample has " +
                                  std::to_string(s.frames.size()) + " frames for k=" +
                                  std::to_string(s.order));
    }
    if (order >= 1) {
      if (s.order < order) {
        throw std::invalid_argument(std::string(which) + ": dataset sampling order k=" +
                                    std::to_string(s.order) + " smaller than rollout order K=" +
                                    std::to_string(order));
      }
      if (s.order % order != 0) {
        throw std::invalid_argument(std::string(which) + ": dataset sampling order k=" +
                                    std::to_string(s.order) + " not divisible by rollout order K=" +
                                    std::to_string(order));
      }
    }
  }
}

struct AssembledBatch {
  GraphBatch g;
  Tensor target_x;             // [B*N, 3]
  std::vector<Tensor> node_v;  // K+1 ground-truth node velocities
};

Tensor stack_frame_field(const std::vector<const TrajectorySample*>& samples,
                         const std::vector<Vec3> TrajectorySample::Frame::* field, int frame_idx) {
  const int n = samples[0]->n;
  std::vector<double> data;
  data.reserve(samples.size() * static_cast<std::size_t>(n) * 3);
  for (const TrajectorySample* s : samples) {
    const auto& vecs = s->frames[static_cast<std::size_t>(frame_idx)].*field;
    for (const Vec3& v : vecs) {
      data.push_back(v[0]);
      data.push_back(v[1]);
      data.push_back(v[2]);
    }
  }
  const int rows = static_cast<int>(samples.size()) * n;
  return Tensor({rows, 3}, std::move(data));
}

AssembledBatch assemble_batch(const ModelConfig& mc, const std::vector<const TrajectorySample*>& samples,
                              int order, bool want_node_velocities) {
  AssembledBatch ab;
  ab.g = make_graph_batch(mc, samples);
  ab.target_x = stack_frame_field(samples, &TrajectorySample::Frame::x,
                                  static_cast<int>(samples[0]->frames.size()) - 1);
  if (want_node_velocities) {
    const int stride = node_stride(*samples[0], order);
    for (int k = 0; k <= order; ++k) {
      ab.node_v.push_back(stack_frame_field(samples, &TrajectorySample::Frame::v, k * stride));
    }
  }
  return ab;
}

double common_t_window(const std::vector<TrajectorySample>& samples) {
  double t = samples.front().t_window;
  for (const TrajectorySample& s : samples) {
    if (s.t_window != t) throw std::invalid_argument("dataset: mixed t_window values");
  }
  return t;
}

struct EvalAccum {
  double se_sum = 0.0;
  std::size_t se_count = 0;
  std::vector<double> vel_se_sum;
  std::size_t vel_count = 0;
};

}  // namespace

EvalResult evaluate(const ModelParams& model, const RolloutConfig& rollout_cfg,
                    const std::vector<TrajectorySample>& samples, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  check_dataset_order(samples, rollout_cfg.order, "evaluate");
  RolloutConfig rcfg = rollout_cfg;
  rcfg.t_window = common_t_window(samples);
  NcWeights weights = nc_weights(rcfg.order);

  EvalAccum acc;
  acc.vel_se_sum.assign(static_cast<std::size_t>(rcfg.order) + 1, 0.0);
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const TrajectorySample*> batch;
    for (std::size_t i = start; i < samples.size() && i < start + static_cast<std::size_t>(batch_size); ++i) {
      batch.push_back(&samples[i]);
    }
    AssembledBatch ab = assemble_batch(model.cfg, batch, rcfg.order, /*want_node_velocities=*/true);
    Tape tape;
    BoundModel bm = bind_model(tape, model, ab.g);
    BackboneFn fn = [&bm, &ab](Tape& t, Var x, Var v) { return model_velocity(t, bm, ab.g, x, v); };
    RolloutTrace trace = rollout(tape, fn, tape.constant(ab.g.x0), tape.constant(ab.g.v0), rcfg);
    const Tensor& pred = tape.value(predict(tape, trace, weights));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      double d = pred[i] - ab.target_x[i];
      acc.se_sum += d * d;
    }
    acc.se_count += pred.size();
    for (int k = 0; k <= rcfg.order; ++k) {
      const Tensor& vhat = tape.value(trace.velocities[static_cast<std::size_t>(k)]);
      const Tensor& vtrue = ab.node_v[static_cast<std::size_t>(k)];
      double se = 0.0;
      for (std::size_t i = 0; i < vhat.size(); ++i) {
        double d = vhat[i] - vtrue[i];
        se += d * d;
      }
      acc.vel_se_sum[static_cast<std::size_t>(k)] += se;
    }
    acc.vel_count += tape.value(trace.velocities[0]).size();
  }
  EvalResult res;
  res.samples = static_cast<int>(samples.size());
  res.mse = acc.se_sum / static_cast<double>(acc.se_count);
  for (double s : acc.vel_se_sum) res.vel_mse_per_k.push_back(s / static_cast<double>(acc.vel_count));
  return res;
}

double true_velocity_quadrature_mse(const std::vector<TrajectorySample>& samples, int order) {
  if (samples.empty()) throw std::invalid_argument("true_velocity_quadrature_mse: empty dataset");
  check_dataset_order(samples, order, "true_velocity_quadrature_mse");
  NcWeights weights = nc_weights(order);
  double se = 0.0;
  std::size_t count = 0;
  for (const TrajectorySample& s : samples) {
    const int stride = node_stride(s, order);
    const double t = s.t_window;
    for (int i = 0; i < s.n; ++i) {
      for (int d = 0; d < 3; ++d) {
        double integral;
        if (order == 0) {
          integral = t * s.frames[0].v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
        } else {
          std::vector<double> nodes;
          for (int k = 0; k <= order; ++k) {
            nodes.push_back(s.frames[static_cast<std::size_t>(k * stride)].v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
          }
          integral = nc_integrate(weights, nodes, t);
        }
        double pred = s.frames[0].x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] + integral;
        double diff = pred - s.frames.back().x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
        se += diff * diff;
        ++count;
      }
    }
  }
  return se / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// train

namespace {

void load_splits(const TrainConfig& cfg, std::vector<TrajectorySample>& train_set,
                 std::vector<TrajectorySample>& valid_set, std::vector<TrajectorySample>& test_set) {
  if (!cfg.data_path.empty()) {
    std::vector<TrajectorySample> all = read_dataset(cfg.data_path);
    std::size_t need = static_cast<std::size_t>(cfg.split_train + cfg.split_valid + cfg.split_test);
    if (all.size() < need) {
      throw std::invalid_argument("train: dataset has " + std::to_string(all.size()) +
                                  " samples, split needs " + std::to_string(need));
    }
    auto it = all.begin();
    train_set.assign(it, it + cfg.split_train);
    it += cfg.split_train;
    valid_set.assign(it, it + cfg.split_valid);
    it += cfg.split_valid;
    test_set.assign(it, it + cfg.split_test);
    return;
  }
  if (cfg.train_path.empty() || cfg.valid_path.empty() || cfg.test_path.empty()) {
    throw std::invalid_argument("train: provide either 'data' or all of train/valid/test paths");
  }
  train_set = read_dataset(cfg.train_path);
  valid_set = read_dataset(cfg.valid_path);
  test_set = read_dataset(cfg.test_path);
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  std::vector<TrajectorySample> train_set, valid_set, test_set;
  load_splits(cfg, train_set, valid_set, test_set);
  if (cfg.batch_size < 1 || cfg.batch_size > static_cast<int>(train_set.size())) {
    throw std::invalid_argument("train: batch_size " + std::to_string(cfg.batch_size) +
                                " must be in [1, train set size " + std::to_string(train_set.size()) + "]");
  }
  RolloutConfig rcfg = cfg.rollout;
  rcfg.t_window = common_t_window(train_set);
  check_dataset_order(train_set, rcfg.order, "train");
  check_dataset_order(valid_set, rcfg.order, "valid");
  check_dataset_order(test_set, rcfg.order, "test");

  ModelConfig mc;
  mc.kind = cfg.backbone;
  mc.hidden = cfg.hidden;
  mc.layers = cfg.layers;
  mc.input_feature_norm = cfg.input_feature_norm;
  if (cfg.input_feature_norm) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (const TrajectorySample& s : train_set) {
      for (double q : s.charges) {
        sum += q;
        sum2 += q * q;
        ++n;
      }
    }
    mc.feat_mean = sum / static_cast<double>(n);
    double var = sum2 / static_cast<double>(n) - mc.feat_mean * mc.feat_mean;
    mc.feat_std = var > 1e-12 ? std::sqrt(var) : 1.0;
  }

  Rng rng(cfg.seed);
  ModelParams model = init_model(mc, rng);
  AdamState adam = make_adam_state(model.store);
  NcWeights weights = nc_weights(rcfg.order);

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  std::vector<int> order_idx(train_set.size());
  std::iota(order_idx.begin(), order_idx.end(), 0);

  TrainResult result;
  result.rollout = rcfg;
  double best_valid = std::numeric_limits<double>::infinity();
  ParamStore best_params = model.store;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order_idx);
    const double lambda_r = rcfg.reg_weight * std::pow(rcfg.reg_decay, epoch);
    const double lambda_p = cfg.param_reg * std::pow(cfg.param_reg_decay, epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order_idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const TrajectorySample*> batch;
      for (std::size_t i = start; i < order_idx.size() && i < start + static_cast<std::size_t>(cfg.batch_size); ++i) {
        batch.push_back(&train_set[static_cast<std::size_t>(order_idx[i])]);
      }
      AssembledBatch ab = assemble_batch(mc, batch, rcfg.order, rcfg.use_velocity_reg);
      Tape tape;
      BoundModel bm = bind_model(tape, model, ab.g);
      BackboneFn fn = [&bm, &ab](Tape& t, Var x, Var v) { return model_velocity(t, bm, ab.g, x, v); };
      RolloutTrace trace = rollout(tape, fn, tape.constant(ab.g.x0), tape.constant(ab.g.v0), rcfg);
      std::vector<Var> true_v;
      for (const Tensor& t : ab.node_v) true_v.push_back(tape.constant(t));
      RolloutLoss rl = rollout_loss(tape, trace, weights, tape.constant(ab.target_x), true_v, rcfg);
      Var total = rl.main;
      if (rcfg.use_velocity_reg) total = tape.add(total, tape.scale(*rl.velocity_reg, lambda_r));
      if (cfg.param_reg != 0.0) {
        Var acc;
        for (std::size_t p = 0; p < bm.vars.size(); ++p) {
          Var s = tape.squared_norm(bm.vars[p]);
          acc = p == 0 ? s : tape.add(acc, s);
        }
        total = tape.add(total, tape.scale(acc, lambda_p / static_cast<double>(model.store.scalar_count())));
      }
      tape.backward(total);
      std::vector<Tensor> grads;
      grads.reserve(bm.vars.size());
      for (Var p : bm.vars) grads.push_back(tape.grad(p));
      clip_gradients(grads, cfg.clip_grad_norm);
      adam_step(model.store, grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      loss_sum += tape.value(total)[0] * static_cast<double>(batch.size());
      seen += batch.size();
    }

    if ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs) {
      EvalResult ev = evaluate(model, rcfg, valid_set, cfg.batch_size);
      EvalResult et = evaluate(model, rcfg, test_set, cfg.batch_size);
      MetricsRow row;
      row.epoch = epoch + 1;
      row.train_loss = loss_sum / static_cast<double>(seen);
      row.valid_mse = ev.mse;
      row.test_mse = et.mse;
      row.vel_mse_per_k = ev.vel_mse_per_k;
      row.wall_clock_seconds = elapsed();
      result.metrics.push_back(row);
      if (ev.mse < best_valid) {
        best_valid = ev.mse;
        best_params = model.store;
      }
      if (!cfg.quiet && ((epoch + 1) % 50 == 0 || epoch + 1 == cfg.epochs)) {
        std::printf("epoch %4d  train %.6f  valid %.6f  test %.6f  (%.1fs)\n", epoch + 1,
                    row.train_loss, row.valid_mse, row.test_mse, row.wall_clock_seconds);
      }
    }
  }

  result.model = model;
  result.model.store = best_params;
  result.best_valid_mse = best_valid;
  result.test_mse = evaluate(result.model, rcfg, test_set, cfg.batch_size).mse;
  result.seconds_total = elapsed();
  result.seconds_per_epoch = result.seconds_total / cfg.epochs;

  if (!cfg.out_dir.empty()) {
    write_metrics_csv(cfg.out_dir + "/metrics.csv", result.metrics, rcfg.order);
    save_checkpoint(cfg.out_dir + "/checkpoint.json", result.model, rcfg);
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoints

void save_checkpoint(const std::string& path, const ModelParams& model, const RolloutConfig& rollout_cfg) {
  json j;
  j["format"] = "nc-dyn checkpoint v1";
  j["backbone"] = backbone_name(model.cfg.kind);
  j["hidden"] = model.cfg.hidden;
  j["layers"] = model.cfg.layers;
  j["input_feature_norm"] = model.cfg.input_feature_norm;
  j["feat_mean"] = model.cfg.feat_mean;
  j["feat_std"] = model.cfg.feat_std;
  j["rollout"] = rollout_to_json(rollout_cfg);
  j["rollout"]["t_window"] = rollout_cfg.t_window;
  json params = json::array();
  for (std::size_t i = 0; i < model.store.count(); ++i) {
    const Tensor& t = model.store.values[i];
    json p;
    p["name"] = model.store.names[i];
    p["shape"] = t.shape();
    p["data"] = std::vector<double>(t.data(), t.data() + t.size());
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out << j.dump();
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json j = json::parse(in);
  if (j.value("format", std::string()) != "nc-dyn checkpoint v1") {
    throw std::runtime_error("checkpoint: unrecognized format in " + path);
  }
  ModelConfig mc;
  mc.kind = backbone_from_name(j.at("backbone").get<std::string>());
  mc.hidden = j.at("hidden").get<int>();
  mc.layers = j.at("layers").get<int>();
  mc.input_feature_norm = j.value("input_feature_norm", false);
  mc.feat_mean = j.value("feat_mean", 0.0);
  mc.feat_std = j.value("feat_std", 1.0);
  Rng rng(0);  // layout only; every value is overwritten below
  Checkpoint ck{init_model(mc, rng), rollout_from_json(j.at("rollout"))};
  ck.rollout.t_window = j.at("rollout").value("t_window", 1.0);
  const json& params = j.at("params");
  if (params.size() != ck.model.store.count()) {
    throw std::runtime_error("checkpoint: expected " + std::to_string(ck.model.store.count()) +
                             " parameters, found " + std::to_string(params.size()));
  }
  for (const json& p : params) {
    const std::string name = p.at("name").get<std::string>();
    int idx = ck.model.store.find(name);
    if (idx < 0) throw std::runtime_error("checkpoint: unknown parameter " + name);
    Tensor t = Tensor::checked(p.at("shape").get<std::vector<int>>(),
                               p.at("data").get<std::vector<double>>());
    if (!t.same_shape(ck.model.store.values[static_cast<std::size_t>(idx)])) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    ck.model.store.values[static_cast<std::size_t>(idx)] = std::move(t);
  }
  return ck;
}

}  // namespace ncdyn
