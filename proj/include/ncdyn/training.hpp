// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncdyn/models.hpp"
#include "ncdyn/nbody.hpp"
#include "ncdyn/rollout.hpp"

namespace ncdyn {

struct TrainConfig {
  // Data: either one file split in order into train/valid/test, or three
  // explicit files.
  std::string data_path;
  std::string train_path, valid_path, test_path;
  int split_train = 500;
  int split_valid = 100;
  int split_test = 100;

  // Model.
  BackboneKind backbone = BackboneKind::egnn;
  int hidden = 64;
  int layers = 4;
  bool input_feature_norm = false;  // z-score the scalar node feature over the training set

  // Rollout; t_window is always taken from the dataset.
  RolloutConfig rollout;

  // Optimization.
  int epochs = 1500;
  int batch_size = 200;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_grad_norm = 1.0;
  // L2 penalty: param_reg * mean of squared parameters, decayed per epoch.
  double param_reg = 1.0;
  double param_reg_decay = 0.99;

  std::uint64_t seed = 0;
  int eval_every = 1;
  std::string out_dir;  // metrics.csv + checkpoint.json land here when non-empty
  bool quiet = false;
};

TrainConfig train_config_from_json(const std::string& json_text);
TrainConfig train_config_from_file(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

struct MetricsRow {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_mse = 0.0;
  double test_mse = 0.0;
  std::vector<double> vel_mse_per_k;  // node 0..K, on the validation set
  double wall_clock_seconds = 0.0;    // cumulative since training start
};

inline constexpr const char* kMetricsCsvVersion = "nc-dyn metrics v1";
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows, int order);

// ---------------------------------------------------------------------------
// optimizer

struct AdamState {
  std::vector<Tensor> m, v;  // parallel to the ParamStore
  long long step = 0;
};

AdamState make_adam_state(const ParamStore& store);

// Standard Adam update with bias correction.
void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

// Global-norm clipping; scales in place when the norm exceeds max_norm and
// returns the pre-clip norm.
double clip_gradients(std::vector<Tensor>& grads, double max_norm);

// ---------------------------------------------------------------------------
// train / evaluate

struct TrainResult {
  ModelParams model;  // best-validation parameters
  RolloutConfig rollout;
  std::vector<MetricsRow> metrics;
  double best_valid_mse = 0.0;
  double test_mse = 0.0;  // of the best-validation model
  double seconds_total = 0.0;
  double seconds_per_epoch = 0.0;
};

TrainResult train(const TrainConfig& cfg);

struct EvalResult {
  double mse = 0.0;                   // displacement MSE over the dataset
  std::vector<double> vel_mse_per_k;  // empty when the dataset lacks node frames
  int samples = 0;
};

EvalResult evaluate(const ModelParams& model, const RolloutConfig& rollout,
                    const std::vector<TrajectorySample>& samples, int batch_size);

// Quadrature-only reference: displacement MSE when the K+1 node velocities
// are the simulator's ground truth (no learned model involved).
double true_velocity_quadrature_mse(const std::vector<TrajectorySample>& samples, int order);

// ---------------------------------------------------------------------------
// checkpoints (JSON of named tensors; exact double round-trip)

struct Checkpoint {
  ModelParams model;
  RolloutConfig rollout;
};

void save_checkpoint(const std::string& path, const ModelParams& model, const RolloutConfig& rollout);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ncdyn
