// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncdyn/training.hpp"

namespace ncdyn {

enum class StudyKind { impact_of_k, nc_vs_ncplus, consecutive };

StudyKind study_from_name(const std::string& name);
const char* study_name(StudyKind kind);

struct StudyOptions {
  TrainConfig base;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out_csv = "report.csv";
  // consecutive study only:
  int horizon_windows = 10;
  int eval_trajectories = 20;
  std::uint64_t eval_seed = 900000;  // first seed of the held-out long trajectories
};

// Error and wall-clock as a function of the rollout order K in {0..5}.
// The dataset's sampling order must be divisible by every swept K (k=60 works).
struct ImpactRow {
  int k = 0;
  std::vector<double> test_mse_per_seed;
  double mean_test_mse = 0.0;
  double mean_epoch_seconds = 0.0;
  double mean_total_seconds = 0.0;
};
struct ImpactResult {
  std::vector<ImpactRow> rows;
};
ImpactResult run_impact_of_k_study(const StudyOptions& opt);

// Per-epoch intermediate-velocity error of the plain and velocity-supervised
// variants at the same order.
struct NcVsNcplusSeed {
  std::uint64_t seed = 0;
  std::vector<MetricsRow> nc, ncplus;
  // Mean over interior nodes (1..K-1; all nodes when K < 2) at the final epoch.
  double final_vel_mse_nc = 0.0;
  double final_vel_mse_ncplus = 0.0;
};
struct NcVsNcplusResult {
  int order = 0;
  std::vector<NcVsNcplusSeed> seeds;
};
NcVsNcplusResult run_nc_vs_ncplus_study(const StudyOptions& opt);

// Chained prediction over `horizon_windows` windows: the velocity-supervised
// model at the base order vs. the order-0 baseline, on freshly generated
// held-out trajectories. Window errors are displacement MSE at the window
// boundaries; infinity marks a truncated (diverged) run.
struct ConsecutiveSeed {
  std::uint64_t seed = 0;
  std::vector<double> ncplus_window_mse;
  std::vector<double> nc0_window_mse;
};
struct ConsecutiveResult {
  int order = 0;
  int horizon = 0;
  std::vector<ConsecutiveSeed> seeds;
};
ConsecutiveResult run_consecutive_study(const StudyOptions& opt);

// Per-window displacement MSE of chained prediction with `model` over
// `eval_set` long trajectories (order divisible by `horizon`); infinity for
// windows past a divergence truncation.
std::vector<double> consecutive_window_errors(const ModelParams& model,
                                              const RolloutConfig& rollout_cfg,
                                              const std::vector<TrajectorySample>& eval_set,
                                              int horizon);

// Dispatches and writes the study's CSV report to opt.out_csv.
void run_study(StudyKind kind, const StudyOptions& opt);

}  // namespace ncdyn
