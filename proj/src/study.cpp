// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/study.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace ncdyn {

StudyKind study_from_name(const std::string& name) {
  if (name == "impact_of_k") return StudyKind::impact_of_k;
  if (name == "nc_vs_ncplus") return StudyKind::nc_vs_ncplus;
  if (name == "consecutive") return StudyKind::consecutive;
  throw std::invalid_argument("unknown study '" + name +
                              "' (expected impact_of_k, nc_vs_ncplus or consecutive)");
}

const char* study_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::impact_of_k: return "impact_of_k";
    case StudyKind::nc_vs_ncplus: return "nc_vs_ncplus";
    case StudyKind::consecutive: return "consecutive";
  }
  return "?";
}

namespace {

double mean_interior_vel_mse(const MetricsRow& row, int order) {
  // Interior quadrature nodes; for K < 2 there are none, fall back to all.
  int lo = order >= 2 ? 1 : 0;
  int hi = order >= 2 ? order - 1 : order;
  double acc = 0.0;
  int n = 0;
  for (int k = lo; k <= hi; ++k) {
    acc += row.vel_mse_per_k[static_cast<std::size_t>(k)];
    ++n;
  }
  return acc / n;
}

std::ofstream open_report(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("study: cannot open " + path);
  out << "# nc-dyn report v1\n";
  out.precision(17);
  return out;
}

}  // namespace

ImpactResult run_impact_of_k_study(const StudyOptions& opt) {
  ImpactResult result;
  for (int k = 0; k <= 5; ++k) {
    ImpactRow row;
    row.k = k;
    double mse_sum = 0.0, epoch_s = 0.0, total_s = 0.0;
    for (std::uint64_t seed : opt.seeds) {
      TrainConfig cfg = opt.base;
      cfg.rollout.order = k;
      cfg.rollout.use_velocity_reg = false;
      cfg.seed = seed;
      cfg.out_dir.clear();
      cfg.quiet = true;
      TrainResult tr = train(cfg);
      row.test_mse_per_seed.push_back(tr.test_mse);
      mse_sum += tr.test_mse;
      epoch_s += tr.seconds_per_epoch;
      total_s += tr.seconds_total;
    }
    const double n = static_cast<double>(opt.seeds.size());
    row.mean_test_mse = mse_sum / n;
    row.mean_epoch_seconds = epoch_s / n;
    row.mean_total_seconds = total_s / n;
    result.rows.push_back(std::move(row));
  }
  return result;
}

NcVsNcplusResult run_nc_vs_ncplus_study(const StudyOptions& opt) {
  NcVsNcplusResult result;
  result.order = opt.base.rollout.order;
  for (std::uint64_t seed : opt.seeds) {
    NcVsNcplusSeed row;
    row.seed = seed;
    for (bool plus : {false, true}) {
      TrainConfig cfg = opt.base;
      cfg.rollout.use_velocity_reg = plus;
      cfg.seed = seed;
      cfg.out_dir.clear();
      cfg.quiet = true;
      TrainResult tr = train(cfg);
      if (plus) {
        row.ncplus = tr.metrics;
        row.final_vel_mse_ncplus = mean_interior_vel_mse(tr.metrics.back(), result.order);
      } else {
        row.nc = tr.metrics;
        row.final_vel_mse_nc = mean_interior_vel_mse(tr.metrics.back(), result.order);
      }
    }
    result.seeds.push_back(std::move(row));
  }
  return result;
}

ConsecutiveResult run_consecutive_study(const StudyOptions& opt) {
  ConsecutiveResult result;
  result.order = opt.base.rollout.order;
  result.horizon = opt.horizon_windows;
  const int k_grid = std::max(result.order, 1);

  // Held-out long trajectories shared by all seeds: horizon * T total time,
  // frames on the T/k grid so every window boundary (and every intermediate
  // node) has ground truth.
  std::vector<TrajectorySample> eval_set;
  {
    // dt comes from the base dataset so the integrator matches training data.
    std::vector<TrajectorySample> probe = read_dataset(opt.base.data_path.empty()
                                                           ? opt.base.test_path
                                                           : opt.base.data_path);
    double t_window = probe.front().t_window;
    double dt = probe.front().dt;
    int n = probe.front().n;
    eval_set = generate_dataset(opt.eval_seed, opt.eval_trajectories, n,
                                t_window * opt.horizon_windows, k_grid * opt.horizon_windows, dt);
  }

  for (std::uint64_t seed : opt.seeds) {
    ConsecutiveSeed row;
    row.seed = seed;

    TrainConfig plus_cfg = opt.base;
    plus_cfg.rollout.use_velocity_reg = true;
    plus_cfg.seed = seed;
    plus_cfg.out_dir.clear();
    plus_cfg.quiet = true;
    TrainResult plus = train(plus_cfg);

    TrainConfig base_cfg = opt.base;
    base_cfg.rollout.order = 0;
    base_cfg.rollout.use_velocity_reg = false;
    base_cfg.seed = seed;
    base_cfg.out_dir.clear();
    base_cfg.quiet = true;
    TrainResult nc0 = train(base_cfg);

    row.ncplus_window_mse = consecutive_window_errors(plus.model, plus.rollout, eval_set,
                                                      opt.horizon_windows);
    row.nc0_window_mse = consecutive_window_errors(nc0.model, nc0.rollout, eval_set,
                                                   opt.horizon_windows);
    result.seeds.push_back(std::move(row));
  }
  return result;
}

std::vector<double> consecutive_window_errors(const ModelParams& model, const RolloutConfig& rollout_cfg,
                                              const std::vector<TrajectorySample>& eval_set,
                                              int horizon) {
  const int steps_per_window = std::max(rollout_cfg.order, 1);
  std::vector<double> se(static_cast<std::size_t>(horizon), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(horizon), 0);
  std::vector<char> diverged(static_cast<std::size_t>(horizon), 0);
  for (const TrajectorySample& traj : eval_set) {
    // Ground-truth frames sit on the (total span)/order grid.
    if (traj.order % horizon != 0) {
      throw std::invalid_argument("consecutive: trajectory order not divisible by horizon");
    }
    const int frames_per_window = traj.order / horizon;
    RolloutConfig rc = rollout_cfg;
    rc.t_window = traj.t_window / horizon;

    SystemState init;
    init.pos = traj.frames[0].x;
    init.vel = traj.frames[0].v;
    init.charge = traj.charges;
    VelocityFn fn = make_velocity_fn(model, init);

    std::vector<double> x0, v0;
    for (int i = 0; i < traj.n; ++i) {
      for (int d = 0; d < 3; ++d) {
        x0.push_back(traj.frames[0].x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
        v0.push_back(traj.frames[0].v[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
      }
    }
    PredictedState s0{Tensor({traj.n, 3}, std::move(x0)), Tensor({traj.n, 3}, std::move(v0))};
    std::vector<PredictedState> states = consecutive_predict(fn, s0, rc, horizon);

    for (int w = 1; w <= horizon; ++w) {
      std::size_t pred_idx = static_cast<std::size_t>(w * steps_per_window) - 1;
      if (pred_idx >= states.size()) {
        diverged[static_cast<std::size_t>(w - 1)] = 1;
        continue;
      }
      const Tensor& px = states[pred_idx].x;
      const auto& gx = traj.frames[static_cast<std::size_t>(w * frames_per_window)].x;
      for (int i = 0; i < traj.n; ++i) {
        for (int d = 0; d < 3; ++d) {
          double diff = px.at(i, d) - gx[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
          se[static_cast<std::size_t>(w - 1)] += diff * diff;
        }
      }
      counts[static_cast<std::size_t>(w - 1)] += static_cast<std::size_t>(traj.n) * 3;
    }
  }
  std::vector<double> out;
  for (int w = 0; w < horizon; ++w) {
    if (diverged[static_cast<std::size_t>(w)] || counts[static_cast<std::size_t>(w)] == 0) {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      out.push_back(se[static_cast<std::size_t>(w)] / static_cast<double>(counts[static_cast<std::size_t>(w)]));
    }
  }
  return out;
}

void run_study(StudyKind kind, const StudyOptions& opt) {
  switch (kind) {
    case StudyKind::impact_of_k: {
      ImpactResult res = run_impact_of_k_study(opt);
      std::ofstream out = open_report(opt.out_csv);
      out << "k";
      for (std::size_t s = 0; s < opt.seeds.size(); ++s) out << ",test_mse_seed" << opt.seeds[s];
      out << ",mean_test_mse,mean_epoch_seconds,mean_total_seconds\n";
      for (const ImpactRow& r : res.rows) {
        out << r.k;
        for (double m : r.test_mse_per_seed) out << ',' << m;
        out << ',' << r.mean_test_mse << ',' << r.mean_epoch_seconds << ',' << r.mean_total_seconds
            << '\n';
      }
      std::printf("impact_of_k: wrote %s\n", opt.out_csv.c_str());
      break;
    }
    case StudyKind::nc_vs_ncplus: {
      NcVsNcplusResult res = run_nc_vs_ncplus_study(opt);
      std::ofstream out = open_report(opt.out_csv);
      out << "seed,variant,epoch,train_loss,valid_mse";
      for (int k = 0; k <= res.order; ++k) out << ",vel_mse_k" << k;
      out << "\n";
      for (const NcVsNcplusSeed& s : res.seeds) {
        for (int variant = 0; variant < 2; ++variant) {
          const auto& rows = variant == 0 ? s.nc : s.ncplus;
          for (const MetricsRow& r : rows) {
            out << s.seed << ',' << (variant == 0 ? "nc" : "ncplus") << ',' << r.epoch << ','
                << r.train_loss << ',' << r.valid_mse;
            for (int k = 0; k <= res.order; ++k) out << ',' << r.vel_mse_per_k[static_cast<std::size_t>(k)];
            out << '\n';
          }
        }
      }
      std::printf("nc_vs_ncplus: wrote %s\n", opt.out_csv.c_str());
      break;
    }
    case StudyKind::consecutive: {
      ConsecutiveResult res = run_consecutive_study(opt);
      std::ofstream out = open_report(opt.out_csv);
      out << "seed,window,ncplus_mse,nc0_mse\n";
      for (const ConsecutiveSeed& s : res.seeds) {
        for (int w = 0; w < res.horizon; ++w) {
          out << s.seed << ',' << (w + 1) << ',' << s.ncplus_window_mse[static_cast<std::size_t>(w)]
              << ',' << s.nc0_window_mse[static_cast<std::size_t>(w)] << '\n';
        }
      }
      std::printf("consecutive: wrote %s\n", opt.out_csv.c_str());
      break;
    }
  }
}

}  // namespace ncdyn
