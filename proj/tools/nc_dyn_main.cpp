// SPDX-License-Identifier: Apache-2.0
//
// nc-dyn: generate N-body trajectory datasets, train Newton-Cotes rollout
// models, evaluate checkpoints and run the comparison studies.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "ncdyn/nbody.hpp"
#include "ncdyn/study.hpp"
#include "ncdyn/training.hpp"

namespace {

int run_gen(int n, int count, double t_window, int order, double dt, std::uint64_t seed,
            const std::string& out) {
  std::vector<ncdyn::TrajectorySample> samples =
      ncdyn::generate_dataset(seed, count, n, t_window, order, dt);
  ncdyn::write_dataset(samples, out);
  std::printf("wrote %d samples (n=%d, T=%g, k=%d, dt=%g) to %s\n", count, n, t_window, order, dt,
              out.c_str());
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  ncdyn::TrainConfig cfg = ncdyn::train_config_from_file(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  ncdyn::TrainResult res = ncdyn::train(cfg);
  std::printf("best valid mse %.6e | test mse %.6e (%.4f x 1e-2) | %.1fs total\n",
              res.best_valid_mse, res.test_mse, res.test_mse * 100.0, res.seconds_total);
  if (!cfg.out_dir.empty()) {
    std::printf("wrote %s/metrics.csv and %s/checkpoint.json\n", cfg.out_dir.c_str(),
                cfg.out_dir.c_str());
  }
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& data_path, int batch_size) {
  ncdyn::Checkpoint ck = ncdyn::load_checkpoint(checkpoint_path);
  std::vector<ncdyn::TrajectorySample> samples = ncdyn::read_dataset(data_path);
  ncdyn::EvalResult res = ncdyn::evaluate(ck.model, ck.rollout, samples, batch_size);
  std::printf("samples %d | mse %.6e (%.4f x 1e-2)\n", res.samples, res.mse, res.mse * 100.0);
  for (std::size_t k = 0; k < res.vel_mse_per_k.size(); ++k) {
    std::printf("velocity mse node %zu: %.6e\n", k, res.vel_mse_per_k[k]);
  }
  return 0;
}

int run_study_cmd(const std::string& kind, const std::string& config_path, const std::string& out_csv,
                  const std::vector<std::uint64_t>& seeds, int horizon, int eval_trajectories) {
  ncdyn::StudyOptions opt;
  opt.base = ncdyn::train_config_from_file(config_path);
  opt.out_csv = out_csv;
  if (!seeds.empty()) opt.seeds = seeds;
  opt.horizon_windows = horizon;
  opt.eval_trajectories = eval_trajectories;
  ncdyn::run_study(ncdyn::study_from_name(kind), opt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Newton-Cotes rollout models for interacting particle dynamics"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a trajectory dataset (JSONL)");
  int n = 5, count = 700, order = 2;
  double t_window = 1.0, dt = 1e-3;
  std::uint64_t seed = 0;
  std::string out = "data.jsonl";
  gen->add_option("--n", n, "particles per system");
  gen->add_option("--count", count, "number of samples");
  gen->add_option("--t", t_window, "window duration");
  gen->add_option("--k", order, "frames per window minus one (sampling order)");
  gen->add_option("--dt", dt, "integrator step");
  gen->add_option("--seed", seed, "first seed; sample i uses seed+i");
  gen->add_option("--out", out, "output path");

  // train
  auto* tr = app.add_subcommand("train", "train a model from a JSON config");
  std::string config_path, out_dir;
  tr->add_option("--config", config_path, "JSON config file")->required();
  tr->add_option("--out", out_dir, "output directory (overrides config out_dir)");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string ck_path, data_path;
  int batch_size = 100;
  ev->add_option("--checkpoint", ck_path, "checkpoint.json")->required();
  ev->add_option("--data", data_path, "JSONL dataset")->required();
  ev->add_option("--batch-size", batch_size, "evaluation batch size");

  // study
  auto* st = app.add_subcommand("study", "run a comparison study, write a CSV report");
  std::string study_kind, study_config, study_out = "report.csv";
  std::vector<std::uint64_t> study_seeds;
  int horizon = 10, eval_trajectories = 20;
  st->add_option("--kind", study_kind, "impact_of_k | nc_vs_ncplus | consecutive")->required();
  st->add_option("--config", study_config, "base JSON config file")->required();
  st->add_option("--out", study_out, "report CSV path");
  st->add_option("--seeds", study_seeds, "training seeds (default 0 1 2)");
  st->add_option("--horizon", horizon, "windows for the consecutive study");
  st->add_option("--eval-trajectories", eval_trajectories, "held-out trajectories (consecutive)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen(n, count, t_window, order, dt, seed, out);
    if (tr->parsed()) return run_train(config_path, out_dir);
    if (ev->parsed()) return run_eval(ck_path, data_path, batch_size);
    if (st->parsed()) {
      return run_study_cmd(study_kind, study_config, study_out, study_seeds, horizon,
                           eval_trajectories);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
