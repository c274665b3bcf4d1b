// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ncdyn {

using Vec3 = std::array<double, 3>;

// Softening length of the Coulomb interaction; also the minimum pairwise
// distance enforced at initialization.
inline constexpr double kSoftening = 0.1;

// Charged point particles, unit masses.
struct SystemState {
  std::vector<Vec3> pos;
  std::vector<Vec3> vel;
  std::vector<double> charge;  // each -1 or +1

  int size() const { return static_cast<int>(pos.size()); }
};

// One training example: order+1 equally spaced frames covering [0, t_window].
// frames.front() is the input state, frames.back() the prediction target.
struct TrajectorySample {
  std::uint64_t seed = 0;
  int n = 0;
  double t_window = 1.0;
  int order = 1;   // frame count - 1; serialized as "k"
  double dt = 1e-3;  // fine integration step used to produce the frames
  std::vector<double> charges;

  struct Frame {
    double t = 0.0;
    std::vector<Vec3> x;
    std::vector<Vec3> v;
  };
  std::vector<Frame> frames;
};

// Positions i.i.d. uniform in a side-5 cube (re-drawn until every pair is
// farther than the softening length), velocities i.i.d. normal sigma = 0.5,
// charges uniform +-1. Deterministic in `seed`.
SystemState init_system(std::uint64_t seed, int n);

// Softened Coulomb accelerations q_i q_j (x_i - x_j) / (r^2 + eps^2)^{3/2}.
void accelerations(const SystemState& s, std::vector<Vec3>& out);

// One kick-drift-kick leapfrog update.
void leapfrog_step(SystemState& s, double dt);

Vec3 total_momentum(const SystemState& s);
double total_energy(const SystemState& s);  // kinetic + softened potential

// Integrates from init_system(seed, n) with step `dt`, recording frames at
// t = k * t_window / order. t_window / order must be an integer multiple of
// dt. `order` must be >= 1 (the target frame is frames[order]).
TrajectorySample sample_trajectory(std::uint64_t seed, int n, double t_window, int order, double dt);

// JSON-lines persistence; round-trips doubles exactly.
void write_dataset(const std::vector<TrajectorySample>& samples, const std::string& path);
std::vector<TrajectorySample> read_dataset(const std::string& path);
TrajectorySample parse_sample_json(const std::string& line);  // one JSONL record

// Generates `count` samples for seeds seed0 .. seed0+count-1 using a pool of
// independent workers (capped by NC_DYN_THREADS). Output is ordered by seed.
std::vector<TrajectorySample> generate_dataset(std::uint64_t seed0, int count, int n,
                                               double t_window, int order, double dt,
                                               int threads = 0);

// Worker cap from NC_DYN_THREADS (defaults to hardware concurrency).
int worker_count(int requested = 0);

}  // namespace ncdyn
