// SPDX-License-Identifier: Apache-2.0
#include "ncdyn/nbody.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "ncdyn/rng.hpp"

namespace ncdyn {

namespace {

constexpr double kBoxSide = 5.0;
constexpr double kVelSigma = 0.5;

double dist2(const Vec3& a, const Vec3& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

SystemState init_system(std::uint64_t seed, int n) {
  if (n < 2) throw std::invalid_argument("init_system: need at least 2 particles");
  Rng rng(seed);
  SystemState s;
  s.pos.resize(static_cast<std::size_t>(n));
  s.vel.resize(static_cast<std::size_t>(n));
  s.charge.resize(static_cast<std::size_t>(n));
  const double half = kBoxSide / 2.0;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("init_system: could not separate particles");
      Vec3 p{rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)};
      bool ok = true;
      for (int j = 0; j < i; ++j) {
        if (dist2(p, s.pos[static_cast<std::size_t>(j)]) <= kSoftening * kSoftening) {
          ok = false;
          break;
        }
      }
      if (ok) {
        s.pos[static_cast<std::size_t>(i)] = p;
        break;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    s.vel[static_cast<std::size_t>(i)] = {kVelSigma * rng.normal(), kVelSigma * rng.normal(),
                                          kVelSigma * rng.normal()};
  }
  for (int i = 0; i < n; ++i) s.charge[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return s;
}

void accelerations(const SystemState& s, std::vector<Vec3>& out) {
  const int n = s.size();
  out.assign(static_cast<std::size_t>(n), Vec3{0.0, 0.0, 0.0});
  const double eps2 = kSoftening * kSoftening;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec3& xi = s.pos[static_cast<std::size_t>(i)];
      const Vec3& xj = s.pos[static_cast<std::size_t>(j)];
      double dx = xi[0] - xj[0], dy = xi[1] - xj[1], dz = xi[2] - xj[2];
      double r2 = dx * dx + dy * dy + dz * dz + eps2;
      double inv = 1.0 / (r2 * std::sqrt(r2));
      double f = s.charge[static_cast<std::size_t>(i)] * s.charge[static_cast<std::size_t>(j)] * inv;
      // Antisymmetric pair force; masses are 1 so force == acceleration.
      out[static_cast<std::size_t>(i)][0] += f * dx;
      out[static_cast<std::size_t>(i)][1] += f * dy;
      out[static_cast<std::size_t>(i)][2] += f * dz;
      out[static_cast<std::size_t>(j)][0] -= f * dx;
      out[static_cast<std::size_t>(j)][1] -= f * dy;
      out[static_cast<std::size_t>(j)][2] -= f * dz;
    }
  }
}

void leapfrog_step(SystemState& s, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("leapfrog_step: dt must be positive");
  static thread_local std::vector<Vec3> acc;
  accelerations(s, acc);
  const int n = s.size();
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      s.vel[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] += 0.5 * dt * acc[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
      s.pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] += dt * s.vel[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    }
  }
  accelerations(s, acc);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      s.vel[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] += 0.5 * dt * acc[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    }
  }
}

Vec3 total_momentum(const SystemState& s) {
  Vec3 p{0.0, 0.0, 0.0};
  for (const Vec3& v : s.vel) {
    p[0] += v[0];
    p[1] += v[1];
    p[2] += v[2];
  }
  return p;
}

double total_energy(const SystemState& s) {
  double kinetic = 0.0;
  for (const Vec3& v : s.vel) kinetic += 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  double potential = 0.0;
  const double eps2 = kSoftening * kSoftening;
  const int n = s.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double r2 = dist2(s.pos[static_cast<std::size_t>(i)], s.pos[static_cast<std::size_t>(j)]);
      potential += s.charge[static_cast<std::size_t>(i)] * s.charge[static_cast<std::size_t>(j)] /
                   std::sqrt(r2 + eps2);
    }
  }
  return kinetic + potential;
}

TrajectorySample sample_trajectory(std::uint64_t seed, int n, double t_window, int order, double dt) {
  if (order < 1) throw std::invalid_argument("sample_trajectory: order must be >= 1");
  if (!(t_window > 0.0)) throw std::invalid_argument("sample_trajectory: t_window must be positive");
  double frame_span = t_window / order;
  double steps_f = frame_span / dt;
  auto steps = static_cast<long long>(std::llround(steps_f));
  if (steps < 1 || std::abs(steps_f - static_cast<double>(steps)) > 1e-9 * steps_f) {
    throw std::invalid_argument("sample_trajectory: t_window/order = " + std::to_string(frame_span) +
                                " is not an integer multiple of dt = " + std::to_string(dt));
  }
  SystemState s = init_system(seed, n);
  TrajectorySample sample;
  sample.seed = seed;
  sample.n = n;
  sample.t_window = t_window;
  sample.order = order;
  sample.dt = dt;
  sample.charges = s.charge;
  auto record = [&](int k) {
    TrajectorySample::Frame f;
    f.t = t_window * k / order;
    f.x = s.pos;
    f.v = s.vel;
    sample.frames.push_back(std::move(f));
  };
  record(0);
  for (int k = 1; k <= order; ++k) {
    for (long long i = 0; i < steps; ++i) leapfrog_step(s, dt);
    record(k);
  }
  return sample;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

using nlohmann::json;

json vec3s_to_json(const std::vector<Vec3>& v) {
  json arr = json::array();
  for (const Vec3& x : v) arr.push_back({x[0], x[1], x[2]});
  return arr;
}

std::vector<Vec3> vec3s_from_json(const json& arr, int expect_n) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != expect_n) {
    throw std::runtime_error("expected array of " + std::to_string(expect_n) + " 3-vectors");
  }
  std::vector<Vec3> out;
  out.reserve(arr.size());
  for (const json& row : arr) {
    if (!row.is_array() || row.size() != 3) throw std::runtime_error("expected 3-vector");
    out.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
  }
  return out;
}

json sample_to_json(const TrajectorySample& s) {
  json j;
  j["seed"] = s.seed;
  j["n"] = s.n;
  j["t_window"] = s.t_window;
  j["k"] = s.order;
  j["dt"] = s.dt;
  j["charges"] = s.charges;
  json frames = json::array();
  for (const auto& f : s.frames) {
    frames.push_back({{"t", f.t}, {"x", vec3s_to_json(f.x)}, {"v", vec3s_to_json(f.v)}});
  }
  j["frames"] = frames;
  return j;
}

}  // namespace

TrajectorySample parse_sample_json(const std::string& line) {
  json j = json::parse(line);
  TrajectorySample s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.n = j.at("n").get<int>();
  s.t_window = j.at("t_window").get<double>();
  s.order = j.at("k").get<int>();
  s.dt = j.at("dt").get<double>();
  s.charges = j.at("charges").get<std::vector<double>>();
  if (static_cast<int>(s.charges.size()) != s.n) throw std::runtime_error("charges length != n");
  const json& frames = j.at("frames");
  if (!frames.is_array() || static_cast<int>(frames.size()) != s.order + 1) {
    throw std::runtime_error("expected " + std::to_string(s.order + 1) + " frames");
  }
  for (const json& fj : frames) {
    TrajectorySample::Frame f;
    f.t = fj.at("t").get<double>();
    f.x = vec3s_from_json(fj.at("x"), s.n);
    f.v = vec3s_from_json(fj.at("v"), s.n);
    for (const Vec3& x : f.x)
      for (double c : x)
        if (!std::isfinite(c)) throw std::runtime_error("non-finite coordinate");
    for (const Vec3& v : f.v)
      for (double c : v)
        if (!std::isfinite(c)) throw std::runtime_error("non-finite velocity");
    s.frames.push_back(std::move(f));
  }
  return s;
}

void write_dataset(const std::vector<TrajectorySample>& samples, const std::string& path) {
  if (samples.empty()) throw std::invalid_argument("write_dataset: no samples");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
  for (const TrajectorySample& s : samples) out << sample_to_json(s).dump() << '\n';
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

std::vector<TrajectorySample> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
  std::vector<TrajectorySample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      samples.push_back(parse_sample_json(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("read_dataset: " + path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  if (samples.empty()) throw std::runtime_error("read_dataset: no samples in " + path);
  return samples;
}

int worker_count(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int n = requested > 0 ? requested : hw;
  if (const char* env = std::getenv("NC_DYN_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

std::vector<TrajectorySample> generate_dataset(std::uint64_t seed0, int count, int n,
                                               double t_window, int order, double dt, int threads) {
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  std::vector<TrajectorySample> out(static_cast<std::size_t>(count));
  int workers = std::min(worker_count(threads), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = sample_trajectory(seed0 + static_cast<std::uint64_t>(i), n, t_window, order, dt);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= count) return;
        out[static_cast<std::size_t>(i)] = sample_trajectory(seed0 + static_cast<std::uint64_t>(i), n, t_window, order, dt);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace ncdyn
