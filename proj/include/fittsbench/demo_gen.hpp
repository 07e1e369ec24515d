#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fittsbench/common.hpp"
#include "fittsbench/kinematics.hpp"
#include "fittsbench/trajectory.hpp"

namespace fitts {

// ---------------------------------------------------------------------------
// Minimum-jerk time scaling
// ---------------------------------------------------------------------------

/// Quintic minimum-jerk phase: 10 tau^3 - 15 tau^4 + 6 tau^5.
/// Monotone on [0,1], zero velocity and acceleration at both endpoints.
inline double min_jerk_phase(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw std::domain_error("min_jerk_phase: tau outside [0,1]");
  const double t3 = tau * tau * tau;
  return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

// ---------------------------------------------------------------------------
// Generator configuration
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  double fitts_a_s = 0.2;            // intercept of the commanded MT model
  double fitts_b_s_per_bit = 0.15;   // slope of the commanded MT model
  double mt_noise_sigma_s = 0.05;
  std::vector<double> distances_m = {0.20, 0.30, 0.40, 0.50};
  double width_m = 0.02;
  int trials_per_condition = 25;
  JointVector start_q = JointVector::Zero();
  Eigen::Vector4d displacement_direction = {1.0, 0.0, 0.0, 0.4};
  std::uint64_t seed = 0;

  bool replica_mode = false;          // drop one trial at random (100 -> 99)
  double frame_noise_sigma_rad = 0.0;  // optional per-frame jitter
  double start_jitter_rad = 0.0;       // optional per-trial start posture jitter
  double onset_threshold_rad_s = 0.05; // threshold the MT extractor will apply
  double pad_s = 0.3;                  // stationary padding before/after motion
  double sample_rate_hz = 50.0;
  double min_mt_s = 0.1;               // truncation floor for noisy MT draws

  void validate() const {
    if (!(fitts_a_s >= 0.0)) throw ValidationError("generator: fitts_a_s must be >= 0");
    if (!(fitts_b_s_per_bit > 0.0))
      throw ValidationError("generator: fitts_b_s_per_bit must be > 0");
    if (!(mt_noise_sigma_s >= 0.0))
      throw ValidationError("generator: mt_noise_sigma_s must be >= 0");
    if (trials_per_condition < 3)
      throw ValidationError("generator: trials_per_condition must be >= 3");
    if (distances_m.empty()) throw ValidationError("generator: no distances");
    for (double d : distances_m)
      if (!(d > 0.0)) throw ValidationError("generator: distances must be positive");
    if (!(width_m > 0.0)) throw ValidationError("generator: width_m must be positive");
    if (displacement_direction.norm() == 0.0)
      throw ValidationError("generator: displacement_direction is zero");
    if (!(onset_threshold_rad_s > 0.0))
      throw ValidationError("generator: onset threshold must be positive");
    if (!(pad_s >= 0.2)) throw ValidationError("generator: pad_s must be >= 0.2");
    if (!(sample_rate_hz > 0.0))
      throw ValidationError("generator: sample_rate_hz must be positive");
  }
};

// ---------------------------------------------------------------------------
// Amplitude solving
// ---------------------------------------------------------------------------

/// Finds q_end = start + s * direction with task_distance(start, q_end) = D
/// within 1e-6 m, by bracketing scan and bisection along the ray.
inline JointVector solve_end_config(const KinematicChain& chain,
                                    const JointVector& start_q,
                                    const Eigen::Vector4d& direction, double distance_m) {
  chain.validate();
  check_joint_vector(chain, start_q);
  if (!(distance_m >= 0.0) || !std::isfinite(distance_m))
    throw ValidationError("solve_end_config: invalid distance");
  if (direction.norm() == 0.0)
    throw ValidationError("solve_end_config: zero direction");
  if (distance_m == 0.0) return start_q;

  // Largest scale keeping every joint inside its limits.
  double s_max = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumJoints; ++i) {
    if (direction[i] == 0.0) continue;
    const double room = direction[i] > 0.0
                            ? (chain.joint_limit_rad - start_q[i]) / direction[i]
                            : (-chain.joint_limit_rad - start_q[i]) / direction[i];
    s_max = std::min(s_max, room);
  }
  if (!(s_max > 0.0))
    throw UnreachableDistanceError("solve_end_config: no room within joint limits");

  const auto dist_at = [&](double s) {
    return task_distance(chain, start_q, start_q + s * direction);
  };

  // Bracketing scan for the first crossing of D along the ray.
  const int kScan = 4000;
  double lo = 0.0, hi = -1.0;
  for (int k = 1; k <= kScan; ++k) {
    const double s = s_max * static_cast<double>(k) / kScan;
    if (dist_at(s) >= distance_m) {
      hi = s;
      lo = s_max * static_cast<double>(k - 1) / kScan;
      break;
    }
  }
  if (hi < 0.0)
    throw UnreachableDistanceError("solve_end_config: distance " + fmt_g(distance_m) +
                                   " m not reachable along direction within joint limits");

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (dist_at(mid) < distance_m)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15) break;
  }
  const double s = 0.5 * (lo + hi);
  const JointVector q_end = start_q + s * direction;
  if (std::abs(dist_at(s) - distance_m) > 1e-6)
    throw UnreachableDistanceError("solve_end_config: bisection did not converge");
  return q_end;
}

// ---------------------------------------------------------------------------
// Profile duration solving
//
// The minimum-jerk speed profile is |dq| * phi'(tau) / M with
// phi'(tau) = 30 tau^2 (1-tau)^2. The extractor reports only the part of the
// motion above its speed threshold, so the generator stretches the commanded
// duration M until the above-threshold window matches the requested movement
// time. The crossing phase has the closed form
//   tau1 = (1 - sqrt(1 - 4 sqrt(c))) / 2,  c = thr * M / (30 |dq|),
// and the window is M * (1 - 2 tau1) = M * sqrt(1 - 4 sqrt(c)).
// ---------------------------------------------------------------------------

inline double min_jerk_onset_phase(double duration_s, double dq_norm,
                                   double threshold_rad_s) {
  const double c = threshold_rad_s * duration_s / (30.0 * dq_norm);
  const double disc = 1.0 - 4.0 * std::sqrt(c);
  if (!(disc > 0.0))
    throw ValidationError("min_jerk_onset_phase: peak speed does not clear threshold");
  return 0.5 * (1.0 - std::sqrt(disc));
}

/// Solves for the commanded duration M whose above-threshold window equals
/// `window_s`. Takes the smaller of the two roots (the shorter motion).
inline double solve_profile_duration(double window_s, double dq_norm,
                                     double threshold_rad_s) {
  if (!(window_s > 0.0) || !(dq_norm > 0.0))
    throw ValidationError("solve_profile_duration: invalid inputs");
  const auto window_at = [&](double m) {
    const double c = threshold_rad_s * m / (30.0 * dq_norm);
    const double disc = 1.0 - 4.0 * std::sqrt(c);
    return disc > 0.0 ? m * std::sqrt(disc) : 0.0;
  };

  double lo = window_s;  // window_at(lo) < window_s since the factor is < 1
  double hi = -1.0;
  for (int k = 1; k <= 400; ++k) {
    const double m = window_s * (1.0 + 0.01 * k);
    if (window_at(m) >= window_s) {
      hi = m;
      lo = window_s * (1.0 + 0.01 * (k - 1));
      break;
    }
    if (k > 1 && window_at(m) < window_at(window_s * (1.0 + 0.01 * (k - 1))))
      break;  // past the peak of the window curve; no solution
  }
  if (hi < 0.0)
    throw ValidationError(
        "solve_profile_duration: displacement too small for the speed threshold");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (window_at(mid) < window_s)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Trial synthesis
// ---------------------------------------------------------------------------

struct SynthTrial {
  DemoRecord record;
  JointVector start_q;
  JointVector end_q;
  Eigen::Vector3d target;     // FK tip of the end configuration
  double commanded_mt_s = 0;  // Fitts-model movement time (a + b*ID + eps)
  std::uint64_t trial_seed = 0;
  std::string file_name;
  int condition = 0;
};

inline std::string demo_file_name(double distance_m, int trial_index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "demo_d%dcm_t%02d.json",
                static_cast<int>(std::lround(distance_m * 100.0)), trial_index);
  return buf;
}

/// One synthetic demonstration. Deterministic given (seed, condition, trial).
inline SynthTrial synth_demo(const KinematicChain& chain, const GeneratorConfig& cfg,
                             int condition_index, int trial_index) {
  cfg.validate();
  chain.validate();
  if (condition_index < 0 ||
      condition_index >= static_cast<int>(cfg.distances_m.size()))
    throw ContractError("synth_demo: condition index out of range");

  SynthTrial trial;
  trial.condition = condition_index;
  trial.trial_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(condition_index),
                              static_cast<std::uint64_t>(trial_index));
  Rng rng(trial.trial_seed);

  const double distance = cfg.distances_m[condition_index];

  JointVector start = cfg.start_q;
  if (cfg.start_jitter_rad > 0.0) {
    for (int i = 0; i < kNumJoints; ++i)
      start[i] += rng.normal(0.0, cfg.start_jitter_rad);
  }
  check_joint_vector(chain, start);

  const JointVector q_end =
      solve_end_config(chain, start, cfg.displacement_direction, distance);
  const Eigen::Vector4d delta = q_end - start;
  const double dq_norm = delta.norm();

  const double id_bits = std::log2(2.0 * distance / cfg.width_m);
  double mt = cfg.fitts_a_s + cfg.fitts_b_s_per_bit * id_bits;
  if (cfg.mt_noise_sigma_s > 0.0) {
    double candidate;
    do {
      candidate = mt + rng.normal(0.0, cfg.mt_noise_sigma_s);
    } while (!(candidate > cfg.min_mt_s));
    mt = candidate;
  }
  trial.commanded_mt_s = mt;

  const double dt = 1.0 / cfg.sample_rate_hz;
  // Target the extractor's frame grid: aim the continuous above-threshold
  // window at one frame more than the grid-rounded MT, and centre the
  // threshold crossings mid-frame, so the discrete extraction lands exactly
  // on round(MT/dt)*dt without per-trial quantization jitter.
  const double grid_mt = std::max(1.0, std::round(mt / dt)) * dt;
  const double window_target = grid_mt + dt;
  const double duration =
      solve_profile_duration(window_target, dq_norm, cfg.onset_threshold_rad_s);
  const double tau1 =
      min_jerk_onset_phase(duration, dq_norm, cfg.onset_threshold_rad_s);
  const double onset_rel = duration * tau1;

  double shift = 0.5 * dt - std::fmod(cfg.pad_s + onset_rel, dt);
  if (shift < 0.0) shift += dt;
  const double motion_start = cfg.pad_s + shift;
  const double total = motion_start + duration + cfg.pad_s;
  const auto n_frames = static_cast<Eigen::Index>(std::ceil(total / dt - 1e-9)) + 1;

  DemoRecord& rec = trial.record;
  rec.joint_names.assign(preferred_joint_order().begin(), preferred_joint_order().end());
  rec.distance_m = distance;
  rec.width_m = cfg.width_m;
  rec.sample_rate_hz = cfg.sample_rate_hz;
  rec.trial_id = "d" + std::to_string(static_cast<int>(std::lround(distance * 100.0))) +
                 "cm_t" + std::to_string(trial_index);
  rec.seed = trial.trial_seed;
  rec.frames.reserve(static_cast<std::size_t>(n_frames));
  for (Eigen::Index k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) * dt;
    double tau = (t - motion_start) / duration;
    tau = std::clamp(tau, 0.0, 1.0);
    JointVector q = start + min_jerk_phase(tau) * delta;
    if (cfg.frame_noise_sigma_rad > 0.0) {
      for (int i = 0; i < kNumJoints; ++i)
        q[i] += rng.normal(0.0, cfg.frame_noise_sigma_rad);
    }
    DemoFrame f;
    f.t = t;
    for (int i = 0; i < kNumJoints; ++i) f.positions[rec.joint_names[i]] = q[i];
    rec.frames.push_back(std::move(f));
  }

  trial.start_q = start;
  trial.end_q = q_end;
  trial.target = forward_kinematics(chain, q_end);
  trial.file_name = demo_file_name(distance, trial_index);
  return trial;
}

/// The full synthetic dataset in memory, conditions x trials, with the
/// replica mode dropping one trial at random.
inline std::vector<SynthTrial> generate_records(const KinematicChain& chain,
                                                const GeneratorConfig& cfg) {
  cfg.validate();
  const int n_cond = static_cast<int>(cfg.distances_m.size());
  const int total = n_cond * cfg.trials_per_condition;
  int drop_index = -1;
  if (cfg.replica_mode) {
    Rng rng(mix_seed(cfg.seed, 0xD20Full));
    drop_index = static_cast<int>(rng.below(static_cast<std::uint64_t>(total)));
  }
  std::vector<SynthTrial> out;
  out.reserve(static_cast<std::size_t>(total));
  for (int ci = 0; ci < n_cond; ++ci) {
    for (int ti = 0; ti < cfg.trials_per_condition; ++ti) {
      if (ci * cfg.trials_per_condition + ti == drop_index) continue;
      out.push_back(synth_demo(chain, cfg, ci, ti));
    }
  }
  return out;
}

}  // namespace fitts
