#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "fittsbench/common.hpp"
#include "fittsbench/kinematics.hpp"
#include "fittsbench/policy.hpp"
#include "fittsbench/trajectory.hpp"

namespace fitts {

// ---------------------------------------------------------------------------
// Configuration and result types
// ---------------------------------------------------------------------------

/// Joint-bias disturbance: q = q_hat - gain (*) extension(q_hat), where the
/// extension is the normalized horizontal reach of the FK tip. A qualitative
/// stand-in for gravity sag at large lever arms; gain zero is the identity.
struct DisturbanceModel {
  bool enabled = false;
  Eigen::Vector4d gain = Eigen::Vector4d::Zero();
};

struct RolloutConfig {
  double success_radius_m = 0.01;
  double sample_rate_hz = 50.0;
  double warm_start_s = 0.2;
  int timeout_extra_steps = 50;   // timeout = 2 * T_human + this
  bool square_criterion = false;  // axis-aligned W/2 box instead of the radius
  DisturbanceModel disturbance;

  void validate(int history_len) const {
    if (!(success_radius_m > 0.0))
      throw ValidationError("rollout: success radius must be positive");
    if (!(sample_rate_hz > 0.0) || !(warm_start_s > 0.0))
      throw ValidationError("rollout: invalid rate or warm start");
    if (warm_start_s * sample_rate_hz + 1e-9 < history_len)
      throw ValidationError("rollout: warm start window shorter than history length");
  }
};

enum class Termination { Success, Timeout, Diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Success: return "success";
    case Termination::Timeout: return "timeout";
    default: return "diverged";
  }
}

struct RolloutResult {
  TrajectoryMatrix trajectory;  // warm-start frames followed by predictions
  Eigen::Matrix<double, Eigen::Dynamic, 3> tip_path;  // one row per trajectory row
  bool success = false;
  long success_step = -1;  // 1-based count of predicted steps at first success
  double movement_time_s = 0.0;
  Termination termination = Termination::Timeout;
  long steps_taken = 0;
  long orbit_steps = 0;  // steps inside 2x the radius without success
};

// ---------------------------------------------------------------------------
// Warm start
// ---------------------------------------------------------------------------

/// The last H frames of the demonstration's warm-start window: the most
/// recent context the policy would have seen at hand-off.
inline TrajectoryMatrix init_history(const JointTrajectory& demo, double warm_start_s,
                                     int history_len) {
  const auto warm_frames = static_cast<Eigen::Index>(
      std::lround(warm_start_s / demo.dt));
  if (demo.frames() < warm_frames)
    throw InsufficientDataError("init_history: demo shorter than the warm-start window");
  if (warm_frames < history_len)
    throw InsufficientDataError("init_history: warm-start window holds fewer frames than H");
  return demo.q.block(warm_frames - history_len, 0, history_len, kNumJoints);
}

// ---------------------------------------------------------------------------
// Disturbance
// ---------------------------------------------------------------------------

inline double horizontal_extension(const KinematicChain& chain, const JointVector& q) {
  const Eigen::Vector3d tip = forward_kinematics(chain, q);
  const Eigen::Vector3d rel = tip - chain.base_pose.translation;
  return rel.head<2>().norm() / chain.total_reach();
}

inline JointVector apply_disturbance(const KinematicChain& chain, const JointVector& q,
                                     const DisturbanceModel& model) {
  if (!model.enabled) return q;
  const double ext = horizontal_extension(chain, q);
  return q - ext * model.gain;
}

// ---------------------------------------------------------------------------
// Open-loop autoregressive rollout
// ---------------------------------------------------------------------------

inline bool inside_target(const Eigen::Vector3d& tip, const Eigen::Vector3d& target,
                          const RolloutConfig& cfg, double width_m) {
  if (cfg.square_criterion)
    return (tip - target).cwiseAbs().maxCoeff() <= 0.5 * width_m;
  return (tip - target).norm() <= cfg.success_radius_m;
}

/// Core loop shared by the policy rollout and test stubs. `predict` maps the
/// raw input vector [vec(history); s*d] to the next joint configuration.
template <typename Predictor>
RolloutResult rollout_with(Predictor&& predict, const KinematicChain& chain,
                           const JointTrajectory& demo, const Eigen::Vector3d& target,
                           const RolloutConfig& cfg, int history_len,
                           double distance_feature) {
  cfg.validate(history_len);
  chain.validate();
  if (!target.allFinite()) throw ValidationError("rollout: non-finite target");

  const long t_human = static_cast<long>(demo.frames());
  const long max_steps = 2 * t_human + cfg.timeout_extra_steps;

  TrajectoryMatrix history = init_history(demo, cfg.warm_start_s, history_len);

  RolloutResult result;
  result.trajectory.resize(history_len + max_steps, kNumJoints);
  result.tip_path.resize(history_len + max_steps, 3);
  for (int i = 0; i < history_len; ++i) {
    result.trajectory.row(i) = history.row(i);
    result.tip_path.row(i) =
        forward_kinematics(chain, history.row(i).transpose()).transpose();
  }

  Eigen::VectorXd x(history_len * kNumJoints + 1);
  long step = 0;
  for (step = 1; step <= max_steps; ++step) {
    for (int h = 0; h < history_len; ++h)
      for (int j = 0; j < kNumJoints; ++j) x[h * kNumJoints + j] = history(h, j);
    x[history_len * kNumJoints] = distance_feature;

    JointVector q_next = predict(x);
    if (!q_next.allFinite()) {
      // diverged rollout: recorded, not thrown
      result.termination = Termination::Diverged;
      --step;
      break;
    }
    q_next = apply_disturbance(chain, q_next, cfg.disturbance);

    // shift the history window forward by one frame
    history.topRows(history_len - 1) = history.bottomRows(history_len - 1).eval();
    history.row(history_len - 1) = q_next.transpose();

    const Eigen::Vector3d tip = forward_kinematics(chain, q_next);
    result.trajectory.row(history_len + step - 1) = q_next.transpose();
    result.tip_path.row(history_len + step - 1) = tip.transpose();

    if (inside_target(tip, target, cfg, demo.width_m)) {
      result.success = true;
      result.success_step = step;
      result.movement_time_s = static_cast<double>(step) / cfg.sample_rate_hz;
      result.termination = Termination::Success;
      break;
    }
    if ((tip - target).norm() <= 2.0 * cfg.success_radius_m) ++result.orbit_steps;
  }
  result.steps_taken = std::min(step, max_steps);
  result.trajectory.conservativeResize(history_len + result.steps_taken,
                                       Eigen::NoChange);
  result.tip_path.conservativeResize(history_len + result.steps_taken, Eigen::NoChange);
  return result;
}

/// Open-loop deployment of a trained policy: its own predictions are fed
/// back as input; no sensed state enters the loop after the warm start.
inline RolloutResult rollout(const PolicyBundle& bundle, const KinematicChain& chain,
                             const JointTrajectory& demo, const Eigen::Vector3d& target,
                             const RolloutConfig& cfg) {
  bundle.validate();
  const double feature = bundle.config.distance_scale * demo.distance_m;
  return rollout_with([&bundle](const Eigen::VectorXd& x) { return bundle.predict(x); },
                      chain, demo, target, cfg, bundle.config.history_len, feature);
}

}  // namespace fitts
