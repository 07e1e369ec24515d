#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <string>

#include "fittsbench/common.hpp"

namespace fitts {

using JointVector = Eigen::Vector4d;
using TrajectoryMatrix = Eigen::Matrix<double, Eigen::Dynamic, 4>;

constexpr int kNumJoints = 4;

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
};

/// One revolute joint: rotation about `axis` followed by a fixed link offset
/// expressed in the rotated frame.
struct RevoluteJoint {
  std::string name;
  Eigen::Vector3d axis;
  Eigen::Vector3d link_offset;
};

struct KinematicChain {
  RigidTransform base_pose;
  std::array<RevoluteJoint, kNumJoints> joints;
  Eigen::Vector3d tool_offset = Eigen::Vector3d::Zero();
  double joint_limit_rad = M_PI;  // symmetric limit per joint

  /// Sum of link offset norms plus the tool offset norm.
  double total_reach() const {
    double r = tool_offset.norm();
    for (const auto& j : joints) r += j.link_offset.norm();
    return r;
  }

  void validate() const {
    for (const auto& j : joints) {
      if (!j.axis.allFinite() || !j.link_offset.allFinite())
        throw ValidationError("chain: non-finite joint parameters for " + j.name);
      if (std::abs(j.axis.norm() - 1.0) > 1e-12)
        throw ValidationError("chain: rotation axis of " + j.name + " is not unit norm");
    }
    if (!base_pose.rotation.allFinite() || !base_pose.translation.allFinite() ||
        !tool_offset.allFinite())
      throw ValidationError("chain: non-finite base pose or tool offset");
    if (total_reach() <= 0.5)
      throw ValidationError("chain: total reach " + fmt_g(total_reach()) +
                            " m does not exceed 0.5 m");
    if (!(joint_limit_rad > 0.0))
      throw ValidationError("chain: joint limit must be positive");
  }

  /// Documented default: upper arm 0.22 m, forearm 0.20 m, pencil tool 0.15 m
  /// along the forearm axis, orthogonal shoulder axes pitch->roll->yaw.
  /// Total reach 0.57 m, so every task distance up to 0.5 m is reachable.
  static KinematicChain default_left_arm() {
    KinematicChain c;
    c.joints[0] = {"LeftShoulderPitch", {0, 1, 0}, {0, 0, 0}};
    c.joints[1] = {"LeftShoulderRoll", {1, 0, 0}, {0, 0, 0}};
    c.joints[2] = {"LeftShoulderYaw", {0, 0, 1}, {0, 0, -0.22}};
    c.joints[3] = {"LeftElbow", {0, 1, 0}, {0, 0, -0.20}};
    c.tool_offset = {0, 0, -0.15};
    return c;
  }
};

inline void check_joint_vector(const KinematicChain& chain, const JointVector& q) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!std::isfinite(q[i]))
      throw ValidationError("joint vector: non-finite angle at index " + std::to_string(i));
    if (std::abs(q[i]) > chain.joint_limit_rad + 1e-12)
      throw ValidationError("joint vector: angle " + fmt_g(q[i]) + " at index " +
                            std::to_string(i) + " exceeds limit");
  }
}

/// Frame origins along the chain: base, then after each joint's link offset.
/// origins[0] is the base, origins[i] the origin of link frame i,
/// origins[4] the last link frame (tip = origins[4] + R*tool_offset).
inline std::array<Eigen::Vector3d, kNumJoints + 1> link_origins(
    const KinematicChain& chain, const JointVector& q) {
  std::array<Eigen::Vector3d, kNumJoints + 1> origins;
  RigidTransform t = chain.base_pose;
  origins[0] = t.translation;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = chain.joints[i];
    RigidTransform step;
    step.rotation = Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    step.translation = step.rotation * j.link_offset;
    t = t * step;
    origins[i + 1] = t.translation;
  }
  return origins;
}

/// World-frame pencil-tip position. Pure function, continuous in q.
inline Eigen::Vector3d forward_kinematics(const KinematicChain& chain,
                                          const JointVector& q) {
  if (!q.allFinite())
    throw ValidationError("forward_kinematics: non-finite joint angles");
  RigidTransform t = chain.base_pose;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& j = chain.joints[i];
    RigidTransform step;
    step.rotation = Eigen::AngleAxisd(q[i], j.axis).toRotationMatrix();
    step.translation = step.rotation * j.link_offset;
    t = t * step;
  }
  return t.apply(chain.tool_offset);
}

/// Euclidean distance between the tip positions of two configurations.
/// Realizes the task amplitude between a start and an end state.
inline double task_distance(const KinematicChain& chain, const JointVector& q_a,
                            const JointVector& q_b) {
  return (forward_kinematics(chain, q_a) - forward_kinematics(chain, q_b)).norm();
}

enum class SpeedNorm { L2, MaxAbs };

/// Joint-space speed at one sample of a uniformly sampled trajectory.
/// Central differences in the interior, one-sided at the boundaries.
inline double joint_speed(const TrajectoryMatrix& q, double dt, Eigen::Index index,
                          SpeedNorm norm = SpeedNorm::L2) {
  const Eigen::Index n = q.rows();
  if (n < 2) throw InsufficientDataError("joint_speed: need at least 2 frames");
  if (index < 0 || index >= n)
    throw ContractError("joint_speed: index out of range");
  if (!(dt > 0.0)) throw ValidationError("joint_speed: dt must be positive");

  Eigen::RowVector4d v;
  if (index == 0) {
    v = (q.row(1) - q.row(0)) / dt;
  } else if (index == n - 1) {
    v = (q.row(n - 1) - q.row(n - 2)) / dt;
  } else {
    v = (q.row(index + 1) - q.row(index - 1)) / (2.0 * dt);
  }
  return norm == SpeedNorm::L2 ? v.norm() : v.cwiseAbs().maxCoeff();
}

}  // namespace fitts
