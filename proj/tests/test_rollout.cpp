#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "fittsbench/demo_gen.hpp"
#include "fittsbench/rollout.hpp"

using namespace fitts;

namespace {

JointTrajectory replica_demo(const KinematicChain& chain, int condition, int trial) {
  GeneratorConfig gen;
  gen.mt_noise_sigma_s = 0.0;
  gen.seed = 31;
  return select_joints(synth_demo(chain, gen, condition, trial).record);
}

Eigen::Vector3d demo_target(const KinematicChain& chain, const JointTrajectory& demo) {
  return forward_kinematics(chain, demo.q.row(demo.frames() - 1).transpose());
}

/// Replays the demonstration after the warm-start window, ignoring the
/// history input entirely.
struct ReplayPredictor {
  const JointTrajectory* demo;
  Eigen::Index cursor;

  JointVector operator()(const Eigen::VectorXd&) {
    const Eigen::Index row = std::min(cursor++, demo->frames() - 1);
    return demo->q.row(row).transpose();
  }
};

}  // namespace

TEST_CASE("warm-start history extraction") {
  JointTrajectory demo;
  std::copy(preferred_joint_order().begin(), preferred_joint_order().end(),
            demo.joint_names.begin());
  demo.dt = 0.02;
  demo.distance_m = 0.2;
  demo.width_m = 0.02;
  demo.q = TrajectoryMatrix::Zero(40, kNumJoints);
  for (Eigen::Index i = 0; i < 40; ++i) demo.q(i, 0) = static_cast<double>(i);

  SECTION("history equal to the warm window takes frames 0..9") {
    const TrajectoryMatrix h = init_history(demo, 0.2, 10);
    REQUIRE(h.rows() == 10);
    CHECK(h(0, 0) == 0.0);
    CHECK(h(9, 0) == 9.0);
  }

  SECTION("a shorter history takes the latest warm frames") {
    const TrajectoryMatrix h = init_history(demo, 0.2, 5);
    REQUIRE(h.rows() == 5);
    CHECK(h(0, 0) == 5.0);
    CHECK(h(4, 0) == 9.0);
  }

  SECTION("too-short demos and windows fail loudly") {
    CHECK_THROWS_AS(init_history(demo, 1.0, 10), InsufficientDataError);
    CHECK_THROWS_AS(init_history(demo, 0.1, 10), InsufficientDataError);
  }
}

TEST_CASE("replaying the demonstration reaches the target") {
  const auto chain = KinematicChain::default_left_arm();
  RolloutConfig cfg;

  for (int condition : {0, 3}) {
    const JointTrajectory demo = replica_demo(chain, condition, 0);
    const Eigen::Vector3d target = demo_target(chain, demo);
    const int warm = 10;

    ReplayPredictor replay{&demo, warm};
    const RolloutResult res =
        rollout_with(replay, chain, demo, target, cfg, warm, demo.distance_m);

    REQUIRE(res.success);
    CHECK(res.termination == Termination::Success);

    // Oracle: first demo frame (after the warm start) whose FK tip is inside
    // the success radius, found by direct scan.
    long oracle_step = -1;
    for (Eigen::Index i = warm; i < demo.frames(); ++i) {
      const Eigen::Vector3d tip = forward_kinematics(chain, demo.q.row(i).transpose());
      if ((tip - target).norm() <= cfg.success_radius_m) {
        oracle_step = i - warm + 1;
        break;
      }
    }
    REQUIRE(oracle_step > 0);
    CHECK(res.success_step == oracle_step);
    CHECK(res.movement_time_s ==
          Catch::Approx(static_cast<double>(oracle_step) / 50.0));

    // The replayed movement time is the demo's own time-to-target, which is
    // bounded by the commanded duration plus padding.
    const MovementWindow w = extract_movement_time(demo);
    REQUIRE(w.detected);
    CHECK(res.movement_time_s > w.mt() * 0.5);
    CHECK(res.movement_time_s < w.mt() + 1.0);
  }
}

TEST_CASE("the recorded trajectory stitches warm start and predictions") {
  const auto chain = KinematicChain::default_left_arm();
  const JointTrajectory demo = replica_demo(chain, 1, 2);
  const Eigen::Vector3d target = demo_target(chain, demo);
  RolloutConfig cfg;
  const int warm = 10;

  ReplayPredictor replay{&demo, warm};
  const RolloutResult res =
      rollout_with(replay, chain, demo, target, cfg, warm, demo.distance_m);
  REQUIRE(res.success);

  CHECK(res.trajectory.rows() == warm + res.steps_taken);
  CHECK(res.tip_path.rows() == res.trajectory.rows());
  CHECK((res.trajectory.topRows(warm) - demo.q.topRows(warm)).cwiseAbs().maxCoeff() ==
        0.0);
  for (Eigen::Index i = 0; i < res.trajectory.rows(); i += 7) {
    const Eigen::Vector3d tip =
        forward_kinematics(chain, res.trajectory.row(i).transpose());
    REQUIRE((res.tip_path.row(i).transpose() - tip).norm() == 0.0);
  }
}

TEST_CASE("a frozen policy times out on the exact step budget") {
  const auto chain = KinematicChain::default_left_arm();
  const JointTrajectory demo = replica_demo(chain, 2, 0);
  const Eigen::Vector3d target = demo_target(chain, demo);
  RolloutConfig cfg;

  const JointVector frozen = demo.q.row(0).transpose();
  const auto hold = [&frozen](const Eigen::VectorXd&) { return frozen; };
  const RolloutResult res = rollout_with(hold, chain, demo, target, cfg, 10, 0.3);

  CHECK_FALSE(res.success);
  CHECK(res.termination == Termination::Timeout);
  CHECK(res.success_step == -1);
  CHECK(res.steps_taken == 2 * demo.frames() + 50);
  CHECK(res.orbit_steps == 0);
}

TEST_CASE("non-finite predictions mark the rollout diverged") {
  const auto chain = KinematicChain::default_left_arm();
  const JointTrajectory demo = replica_demo(chain, 0, 1);
  RolloutConfig cfg;

  int calls = 0;
  const auto explode = [&calls](const Eigen::VectorXd&) {
    JointVector q = JointVector::Zero();
    if (++calls > 3) q[1] = std::numeric_limits<double>::quiet_NaN();
    return q;
  };
  const RolloutResult res =
      rollout_with(explode, chain, demo, demo_target(chain, demo), cfg, 10, 0.2);
  CHECK(res.termination == Termination::Diverged);
  CHECK_FALSE(res.success);
  CHECK(res.steps_taken == 3);  // the bad step itself is not recorded
  CHECK(res.trajectory.allFinite());
}

TEST_CASE("horizontal extension of the default arm") {
  const auto chain = KinematicChain::default_left_arm();

  SECTION("hanging straight down has no horizontal reach") {
    CHECK(horizontal_extension(chain, JointVector::Zero()) == 0.0);
  }

  SECTION("raising the shoulder pitch to the horizontal is full extension") {
    JointVector q = JointVector::Zero();
    q[0] = M_PI / 2.0;  // pitch about +y swings -z into -x
    const Eigen::Vector3d tip = forward_kinematics(chain, q);
    CHECK(tip.x() == Catch::Approx(-0.57).margin(1e-12));
    CHECK(std::abs(tip.z()) < 1e-12);
    CHECK(horizontal_extension(chain, q) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("joint-bias disturbance") {
  const auto chain = KinematicChain::default_left_arm();
  JointVector q = JointVector::Zero();
  q[0] = M_PI / 2.0;  // full horizontal extension

  SECTION("disabled model is the identity") {
    DisturbanceModel off;
    off.gain = Eigen::Vector4d::Constant(0.5);
    CHECK((apply_disturbance(chain, q, off) - q).norm() == 0.0);
  }

  SECTION("zero gain is bitwise identity even when enabled") {
    DisturbanceModel on;
    on.enabled = true;
    const JointVector out = apply_disturbance(chain, q, on);
    for (int j = 0; j < kNumJoints; ++j) REQUIRE(out[j] == q[j]);
  }

  SECTION("full extension subtracts exactly the gain") {
    DisturbanceModel on;
    on.enabled = true;
    on.gain << 0.01, 0.0, 0.0, 0.02;
    const JointVector out = apply_disturbance(chain, q, on);
    CHECK(out[0] == Catch::Approx(q[0] - 0.01).margin(1e-12));
    CHECK(out[3] == Catch::Approx(-0.02).margin(1e-12));
  }

  SECTION("a sagging rollout differs from the clean one") {
    const JointTrajectory demo = replica_demo(chain, 1, 0);
    const Eigen::Vector3d target = demo_target(chain, demo);
    RolloutConfig clean, sagged;
    sagged.disturbance.enabled = true;
    sagged.disturbance.gain << 0.05, 0.0, 0.0, 0.05;

    ReplayPredictor r1{&demo, 10}, r2{&demo, 10};
    const RolloutResult a = rollout_with(r1, chain, demo, target, clean, 10, 0.3);
    const RolloutResult b = rollout_with(r2, chain, demo, target, sagged, 10, 0.3);
    REQUIRE(a.success);
    const Eigen::Index last = std::min(a.trajectory.rows(), b.trajectory.rows()) - 1;
    CHECK((a.trajectory.row(last) - b.trajectory.row(last)).cwiseAbs().maxCoeff() >
          0.0);
  }
}

TEST_CASE("success criteria geometry") {
  const auto chain = KinematicChain::default_left_arm();
  const Eigen::Vector3d target{0.1, 0.2, -0.3};
  RolloutConfig cfg;

  SECTION("the sphere criterion uses the configured radius") {
    cfg.success_radius_m = 0.01;
    CHECK(inside_target(target + Eigen::Vector3d{0.009, 0, 0}, target, cfg, 0.02));
    CHECK_FALSE(inside_target(target + Eigen::Vector3d{0.011, 0, 0}, target, cfg, 0.02));
  }

  SECTION("the square criterion uses half the task width per axis") {
    cfg.square_criterion = true;
    cfg.success_radius_m = 1e-9;  // ignored by the box test
    const Eigen::Vector3d corner{0.0099, 0.0099, 0.0099};
    CHECK(inside_target(target + corner, target, cfg, 0.02));
    CHECK_FALSE(inside_target(target + Eigen::Vector3d{0.0101, 0, 0}, target, cfg, 0.02));
  }
}

TEST_CASE("rollout through a trained policy bundle") {
  const auto chain = KinematicChain::default_left_arm();
  GeneratorConfig gen;
  gen.mt_noise_sigma_s = 0.0;
  gen.seed = 31;

  std::vector<JointTrajectory> demos;
  for (int t = 0; t < 4; ++t)
    demos.push_back(select_joints(synth_demo(chain, gen, 0, t).record));

  PolicyConfig pc;
  pc.hidden1 = 32;
  pc.hidden2 = 32;
  pc.batch_size = 32;
  pc.max_epochs = 60;
  pc.early_stop_patience = 60;
  pc.seed = 5;
  const PolicyBundle bundle = train(demos, pc).bundle;

  const JointTrajectory& demo = demos[0];
  const Eigen::Vector3d target = demo_target(chain, demo);
  RolloutConfig cfg;

  const RolloutResult res = rollout(bundle, chain, demo, target, cfg);
  CHECK(res.steps_taken >= 1);
  CHECK(res.trajectory.allFinite());

  SECTION("rollouts are deterministic") {
    const RolloutResult again = rollout(bundle, chain, demo, target, cfg);
    REQUIRE(again.steps_taken == res.steps_taken);
    CHECK((again.trajectory - res.trajectory).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("configuration validation runs before stepping") {
    RolloutConfig bad;
    bad.warm_start_s = 0.1;  // 5 frames < history of 10
    CHECK_THROWS_AS(rollout(bundle, chain, demo, target, bad), ValidationError);
  }
}
