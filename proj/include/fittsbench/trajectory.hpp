#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fittsbench/common.hpp"
#include "fittsbench/kinematics.hpp"

namespace fitts {

using json = nlohmann::json;

inline const std::array<std::string, kNumJoints>& preferred_joint_order() {
  static const std::array<std::string, kNumJoints> names = {
      "LeftShoulderPitch", "LeftShoulderRoll", "LeftShoulderYaw", "LeftElbow"};
  return names;
}

constexpr const char* kDemoSchemaVersion = "demo-v1";

// ---------------------------------------------------------------------------
// DemoRecord: one kinesthetic demonstration as stored on disk
// ---------------------------------------------------------------------------

struct DemoFrame {
  double t = 0.0;  // seconds
  std::map<std::string, double> positions;  // radians, keyed by joint name
};

struct DemoRecord {
  std::vector<std::string> joint_names;
  double distance_m = 0.0;
  double width_m = 0.0;
  double sample_rate_hz = 50.0;
  std::string trial_id;
  std::vector<DemoFrame> frames;

  // provenance, carried through but not part of the trajectory content
  std::string config_hash;
  std::uint64_t seed = 0;

  void validate() const {
    if (joint_names.empty())
      throw ValidationError("demo: metadata.joint_names is empty");
    if (!(width_m > 0.0)) throw ValidationError("demo: width_m must be positive");
    if (!(distance_m > 0.0)) throw ValidationError("demo: distance_m must be positive");
    if (!(sample_rate_hz > 0.0))
      throw ValidationError("demo: sample_rate_hz must be positive");
    if (frames.size() < 2) throw ValidationError("demo: fewer than 2 frames");
    const double dt = 1.0 / sample_rate_hz;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      if (!std::isfinite(f.t))
        throw ValidationError("demo: non-finite timestamp at frame " + std::to_string(i));
      if (i > 0) {
        const double gap = f.t - frames[i - 1].t;
        if (gap <= 0.0)
          throw ValidationError("demo: non-monotone timestamps at frame " +
                                std::to_string(i));
        if (std::abs(gap - dt) > 1e-6)
          throw ValidationError("demo: sample spacing " + fmt_g(gap) + " at frame " +
                                std::to_string(i) + " deviates from 1/" +
                                fmt_g(sample_rate_hz) + " Hz");
      }
      for (const auto& name : joint_names) {
        auto it = f.positions.find(name);
        if (it == f.positions.end())
          throw ValidationError("demo: frame " + std::to_string(i) +
                                " is missing joint " + name);
        if (!std::isfinite(it->second))
          throw ValidationError("demo: frame " + std::to_string(i) +
                                " has non-finite position for " + name);
      }
    }
  }
};

inline json demo_to_json(const DemoRecord& rec) {
  json meta;
  meta["joint_names"] = rec.joint_names;
  meta["distance_m"] = rec.distance_m;
  meta["width_m"] = rec.width_m;
  meta["sample_rate_hz"] = rec.sample_rate_hz;
  if (!rec.trial_id.empty()) meta["trial_id"] = rec.trial_id;

  json frames = json::array();
  for (const auto& f : rec.frames) {
    json jf;
    jf["t"] = f.t;
    jf["positions"] = f.positions;
    frames.push_back(std::move(jf));
  }

  json root;
  root["schema"] = kDemoSchemaVersion;
  root["metadata"] = std::move(meta);
  root["frames"] = std::move(frames);
  if (!rec.config_hash.empty()) {
    root["provenance"] = {{"config_hash", rec.config_hash}, {"seed", rec.seed}};
  }
  return root;
}

inline std::string serialize_demo(const DemoRecord& rec) {
  return demo_to_json(rec).dump(2) + "\n";
}

/// Parses and validates a demo-v1 JSON document.
inline DemoRecord parse_demo(const std::string& bytes) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError("demo: malformed JSON at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
  try {
    if (root.contains("schema")) {
      const auto schema = root.at("schema").get<std::string>();
      if (schema != kDemoSchemaVersion)
        throw SchemaError("demo: unsupported schema version '" + schema +
                          "' (expected " + kDemoSchemaVersion + ")");
    }
    DemoRecord rec;
    const auto& meta = root.at("metadata");
    rec.joint_names = meta.at("joint_names").get<std::vector<std::string>>();
    rec.distance_m = meta.at("distance_m").get<double>();
    rec.width_m = meta.at("width_m").get<double>();
    rec.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
    if (meta.contains("trial_id")) rec.trial_id = meta.at("trial_id").get<std::string>();
    for (const auto& jf : root.at("frames")) {
      DemoFrame f;
      f.t = jf.at("t").get<double>();
      f.positions = jf.at("positions").get<std::map<std::string, double>>();
      rec.frames.push_back(std::move(f));
    }
    if (root.contains("provenance")) {
      rec.config_hash = root["provenance"].value("config_hash", "");
      rec.seed = root["provenance"].value("seed", std::uint64_t{0});
    }
    rec.validate();
    return rec;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("demo: schema violation: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// JointTrajectory: the selected 4-joint trajectory in canonical order
// ---------------------------------------------------------------------------

struct JointTrajectory {
  std::array<std::string, kNumJoints> joint_names;
  TrajectoryMatrix q;  // T x 4, radians
  double dt = 0.02;
  double distance_m = 0.0;
  double width_m = 0.0;
  std::string trial_id;

  Eigen::Index frames() const { return q.rows(); }
};

/// Selects the four preferred joints, reordering columns into canonical order
/// and dropping any extra joints (wrist etc.).
inline JointTrajectory select_joints(const DemoRecord& rec) {
  rec.validate();
  const auto& order = preferred_joint_order();
  std::vector<std::string> missing;
  for (const auto& name : order) {
    if (std::find(rec.joint_names.begin(), rec.joint_names.end(), name) ==
        rec.joint_names.end())
      missing.push_back(name);
  }
  if (!missing.empty()) {
    std::string msg = "demo: missing preferred joints:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }

  JointTrajectory traj;
  std::copy(order.begin(), order.end(), traj.joint_names.begin());
  traj.dt = 1.0 / rec.sample_rate_hz;
  traj.distance_m = rec.distance_m;
  traj.width_m = rec.width_m;
  traj.trial_id = rec.trial_id;
  traj.q.resize(static_cast<Eigen::Index>(rec.frames.size()), kNumJoints);
  for (std::size_t i = 0; i < rec.frames.size(); ++i)
    for (int j = 0; j < kNumJoints; ++j)
      traj.q(static_cast<Eigen::Index>(i), j) = rec.frames[i].positions.at(order[j]);
  return traj;
}

// ---------------------------------------------------------------------------
// Movement time extraction
// ---------------------------------------------------------------------------

struct MovementWindow {
  bool detected = false;
  double onset_s = 0.0;
  double offset_s = 0.0;
  double mt() const { return offset_s - onset_s; }
};

struct ExtractionOptions {
  double threshold_rad_s = 0.05;
  SpeedNorm norm = SpeedNorm::L2;
  bool smooth = false;  // 5-sample moving average on speed, for noisy data
};

/// MT between velocity onset and offset. Onset is the first sample whose
/// speed exceeds the threshold, offset the last such sample. A trajectory
/// that never crosses the threshold yields detected == false.
inline MovementWindow extract_movement_time(const JointTrajectory& traj,
                                            const ExtractionOptions& opt = {}) {
  const Eigen::Index n = traj.frames();
  if (n < 3) throw InsufficientDataError("extract_movement_time: need >= 3 frames");
  if (!traj.q.allFinite())
    throw ValidationError("extract_movement_time: non-finite trajectory");

  std::vector<double> speed(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    speed[static_cast<std::size_t>(i)] = joint_speed(traj.q, traj.dt, i, opt.norm);

  if (opt.smooth) {
    std::vector<double> smoothed(speed.size());
    const Eigen::Index half = 2;  // 5-sample window
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      int count = 0;
      for (Eigen::Index k = i - half; k <= i + half; ++k) {
        if (k < 0 || k >= n) continue;
        acc += speed[static_cast<std::size_t>(k)];
        ++count;
      }
      smoothed[static_cast<std::size_t>(i)] = acc / count;
    }
    speed.swap(smoothed);
  }

  Eigen::Index onset = -1, offset = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (speed[static_cast<std::size_t>(i)] > opt.threshold_rad_s) {
      if (onset < 0) onset = i;
      offset = i;
    }
  }
  MovementWindow w;
  if (onset < 0) return w;
  w.detected = true;
  w.onset_s = static_cast<double>(onset) * traj.dt;
  w.offset_s = static_cast<double>(offset) * traj.dt;
  return w;
}

// ---------------------------------------------------------------------------
// TrialMetric: one row of the per-trial metric table
// ---------------------------------------------------------------------------

enum class TrialSource { Human, Policy };

inline const char* to_string(TrialSource s) {
  return s == TrialSource::Human ? "human" : "policy";
}

inline TrialSource trial_source_from_string(const std::string& s) {
  if (s == "human") return TrialSource::Human;
  if (s == "policy") return TrialSource::Policy;
  throw ValidationError("unknown trial source '" + s + "'");
}

struct TrialMetric {
  std::string trial_id;
  TrialSource source = TrialSource::Human;
  double distance_m = 0.0;
  double width_m = 0.0;
  double movement_time_s = 0.0;
  bool success = false;

  void validate() const {
    if (!(distance_m > 0.0) || !(width_m > 0.0))
      throw ValidationError("trial metric: distance and width must be positive");
    if (success && !(movement_time_s > 0.0))
      throw ValidationError("trial metric: successful trial with non-positive MT");
  }
};

}  // namespace fitts
