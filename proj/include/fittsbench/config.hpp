#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fittsbench/common.hpp"
#include "fittsbench/demo_gen.hpp"
#include "fittsbench/kinematics.hpp"
#include "fittsbench/policy.hpp"
#include "fittsbench/rollout.hpp"

namespace fitts {

// ---------------------------------------------------------------------------
// Experiment configuration: one declarative file drives the whole pipeline.
// ---------------------------------------------------------------------------

struct AnalysisConfig {
  bool outlier_removal = true;
  double threshold_rad_s = 0.05;
  SpeedNorm speed_norm = SpeedNorm::L2;
  bool smooth_speed = false;
  bool dump_rollout_trajectories = false;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  KinematicChain chain = KinematicChain::default_left_arm();
  GeneratorConfig generator;
  PolicyConfig policy;
  RolloutConfig rollout;
  AnalysisConfig analysis;

  nlohmann::json normalized;  // the fully-resolved config document
  std::string config_hash;    // FNV-1a of the normalized document

  void validate() const {
    chain.validate();
    generator.validate();
    policy.validate();
    rollout.validate(policy.history_len);
  }
};

namespace detail {

inline Eigen::Vector3d vec3_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ValidationError("config: expected a 3-vector");
  return {v[0], v[1], v[2]};
}

inline Eigen::Vector4d vec4_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw ValidationError("config: expected a 4-vector");
  return {v[0], v[1], v[2], v[3]};
}

inline nlohmann::json vec3_to_json(const Eigen::Vector3d& v) {
  return {v[0], v[1], v[2]};
}

inline nlohmann::json vec4_to_json(const Eigen::Vector4d& v) {
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace detail

inline nlohmann::json chain_to_json(const KinematicChain& c) {
  nlohmann::json joints = nlohmann::json::array();
  for (const auto& j : c.joints)
    joints.push_back({{"name", j.name},
                      {"axis", detail::vec3_to_json(j.axis)},
                      {"offset", detail::vec3_to_json(j.link_offset)}});
  std::vector<double> rot(c.base_pose.rotation.data(), c.base_pose.rotation.data() + 9);
  return {{"joints", joints},
          {"base_rotation_col_major", rot},
          {"base_translation", detail::vec3_to_json(c.base_pose.translation)},
          {"tool_offset", detail::vec3_to_json(c.tool_offset)},
          {"joint_limit_rad", c.joint_limit_rad}};
}

inline KinematicChain chain_from_json(const nlohmann::json& j) {
  KinematicChain c = KinematicChain::default_left_arm();
  if (j.contains("joints")) {
    const auto& joints = j.at("joints");
    if (joints.size() != kNumJoints)
      throw ValidationError("config: chain must define exactly 4 joints");
    for (int i = 0; i < kNumJoints; ++i) {
      const auto& jj = joints.at(static_cast<std::size_t>(i));
      c.joints[static_cast<std::size_t>(i)].name =
          jj.value("name", c.joints[static_cast<std::size_t>(i)].name);
      if (jj.contains("axis"))
        c.joints[static_cast<std::size_t>(i)].axis = detail::vec3_from_json(jj.at("axis"));
      if (jj.contains("offset"))
        c.joints[static_cast<std::size_t>(i)].link_offset =
            detail::vec3_from_json(jj.at("offset"));
    }
  }
  if (j.contains("base_rotation_col_major")) {
    const auto rot = j.at("base_rotation_col_major").get<std::vector<double>>();
    if (rot.size() != 9) throw ValidationError("config: base rotation needs 9 entries");
    c.base_pose.rotation = Eigen::Map<const Eigen::Matrix3d>(rot.data());
  }
  if (j.contains("base_translation"))
    c.base_pose.translation = detail::vec3_from_json(j.at("base_translation"));
  if (j.contains("tool_offset"))
    c.tool_offset = detail::vec3_from_json(j.at("tool_offset"));
  c.joint_limit_rad = j.value("joint_limit_rad", c.joint_limit_rad);
  return c;
}

inline nlohmann::json generator_to_json(const GeneratorConfig& g) {
  return {{"fitts_a_s", g.fitts_a_s},
          {"fitts_b_s_per_bit", g.fitts_b_s_per_bit},
          {"mt_noise_sigma_s", g.mt_noise_sigma_s},
          {"distances_m", g.distances_m},
          {"width_m", g.width_m},
          {"trials_per_condition", g.trials_per_condition},
          {"start_q", detail::vec4_to_json(g.start_q)},
          {"displacement_direction", detail::vec4_to_json(g.displacement_direction)},
          {"replica_mode", g.replica_mode},
          {"frame_noise_sigma_rad", g.frame_noise_sigma_rad},
          {"start_jitter_rad", g.start_jitter_rad},
          {"onset_threshold_rad_s", g.onset_threshold_rad_s},
          {"pad_s", g.pad_s},
          {"sample_rate_hz", g.sample_rate_hz},
          {"min_mt_s", g.min_mt_s}};
}

inline GeneratorConfig generator_from_json(const nlohmann::json& j) {
  GeneratorConfig g;
  g.fitts_a_s = j.value("fitts_a_s", g.fitts_a_s);
  g.fitts_b_s_per_bit = j.value("fitts_b_s_per_bit", g.fitts_b_s_per_bit);
  g.mt_noise_sigma_s = j.value("mt_noise_sigma_s", g.mt_noise_sigma_s);
  if (j.contains("distances_m")) g.distances_m = j.at("distances_m").get<std::vector<double>>();
  g.width_m = j.value("width_m", g.width_m);
  g.trials_per_condition = j.value("trials_per_condition", g.trials_per_condition);
  if (j.contains("start_q")) g.start_q = detail::vec4_from_json(j.at("start_q"));
  if (j.contains("displacement_direction"))
    g.displacement_direction = detail::vec4_from_json(j.at("displacement_direction"));
  g.replica_mode = j.value("replica_mode", g.replica_mode);
  g.frame_noise_sigma_rad = j.value("frame_noise_sigma_rad", g.frame_noise_sigma_rad);
  g.start_jitter_rad = j.value("start_jitter_rad", g.start_jitter_rad);
  g.onset_threshold_rad_s = j.value("onset_threshold_rad_s", g.onset_threshold_rad_s);
  g.pad_s = j.value("pad_s", g.pad_s);
  g.sample_rate_hz = j.value("sample_rate_hz", g.sample_rate_hz);
  g.min_mt_s = j.value("min_mt_s", g.min_mt_s);
  g.seed = j.value("seed", g.seed);
  return g;
}

inline nlohmann::json rollout_to_json(const RolloutConfig& r) {
  return {{"success_radius_m", r.success_radius_m},
          {"sample_rate_hz", r.sample_rate_hz},
          {"warm_start_s", r.warm_start_s},
          {"timeout_extra_steps", r.timeout_extra_steps},
          {"square_criterion", r.square_criterion},
          {"disturbance_enabled", r.disturbance.enabled},
          {"disturbance_gain", detail::vec4_to_json(r.disturbance.gain)}};
}

inline RolloutConfig rollout_from_json(const nlohmann::json& j) {
  RolloutConfig r;
  r.success_radius_m = j.value("success_radius_m", r.success_radius_m);
  r.sample_rate_hz = j.value("sample_rate_hz", r.sample_rate_hz);
  r.warm_start_s = j.value("warm_start_s", r.warm_start_s);
  r.timeout_extra_steps = j.value("timeout_extra_steps", r.timeout_extra_steps);
  r.square_criterion = j.value("square_criterion", r.square_criterion);
  r.disturbance.enabled = j.value("disturbance_enabled", r.disturbance.enabled);
  if (j.contains("disturbance_gain"))
    r.disturbance.gain = detail::vec4_from_json(j.at("disturbance_gain"));
  return r;
}

inline nlohmann::json analysis_to_json(const AnalysisConfig& a) {
  return {{"outlier_removal", a.outlier_removal},
          {"threshold_rad_s", a.threshold_rad_s},
          {"speed_norm", a.speed_norm == SpeedNorm::L2 ? "l2" : "max_abs"},
          {"smooth_speed", a.smooth_speed},
          {"dump_rollout_trajectories", a.dump_rollout_trajectories}};
}

inline AnalysisConfig analysis_from_json(const nlohmann::json& j) {
  AnalysisConfig a;
  a.outlier_removal = j.value("outlier_removal", a.outlier_removal);
  a.threshold_rad_s = j.value("threshold_rad_s", a.threshold_rad_s);
  const auto norm = j.value("speed_norm", std::string("l2"));
  if (norm == "l2") a.speed_norm = SpeedNorm::L2;
  else if (norm == "max_abs") a.speed_norm = SpeedNorm::MaxAbs;
  else throw ValidationError("config: speed_norm must be 'l2' or 'max_abs'");
  a.smooth_speed = j.value("smooth_speed", a.smooth_speed);
  a.dump_rollout_trajectories = j.value("dump_rollout_trajectories",
                                        a.dump_rollout_trajectories);
  return a;
}

/// Builds a fully-resolved config from a (possibly partial) JSON document.
/// The global seed also seeds the generator and policy sub-blocks unless
/// those provide their own.
inline ExperimentConfig experiment_config_from_json(nlohmann::json doc) {
  ExperimentConfig cfg;
  try {
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.output_dir = doc.value("output_dir", cfg.output_dir);
    cfg.chain = chain_from_json(doc.value("chain", nlohmann::json::object()));
    cfg.generator = generator_from_json(doc.value("generator", nlohmann::json::object()));
    cfg.policy = policy_config_from_json(doc.value("policy", nlohmann::json::object()));
    cfg.rollout = rollout_from_json(doc.value("rollout", nlohmann::json::object()));
    cfg.analysis = analysis_from_json(doc.value("analysis", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!doc.contains("generator") || !doc["generator"].contains("seed"))
    cfg.generator.seed = cfg.seed;
  if (!doc.contains("policy") || !doc["policy"].contains("seed"))
    cfg.policy.seed = mix_seed(cfg.seed, 0x70571Cull);
  cfg.validate();

  nlohmann::json norm;
  norm["seed"] = cfg.seed;
  norm["output_dir"] = cfg.output_dir;
  norm["chain"] = chain_to_json(cfg.chain);
  norm["generator"] = generator_to_json(cfg.generator);
  norm["generator"]["seed"] = cfg.generator.seed;
  norm["policy"] = policy_config_to_json(cfg.policy);
  norm["rollout"] = rollout_to_json(cfg.rollout);
  norm["analysis"] = analysis_to_json(cfg.analysis);
  cfg.normalized = norm;
  // The hash covers experiment substance only; where the artifacts land on
  // disk must not change their bytes.
  nlohmann::json hashed = norm;
  hashed.erase("output_dir");
  cfg.config_hash = hex64(fnv1a64(hashed.dump()));
  return cfg;
}

/// Applies one `--set key=value` override (dotted path; the value is parsed
/// as JSON when possible, otherwise taken as a string).
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ValidationError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ValidationError("--set: empty key segment in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace fitts
