#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "fittsbench/pipeline.hpp"

using namespace fitts;

namespace {

nlohmann::json tiny_doc() {
  nlohmann::json doc;
  doc["seed"] = 21;
  doc["generator"] = {{"distances_m", {0.2, 0.4}},
                      {"trials_per_condition", 3},
                      {"mt_noise_sigma_s", 0.02}};
  doc["policy"] = {{"hidden1", 16},
                   {"hidden2", 16},
                   {"batch_size", 64},
                   {"max_epochs", 25},
                   {"early_stop_patience", 25}};
  // A generous radius keeps the deliberately under-trained policy viable in
  // every condition, which the downstream fit needs.
  doc["rollout"] = {{"success_radius_m", 0.08}};
  return doc;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("fittsbench_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig tiny_config(const fs::path& out_dir) {
  nlohmann::json doc = tiny_doc();
  doc["output_dir"] = out_dir.string();
  return experiment_config_from_json(doc);
}

std::string file_bytes(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("configuration resolution") {
  SECTION("an empty document resolves to validated defaults") {
    const ExperimentConfig cfg = experiment_config_from_json(nlohmann::json::object());
    CHECK(cfg.seed == 0);
    CHECK(cfg.output_dir == "out");
    CHECK(cfg.generator.trials_per_condition == 25);
    CHECK(cfg.policy.hidden1 == 256);
    CHECK(cfg.config_hash.size() == 16);
  }

  SECTION("the global seed flows into the sub-blocks") {
    nlohmann::json doc;
    doc["seed"] = 99;
    const ExperimentConfig cfg = experiment_config_from_json(doc);
    CHECK(cfg.generator.seed == 99);
    CHECK(cfg.policy.seed != 99);  // derived, not copied
    CHECK(cfg.policy.seed == mix_seed(99, 0x70571Cull));
  }

  SECTION("explicit sub-block seeds win") {
    nlohmann::json doc;
    doc["seed"] = 99;
    doc["generator"] = {{"seed", 7}};
    doc["policy"] = {{"seed", 8}};
    const ExperimentConfig cfg = experiment_config_from_json(doc);
    CHECK(cfg.generator.seed == 7);
    CHECK(cfg.policy.seed == 8);
  }

  SECTION("the hash ignores the output directory") {
    nlohmann::json a = tiny_doc(), b = tiny_doc();
    a["output_dir"] = "/tmp/here";
    b["output_dir"] = "/tmp/elsewhere";
    CHECK(experiment_config_from_json(a).config_hash ==
          experiment_config_from_json(b).config_hash);
  }

  SECTION("the hash is sensitive to substance") {
    nlohmann::json a = tiny_doc(), b = tiny_doc();
    b["seed"] = 22;
    CHECK(experiment_config_from_json(a).config_hash !=
          experiment_config_from_json(b).config_hash);
  }

  SECTION("invalid values are rejected at resolution time") {
    nlohmann::json doc;
    doc["generator"] = {{"trials_per_condition", 1}};
    CHECK_THROWS_AS(experiment_config_from_json(doc), ValidationError);
    nlohmann::json doc2;
    doc2["analysis"] = {{"speed_norm", "manhattan"}};
    CHECK_THROWS_AS(experiment_config_from_json(doc2), ValidationError);
  }

  SECTION("a custom chain round-trips through the normalized document") {
    nlohmann::json doc;
    doc["chain"] = chain_to_json(KinematicChain::default_left_arm());
    doc["chain"]["tool_offset"] = {0.0, 0.0, -0.18};
    const ExperimentConfig cfg = experiment_config_from_json(doc);
    CHECK(cfg.chain.tool_offset.z() == -0.18);
    const ExperimentConfig again = experiment_config_from_json(cfg.normalized);
    CHECK(again.config_hash == cfg.config_hash);
  }
}

TEST_CASE("dotted-path overrides") {
  nlohmann::json doc = tiny_doc();

  SECTION("numbers, booleans and strings parse naturally") {
    apply_override(doc, "generator.width_m=0.04");
    apply_override(doc, "analysis.outlier_removal=false");
    apply_override(doc, "output_dir=elsewhere");
    CHECK(doc["generator"]["width_m"] == 0.04);
    CHECK(doc["analysis"]["outlier_removal"] == false);
    CHECK(doc["output_dir"] == "elsewhere");
  }

  SECTION("arrays work too") {
    apply_override(doc, "generator.distances_m=[0.1,0.2]");
    CHECK(doc["generator"]["distances_m"].size() == 2);
  }

  SECTION("missing intermediate objects are created") {
    apply_override(doc, "rollout.success_radius_m=0.02");
    const ExperimentConfig cfg = experiment_config_from_json(doc);
    CHECK(cfg.rollout.success_radius_m == 0.02);
  }

  SECTION("malformed assignments fail loudly") {
    CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ValidationError);
    CHECK_THROWS_AS(apply_override(doc, "generator..width_m=1"), ValidationError);
  }
}

TEST_CASE("csv round trips") {
  const ExperimentConfig cfg = experiment_config_from_json(tiny_doc());

  SECTION("trial metrics") {
    std::vector<TrialMetric> metrics;
    for (int i = 0; i < 3; ++i) {
      TrialMetric m;
      m.trial_id = "d20cm_t0" + std::to_string(i);
      m.source = i % 2 ? TrialSource::Policy : TrialSource::Human;
      m.distance_m = 0.2;
      m.width_m = 0.02;
      m.success = i != 2;
      m.movement_time_s = m.success ? 0.84 + 0.01 * i : 0.0;
      metrics.push_back(m);
    }
    const std::string csv = metrics_to_csv(metrics, cfg);
    CHECK(csv.rfind("# config=" + cfg.config_hash, 0) == 0);
    const auto back = metrics_from_csv(csv);
    REQUIRE(back.size() == 3);
    CHECK(back[1].source == TrialSource::Policy);
    CHECK(back[2].success == false);
    CHECK(back[0].movement_time_s == Catch::Approx(0.84));
    CHECK(metrics_to_csv(back, cfg) == csv);
  }

  SECTION("manifest rows") {
    ManifestRow r;
    r.file = "demo_d20cm_t00.json";
    r.trial_id = "d20cm_t00";
    r.distance_m = 0.2;
    r.width_m = 0.02;
    r.commanded_mt_s = 0.8482892;
    r.seed = 1234567890123ull;
    r.target = {0.05, -0.1, -0.5};
    const std::string csv = manifest_to_csv({r}, cfg);
    const auto back = manifest_from_csv(csv);
    REQUIRE(back.size() == 1);
    CHECK(back[0].seed == r.seed);
    CHECK((back[0].target - r.target).norm() < 1e-9);
    CHECK(manifest_to_csv(back, cfg) == csv);
  }

  SECTION("ragged rows are a parse error") {
    CHECK_THROWS_AS(parse_csv("a,b,c\n1,2\n"), ParseError);
  }

  SECTION("comments and blank lines are ignored") {
    const CsvTable t = parse_csv("# note\n\na,b\n1,2\n# trailing\n");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.column("b") == 1);
  }

  SECTION("a missing column is named in the error") {
    const CsvTable t = parse_csv("a,b\n1,2\n");
    CHECK_THROWS_AS(t.column("mt_s"), SchemaError);
  }
}

TEST_CASE("pipeline stage orchestration") {
  TempDir tmp("pipeline");
  const ExperimentConfig cfg = tiny_config(tmp.path / "run");
  const OutputPaths paths = output_paths(cfg);

  SECTION("metrics before gen is a usage error") {
    CHECK_THROWS_AS(cmd_metrics(cfg), IoError);
  }

  SECTION("rollout before train is a usage error") {
    cmd_gen(cfg);
    CHECK_THROWS_AS(cmd_rollout(cfg), IoError);
  }

  SECTION("analyze before metrics is a usage error") {
    CHECK_THROWS_AS(cmd_analyze(cfg), IoError);
  }

  SECTION("the full pipeline produces every artifact and then caches") {
    const auto reports = cmd_all(cfg);
    REQUIRE(reports.size() == 5);
    for (const auto& r : reports) CHECK_FALSE(r.skipped);

    CHECK(fs::exists(paths.manifest()));
    CHECK(fs::exists(paths.resolved_config()));
    CHECK(fs::exists(paths.human_metrics()));
    CHECK(fs::exists(paths.policy_file()));
    CHECK(fs::exists(paths.training_history()));
    CHECK(fs::exists(paths.policy_metrics()));
    CHECK(fs::exists(paths.fits()));
    CHECK(fs::exists(paths.figure(TrialSource::Human)));
    CHECK(fs::exists(paths.figure(TrialSource::Policy)));
    CHECK(fs::exists(paths.summary()));

    const auto manifest = manifest_from_csv(file_bytes(paths.manifest()));
    CHECK(manifest.size() == 6);  // 2 distances x 3 trials
    for (const auto& row : manifest)
      CHECK(fs::exists(paths.demos_dir() / row.file));

    const auto again = cmd_all(cfg);
    for (const auto& r : again) CHECK(r.skipped);

    SECTION("deleting a demo invalidates the gen cache") {
      fs::remove(paths.demos_dir() / manifest[0].file);
      const StageReport regen = cmd_gen(cfg);
      CHECK_FALSE(regen.skipped);
      CHECK(fs::exists(paths.demos_dir() / manifest[0].file));
    }

    SECTION("artifacts are byte-identical across output directories") {
      const ExperimentConfig other = tiny_config(tmp.path / "other");
      const OutputPaths other_paths = output_paths(other);
      cmd_all(other);
      CHECK(file_bytes(other_paths.manifest()) == file_bytes(paths.manifest()));
      CHECK(file_bytes(other_paths.demos_dir() / manifest[0].file) ==
            file_bytes(paths.demos_dir() / manifest[0].file));
      CHECK(file_bytes(other_paths.human_metrics()) ==
            file_bytes(paths.human_metrics()));
      CHECK(file_bytes(other_paths.policy_file()) == file_bytes(paths.policy_file()));
      CHECK(file_bytes(other_paths.policy_metrics()) ==
            file_bytes(paths.policy_metrics()));
      CHECK(file_bytes(other_paths.fits()) == file_bytes(paths.fits()));
      CHECK(file_bytes(other_paths.figure(TrialSource::Human)) ==
            file_bytes(paths.figure(TrialSource::Human)));
      CHECK(file_bytes(other_paths.summary()) == file_bytes(paths.summary()));
    }

    SECTION("a config change reruns the affected stages") {
      nlohmann::json doc = tiny_doc();
      doc["output_dir"] = (tmp.path / "run").string();
      apply_override(doc, "analysis.outlier_removal=false");
      const ExperimentConfig changed = experiment_config_from_json(doc);
      const auto rerun = cmd_all(changed);
      for (const auto& r : rerun) CHECK_FALSE(r.skipped);  // hash shift cascades
    }
  }

  SECTION("analyze on human metrics alone notes the absent comparison") {
    cmd_gen(cfg);
    cmd_metrics(cfg);
    const StageReport r = cmd_analyze(cfg);
    REQUIRE_FALSE(r.notes.empty());
    CHECK(r.notes[0] == "human only");
    const std::string summary = file_bytes(paths.summary());
    CHECK(summary.find("comparison absent") != std::string::npos);
    CHECK_FALSE(fs::exists(paths.figure(TrialSource::Policy)));
  }

  SECTION("rollout trajectory dumps are valid demo files") {
    nlohmann::json doc = tiny_doc();
    doc["output_dir"] = (tmp.path / "run").string();
    apply_override(doc, "analysis.dump_rollout_trajectories=true");
    const ExperimentConfig dumping = experiment_config_from_json(doc);
    cmd_gen(dumping);
    cmd_metrics(dumping);
    cmd_train(dumping);
    cmd_rollout(dumping);
    const auto manifest =
        manifest_from_csv(file_bytes(output_paths(dumping).manifest()));
    const fs::path dump = output_paths(dumping).rollouts_dir() /
                          (manifest[0].trial_id + "_rollout.json");
    REQUIRE(fs::exists(dump));
    const DemoRecord rec = parse_demo(file_bytes(dump));
    CHECK(rec.trial_id == manifest[0].trial_id + "_rollout");
    CHECK(rec.frames.size() >= 10);
  }
}

TEST_CASE("human metrics land on the commanded grid") {
  TempDir tmp("metrics");
  nlohmann::json doc = tiny_doc();
  doc["output_dir"] = (tmp.path / "run").string();
  apply_override(doc, "generator.mt_noise_sigma_s=0.0");
  const ExperimentConfig cfg = experiment_config_from_json(doc);
  cmd_gen(cfg);
  cmd_metrics(cfg);

  const auto metrics =
      metrics_from_csv(file_bytes(output_paths(cfg).human_metrics()));
  const auto manifest =
      manifest_from_csv(file_bytes(output_paths(cfg).manifest()));
  REQUIRE(metrics.size() == manifest.size());
  const double dt = 1.0 / cfg.generator.sample_rate_hz;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    REQUIRE(metrics[i].success);
    const double grid = std::round(manifest[i].commanded_mt_s / dt) * dt;
    REQUIRE(metrics[i].movement_time_s == Catch::Approx(grid).margin(1e-6));
  }
}
