#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fittsbench/config.hpp"
#include "fittsbench/demo_gen.hpp"
#include "fittsbench/policy.hpp"
#include "fittsbench/rollout.hpp"
#include "fittsbench/stats.hpp"
#include "fittsbench/svg.hpp"
#include "fittsbench/trajectory.hpp"

namespace fitts {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  if (!in.good() && !in.eof())
    throw IoError("read failed: " + path.string());
  return out.str();
}

/// Write-to-temp then rename, so readers never observe a half-written file
/// and an interrupted run never leaves a plausible-looking artifact behind.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Minimal CSV (no quoting: none of our fields contain commas)
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("csv: missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Parses CSV text, skipping '#' provenance lines and blank lines. The first
/// remaining line is the header.
inline CsvTable parse_csv(const std::string& bytes) {
  CsvTable table;
  std::istringstream in(bytes);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size())
        throw ParseError("csv: row with " + std::to_string(fields.size()) +
                         " fields, expected " + std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (table.header.empty()) throw ParseError("csv: no header found");
  return table;
}

inline std::string provenance_line(const ExperimentConfig& cfg) {
  return "# config=" + cfg.config_hash + " seed=" + std::to_string(cfg.seed) + "\n";
}

// ---------------------------------------------------------------------------
// Metric table serialization
// ---------------------------------------------------------------------------

inline std::string metrics_to_csv(const std::vector<TrialMetric>& metrics,
                                  const ExperimentConfig& cfg) {
  std::string s = provenance_line(cfg);
  s += "trial_id,source,distance_m,width_m,id_bits,mt_s,success\n";
  for (const auto& m : metrics) {
    s += m.trial_id;
    s += ',';
    s += to_string(m.source);
    s += ',';
    s += fmt_g(m.distance_m);
    s += ',';
    s += fmt_g(m.width_m);
    s += ',';
    s += fmt_g(index_of_difficulty(m.distance_m, m.width_m));
    s += ',';
    s += fmt_g(m.movement_time_s);
    s += ',';
    s += m.success ? '1' : '0';
    s += '\n';
  }
  return s;
}

inline std::vector<TrialMetric> metrics_from_csv(const std::string& bytes) {
  const CsvTable table = parse_csv(bytes);
  const auto c_id = table.column("trial_id");
  const auto c_src = table.column("source");
  const auto c_d = table.column("distance_m");
  const auto c_w = table.column("width_m");
  const auto c_mt = table.column("mt_s");
  const auto c_ok = table.column("success");
  std::vector<TrialMetric> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    TrialMetric m;
    m.trial_id = row[c_id];
    m.source = trial_source_from_string(row[c_src]);
    try {
      m.distance_m = std::stod(row[c_d]);
      m.width_m = std::stod(row[c_w]);
      m.movement_time_s = std::stod(row[c_mt]);
    } catch (const std::exception&) {
      throw ParseError("metric csv: non-numeric field in trial '" + m.trial_id + "'");
    }
    m.success = row[c_ok] == "1" || row[c_ok] == "true";
    m.validate();
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output layout and content-addressed stage stamps
// ---------------------------------------------------------------------------

struct OutputPaths {
  fs::path root;

  fs::path demos_dir() const { return root / "demos"; }
  fs::path manifest() const { return root / "manifest.csv"; }
  fs::path resolved_config() const { return root / "config.resolved.json"; }
  fs::path human_metrics() const { return root / "human_metrics.csv"; }
  fs::path policy_file() const { return root / "policy.json"; }
  fs::path training_history() const { return root / "training_history.csv"; }
  fs::path policy_metrics() const { return root / "policy_metrics.csv"; }
  fs::path rollouts_dir() const { return root / "rollouts"; }
  fs::path fits() const { return root / "fits.csv"; }
  fs::path figure(TrialSource src) const {
    return root / (std::string("fitts_") + to_string(src) + ".svg");
  }
  fs::path summary() const { return root / "summary.md"; }
  fs::path stamp(const std::string& stage) const {
    return root / ("." + stage + ".stamp");
  }
};

inline OutputPaths output_paths(const ExperimentConfig& cfg) {
  return OutputPaths{fs::path(cfg.output_dir)};
}

/// Hash of everything a stage consumes: the resolved config plus the bytes of
/// each input artifact. Identical hash + existing outputs -> the stage skips.
inline std::string stage_input_hash(const ExperimentConfig& cfg,
                                    const std::string& stage,
                                    const std::vector<fs::path>& inputs) {
  std::uint64_t h = fnv1a64(cfg.normalized.dump());
  h = fnv1a64(stage, h);
  for (const auto& p : inputs) {
    h = fnv1a64(p.filename().string(), h);
    h = fnv1a64(read_file(p), h);
  }
  return hex64(h);
}

inline bool stage_up_to_date(const OutputPaths& paths, const std::string& stage,
                             const std::string& input_hash,
                             const std::vector<fs::path>& outputs) {
  std::error_code ec;
  if (!fs::exists(paths.stamp(stage), ec)) return false;
  if (read_file(paths.stamp(stage)) != input_hash + "\n") return false;
  for (const auto& out : outputs)
    if (!fs::exists(out, ec)) return false;
  return true;
}

inline void write_stamp(const OutputPaths& paths, const std::string& stage,
                        const std::string& input_hash) {
  write_file_atomic(paths.stamp(stage), input_hash + "\n");
}

struct StageReport {
  std::string stage;
  bool skipped = false;
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestRow {
  std::string file;
  std::string trial_id;
  double distance_m = 0.0;
  double width_m = 0.0;
  double commanded_mt_s = 0.0;
  std::uint64_t seed = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
};

inline std::string manifest_to_csv(const std::vector<ManifestRow>& rows,
                                   const ExperimentConfig& cfg) {
  std::string s = provenance_line(cfg);
  s += "file,trial_id,distance_m,width_m,commanded_mt_s,seed,target_x,target_y,target_z\n";
  for (const auto& r : rows) {
    s += r.file + ',' + r.trial_id + ',' + fmt_g(r.distance_m) + ',' +
         fmt_g(r.width_m) + ',' + fmt_g(r.commanded_mt_s) + ',' +
         std::to_string(r.seed) + ',' + fmt_g(r.target.x()) + ',' +
         fmt_g(r.target.y()) + ',' + fmt_g(r.target.z()) + '\n';
  }
  return s;
}

inline std::vector<ManifestRow> manifest_from_csv(const std::string& bytes) {
  const CsvTable table = parse_csv(bytes);
  const auto c_file = table.column("file");
  const auto c_id = table.column("trial_id");
  const auto c_d = table.column("distance_m");
  const auto c_w = table.column("width_m");
  const auto c_mt = table.column("commanded_mt_s");
  const auto c_seed = table.column("seed");
  const auto c_tx = table.column("target_x");
  const auto c_ty = table.column("target_y");
  const auto c_tz = table.column("target_z");
  std::vector<ManifestRow> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    ManifestRow r;
    r.file = row[c_file];
    r.trial_id = row[c_id];
    try {
      r.distance_m = std::stod(row[c_d]);
      r.width_m = std::stod(row[c_w]);
      r.commanded_mt_s = std::stod(row[c_mt]);
      r.seed = std::stoull(row[c_seed]);
      r.target = {std::stod(row[c_tx]), std::stod(row[c_ty]), std::stod(row[c_tz])};
    } catch (const std::exception&) {
      throw ParseError("manifest: non-numeric field in row '" + r.file + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline StageReport cmd_gen(const ExperimentConfig& cfg) {
  const OutputPaths paths = output_paths(cfg);
  StageReport report{"gen"};

  std::error_code ec;
  fs::create_directories(paths.demos_dir(), ec);
  if (ec) throw IoError("cannot create output dir: " + paths.demos_dir().string());

  const std::string hash = stage_input_hash(cfg, "gen", {});
  if (fs::exists(paths.manifest())) {
    // Skip only if the stamp matches and every listed demo is still present.
    std::vector<fs::path> outputs{paths.manifest(), paths.resolved_config()};
    bool listed_ok = true;
    try {
      for (const auto& row : manifest_from_csv(read_file(paths.manifest())))
        outputs.push_back(paths.demos_dir() / row.file);
    } catch (const ParseError&) {
      listed_ok = false;
    }
    if (listed_ok && stage_up_to_date(paths, "gen", hash, outputs)) {
      report.skipped = true;
      return report;
    }
  }

  const auto trials = generate_records(cfg.chain, cfg.generator);
  std::vector<ManifestRow> manifest;
  manifest.reserve(trials.size());
  for (const auto& trial : trials) {
    DemoRecord rec = trial.record;
    rec.config_hash = cfg.config_hash;
    write_file_atomic(paths.demos_dir() / trial.file_name, serialize_demo(rec));
    ManifestRow row;
    row.file = trial.file_name;
    row.trial_id = rec.trial_id;
    row.distance_m = rec.distance_m;
    row.width_m = rec.width_m;
    row.commanded_mt_s = trial.commanded_mt_s;
    row.seed = trial.trial_seed;
    row.target = trial.target;
    manifest.push_back(std::move(row));
  }
  write_file_atomic(paths.manifest(), manifest_to_csv(manifest, cfg));
  write_file_atomic(paths.resolved_config(), cfg.normalized.dump(2) + "\n");
  write_stamp(paths, "gen", hash);
  report.notes.push_back(std::to_string(trials.size()) + " demos");
  return report;
}

inline std::vector<fs::path> demo_input_files(const OutputPaths& paths) {
  if (!fs::exists(paths.manifest()))
    throw IoError("missing manifest: " + paths.manifest().string() +
                  " (run the gen stage first)");
  std::vector<fs::path> files{paths.manifest()};
  for (const auto& row : manifest_from_csv(read_file(paths.manifest())))
    files.push_back(paths.demos_dir() / row.file);
  return files;
}

inline ExtractionOptions extraction_options(const ExperimentConfig& cfg) {
  ExtractionOptions opt;
  opt.threshold_rad_s = cfg.analysis.threshold_rad_s;
  opt.norm = cfg.analysis.speed_norm;
  opt.smooth = cfg.analysis.smooth_speed;
  return opt;
}

inline StageReport cmd_metrics(const ExperimentConfig& cfg) {
  const OutputPaths paths = output_paths(cfg);
  StageReport report{"metrics"};

  const auto inputs = demo_input_files(paths);
  const std::string hash = stage_input_hash(cfg, "metrics", inputs);
  if (stage_up_to_date(paths, "metrics", hash, {paths.human_metrics()})) {
    report.skipped = true;
    return report;
  }

  const ExtractionOptions opt = extraction_options(cfg);
  std::vector<TrialMetric> metrics;
  for (std::size_t i = 1; i < inputs.size(); ++i) {  // inputs[0] is the manifest
    const DemoRecord rec = parse_demo(read_file(inputs[i]));
    const JointTrajectory traj = select_joints(rec);
    const MovementWindow window = extract_movement_time(traj, opt);
    TrialMetric m;
    m.trial_id = rec.trial_id;
    m.source = TrialSource::Human;
    m.distance_m = rec.distance_m;
    m.width_m = rec.width_m;
    m.success = window.detected;
    m.movement_time_s = window.detected ? window.mt() : 0.0;
    if (!window.detected)
      report.notes.push_back(rec.trial_id + ": no movement detected");
    metrics.push_back(std::move(m));
  }
  write_file_atomic(paths.human_metrics(), metrics_to_csv(metrics, cfg));
  write_stamp(paths, "metrics", hash);
  report.notes.push_back(std::to_string(metrics.size()) + " trials");
  return report;
}

inline std::string history_to_csv(const TrainingHistory& history,
                                  const ExperimentConfig& cfg) {
  std::string s = provenance_line(cfg);
  s += "# stopped_epoch=" + std::to_string(history.stopped_epoch) +
       " best_epoch=" + std::to_string(history.best_epoch) +
       " best_val_loss=" + fmt_g(history.best_val_loss) + "\n";
  for (const auto& skipped : history.skipped_demos) s += "# skipped " + skipped + "\n";
  s += "epoch,train_loss,val_loss,lr\n";
  for (const auto& row : history.epochs) {
    s += std::to_string(row.epoch) + ',' + fmt_g(row.train_loss) + ',' +
         fmt_g(row.val_loss) + ',' + fmt_g(row.lr) + '\n';
  }
  return s;
}

inline std::vector<JointTrajectory> load_demo_trajectories(
    const std::vector<fs::path>& inputs) {
  std::vector<JointTrajectory> demos;
  demos.reserve(inputs.size() - 1);
  for (std::size_t i = 1; i < inputs.size(); ++i)
    demos.push_back(select_joints(parse_demo(read_file(inputs[i]))));
  return demos;
}

inline StageReport cmd_train(const ExperimentConfig& cfg) {
  const OutputPaths paths = output_paths(cfg);
  StageReport report{"train"};

  const auto inputs = demo_input_files(paths);
  const std::string hash = stage_input_hash(cfg, "train", inputs);
  if (stage_up_to_date(paths, "train", hash,
                       {paths.policy_file(), paths.training_history()})) {
    report.skipped = true;
    return report;
  }

  const auto demos = load_demo_trajectories(inputs);
  const TrainResult trained = train(demos, cfg.policy);
  write_file_atomic(paths.policy_file(),
                    serialize_policy(trained.bundle, cfg.config_hash, cfg.seed));
  write_file_atomic(paths.training_history(), history_to_csv(trained.history, cfg));
  write_stamp(paths, "train", hash);
  report.notes.push_back("best val loss " + fmt_g(trained.history.best_val_loss) +
                         " at epoch " + std::to_string(trained.history.best_epoch));
  return report;
}

inline StageReport cmd_rollout(const ExperimentConfig& cfg) {
  const OutputPaths paths = output_paths(cfg);
  StageReport report{"rollout"};

  if (!fs::exists(paths.policy_file()))
    throw IoError("missing policy file: " + paths.policy_file().string() +
                  " (run the train stage first)");
  auto inputs = demo_input_files(paths);
  inputs.push_back(paths.policy_file());
  const std::string hash = stage_input_hash(cfg, "rollout", inputs);
  if (stage_up_to_date(paths, "rollout", hash, {paths.policy_metrics()})) {
    report.skipped = true;
    return report;
  }

  const PolicyBundle bundle = parse_policy(read_file(paths.policy_file()));
  const auto manifest = manifest_from_csv(read_file(paths.manifest()));
  if (cfg.analysis.dump_rollout_trajectories) {
    std::error_code ec;
    fs::create_directories(paths.rollouts_dir(), ec);
    if (ec) throw IoError("cannot create dir: " + paths.rollouts_dir().string());
  }

  std::vector<TrialMetric> metrics;
  long timeouts = 0, diverged = 0;
  for (const auto& row : manifest) {
    const DemoRecord rec = parse_demo(read_file(paths.demos_dir() / row.file));
    const JointTrajectory demo = select_joints(rec);
    const RolloutResult result = rollout(bundle, cfg.chain, demo, row.target,
                                         cfg.rollout);
    if (result.termination == Termination::Timeout) ++timeouts;
    if (result.termination == Termination::Diverged) ++diverged;

    TrialMetric m;
    m.trial_id = rec.trial_id;
    m.source = TrialSource::Policy;
    m.distance_m = rec.distance_m;
    m.width_m = rec.width_m;
    m.success = result.success;
    m.movement_time_s = result.movement_time_s;
    metrics.push_back(std::move(m));

    if (cfg.analysis.dump_rollout_trajectories) {
      DemoRecord dump;
      dump.joint_names = rec.joint_names;
      dump.distance_m = rec.distance_m;
      dump.width_m = rec.width_m;
      dump.sample_rate_hz = cfg.rollout.sample_rate_hz;
      dump.trial_id = rec.trial_id + "_rollout";
      dump.config_hash = cfg.config_hash;
      const double dt = 1.0 / cfg.rollout.sample_rate_hz;
      for (Eigen::Index k = 0; k < result.trajectory.rows(); ++k) {
        DemoFrame f;
        f.t = static_cast<double>(k) * dt;
        for (int j = 0; j < kNumJoints; ++j)
          f.positions[dump.joint_names[static_cast<std::size_t>(j)]] =
              result.trajectory(k, j);
        dump.frames.push_back(std::move(f));
      }
      write_file_atomic(paths.rollouts_dir() / (rec.trial_id + "_rollout.json"),
                        serialize_demo(dump));
    }
  }
  write_file_atomic(paths.policy_metrics(), metrics_to_csv(metrics, cfg));
  write_stamp(paths, "rollout", hash);
  report.notes.push_back(std::to_string(metrics.size()) + " rollouts, " +
                         std::to_string(timeouts) + " timeouts, " +
                         std::to_string(diverged) + " diverged");
  return report;
}

// ---------------------------------------------------------------------------
// Analysis stage
// ---------------------------------------------------------------------------

struct SourceAnalysis {
  TrialSource source = TrialSource::Human;
  FittsFit fitts;
  FittsFit ballistic;
  std::size_t n_kept = 0;
  std::size_t n_removed = 0;
};

inline SourceAnalysis analyze_source(const std::vector<TrialMetric>& metrics,
                                     TrialSource source, bool outlier_removal) {
  SourceAnalysis a;
  a.source = source;
  std::vector<TrialMetric> pool = metrics;
  if (outlier_removal) {
    OutlierSplit split = remove_outliers(pool);
    a.n_removed = split.removed.size();
    pool = std::move(split.kept);
  }
  a.n_kept = pool.size();
  a.fitts = fitts_fit(pool);
  a.ballistic = ballistic_fit(pool);
  return a;
}

inline std::string fits_to_csv(const std::vector<SourceAnalysis>& analyses,
                               const ExperimentConfig& cfg) {
  std::string s = provenance_line(cfg);
  s += "source,model,a,b,se_a,se_b,r2,F,p,lof_F,lof_p,n_kept,n_removed\n";
  for (const auto& a : analyses) {
    for (const FittsFit* fit : {&a.fitts, &a.ballistic}) {
      s += to_string(a.source);
      s += ',';
      s += to_string(fit->model);
      s += ',' + fmt_g(fit->a) + ',' + fmt_g(fit->b) + ',' + fmt_g(fit->se_a) +
           ',' + fmt_g(fit->se_b) + ',' + fmt_g(fit->r_squared) + ',' +
           fmt_g(fit->anova.f) + ',' + fmt_g(fit->anova.p) + ',';
      s += fit->lof.applicable ? fmt_g(fit->lof.f) : "";
      s += ',';
      s += fit->lof.applicable ? fmt_g(fit->lof.p) : "";
      s += ',' + std::to_string(a.n_kept) + ',' + std::to_string(a.n_removed) + '\n';
    }
  }
  return s;
}

inline std::string figure_svg(const SourceAnalysis& a, const ExperimentConfig& cfg) {
  ScatterPlotSpec spec;
  spec.title = std::string("Movement time vs index of difficulty (") +
               to_string(a.source) + ")";
  spec.x_label = "ID (bits)";
  spec.y_label = "MT (s)";
  spec.xs = a.fitts.xs;
  spec.ys = a.fitts.ys;
  spec.draw_line = a.fitts.n >= 3;
  spec.intercept = a.fitts.a;
  spec.slope = a.fitts.b;
  spec.r_squared = a.fitts.r_squared;
  spec.comment = "config=" + cfg.config_hash + " seed=" + std::to_string(cfg.seed);
  return render_scatter_svg(spec);
}

inline std::string summary_markdown(const std::vector<SourceAnalysis>& analyses,
                                    const ExperimentConfig& cfg) {
  std::string s = "# Fitts benchmark summary\n\n";
  s += "- config hash: `" + cfg.config_hash + "`\n";
  s += "- seed: " + std::to_string(cfg.seed) + "\n\n";
  for (const auto& a : analyses) {
    s += std::string("## ") + to_string(a.source) + "\n\n";
    s += "- trials kept: " + std::to_string(a.n_kept) + " (removed " +
         std::to_string(a.n_removed) + " outliers)\n";
    for (const FittsFit* fit : {&a.fitts, &a.ballistic}) {
      s += std::string("- ") + to_string(fit->model) + ": MT = " + fmt_g(fit->a, 4) +
           " + " + fmt_g(fit->b, 4) + "*x, R2 = " + fmt_g(fit->r_squared, 4) +
           ", F = " + fmt_g(fit->anova.f, 4) + " (p = " + fmt_g(fit->anova.p, 4) +
           ")";
      if (fit->lof.applicable)
        s += ", lack-of-fit F = " + fmt_g(fit->lof.f, 4) + " (p = " +
             fmt_g(fit->lof.p, 4) + ")";
      s += "\n";
    }
    s += "\n";
  }
  if (analyses.size() == 2) {
    const FitComparison cmp = compare_fits(analyses[0].fitts, analyses[1].fitts);
    s += "## Human vs policy\n\n";
    s += "- slope difference (human - policy): " + fmt_g(cmp.slope_difference, 4) +
         " s/bit (pooled SE " + fmt_g(cmp.pooled_se, 4) + ", p = " +
         fmt_g(cmp.p_equal_slopes, 4) + ")\n";
    s += "- R2 difference (human - policy): " + fmt_g(cmp.delta_r_squared, 4) + "\n";
  } else {
    s += "## Human vs policy\n\ncomparison absent: policy metrics not available\n";
  }
  return s;
}

inline StageReport cmd_analyze(const ExperimentConfig& cfg) {
  const OutputPaths paths = output_paths(cfg);
  StageReport report{"analyze"};

  if (!fs::exists(paths.human_metrics()))
    throw IoError("missing metrics: " + paths.human_metrics().string() +
                  " (run the metrics stage first)");
  std::vector<fs::path> inputs{paths.human_metrics()};
  const bool have_policy = fs::exists(paths.policy_metrics());
  if (have_policy) inputs.push_back(paths.policy_metrics());

  const std::string hash = stage_input_hash(cfg, "analyze", inputs);
  std::vector<fs::path> outputs{paths.fits(), paths.summary(),
                                paths.figure(TrialSource::Human)};
  if (have_policy) outputs.push_back(paths.figure(TrialSource::Policy));
  if (stage_up_to_date(paths, "analyze", hash, outputs)) {
    report.skipped = true;
    return report;
  }

  std::vector<SourceAnalysis> analyses;
  analyses.push_back(analyze_source(metrics_from_csv(read_file(paths.human_metrics())),
                                    TrialSource::Human, cfg.analysis.outlier_removal));
  if (have_policy)
    analyses.push_back(
        analyze_source(metrics_from_csv(read_file(paths.policy_metrics())),
                       TrialSource::Policy, cfg.analysis.outlier_removal));

  write_file_atomic(paths.fits(), fits_to_csv(analyses, cfg));
  for (const auto& a : analyses)
    write_file_atomic(paths.figure(a.source), figure_svg(a, cfg));
  write_file_atomic(paths.summary(), summary_markdown(analyses, cfg));
  write_stamp(paths, "analyze", hash);
  report.notes.push_back(have_policy ? "human + policy" : "human only");
  return report;
}

inline std::vector<StageReport> cmd_all(const ExperimentConfig& cfg) {
  std::vector<StageReport> reports;
  reports.push_back(cmd_gen(cfg));
  reports.push_back(cmd_metrics(cfg));
  reports.push_back(cmd_train(cfg));
  reports.push_back(cmd_rollout(cfg));
  reports.push_back(cmd_analyze(cfg));
  return reports;
}

}  // namespace fitts
