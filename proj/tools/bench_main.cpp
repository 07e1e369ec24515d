// bench: drive the Fitts reaching benchmark pipeline from one config file.
//
//   bench gen|metrics|train|rollout|analyze|all --config <file> [--set k=v]...
//
// Every artifact embeds the resolved-config hash and seed, and stages are
// content-addressed: rerunning with identical inputs is a no-op.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fittsbench/config.hpp"
#include "fittsbench/pipeline.hpp"

namespace {

// Stable exit codes so callers can branch on the failure class.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kParseError = 3,
  kIoError = 4,
  kDataError = 5,
  kInternalError = 6,
};

fitts::ExperimentConfig load_config(const std::string& config_path,
                                    const std::vector<std::string>& overrides) {
  nlohmann::json doc;
  if (!config_path.empty()) {
    try {
      doc = nlohmann::json::parse(fitts::read_file(config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw fitts::ParseError(std::string("config: malformed JSON: ") + e.what());
    }
  } else {
    doc = nlohmann::json::object();
  }
  for (const auto& assignment : overrides) fitts::apply_override(doc, assignment);
  if (const char* root = std::getenv("BENCH_OUTPUT_ROOT"); root && *root)
    doc["output_dir"] = std::string(root);
  return fitts::experiment_config_from_json(doc);
}

void print_reports(const std::vector<fitts::StageReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.stage << ": " << (r.skipped ? "up to date" : "done");
    for (const auto& note : r.notes) std::cout << "; " << note;
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fitts' Law reaching benchmark pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // let `bench all --set k=v` reach the top-level options

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Experiment config JSON file");
  app.add_option("--set", overrides, "Override a config key (dotted.path=value)");

  const std::vector<std::string> stages = {"gen",     "metrics", "train",
                                           "rollout", "analyze", "all"};
  for (const auto& name : stages) app.add_subcommand(name);

  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    const fitts::ExperimentConfig cfg = load_config(config_path, overrides);
    std::vector<fitts::StageReport> reports;
    if (stage == "gen") reports.push_back(fitts::cmd_gen(cfg));
    else if (stage == "metrics") reports.push_back(fitts::cmd_metrics(cfg));
    else if (stage == "train") reports.push_back(fitts::cmd_train(cfg));
    else if (stage == "rollout") reports.push_back(fitts::cmd_rollout(cfg));
    else if (stage == "analyze") reports.push_back(fitts::cmd_analyze(cfg));
    else reports = fitts::cmd_all(cfg);
    print_reports(reports);
    std::cout << "config " << cfg.config_hash << " seed " << cfg.seed << "\n";
    return kOk;
  } catch (const fitts::ValidationError& e) {
    std::cerr << "error[config]: " << e.what() << "\n";
    return kConfigError;
  } catch (const fitts::SchemaError& e) {
    std::cerr << "error[schema]: " << e.what() << "\n";
    return kParseError;
  } catch (const fitts::ParseError& e) {
    std::cerr << "error[parse]: " << e.what() << "\n";
    return kParseError;
  } catch (const fitts::IoError& e) {
    std::cerr << "error[io]: " << e.what() << "\n";
    return kIoError;
  } catch (const fitts::InsufficientDataError& e) {
    std::cerr << "error[data]: " << e.what() << "\n";
    return kDataError;
  } catch (const fitts::UnreachableDistanceError& e) {
    std::cerr << "error[data]: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return kInternalError;
  }
}
