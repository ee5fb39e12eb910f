#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "martrep/errors.hpp"
#include "martrep/mixed.hpp"
#include "martrep/model_io.hpp"
#include "martrep/simulate.hpp"
#include "report.hpp"

namespace {

using namespace martrep;
using martrep::cli::ordered_json;

// Exit-code contract: 0 success, 1 validation failure, 2 assumption refusal,
// 3 internal-consistency error.
constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRefusal = 2;
constexpr int kInternal = 3;

void emit(const ordered_json& report, const std::string& format, const std::string& out_path) {
  std::string payload;
  if (format == "text")
    payload = report["rendered"].get<std::string>();
  else
    payload = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << payload;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ValidationError(out_path, "cannot open output file");
    out << payload;
  }
}

int cmd_validate(const std::string& model_path) {
  DocumentKind kind = sniff_document_file(model_path);
  if (kind == DocumentKind::kMixedModel) {
    load_mixed_file(model_path);
  } else {
    SpaceDocument doc = load_model_file(model_path);
    if (doc.has_roles()) doc.joint_model();  // the declared roles must cohere
  }
  std::cerr << model_path << ": valid\n";
  return kOk;
}

int cmd_analyze(const std::optional<std::string>& model_path,
                const std::optional<std::string>& preset_name,
                const martrep::cli::AnalyzeOptions& opt, const std::string& format,
                const std::string& out_path) {
  JointModel<double> jm;
  std::string origin;
  if (preset_name) {
    jm = induce_finite_model(make_preset(*preset_name));
    origin = "preset:" + *preset_name;
  } else {
    SpaceDocument doc = load_model_file(*model_path);
    jm = doc.joint_model();
    origin = *model_path;
  }
  for (const std::string& name : opt.extra_measures) jm.space.measure(name);  // must exist
  martrep::cli::AnalysisOutcome outcome = martrep::cli::run_analysis(jm, origin, opt);
  emit(outcome.report, format, out_path);
  return outcome.refused ? kRefusal : kOk;
}

int cmd_simulate(const std::optional<std::string>& model_path,
                 const std::optional<std::string>& preset_name, const SimulationConfig& cfg,
                 const martrep::cli::SimulateOptions& opt, const std::string& format,
                 const std::string& out_path) {
  MixedModel model;
  std::string origin;
  if (preset_name) {
    model = make_preset(*preset_name);
    origin = "preset:" + *preset_name;
  } else {
    model = load_mixed_file(*model_path);
    origin = *model_path;
  }
  if (format == "csv") {
    PathBatch batch = simulate(model, cfg);
    if (out_path.empty()) {
      export_csv(batch, std::cout);
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw ValidationError(out_path, "cannot open output file");
      export_csv(batch, out);
    }
    return kOk;
  }
  ordered_json report = martrep::cli::run_simulation(model, cfg, origin, opt);
  emit(report, format, out_path);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"martrep: exact martingale-representation engine and default-time simulator"};
  app.require_subcommand(1);

  std::string model_path, out_path, format = "json", preset_name, payoff;
  std::vector<std::string> measures;
  SimulationConfig cfg;
  cfg.n_paths = 10000;
  cfg.dt = 1e-3;
  cfg.seed = 1;
  bool with_timing = false;

  CLI::App* validate = app.add_subcommand("validate", "validate a model file");
  validate->add_option("--model", model_path, "model JSON document")->required();

  CLI::App* analyze =
      app.add_subcommand("analyze", "run the full analysis pipeline on a finite model");
  analyze->add_option("--model", model_path, "finite-model JSON document with roles");
  analyze->add_option("--preset", preset_name, "built-in mixed preset, analyzed on its induced grid model");
  analyze->add_option("--measure", measures, "extra declared measures for invariance checks")
      ->take_all();
  analyze->add_option("--out", out_path, "write the artifact here instead of stdout");
  analyze->add_option("--format", format, "json | text")->check(CLI::IsMember({"json", "text"}));
  analyze->add_flag("--timing", with_timing, "include wall-clock timing (breaks byte determinism)");

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo pipeline on a mixed model");
  simulate_cmd->add_option("--model", model_path, "mixed-model JSON document");
  simulate_cmd->add_option("--preset", preset_name, "built-in preset name");
  simulate_cmd->add_option("--paths", cfg.n_paths, "number of Monte Carlo paths");
  simulate_cmd->add_option("--dt", cfg.dt, "Euler step");
  simulate_cmd->add_option("--seed", cfg.seed, "RNG seed");
  simulate_cmd->add_option("--payoff", payoff,
                           "payoff expression over terminal channels, e.g. I(tau==2)*I(eta==2)");
  simulate_cmd->add_option("--out", out_path, "write the artifact here instead of stdout");
  simulate_cmd->add_option("--format", format, "json | text | csv")
      ->check(CLI::IsMember({"json", "text", "csv"}));
  simulate_cmd->add_flag("--timing", with_timing,
                         "include wall-clock timing (breaks byte determinism)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (validate->parsed()) return cmd_validate(model_path);

    auto opt_path = model_path.empty() ? std::nullopt : std::optional<std::string>(model_path);
    auto opt_preset = preset_name.empty() ? std::nullopt : std::optional<std::string>(preset_name);
    if (!opt_path.has_value() && !opt_preset.has_value())
      throw ValidationError("cli", "one of --model or --preset is required");
    if (opt_path && opt_preset)
      throw ValidationError("cli", "--model and --preset are mutually exclusive");

    if (analyze->parsed()) {
      martrep::cli::AnalyzeOptions opt;
      opt.extra_measures = measures;
      opt.with_timing = with_timing;
      return cmd_analyze(opt_path, opt_preset, opt, format, out_path);
    }
    if (simulate_cmd->parsed()) {
      martrep::cli::SimulateOptions opt;
      if (!payoff.empty()) opt.payoff = payoff;
      opt.with_timing = with_timing;
      return cmd_simulate(opt_path, opt_preset, cfg, opt, format, out_path);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const RefusalError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kRefusal;
  } catch (const InternalConsistencyError& e) {
    std::cerr << "internal consistency error: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
