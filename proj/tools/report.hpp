#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "martrep/enlargement.hpp"
#include "martrep/mixed.hpp"
#include "martrep/model_io.hpp"
#include "martrep/representation.hpp"
#include "martrep/simulate.hpp"

namespace martrep::cli {

using ordered_json = nlohmann::ordered_json;

struct AnalyzeOptions {
  std::vector<std::string> extra_measures;  // covariation invariance checks
  bool with_timing = false;                 // opt-in: breaks byte determinism
};

struct SimulateOptions {
  std::optional<std::string> payoff;
  bool with_timing = false;
};

// Full analysis pipeline on a finite two-generator model: decoupling, P*,
// compensators, brackets and singularity, classifier, multiplicity, and the
// Kusuoka pipeline with immersion/m.m.m. evidence. Assumption failures are
// recorded in the report; `refused` marks the ones that block the core
// verdicts (exit code 2).
struct AnalysisOutcome {
  ordered_json report;
  bool refused = false;
};

AnalysisOutcome run_analysis(const JointModel<double>& jm, const std::string& origin,
                             const AnalyzeOptions& opt);

ordered_json run_simulation(const MixedModel& model, const SimulationConfig& cfg,
                            const std::string& origin, const SimulateOptions& opt);

// Renders the human-readable half and embeds it into the artifact under
// "rendered".
void attach_rendering(ordered_json& report);

}  // namespace martrep::cli
