#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "martrep/mixed.hpp"
#include "martrep/payoff.hpp"

namespace martrep {

enum class Channel : std::uint8_t {
  kW = 0,
  kIndEta,
  kIndTau,
  kM,
  kH,
  kHPrime,
  kMH,
};
constexpr std::size_t kChannelCount = 7;
const char* channel_name(Channel c);
std::optional<Channel> channel_from_name(const std::string& name);

struct SimulationConfig {
  std::size_t n_paths = 0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
};

// Simulated batch. The Brownian path is generated with Euler steps of size dt
// but only the report times (0, every jump time, T) are retained: all seven
// channels are deterministic closed-form functions of (W at report times,
// eta, tau), so nothing of substance is lost. Per-path generators are seeded
// from (seed, path index), which makes the batch independent of scheduling.
struct PathBatch {
  MixedModel model;
  SimulationConfig cfg;
  std::vector<double> report_times;
  std::vector<double> eta;  // per path; +infinity when it never occurs
  std::vector<double> tau;
  std::vector<std::vector<double>> channels;  // [channel][path * n_report + j]

  std::size_t n_report() const { return report_times.size(); }
  double at(Channel c, std::size_t path, std::size_t j) const {
    return channels[static_cast<std::size_t>(c)][path * n_report() + j];
  }
  double terminal(Channel c, std::size_t path) const { return at(c, path, n_report() - 1); }
};

PathBatch simulate(const MixedModel& model, const SimulationConfig& cfg);

// Conditioning cell at a report time: eta status (occurred value or alive)
// crossed with tau status. Paths in the same cell share the coarse history
// that generates the enlarged filtration at that time.
struct ConditioningSpec {
  bool by_eta_status = true;
  bool by_tau_status = true;
};

struct ZTestRow {
  std::size_t interval = 0;  // increment over (report_times[i], report_times[i+1]]
  std::string cell;
  std::size_t count = 0;
  double mean = 0;
  double se = 0;
  double z = 0;
  bool violation = false;   // |z| > threshold
  bool skipped = false;     // empty or singleton cell
};

struct ZTestResult {
  Channel channel;
  double threshold = 4.0;
  std::vector<ZTestRow> rows;
  bool all_pass = true;
};

ZTestResult martingale_ztest(const PathBatch& batch, Channel channel,
                             const ConditioningSpec& spec = {}, double threshold = 4.0);

// Least-squares Monte Carlo replication: per report interval and conditioning
// cell, regress the increment of the estimated conditional payoff value on
// the basis-channel increments. Integrands are piecewise constant in
// (interval, cell), which generates the true integrands for jump payoffs.
struct HedgeCellCoefficients {
  std::size_t interval = 0;
  std::string cell;
  std::size_t count = 0;
  std::vector<double> beta;       // one per basis channel
  std::vector<double> gram_diag;  // in-cell second moment of each regressor
  double condition = 0;           // condition estimate of the normal equations
  bool ridge = false;             // fallback applied on a singular design
};

struct HedgeMcResult {
  double v0 = 0;  // mean payoff
  std::vector<Channel> basis;
  std::vector<HedgeCellCoefficients> coefficients;
  double rmse = 0;
  double r_squared = 0;
};

HedgeMcResult hedge_mc(const PathBatch& batch, const PayoffExpr& payoff,
                       const std::vector<Channel>& basis, const ConditioningSpec& spec = {});

double eval_payoff(const PayoffExpr& payoff, const PathBatch& batch, std::size_t path);

// Time-major CSV export with a channel header row.
void export_csv(const PathBatch& batch, std::ostream& out);

}  // namespace martrep
