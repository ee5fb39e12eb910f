#include "martrep/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include "martrep/errors.hpp"
#include "martrep/linalg.hpp"

namespace martrep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
  std::uint64_t s = seed ^ (path * 0xD1B54A32D192ED03ULL + 0x2545F4914F6CDD1DULL);
  std::uint64_t out = splitmix64(s);
  out ^= splitmix64(s);
  return out;
}

// Conditioning cell of a path at time t: eta status x tau status.
std::string cell_label(const MixedModel& model, double t, double eta, double tau,
                       const ConditioningSpec& spec) {
  std::string label;
  if (spec.by_eta_status) {
    if (eta <= t) {
      label += "eta=";
      label += std::to_string(static_cast<long long>(std::llround(eta * 1e6)));
    } else {
      label += "eta=alive";
    }
  }
  if (spec.by_tau_status) {
    if (!label.empty()) label += ",";
    if (tau <= t) {
      bool atomic = false;
      for (double a : model.tau_values) atomic = atomic || a == tau;
      label += atomic ? ("tau=" + std::to_string(static_cast<long long>(std::llround(tau * 1e6))))
                      : "tau=density";
    } else {
      label += "tau=alive";
    }
  }
  if (label.empty()) label = "all";
  return label;
}

}  // namespace

const char* channel_name(Channel c) {
  switch (c) {
    case Channel::kW: return "W";
    case Channel::kIndEta: return "ind_eta";
    case Channel::kIndTau: return "ind_tau";
    case Channel::kM: return "M";
    case Channel::kH: return "H";
    case Channel::kHPrime: return "Hprime";
    case Channel::kMH: return "MH";
  }
  return "?";
}

std::optional<Channel> channel_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    Channel c = static_cast<Channel>(i);
    if (name == channel_name(c)) return c;
  }
  return std::nullopt;
}

PathBatch simulate(const MixedModel& model, const SimulationConfig& cfg) {
  model.validate();
  if (cfg.n_paths < 1) throw ContractError("simulate: need at least one path");
  MixedModel m = model;
  m.dt = cfg.dt;
  m.validate();
  TripletEvaluator eval(m);

  PathBatch batch;
  batch.model = m;
  batch.cfg = cfg;

  // Report checkpoints: every jump time together with the step just before
  // it. Integrands and tests can then isolate the predictable jump step,
  // which carries all the jump structure, from the diffusive stretch in
  // between.
  const long long steps = std::llround(m.horizon / cfg.dt);
  // (step, time label); jump steps keep the exact jump time so indicator
  // comparisons in the evaluators stay exact.
  std::map<long long, double> report_map{{0, 0.0}, {steps, m.horizon}};
  auto add_jump_steps = [&](double t) {
    long long s = std::llround(t / cfg.dt);
    if (s > 0) report_map.emplace(s - 1, static_cast<double>(s - 1) * cfg.dt);
    report_map[s] = t;
  };
  for (double t : m.eta_values) add_jump_steps(t);
  for (double t : m.tau_values) add_jump_steps(t);
  std::vector<long long> report_step;
  for (const auto& [s, t] : report_map) {
    report_step.push_back(s);
    batch.report_times.push_back(t);
  }

  const std::size_t n = cfg.n_paths;
  const std::size_t nr = batch.report_times.size();
  batch.eta.assign(n, kInf);
  batch.tau.assign(n, kInf);
  batch.channels.assign(kChannelCount, std::vector<double>(n * nr, 0.0));

  // Cumulative joint sampler: atomic cells first, then one density branch per
  // eta value (the density weight is shared equally across eta by model
  // construction, i.e. independent of eta).
  struct DrawCell {
    double cum;
    std::size_t eta_ix;
    std::int64_t tau_ix;  // -1 = density branch
  };
  std::vector<DrawCell> cells;
  {
    double cum = 0;
    for (std::size_t i = 0; i < m.eta_values.size(); ++i) {
      for (std::size_t j = 0; j < m.tau_values.size(); ++j) {
        cum += m.joint(i, j);
        cells.push_back({cum, i, static_cast<std::int64_t>(j)});
      }
      cum += m.eta_probs[i] * m.tau_density_weight;
      cells.push_back({cum, i, -1});
    }
    cells.back().cum = 1.0;
  }

  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      std::mt19937_64 rng(path_seed(cfg.seed, p));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);

      double u = unif(rng);
      std::size_t ci = 0;
      while (ci + 1 < cells.size() && u >= cells[ci].cum) ++ci;
      double eta = m.eta_values[cells[ci].eta_ix];
      double tau;
      if (cells[ci].tau_ix >= 0) {
        tau = m.tau_values[static_cast<std::size_t>(cells[ci].tau_ix)];
      } else {
        tau = m.horizon * (1.0 - unif(rng));  // uniform on (0, T]
      }
      batch.eta[p] = eta;
      batch.tau[p] = tau;

      const double sqrt_dt = std::sqrt(cfg.dt);
      double w = 0;
      std::size_t next_report = 0;
      std::vector<double> w_at(nr, 0.0);
      if (report_step[0] == 0) {
        w_at[0] = 0.0;
        next_report = 1;
      }
      for (long long k = 1; k <= steps; ++k) {
        w += sqrt_dt * normal(rng);
        while (next_report < nr && report_step[next_report] == k) {
          w_at[next_report] = w;
          ++next_report;
        }
      }

      for (std::size_t j = 0; j < nr; ++j) {
        double t = batch.report_times[j];
        double wj = w_at[j];
        std::size_t ix = p * nr + j;
        batch.channels[static_cast<std::size_t>(Channel::kW)][ix] = wj;
        batch.channels[static_cast<std::size_t>(Channel::kIndEta)][ix] = eta <= t ? 1.0 : 0.0;
        batch.channels[static_cast<std::size_t>(Channel::kIndTau)][ix] = tau <= t ? 1.0 : 0.0;
        batch.channels[static_cast<std::size_t>(Channel::kM)][ix] = eval.m(t, wj, eta);
        batch.channels[static_cast<std::size_t>(Channel::kH)][ix] = eval.h(t, tau);
        batch.channels[static_cast<std::size_t>(Channel::kHPrime)][ix] = eval.h_prime(t, eta, tau);
        batch.channels[static_cast<std::size_t>(Channel::kMH)][ix] = eval.mh(t, eta, tau);
      }
    }
  };

  std::size_t hw = std::thread::hardware_concurrency();
  std::size_t n_threads = std::min<std::size_t>(hw ? hw : 1, 8);
  if (n < 1024 || n_threads <= 1) {
    run_range(0, n);
  } else {
    // Per-path seeding makes the result independent of the split.
    std::vector<std::thread> workers;
    std::size_t chunk = (n + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      std::size_t begin = t * chunk, end = std::min(n, begin + chunk);
      if (begin >= end) break;
      workers.emplace_back(run_range, begin, end);
    }
    for (auto& w : workers) w.join();
  }
  return batch;
}

ZTestResult martingale_ztest(const PathBatch& batch, Channel channel, const ConditioningSpec& spec,
                             double threshold) {
  ZTestResult result;
  result.channel = channel;
  result.threshold = threshold;
  const std::size_t n = batch.cfg.n_paths;
  const std::size_t nr = batch.n_report();
  const std::vector<double>& ch = batch.channels[static_cast<std::size_t>(channel)];

  for (std::size_t j = 0; j + 1 < nr; ++j) {
    struct Acc {
      std::size_t count = 0;
      double sum = 0, sum_sq = 0;
    };
    std::map<std::string, Acc> accs;
    double t = batch.report_times[j];
    for (std::size_t p = 0; p < n; ++p) {
      double d = ch[p * nr + j + 1] - ch[p * nr + j];
      Acc& acc = accs[cell_label(batch.model, t, batch.eta[p], batch.tau[p], spec)];
      ++acc.count;
      acc.sum += d;
      acc.sum_sq += d * d;
    }
    for (const auto& [label, acc] : accs) {
      ZTestRow row;
      row.interval = j;
      row.cell = label;
      row.count = acc.count;
      if (acc.count < 2) {
        row.skipped = true;
        result.rows.push_back(row);
        continue;
      }
      row.mean = acc.sum / static_cast<double>(acc.count);
      double var =
          (acc.sum_sq - acc.sum * row.mean) / static_cast<double>(acc.count - 1);
      var = std::max(var, 0.0);
      row.se = std::sqrt(var / static_cast<double>(acc.count));
      if (row.se > 0) {
        row.z = row.mean / row.se;
      } else {
        row.z = row.mean == 0 ? 0.0 : std::copysign(kInf, row.mean);
      }
      // A mean below numerical dust is not evidence of drift, whatever the
      // z-score says (exactly compensated increments leave ~1e-17 residue).
      row.violation = std::abs(row.z) > threshold && std::abs(row.mean) > 1e-9;
      if (row.violation) result.all_pass = false;
      result.rows.push_back(row);
    }
  }
  return result;
}

double eval_payoff(const PayoffExpr& payoff, const PathBatch& batch, std::size_t path) {
  TerminalView v;
  v.w = batch.terminal(Channel::kW, path);
  v.m = batch.terminal(Channel::kM, path);
  v.h = batch.terminal(Channel::kH, path);
  v.h_prime = batch.terminal(Channel::kHPrime, path);
  v.mh = batch.terminal(Channel::kMH, path);
  v.eta = batch.eta[path];
  v.tau = batch.tau[path];
  return payoff.eval(v);
}

HedgeMcResult hedge_mc(const PathBatch& batch, const PayoffExpr& payoff,
                       const std::vector<Channel>& basis, const ConditioningSpec& spec) {
  if (basis.empty()) throw ContractError("hedge_mc: empty basis");
  const std::size_t n = batch.cfg.n_paths;
  const std::size_t nr = batch.n_report();
  const std::size_t nb = basis.size();

  HedgeMcResult result;
  result.basis = basis;

  std::vector<double> v(n);
  double v_sum = 0;
  for (std::size_t p = 0; p < n; ++p) {
    v[p] = eval_payoff(payoff, batch, p);
    v_sum += v[p];
  }
  result.v0 = v_sum / static_cast<double>(n);

  // Estimated conditional value per (report time, cell): the cell mean of the
  // terminal payoff; at the terminal time the payoff itself.
  std::vector<std::vector<std::string>> labels(nr, std::vector<std::string>(n));
  std::vector<std::map<std::string, std::pair<std::size_t, double>>> cell_stats(nr);
  for (std::size_t j = 0; j < nr; ++j) {
    double t = batch.report_times[j];
    for (std::size_t p = 0; p < n; ++p) {
      labels[j][p] = cell_label(batch.model, t, batch.eta[p], batch.tau[p], spec);
      auto& s = cell_stats[j][labels[j][p]];
      ++s.first;
      s.second += v[p];
    }
  }
  auto value_at = [&](std::size_t j, std::size_t p) {
    if (j + 1 == nr) return v[p];
    const auto& s = cell_stats[j].at(labels[j][p]);
    return s.second / static_cast<double>(s.first);
  };

  // Per (interval, cell) normal equations.
  struct CellSystem {
    std::size_t count = 0;
    Mat<double> gram;
    std::vector<double> rhs;
  };
  std::vector<std::map<std::string, CellSystem>> systems(nr - 1);
  std::vector<double> x(nb);
  for (std::size_t j = 0; j + 1 < nr; ++j) {
    for (std::size_t p = 0; p < n; ++p) {
      CellSystem& sys = systems[j][labels[j][p]];
      if (sys.count == 0) {
        sys.gram = Mat<double>(nb, nb);
        sys.rhs.assign(nb, 0.0);
      }
      ++sys.count;
      double dy = value_at(j + 1, p) - value_at(j, p);
      for (std::size_t i = 0; i < nb; ++i)
        x[i] = batch.at(basis[i], p, j + 1) - batch.at(basis[i], p, j);
      for (std::size_t i = 0; i < nb; ++i) {
        sys.rhs[i] += x[i] * dy;
        for (std::size_t l = 0; l < nb; ++l) sys.gram(i, l) += x[i] * x[l];
      }
    }
  }

  // Solve each cell; ridge fallback on singular designs.
  std::vector<std::map<std::string, std::vector<double>>> betas(nr - 1);
  for (std::size_t j = 0; j + 1 < nr; ++j) {
    for (auto& [label, sys] : systems[j]) {
      HedgeCellCoefficients coef;
      coef.interval = j;
      coef.cell = label;
      coef.count = sys.count;
      double max_diag = 0, min_diag = kInf;
      for (std::size_t i = 0; i < nb; ++i) {
        coef.gram_diag.push_back(sys.gram(i, i) / static_cast<double>(sys.count));
        max_diag = std::max(max_diag, sys.gram(i, i));
        min_diag = std::min(min_diag, sys.gram(i, i));
      }
      coef.condition = min_diag > 0 ? max_diag / min_diag : kInf;
      try {
        coef.beta = solve(sys.gram, sys.rhs);
      } catch (const ContractError&) {
        coef.ridge = true;
        double lambda = std::max(max_diag, 1.0) * 1e-10;
        Mat<double> g = sys.gram;
        for (std::size_t i = 0; i < nb; ++i) g(i, i) += lambda;
        coef.beta = solve(g, sys.rhs);
      }
      betas[j][label] = coef.beta;
      result.coefficients.push_back(std::move(coef));
    }
  }

  // Residuals and fit quality.
  double ss_res = 0, ss_tot = 0;
  for (std::size_t p = 0; p < n; ++p) {
    double gains = 0;
    for (std::size_t j = 0; j + 1 < nr; ++j) {
      const std::vector<double>& beta = betas[j].at(labels[j][p]);
      for (std::size_t i = 0; i < nb; ++i)
        gains += beta[i] * (batch.at(basis[i], p, j + 1) - batch.at(basis[i], p, j));
    }
    double resid = v[p] - result.v0 - gains;
    ss_res += resid * resid;
    double centered = v[p] - result.v0;
    ss_tot += centered * centered;
  }
  result.rmse = std::sqrt(ss_res / static_cast<double>(n));
  result.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return result;
}

void export_csv(const PathBatch& batch, std::ostream& out) {
  out << "time,path,eta,tau";
  for (std::size_t c = 0; c < kChannelCount; ++c)
    out << ',' << channel_name(static_cast<Channel>(c));
  out << '\n';
  char buf[64];
  const std::size_t nr = batch.n_report();
  for (std::size_t j = 0; j < nr; ++j) {
    for (std::size_t p = 0; p < batch.cfg.n_paths; ++p) {
      out << batch.report_times[j] << ',' << p << ',' << batch.eta[p] << ',' << batch.tau[p];
      for (std::size_t c = 0; c < kChannelCount; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", batch.at(static_cast<Channel>(c), p, j));
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace martrep
