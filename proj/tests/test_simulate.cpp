#include <doctest.h>

#include <cmath>
#include <sstream>

#include "martrep/simulate.hpp"

using namespace martrep;
using doctest::Approx;

namespace {

SimulationConfig quick_cfg(std::size_t n, double dt = 0.01, std::uint64_t seed = 20240811) {
  SimulationConfig cfg;
  cfg.n_paths = n;
  cfg.dt = dt;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("simulation is deterministic given the seed") {
  MixedModel m = make_preset("kusuoka-mmm");
  auto b1 = simulate(m, quick_cfg(512));
  auto b2 = simulate(m, quick_cfg(512));
  CHECK(b1.eta == b2.eta);
  CHECK(b1.tau == b2.tau);
  for (std::size_t c = 0; c < kChannelCount; ++c) CHECK(b1.channels[c] == b2.channels[c]);

  auto b3 = simulate(m, quick_cfg(512, 0.01, 999));
  CHECK(b1.channels[0] != b3.channels[0]);
}

TEST_CASE("indicator channels are monotone 0/1 and consistent with the draws") {
  MixedModel m = make_preset("atoms-plus-density");
  auto b = simulate(m, quick_cfg(2000));
  std::size_t nr = b.n_report();
  for (std::size_t p = 0; p < 2000; ++p) {
    double prev_e = 0, prev_t = 0;
    for (std::size_t j = 0; j < nr; ++j) {
      double ie = b.at(Channel::kIndEta, p, j);
      double it = b.at(Channel::kIndTau, p, j);
      CHECK((ie == 0.0 || ie == 1.0));
      CHECK((it == 0.0 || it == 1.0));
      CHECK(ie >= prev_e);
      CHECK(it >= prev_t);
      CHECK(ie == (b.eta[p] <= b.report_times[j] ? 1.0 : 0.0));
      CHECK(it == (b.tau[p] <= b.report_times[j] ? 1.0 : 0.0));
      prev_e = ie;
      prev_t = it;
    }
  }
}

TEST_CASE("channels equal the closed-form evaluators pathwise") {
  MixedModel m = make_preset("kusuoka-mmm");
  auto b = simulate(m, quick_cfg(500));
  TripletEvaluator eval(b.model);
  for (std::size_t p = 0; p < 500; ++p) {
    for (std::size_t j = 0; j < b.n_report(); ++j) {
      double t = b.report_times[j];
      double w = b.at(Channel::kW, p, j);
      CHECK(b.at(Channel::kM, p, j) == eval.m(t, w, b.eta[p]));
      CHECK(b.at(Channel::kH, p, j) == eval.h(t, b.tau[p]));
      CHECK(b.at(Channel::kHPrime, p, j) == eval.h_prime(t, b.eta[p], b.tau[p]));
      CHECK(b.at(Channel::kMH, p, j) == eval.mh(t, b.eta[p], b.tau[p]));
    }
  }
}

TEST_CASE("terminal Brownian mean and joint law within Monte Carlo bands") {
  MixedModel m = make_preset("kusuoka-mmm");
  const std::size_t n = 20000;
  auto b = simulate(m, quick_cfg(n));
  double wsum = 0;
  for (std::size_t p = 0; p < n; ++p) wsum += b.terminal(Channel::kW, p);
  double mean_w = wsum / static_cast<double>(n);
  CHECK(std::abs(mean_w) < 4.0 * std::sqrt(m.horizon / static_cast<double>(n)));

  for (std::size_t i = 0; i < m.eta_values.size(); ++i) {
    for (std::size_t j = 0; j < m.tau_values.size(); ++j) {
      double expected = m.joint(i, j);
      std::size_t count = 0;
      for (std::size_t p = 0; p < n; ++p)
        if (b.eta[p] == m.eta_values[i] && b.tau[p] == m.tau_values[j]) ++count;
      double freq = static_cast<double>(count) / static_cast<double>(n);
      double se = std::sqrt(expected * (1 - expected) / static_cast<double>(n));
      CHECK(std::abs(freq - expected) < 4.0 * se);
    }
  }
}

TEST_CASE("martingale z-tests") {
  const std::size_t n = 20000;

  SUBCASE("triplet channels pass under the measure-condition preset") {
    auto b = simulate(make_preset("kusuoka-mmm"), quick_cfg(n));
    for (Channel c : {Channel::kM, Channel::kHPrime, Channel::kMH}) {
      auto r = martingale_ztest(b, c);
      CHECK(r.all_pass);
    }
  }

  SUBCASE("H' passes under any preset: the compensator is exact by construction") {
    for (const char* name : {"kusuoka-violating", "density", "atoms-plus-density", "m2"}) {
      auto b = simulate(make_preset(name), quick_cfg(8000));
      CHECK(martingale_ztest(b, Channel::kHPrime).all_pass);
    }
  }

  SUBCASE("the violating preset fails exactly on [M,H] across t=2") {
    auto b = simulate(make_preset("kusuoka-violating"), quick_cfg(n));
    auto r = martingale_ztest(b, Channel::kMH);
    CHECK(!r.all_pass);
    bool failure_at_t2 = false;
    for (const auto& row : r.rows) {
      if (row.violation) {
        CHECK(b.report_times[row.interval + 1] == 2.0);
        failure_at_t2 = true;
      }
    }
    CHECK(failure_at_t2);
    CHECK(martingale_ztest(b, Channel::kM).all_pass);
  }
}

TEST_CASE("least-squares Monte Carlo hedging") {
  const std::size_t n = 20000;
  MixedModel m = make_preset("kusuoka-mmm");
  auto b = simulate(m, quick_cfg(n));
  std::vector<Channel> triplet{Channel::kM, Channel::kHPrime, Channel::kMH};

  SUBCASE("a constant payoff needs no hedge") {
    auto r = hedge_mc(b, PayoffExpr::parse("3.5"), triplet);
    CHECK(r.v0 == Approx(3.5));
    CHECK(r.rmse == Approx(0.0).epsilon(1e-9));
    CHECK(r.r_squared == 1.0);
  }

  SUBCASE("H'_T is hedged by holding one unit of H'") {
    auto r = hedge_mc(b, PayoffExpr::parse("Hprime"), {Channel::kHPrime});
    CHECK(r.r_squared > 0.999);
    for (const auto& cell : r.coefficients) {
      // only cells where the regressor actually moves identify the position
      if (cell.count < 100 || cell.gram_diag[0] < 1e-4) continue;
      CHECK(cell.beta[0] == Approx(1.0).epsilon(0.05));
    }
    auto full = hedge_mc(b, PayoffExpr::parse("Hprime"), triplet);
    CHECK(full.r_squared > 0.999);
  }

  SUBCASE("the jump payoff needs the covariation channel") {
    auto fine = simulate(m, quick_cfg(n, 0.002));
    PayoffExpr payoff = PayoffExpr::parse("I(tau==2)*I(eta==2)");
    auto full = hedge_mc(fine, payoff, triplet);
    auto restricted = hedge_mc(fine, payoff, {Channel::kM, Channel::kHPrime});
    CHECK(full.r_squared >= 0.99);
    CHECK(restricted.r_squared < full.r_squared);
  }

  SUBCASE("replication error decreases as dt shrinks and paths grow") {
    PayoffExpr payoff = PayoffExpr::parse("I(tau==2)");
    double prev_rmse = 1e9;
    const std::pair<std::size_t, double> ladder[] = {{500, 0.05}, {5000, 0.01}, {20000, 0.002}};
    for (auto [paths, dt] : ladder) {
      auto batch = simulate(m, quick_cfg(paths, dt));
      auto r = hedge_mc(batch, payoff, triplet);
      CHECK(r.rmse < prev_rmse);
      prev_rmse = r.rmse;
    }
  }

  SUBCASE("with a density-law default the pair does as well as the triplet") {
    auto bd = simulate(make_preset("density"), quick_cfg(n));
    for (std::size_t p = 0; p < n; ++p) CHECK(bd.terminal(Channel::kMH, p) == 0.0);
    PayoffExpr payoff = PayoffExpr::parse("I(tau<=2)");
    auto pair = hedge_mc(bd, payoff, {Channel::kM, Channel::kHPrime});
    auto trip = hedge_mc(bd, payoff, triplet);
    CHECK(std::abs(pair.r_squared - trip.r_squared) < 1e-6);
  }
}

TEST_CASE("payoff grammar") {
  PayoffExpr e = PayoffExpr::parse("2*I(eta>=2) + (W - 1)*0.5");
  TerminalView v;
  v.eta = 3;
  v.w = 2;
  CHECK(e.eval(v) == Approx(2.5));
  CHECK_THROWS_AS(PayoffExpr::parse("I(sigma==2)"), ValidationError);
  CHECK_THROWS_AS(PayoffExpr::parse("2 +"), ValidationError);
  CHECK_THROWS_AS(PayoffExpr::parse("unknown"), ValidationError);
  CHECK_THROWS_AS(PayoffExpr::parse("I(tau=2)"), ValidationError);
}

TEST_CASE("csv export shape") {
  MixedModel m = make_preset("m2");
  auto b = simulate(m, quick_cfg(10));
  std::ostringstream out;
  export_csv(b, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "time,path,eta,tau,W,ind_eta,ind_tau,M,H,Hprime,MH");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == b.n_report() * 10);
}
