#include <benchmark/benchmark.h>

#include <random>

#include "martrep/enlargement.hpp"
#include "martrep/representation.hpp"
#include "martrep/simulate.hpp"

using namespace martrep;

namespace {

// Two-generator model with n-point supports on the grid {0..2n}.
JointModel<double> make_model(std::size_t n) {
  std::vector<double> grid;
  for (std::size_t k = 0; k <= 2 * n; ++k) grid.push_back(static_cast<double>(k));
  std::vector<std::string> names;
  std::vector<double> weights;
  RandomTime eta, tau;
  std::mt19937_64 rng(7);
  double total = 0;
  std::vector<double> raw;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      names.push_back("s" + std::to_string(i) + "_" + std::to_string(j));
      raw.push_back(1.0 + static_cast<double>(rng() % 9));
      total += raw.back();
      eta.at.push_back(static_cast<std::int32_t>(2 * i + 1));
      tau.at.push_back(static_cast<std::int32_t>(2 * j + 2));
    }
  for (double w : raw) weights.push_back(w / total);
  FiniteSpace<double> space(std::move(names), std::move(grid));
  space.add_measure("P", Measure<double>(std::move(weights)));
  space.add_random_time("eta", std::move(eta));
  space.add_random_time("tau", std::move(tau));
  return make_joint_model(std::move(space), "eta", "tau", "P");
}

void bm_cond_exp(benchmark::State& state) {
  auto jm = make_model(static_cast<std::size_t>(state.range(0)));
  std::vector<double> rv(jm.space.n_atoms());
  for (std::size_t i = 0; i < rv.size(); ++i) rv[i] = static_cast<double>(i % 13) - 6.0;
  const Partition& part = jm.g().at(jm.space.n_times() / 2);
  for (auto _ : state) {
    auto out = cond_exp(rv, part, jm.p());
    benchmark::DoNotOptimize(out);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_cond_exp)->RangeMultiplier(2)->Range(4, 32)->Complexity();

void bm_doob_decomposition(benchmark::State& state) {
  auto jm = make_model(static_cast<std::size_t>(state.range(0)));
  ProcessTable<double> occ = occurrence_process<double>(jm.space.n_times(), jm.tau());
  for (auto _ : state) {
    auto d = doob_decomposition(occ, jm.g(), jm.p());
    benchmark::DoNotOptimize(d);
  }
}
BENCHMARK(bm_doob_decomposition)->RangeMultiplier(2)->Range(4, 32);

void bm_multiplicity(benchmark::State& state) {
  auto jm = make_model(static_cast<std::size_t>(state.range(0)));
  auto dec = decoupling_exists(jm);
  Measure<double> p_star = martingale_preserving_measure(jm, *dec.q).p_star;
  for (auto _ : state) {
    auto r = multiplicity(jm.g(), p_star);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bm_multiplicity)->RangeMultiplier(2)->Range(4, 16);

void bm_hedge_exact(benchmark::State& state) {
  auto jm = make_model(static_cast<std::size_t>(state.range(0)));
  auto dec = decoupling_exists(jm);
  Measure<double> p_star = martingale_preserving_measure(jm, *dec.q).p_star;
  auto mult = multiplicity(jm.g(), p_star);
  std::vector<double> payoff(jm.space.n_atoms(), 0.0);
  payoff[0] = 1.0;
  for (auto _ : state) {
    auto h = hedge_payoff(payoff, mult.basis, jm.g(), p_star);
    benchmark::DoNotOptimize(h);
  }
}
BENCHMARK(bm_hedge_exact)->RangeMultiplier(2)->Range(4, 16);

void bm_simulate(benchmark::State& state) {
  MixedModel model = make_preset("kusuoka-mmm");
  SimulationConfig cfg;
  cfg.n_paths = static_cast<std::size_t>(state.range(0));
  cfg.dt = 0.01;
  cfg.seed = 1;
  for (auto _ : state) {
    auto batch = simulate(model, cfg);
    benchmark::DoNotOptimize(batch);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_simulate)->RangeMultiplier(4)->Range(1024, 16384);

}  // namespace

BENCHMARK_MAIN();
