#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "martrep/enlargement.hpp"
#include "martrep/scalar.hpp"
#include "martrep/space.hpp"

namespace martrep::testing {

// The canonical 2x2 test model: eta and tau in {1, 2}, joint weights
// 0.1 / 0.2 / 0.3 / 0.4 on the grid {0, 1, 2}.
template <class S>
JointModel<S> m2_model() {
  FiniteSpace<S> space({"e1t1", "e1t2", "e2t1", "e2t2"}, {0, 1, 2});
  Measure<S> p;
  p.w = {fraction<S>(1, 10), fraction<S>(1, 5), fraction<S>(3, 10), fraction<S>(2, 5)};
  space.add_measure("P", std::move(p));
  RandomTime eta{{1, 1, 2, 2}};
  RandomTime tau{{1, 2, 1, 2}};
  space.add_random_time("eta", std::move(eta));
  space.add_random_time("tau", std::move(tau));
  return make_joint_model(std::move(space), "eta", "tau", "P");
}

// Fuzzed two-generator occurrence models with exact rational weights.
struct FuzzOptions {
  std::size_t max_grid = 4;        // grid {0, 1, ..., K}, K in [2, max_grid]
  std::size_t max_support = 3;     // values per generator
  bool allow_never = true;         // generators may take the +inf sentinel
  bool product_support = true;     // strictly positive joint law (condition D)
  bool force_independent = false;  // joint law = product of marginals
};

struct FuzzModel {
  JointModel<Rational> jm;
  std::vector<std::int32_t> eta_support;  // grid indices, kNever last if present
  std::vector<std::int32_t> tau_support;
};

inline FuzzModel fuzz_joint_model(std::mt19937_64& rng, const FuzzOptions& opt = {}) {
  auto rand_int = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  };
  std::size_t grid_max = rand_int(2, opt.max_grid);
  std::vector<double> grid;
  for (std::size_t k = 0; k <= grid_max; ++k) grid.push_back(static_cast<double>(k));

  auto pick_support = [&]() {
    std::vector<std::int32_t> support;
    std::vector<std::int32_t> pool;
    for (std::size_t k = 1; k <= grid_max; ++k) pool.push_back(static_cast<std::int32_t>(k));
    std::size_t count = rand_int(2, std::min(opt.max_support, pool.size()));
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t ix = rand_int(0, pool.size() - 1);
      support.push_back(pool[ix]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(ix));
    }
    std::sort(support.begin(), support.end());
    if (opt.allow_never && rng() % 4 == 0) support.push_back(RandomTime::kNever);
    return support;
  };
  std::vector<std::int32_t> eta_support = pick_support();
  std::vector<std::int32_t> tau_support = pick_support();

  std::size_t ne = eta_support.size(), ntv = tau_support.size();
  std::vector<std::vector<long long>> numer(ne, std::vector<long long>(ntv, 0));
  long long total = 0;
  if (opt.force_independent) {
    std::vector<long long> re(ne), rt(ntv);
    for (auto& x : re) x = 1 + static_cast<long long>(rng() % 9);
    for (auto& x : rt) x = 1 + static_cast<long long>(rng() % 9);
    for (std::size_t i = 0; i < ne; ++i)
      for (std::size_t j = 0; j < ntv; ++j) {
        numer[i][j] = re[i] * rt[j];
        total += numer[i][j];
      }
  } else {
    for (std::size_t i = 0; i < ne; ++i)
      for (std::size_t j = 0; j < ntv; ++j) {
        long long lo = opt.product_support ? 1 : 0;
        numer[i][j] = lo + static_cast<long long>(rng() % 9);
        total += numer[i][j];
      }
    if (total == 0) {
      numer[0][0] = 1;
      total = 1;
    }
  }

  std::vector<std::string> names;
  std::vector<Rational> weights;
  RandomTime eta, tau;
  for (std::size_t i = 0; i < ne; ++i)
    for (std::size_t j = 0; j < ntv; ++j) {
      names.push_back("s" + std::to_string(i) + "_" + std::to_string(j));
      weights.push_back(Rational(numer[i][j], total));
      eta.at.push_back(eta_support[i]);
      tau.at.push_back(tau_support[j]);
    }

  FiniteSpace<Rational> space(std::move(names), std::move(grid));
  space.add_measure("P", Measure<Rational>(std::move(weights)));
  space.add_random_time("eta", std::move(eta));
  space.add_random_time("tau", std::move(tau));
  FuzzModel out{make_joint_model(std::move(space), "eta", "tau", "P"), eta_support, tau_support};
  return out;
}

}  // namespace martrep::testing
