#pragma once

// Brute-force enumeration oracle, independent of the engine: works on a flat
// scenario list with direct hazard/indicator formulas and explicit sums.
// Exact rationals only, so the expected values it produces carry no float
// noise.

#include <cstdint>
#include <vector>

#include "martrep/scalar.hpp"

namespace martrep::testing {

using martrep::Rational;

constexpr std::int32_t kOracleNever = -1;

struct Scenario {
  Rational weight;
  std::int32_t eta;  // grid index of the occurrence, kOracleNever if none
  std::int32_t tau;
};

struct EnumModel {
  std::vector<Scenario> scenarios;
  std::size_t n_times = 0;  // grid indices 0 .. n_times-1
};

inline bool occurred_by(std::int32_t value, std::size_t k) {
  return value != kOracleNever && static_cast<std::size_t>(value) <= k;
}

inline Rational oracle_mass(const EnumModel& m, bool use_eta, std::int32_t value) {
  Rational acc(0);
  for (const Scenario& s : m.scenarios)
    if ((use_eta ? s.eta : s.tau) == value) acc += s.weight;
  return acc;
}

// Marginal hazard at grid index k: P(time = k) / P(time >= k).
inline Rational oracle_hazard(const EnumModel& m, bool use_eta, std::size_t k) {
  Rational num(0), den(0);
  for (const Scenario& s : m.scenarios) {
    std::int32_t v = use_eta ? s.eta : s.tau;
    bool alive = v == kOracleNever || static_cast<std::size_t>(v) >= k;
    if (alive) den += s.weight;
    if (v == static_cast<std::int32_t>(k)) num += s.weight;
  }
  return den == Rational(0) ? Rational(0) : Rational(num / den);
}

// Increment of the compensated occurrence martingale of a generator in its
// own filtration at grid index k: 1{time = k} - 1{time >= k} * hazard(k).
inline Rational oracle_martingale_increment(const EnumModel& m, bool use_eta,
                                            const Scenario& s, std::size_t k) {
  std::int32_t v = use_eta ? s.eta : s.tau;
  Rational h = oracle_hazard(m, use_eta, k);
  Rational ind(v == static_cast<std::int32_t>(k) ? 1 : 0);
  bool alive = v == kOracleNever || static_cast<std::size_t>(v) >= k;
  return ind - (alive ? h : Rational(0));
}

// Pathwise covariation of the two compensated occurrence martingales at time
// index k (cumulative).
inline Rational oracle_covariation(const EnumModel& m, const Scenario& s, std::size_t upto) {
  Rational acc(0);
  for (std::size_t k = 1; k <= upto; ++k)
    acc += oracle_martingale_increment(m, true, s, k) *
           oracle_martingale_increment(m, false, s, k);
  return acc;
}

template <class F>
Rational oracle_expectation(const EnumModel& m, F&& f) {
  Rational acc(0);
  for (const Scenario& s : m.scenarios) acc += s.weight * f(s);
  return acc;
}

// E[(dM_k)^2] over the whole space; with a trivial conditioning partition this
// is the sharp-bracket mass at k.
inline Rational oracle_bracket_mass_root(const EnumModel& m, bool use_eta, std::size_t k) {
  return oracle_expectation(m, [&](const Scenario& s) {
    Rational d = oracle_martingale_increment(m, use_eta, s, k);
    return d * d;
  });
}

// H-compensator of the tau occurrence along a scenario: sum of hazards over
// atoms reached while alive.
inline Rational oracle_occurrence_compensator(const EnumModel& m, bool use_eta,
                                              const Scenario& s, std::size_t upto) {
  Rational acc(0);
  std::int32_t v = use_eta ? s.eta : s.tau;
  for (std::size_t k = 1; k <= upto; ++k) {
    bool alive = v == kOracleNever || static_cast<std::size_t>(v) >= k;
    if (alive) acc += oracle_hazard(m, use_eta, k);
  }
  return acc;
}

// Product-of-marginals weight of the scenario's (eta, tau) class, split over
// the class proportionally to the reference weights.
inline Rational oracle_pstar_weight(const EnumModel& m, const Scenario& s) {
  Rational joint(0);
  for (const Scenario& o : m.scenarios)
    if (o.eta == s.eta && o.tau == s.tau) joint += o.weight;
  if (joint == Rational(0)) return Rational(0);
  return oracle_mass(m, true, s.eta) * oracle_mass(m, false, s.tau) * s.weight / joint;
}

inline EnumModel m2_enum() {
  EnumModel m;
  m.n_times = 3;
  m.scenarios = {
      {Rational(1, 10), 1, 1},
      {Rational(1, 5), 1, 2},
      {Rational(3, 10), 2, 1},
      {Rational(2, 5), 2, 2},
  };
  return m;
}

}  // namespace martrep::testing
