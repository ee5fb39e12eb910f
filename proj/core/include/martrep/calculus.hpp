#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "martrep/errors.hpp"
#include "martrep/scalar.hpp"
#include "martrep/space.hpp"

namespace martrep {

template <class S>
std::vector<S> slice_increment(const ProcessTable<S>& x, std::size_t k) {
  std::vector<S> d(x.n_atoms);
  for (AtomIx a = 0; a < x.n_atoms; ++a) d[a] = x.increment(a, k);
  return d;
}

// Martingale property: adapted and E[dX_k | F_{k-1}] = 0 on every atom of
// positive measure.
template <class S>
bool is_martingale(const ProcessTable<S>& x, const Filtration& f, const Measure<S>& m) {
  if (!is_adapted(x, f)) return false;
  for (std::size_t k = 1; k < x.n_times; ++k) {
    std::vector<S> e = cond_exp(slice_increment(x, k), f.at(k - 1), m, ZeroCellPolicy::kZeroFill);
    for (AtomIx a = 0; a < x.n_atoms; ++a)
      if (m.positive(a) && !nearly_zero<S>(e[a])) return false;
  }
  return true;
}

template <class S>
struct DoobDecomposition {
  ProcessTable<S> martingale;   // M with M_0 = 0
  ProcessTable<S> predictable;  // A with A_0 = 0, dA_k measurable at t_{k-1}
};

// X = X_0 + M + A, unique. Null cells get dA = 0, which is irrelevant a.s.
template <class S>
DoobDecomposition<S> doob_decomposition(const ProcessTable<S>& x, const Filtration& f,
                                        const Measure<S>& m) {
  if (!is_adapted(x, f)) throw ContractError("doob_decomposition: process is not adapted");
  DoobDecomposition<S> out{
      ProcessTable<S>(x.n_atoms, x.n_times, S(0), Kind::kAdapted),
      ProcessTable<S>(x.n_atoms, x.n_times, S(0), Kind::kPredictable),
  };
  for (std::size_t k = 1; k < x.n_times; ++k) {
    std::vector<S> da = cond_exp(slice_increment(x, k), f.at(k - 1), m, ZeroCellPolicy::kZeroFill);
    for (AtomIx a = 0; a < x.n_atoms; ++a) {
      out.predictable.at(a, k) = out.predictable.at(a, k - 1) + da[a];
      out.martingale.at(a, k) = x.at(a, k) - x.at(a, 0) - out.predictable.at(a, k);
    }
  }
  return out;
}

// Predictable compensator A of the occurrence process of tau, so that
// 1_{tau<=t} - A is a martingale.
template <class S>
ProcessTable<S> compensator_of_occurrence(const RandomTime& tau, const Filtration& f,
                                          const Measure<S>& m) {
  if (!is_stopping_time(tau, f))
    throw ContractError("compensator_of_occurrence: not a stopping time of the filtration");
  ProcessTable<S> occ = occurrence_process<S>(f.n_times(), tau);
  return doob_decomposition(occ, f, m).predictable;
}

// The compensated occurrence process H = 1_{tau<=t} - A.
template <class S>
ProcessTable<S> compensated_occurrence(const RandomTime& tau, const Filtration& f,
                                       const Measure<S>& m) {
  ProcessTable<S> a = compensator_of_occurrence(tau, f, m);
  ProcessTable<S> occ = occurrence_process<S>(f.n_times(), tau);
  ProcessTable<S> h(occ.n_atoms, occ.n_times, S(0), Kind::kAdapted);
  for (AtomIx at = 0; at < occ.n_atoms; ++at)
    for (std::size_t k = 0; k < occ.n_times; ++k) h.at(at, k) = occ.at(at, k) - a.at(at, k);
  return h;
}

// Compensator of a pure-jump increasing process via the enveloping-times
// representation: per predictable time (every grid time in the discrete
// engine), dB is the conditional expectation of the jump-indicator-weighted
// increment. Must coincide with the Doob route; any mismatch beyond tolerance
// is an internal-consistency error.
template <class S>
ProcessTable<S> enveloping_compensator(const ProcessTable<S>& z, const Filtration& f,
                                       const Measure<S>& m) {
  if (!is_adapted(z, f)) throw ContractError("enveloping_compensator: process is not adapted");
  for (AtomIx a = 0; a < z.n_atoms; ++a)
    for (std::size_t k = 1; k < z.n_times; ++k)
      if (z.increment(a, k) < -scalar_traits<S>::tolerance())
        throw ContractError("enveloping_compensator: process is not nondecreasing");

  ProcessTable<S> b(z.n_atoms, z.n_times, S(0), Kind::kPredictable);
  for (std::size_t k = 1; k < z.n_times; ++k) {
    std::vector<S> weighted(z.n_atoms, S(0));
    for (AtomIx a = 0; a < z.n_atoms; ++a) {
      S dz = z.increment(a, k);
      bool jumps = mass_positive<S>(abs_value(dz));
      weighted[a] = jumps ? dz : S(0);
    }
    std::vector<S> db = cond_exp(weighted, f.at(k - 1), m, ZeroCellPolicy::kZeroFill);
    for (AtomIx a = 0; a < z.n_atoms; ++a) b.at(a, k) = b.at(a, k - 1) + db[a];
  }

  ProcessTable<S> doob_a = doob_decomposition(z, f, m).predictable;
  for (AtomIx a = 0; a < z.n_atoms; ++a)
    for (std::size_t k = 0; k < z.n_times; ++k)
      if (abs_value<S>(b.at(a, k) - doob_a.at(a, k)) > scalar_traits<S>::tolerance())
        throw InternalConsistencyError(
            "enveloping_compensator disagrees with the Doob decomposition at atom " +
            std::to_string(a) + ", time index " + std::to_string(k));
  return b;
}

// Pathwise quadratic covariation [X,Y]_t = sum_{s<=t} dX_s dY_s. Bilinear,
// symmetric, and invariant under any change of measure.
template <class S>
ProcessTable<S> covariation(const ProcessTable<S>& x, const ProcessTable<S>& y) {
  if (x.n_atoms != y.n_atoms || x.n_times != y.n_times)
    throw ContractError("covariation: dimension mismatch");
  ProcessTable<S> c(x.n_atoms, x.n_times, S(0), Kind::kAdapted);
  for (AtomIx a = 0; a < x.n_atoms; ++a)
    for (std::size_t k = 1; k < x.n_times; ++k)
      c.at(a, k) = c.at(a, k - 1) + x.increment(a, k) * y.increment(a, k);
  return c;
}

// Sharp bracket <M,N>: predictable compensator of [M,N]. <M,N> identically
// zero is strong orthogonality.
template <class S>
ProcessTable<S> sharp_bracket(const ProcessTable<S>& m_proc, const ProcessTable<S>& n_proc,
                              const Filtration& f, const Measure<S>& meas) {
  if (!is_martingale(m_proc, f, meas) || !is_martingale(n_proc, f, meas))
    throw ContractError("sharp_bracket: inputs must be martingales of the given pair");
  return doob_decomposition(covariation(m_proc, n_proc), f, meas).predictable;
}

template <class S>
bool identically_zero(const ProcessTable<S>& x, const Measure<S>& m) {
  for (AtomIx a = 0; a < x.n_atoms; ++a) {
    if (!m.positive(a)) continue;
    for (std::size_t k = 0; k < x.n_times; ++k)
      if (!nearly_zero<S>(x.at(a, k))) return false;
  }
  return true;
}

// Random measure induced by an increasing predictable process: per atom, the
// list of (grid index, mass) pairs above the mass threshold.
template <class S>
struct BracketMeasure {
  std::vector<std::vector<std::pair<std::size_t, S>>> masses;  // per atom
  ProcessTable<S> source;

  const std::vector<std::pair<std::size_t, S>>& atom_masses(AtomIx a) const { return masses[a]; }

  bool has_mass_at(AtomIx a, std::size_t k) const {
    for (const auto& [ix, mass] : masses[a])
      if (ix == k) return true;
    return false;
  }
};

template <class S>
BracketMeasure<S> bracket_measure(const ProcessTable<S>& a_proc) {
  BracketMeasure<S> bm;
  bm.source = a_proc;
  bm.masses.resize(a_proc.n_atoms);
  for (AtomIx a = 0; a < a_proc.n_atoms; ++a) {
    for (std::size_t k = 1; k < a_proc.n_times; ++k) {
      S d = a_proc.increment(a, k);
      if (d < -scalar_traits<S>::tolerance())
        throw ContractError("bracket_measure: process is not nondecreasing");
      if (mass_positive<S>(d)) bm.masses[a].emplace_back(k, d);
    }
  }
  return bm;
}

// Predictable random set: a membership flag per (atom, grid time), constant
// on previous-time cells, plus the generating conditional-expectation values.
template <class S>
struct PredictableRandomSet {
  std::size_t n_atoms = 0;
  std::size_t n_times = 0;
  std::vector<char> member;       // atom * n_times + k
  std::vector<S> generating;      // E[1_raw(k) | F_{k-1}] per (atom, k)

  bool contains(AtomIx a, std::size_t k) const { return member[a * n_times + k] != 0; }
  void set(AtomIx a, std::size_t k, bool v) { member[a * n_times + k] = v ? 1 : 0; }

  PredictableRandomSet complement() const {
    PredictableRandomSet c = *this;
    for (auto& x : c.member) x = x ? 0 : 1;
    return c;
  }
};

// Predictable support of dA: membership at (atom, t_k) iff the conditional
// probability of the raw support given F_{k-1} is positive. The returned
// section carries all of dA's mass for every atom of positive measure.
template <class S>
PredictableRandomSet<S> predictable_support(const ProcessTable<S>& a_proc, const Filtration& f,
                                            const Measure<S>& m) {
  if (!is_predictable(a_proc, f))
    throw ContractError("predictable_support: process is not predictable");
  BracketMeasure<S> bm = bracket_measure(a_proc);
  PredictableRandomSet<S> c;
  c.n_atoms = a_proc.n_atoms;
  c.n_times = a_proc.n_times;
  c.member.assign(c.n_atoms * c.n_times, 0);
  c.generating.assign(c.n_atoms * c.n_times, S(0));
  for (std::size_t k = 1; k < a_proc.n_times; ++k) {
    std::vector<S> raw(a_proc.n_atoms, S(0));
    for (AtomIx a = 0; a < a_proc.n_atoms; ++a)
      if (bm.has_mass_at(a, k)) raw[a] = S(1);
    std::vector<S> e = cond_exp(raw, f.at(k - 1), m, ZeroCellPolicy::kZeroFill);
    for (AtomIx a = 0; a < a_proc.n_atoms; ++a) {
      c.generating[a * c.n_times + k] = e[a];
      c.set(a, k, mass_positive<S>(e[a]));
    }
  }
  // Support check: no mass outside the section on positive-measure atoms.
  for (AtomIx a = 0; a < a_proc.n_atoms; ++a) {
    if (!m.positive(a)) continue;
    for (const auto& [k, mass] : bm.atom_masses(a))
      if (!c.contains(a, k))
        throw InternalConsistencyError("predictable_support: mass escaped the section at atom " +
                                       std::to_string(a) + ", time index " + std::to_string(k));
  }
  return c;
}

template <class S>
struct SingularityResult {
  bool singular = false;
  // When singular: disjoint predictable supports for the two measures.
  std::optional<PredictableRandomSet<S>> support_a;
  std::optional<PredictableRandomSet<S>> support_b;
  // When not: a positive-measure atom and time carrying mass of both.
  std::optional<std::pair<AtomIx, std::size_t>> witness;
};

// Mutual singularity of two bracket measures: for a.e. atom the per-atom
// mass-point sets are disjoint. When true, the predictable support of A and
// its complement give disjoint predictable supports (the complement carries
// dB because dB's increments are predictable, hence constant on the cells
// the support was built from).
template <class S>
SingularityResult<S> mutually_singular(const BracketMeasure<S>& a, const BracketMeasure<S>& b,
                                       const Filtration& f, const Measure<S>& m) {
  if (!is_predictable(a.source, f) || !is_predictable(b.source, f))
    throw ContractError("mutually_singular: sources must be predictable processes");
  SingularityResult<S> r;
  for (AtomIx atom = 0; atom < a.masses.size(); ++atom) {
    if (!m.positive(atom)) continue;
    for (const auto& [k, mass] : a.atom_masses(atom)) {
      if (b.has_mass_at(atom, k)) {
        r.singular = false;
        r.witness = std::make_pair(atom, k);
        return r;
      }
    }
  }
  r.singular = true;
  PredictableRandomSet<S> ca = predictable_support(a.source, f, m);
  PredictableRandomSet<S> cb = ca.complement();
  // dB must live inside the complement on every positive-measure atom.
  for (AtomIx atom = 0; atom < b.masses.size(); ++atom) {
    if (!m.positive(atom)) continue;
    for (const auto& [k, mass] : b.atom_masses(atom))
      if (!cb.contains(atom, k))
        throw InternalConsistencyError(
            "mutually_singular: complement support fails to carry dB at atom " +
            std::to_string(atom));
  }
  r.support_a = std::move(ca);
  r.support_b = std::move(cb);
  return r;
}

// Accessible / totally inaccessible decomposition of a random time. In the
// discrete engine every finite stopping time is accessible, enveloped by the
// deterministic grid times it charges.
struct TimeDecomposition {
  RandomTime accessible;
  RandomTime inaccessible;                 // kNever everywhere in the discrete engine
  std::vector<std::size_t> enveloping;     // grid indices of the predictable envelope
};

inline TimeDecomposition classify_time(const RandomTime& tau, const Filtration& f) {
  if (!is_stopping_time(tau, f))
    throw ContractError("classify_time: not a stopping time of the filtration");
  TimeDecomposition d;
  d.accessible = tau;
  d.inaccessible.at.assign(tau.n_atoms(), RandomTime::kNever);
  std::vector<char> seen(f.n_times(), 0);
  for (std::size_t a = 0; a < tau.n_atoms(); ++a)
    if (tau.at[a] != RandomTime::kNever) seen[static_cast<std::size_t>(tau.at[a])] = 1;
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (seen[k]) d.enveloping.push_back(k);
  return d;
}

// Yoeurp decomposition of a discrete-engine martingale: no continuous part,
// no totally inaccessible part, accessible part M - M_0.
template <class S>
struct YoeurpParts {
  ProcessTable<S> continuous;
  ProcessTable<S> accessible;
  ProcessTable<S> inaccessible;
};

template <class S>
YoeurpParts<S> yoeurp_parts(const ProcessTable<S>& m_proc, const Filtration& f,
                            const Measure<S>& meas) {
  if (!is_martingale(m_proc, f, meas))
    throw ContractError("yoeurp_parts: input is not a martingale of the given pair");
  YoeurpParts<S> parts{
      ProcessTable<S>(m_proc.n_atoms, m_proc.n_times, S(0), Kind::kAdapted),
      ProcessTable<S>(m_proc.n_atoms, m_proc.n_times, S(0), Kind::kAdapted),
      ProcessTable<S>(m_proc.n_atoms, m_proc.n_times, S(0), Kind::kAdapted),
  };
  for (AtomIx a = 0; a < m_proc.n_atoms; ++a)
    for (std::size_t k = 0; k < m_proc.n_times; ++k)
      parts.accessible.at(a, k) = m_proc.at(a, k) - m_proc.at(a, 0);
  return parts;
}

}  // namespace martrep
