#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "martrep/calculus.hpp"
#include "martrep/errors.hpp"
#include "martrep/linalg.hpp"
#include "martrep/scalar.hpp"
#include "martrep/space.hpp"

namespace martrep {

// Two-filtration model: F and H are the natural occurrence filtrations of two
// declared random times (the generators), G their join. The two-generator
// restriction is what makes condition D) decidable on a finite space.
template <class S>
struct JointModel {
  FiniteSpace<S> space;
  std::string f_label = "F";
  std::string h_label = "H";
  std::string g_label = "G";
  std::string eta_label = "eta";  // generator of F
  std::string tau_label = "tau";  // generator of H
  std::string p_label = "P";

  const Filtration& f() const { return space.filtration(f_label); }
  const Filtration& h() const { return space.filtration(h_label); }
  const Filtration& g() const { return space.filtration(g_label); }
  const RandomTime& eta() const { return space.random_time(eta_label); }
  const RandomTime& tau() const { return space.random_time(tau_label); }
  const Measure<S>& p() const { return space.measure(p_label); }

  // The distinguished martingales: compensated occurrence of each generator
  // in its own filtration.
  ProcessTable<S> martingale_m(const Measure<S>& under) const {
    return compensated_occurrence(eta(), f(), under);
  }
  ProcessTable<S> martingale_n(const Measure<S>& under) const {
    return compensated_occurrence(tau(), h(), under);
  }
};

// Builds the joint model: derives F and H as natural filtrations of the two
// generators and registers their join as G.
template <class S>
JointModel<S> make_joint_model(FiniteSpace<S> space, const std::string& eta_label,
                               const std::string& tau_label, const std::string& p_label) {
  JointModel<S> jm;
  const RandomTime& eta = space.random_time(eta_label);
  const RandomTime& tau = space.random_time(tau_label);
  space.measure(p_label);  // must exist
  Filtration f = natural_filtration(space.n_times(), eta);
  Filtration h = natural_filtration(space.n_times(), tau);
  Filtration g = join_filtrations(f, h);
  space.add_filtration("F", std::move(f));
  space.add_filtration("H", std::move(h));
  space.add_filtration("G", std::move(g));
  jm.space = std::move(space);
  jm.eta_label = eta_label;
  jm.tau_label = tau_label;
  jm.p_label = p_label;
  return jm;
}

template <class S>
struct DecouplingResult {
  bool exists = false;
  std::optional<Measure<S>> q;  // canonical choice: product of the P-marginals
  // Certificate when no equivalent decoupling measure exists: a pair of
  // marginal support points whose joint probability is zero.
  std::optional<std::pair<std::int32_t, std::int32_t>> missing_pair;  // (eta value ix, tau value ix)
};

namespace detail {

// Joint law of the two generator values (grid index or kNever) under m.
template <class S>
struct GeneratorLaw {
  std::vector<std::int32_t> eta_values, tau_values;  // sorted distinct values incl. kNever
  std::map<std::int32_t, std::size_t> eta_ix, tau_ix;
  Mat<S> joint;                 // eta x tau
  std::vector<S> eta_marginal, tau_marginal;
};

template <class S>
GeneratorLaw<S> generator_law(const JointModel<S>& jm, const Measure<S>& m) {
  GeneratorLaw<S> law;
  const RandomTime& eta = jm.eta();
  const RandomTime& tau = jm.tau();
  for (std::size_t a = 0; a < jm.space.n_atoms(); ++a) {
    if (!law.eta_ix.count(eta.at[a])) law.eta_ix[eta.at[a]] = 0;
    if (!law.tau_ix.count(tau.at[a])) law.tau_ix[tau.at[a]] = 0;
  }
  for (auto& [v, ix] : law.eta_ix) {
    ix = law.eta_values.size();
    law.eta_values.push_back(v);
  }
  for (auto& [v, ix] : law.tau_ix) {
    ix = law.tau_values.size();
    law.tau_values.push_back(v);
  }
  law.joint = Mat<S>(law.eta_values.size(), law.tau_values.size());
  law.eta_marginal.assign(law.eta_values.size(), S(0));
  law.tau_marginal.assign(law.tau_values.size(), S(0));
  for (AtomIx a = 0; a < jm.space.n_atoms(); ++a) {
    std::size_t i = law.eta_ix.at(eta.at[a]);
    std::size_t j = law.tau_ix.at(tau.at[a]);
    law.joint(i, j) += m.w[a];
    law.eta_marginal[i] += m.w[a];
    law.tau_marginal[j] += m.w[a];
  }
  return law;
}

}  // namespace detail

// Condition D): an equivalent measure making F and H independent exists iff
// the support of the joint generator law is a product set. The canonical Q
// keeps P's conditional weights within each (eta, tau) class and rescales the
// class masses to the product of the P-marginals.
template <class S>
DecouplingResult<S> decoupling_exists(const JointModel<S>& jm) {
  const Measure<S>& p = jm.p();
  detail::GeneratorLaw<S> law = detail::generator_law(jm, p);

  DecouplingResult<S> r;
  for (std::size_t i = 0; i < law.eta_values.size(); ++i) {
    for (std::size_t j = 0; j < law.tau_values.size(); ++j) {
      bool marginals_positive =
          mass_positive(law.eta_marginal[i]) && mass_positive(law.tau_marginal[j]);
      if (marginals_positive && !mass_positive(law.joint(i, j))) {
        r.exists = false;
        r.missing_pair = std::make_pair(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
        return r;
      }
    }
  }

  Measure<S> q;
  q.w.assign(jm.space.n_atoms(), S(0));
  for (AtomIx a = 0; a < jm.space.n_atoms(); ++a) {
    if (!mass_positive(p.w[a])) continue;
    std::size_t i = law.eta_ix.at(jm.eta().at[a]);
    std::size_t j = law.tau_ix.at(jm.tau().at[a]);
    q.w[a] = p.w[a] * law.eta_marginal[i] * law.tau_marginal[j] / law.joint(i, j);
  }
  r.exists = true;
  r.q = std::move(q);
  return r;
}

template <class S>
struct PStarResult {
  Measure<S> p_star;
  bool f_marginal_preserved = false;
  bool h_marginal_preserved = false;
  bool independent = false;
  bool equals_product_of_marginals = false;
};

namespace detail {

template <class S>
std::vector<S> cell_masses(const Partition& p, const Measure<S>& m) {
  std::vector<S> out(p.cell_count(), S(0));
  for (AtomIx a = 0; a < m.n_atoms(); ++a) out[p.cell_of(a)] += m.w[a];
  return out;
}

template <class S>
bool cells_independent(const Partition& fp, const Partition& hp, const Measure<S>& m) {
  std::vector<S> fm = cell_masses(fp, m);
  std::vector<S> hm = cell_masses(hp, m);
  Mat<S> joint(fp.cell_count(), hp.cell_count());
  for (AtomIx a = 0; a < m.n_atoms(); ++a) joint(fp.cell_of(a), hp.cell_of(a)) += m.w[a];
  for (std::size_t i = 0; i < fp.cell_count(); ++i)
    for (std::size_t j = 0; j < hp.cell_count(); ++j)
      if (!nearly_equal<S>(joint(i, j), fm[i] * hm[j])) return false;
  return true;
}

}  // namespace detail

// The martingale-preserving measure: dP* = dP|F_T/dQ|F_T * dP|H_T/dQ|H_T dQ.
// Restricted to F_T and to H_T it coincides with P, and it makes the terminal
// sigma-fields independent; for any decoupling Q it lands on the product of
// the P-marginals.
template <class S>
PStarResult<S> martingale_preserving_measure(const JointModel<S>& jm, const Measure<S>& q) {
  const Measure<S>& p = jm.p();
  if (!p.equivalent(q))
    throw ContractError("martingale_preserving_measure: Q is not equivalent to P");
  std::size_t last = jm.space.n_times() - 1;
  const Partition& ft = jm.f().at(last);
  const Partition& ht = jm.h().at(last);
  if (!detail::cells_independent(ft, ht, q))
    throw ContractError("martingale_preserving_measure: Q does not decouple F_T and H_T");

  std::vector<S> pf = detail::cell_masses(ft, p), qf = detail::cell_masses(ft, q);
  std::vector<S> ph = detail::cell_masses(ht, p), qh = detail::cell_masses(ht, q);

  PStarResult<S> r;
  r.p_star.w.assign(jm.space.n_atoms(), S(0));
  for (AtomIx a = 0; a < jm.space.n_atoms(); ++a) {
    if (!mass_positive(q.w[a])) continue;
    std::size_t fc = ft.cell_of(a), hc = ht.cell_of(a);
    r.p_star.w[a] = pf[fc] / qf[fc] * ph[hc] / qh[hc] * q.w[a];
  }

  std::vector<S> sf = detail::cell_masses(ft, r.p_star);
  std::vector<S> sh = detail::cell_masses(ht, r.p_star);
  r.f_marginal_preserved = true;
  for (std::size_t c = 0; c < sf.size(); ++c)
    if (!nearly_equal<S>(sf[c], pf[c])) r.f_marginal_preserved = false;
  r.h_marginal_preserved = true;
  for (std::size_t c = 0; c < sh.size(); ++c)
    if (!nearly_equal<S>(sh[c], ph[c])) r.h_marginal_preserved = false;
  r.independent = detail::cells_independent(ft, ht, r.p_star);

  r.equals_product_of_marginals = true;
  Mat<S> joint(ft.cell_count(), ht.cell_count());
  for (AtomIx a = 0; a < jm.space.n_atoms(); ++a)
    joint(ft.cell_of(a), ht.cell_of(a)) += r.p_star.w[a];
  for (std::size_t i = 0; i < ft.cell_count(); ++i)
    for (std::size_t j = 0; j < ht.cell_count(); ++j)
      if (!nearly_equal<S>(joint(i, j), pf[i] * ph[j])) r.equals_product_of_marginals = false;

  if (!r.f_marginal_preserved || !r.h_marginal_preserved || !r.independent ||
      !r.equals_product_of_marginals)
    throw InternalConsistencyError(
        "martingale_preserving_measure: construction failed its own checks");
  return r;
}

template <class S>
struct GCompensatorResult {
  ProcessTable<S> compensator;   // primary route: Doob decomposition under (P, G)
  ProcessTable<S> hazard_route;  // discrete hazard increments from F-conditional laws
  bool routes_agree = false;
  bool hazard_fell_back = false;  // a null survival cell forced the direct route
};

// (P,G)-compensator of the occurrence of tau. Primary route is the Doob
// decomposition; the secondary route computes, on the survival set, the
// hazard dA_k = E[1_{tau=t_k}|F_{k-1}] / E[1_{tau>t_{k-1}}|F_{k-1}].
template <class S>
GCompensatorResult<S> g_compensator_of_tau(const JointModel<S>& jm, const Measure<S>& p) {
  const RandomTime& tau = jm.tau();
  const Filtration& g = jm.g();
  const Filtration& f = jm.f();
  GCompensatorResult<S> r;
  r.compensator = compensator_of_occurrence(tau, g, p);

  std::size_t n = jm.space.n_atoms();
  r.hazard_route = ProcessTable<S>(n, jm.space.n_times(), S(0), Kind::kPredictable);
  for (std::size_t k = 1; k < jm.space.n_times(); ++k) {
    std::vector<S> occurs_now(n, S(0)), survives(n, S(0));
    for (AtomIx a = 0; a < n; ++a) {
      if (tau.occurs_at(a, k)) occurs_now[a] = S(1);
      if (!tau.occurred_by(a, k - 1)) survives[a] = S(1);
    }
    std::vector<S> num = cond_exp(occurs_now, f.at(k - 1), p, ZeroCellPolicy::kZeroFill);
    std::vector<S> den = cond_exp(survives, f.at(k - 1), p, ZeroCellPolicy::kZeroFill);
    for (AtomIx a = 0; a < n; ++a) {
      S dh(0);
      if (!tau.occurred_by(a, k - 1)) {
        if (mass_positive(den[a])) {
          dh = num[a] / den[a];
        } else {
          // Null survival cell: hazard undefined, fall back to the direct route.
          r.hazard_fell_back = true;
          dh = r.compensator.increment(a, k);
        }
      }
      r.hazard_route.at(a, k) = r.hazard_route.at(a, k - 1) + dh;
    }
  }

  r.routes_agree = true;
  for (AtomIx a = 0; a < n; ++a) {
    if (!p.positive(a)) continue;
    for (std::size_t k = 0; k < jm.space.n_times(); ++k)
      if (!nearly_equal<S>(r.hazard_route.at(a, k), r.compensator.at(a, k)))
        r.routes_agree = false;
  }
  if (!r.routes_agree)
    throw InternalConsistencyError(
        "g_compensator_of_tau: hazard route disagrees with the Doob route");
  return r;
}

template <class S>
struct HPrimeResult {
  ProcessTable<S> h_prime;  // 1_{tau<=t} - A^{P,G}
  ProcessTable<S> h;        // 1_{tau<=t} - A^{P,H}
  ProcessTable<S> a_h;      // (P,H)-compensator
  ProcessTable<S> a_g;      // (P,G)-compensator
  bool identity_holds = false;    // H' = H + A^{P,H} - A^{P,G} atom-wise
  bool is_g_martingale = false;
};

template <class S>
HPrimeResult<S> compensated_occurrence_G(const JointModel<S>& jm, const Measure<S>& p) {
  HPrimeResult<S> r;
  r.a_h = compensator_of_occurrence(jm.tau(), jm.h(), p);
  r.a_g = g_compensator_of_tau(jm, p).compensator;
  ProcessTable<S> occ = occurrence_process<S>(jm.space.n_times(), jm.tau());
  std::size_t n = jm.space.n_atoms(), nt = jm.space.n_times();
  r.h = ProcessTable<S>(n, nt, S(0), Kind::kAdapted);
  r.h_prime = ProcessTable<S>(n, nt, S(0), Kind::kAdapted);
  r.identity_holds = true;
  for (AtomIx a = 0; a < n; ++a) {
    for (std::size_t k = 0; k < nt; ++k) {
      r.h.at(a, k) = occ.at(a, k) - r.a_h.at(a, k);
      r.h_prime.at(a, k) = occ.at(a, k) - r.a_g.at(a, k);
      S rhs = r.h.at(a, k) + r.a_h.at(a, k) - r.a_g.at(a, k);
      if (!nearly_equal<S>(r.h_prime.at(a, k), rhs)) r.identity_holds = false;
    }
  }
  r.is_g_martingale = is_martingale(r.h_prime, jm.g(), p);
  if (!r.identity_holds || !r.is_g_martingale)
    throw InternalConsistencyError("compensated_occurrence_G failed its own checks");
  return r;
}

struct ImmersionWitness {
  std::size_t f_cell;    // index of the terminal F-cell whose Doob martingale fails
  std::size_t time;      // grid index of the failing increment
  AtomIx atom;           // positive-measure atom exhibiting the failure
};

struct ImmersionResult {
  bool holds = false;
  std::optional<ImmersionWitness> witness;
};

struct MmmRouteA {
  bool holds = false;
  // Witness on failure: the node (time, cell of G at time-1) and the
  // orthogonal direction whose single-node martingale drifts under P.
  std::optional<std::string> witness;
};

struct MmmRouteB {
  bool holds = false;
  bool m_is_martingale = false;
  bool covariation_is_martingale = false;
};

struct MmmResult {
  bool is_mmm = false;
  MmmRouteA route_a;
  MmmRouteB route_b;
};

// Is the candidate measure the minimal martingale measure for H' on
// (Omega, G, P*)? Two independent routes:
//   (a) definition: every (P*,G)-martingale strongly orthogonal to H (built
//       node by node as the orthogonal complement of H's increments) must be
//       a (P,G)-martingale;
//   (b) the equivalent characterization: M and [M,H] are (P,G)-martingales.
template <class S>
MmmResult is_minimal_martingale_measure(const JointModel<S>& jm, const Measure<S>& p,
                                        const Measure<S>& p_star) {
  const Filtration& g = jm.g();
  std::size_t nt = jm.space.n_times();

  ProcessTable<S> h_table = compensated_occurrence(jm.tau(), jm.h(), p);

  MmmResult r;
  r.route_a.holds = true;
  for (std::size_t k = 1; k < nt; ++k) {
    const Partition& prev = g.at(k - 1);
    const Partition& next = g.at(k);
    for (std::size_t c = 0; c < prev.cell_count(); ++c) {
      const auto& cell = prev.cell(c);
      // positive-P* children of this node, one representative each
      std::vector<AtomIx> reps;
      std::vector<S> w_star, w_p;
      {
        std::map<std::uint32_t, std::size_t> child_ix;
        for (AtomIx a : cell) {
          if (!mass_positive(p_star.w[a])) continue;
          auto [it, inserted] = child_ix.try_emplace(next.cell_of(a), reps.size());
          if (inserted) {
            reps.push_back(a);
            w_star.push_back(S(0));
            w_p.push_back(S(0));
          }
          w_star[it->second] += p_star.w[a];
          w_p[it->second] += p.w[a];
        }
      }
      std::size_t nc = reps.size();
      if (nc < 2) continue;
      S total_star(0), total_p(0);
      for (std::size_t i = 0; i < nc; ++i) {
        total_star += w_star[i];
        total_p += w_p[i];
      }
      // Constraints on an orthogonal-to-H martingale increment z:
      //   sum p*_i z_i = 0 and sum p*_i z_i dH_i = 0.
      Mat<S> constraints(2, nc);
      for (std::size_t i = 0; i < nc; ++i) {
        S dh = h_table.increment(reps[i], k);
        constraints(0, i) = w_star[i] / total_star;
        constraints(1, i) = w_star[i] / total_star * dh;
      }
      Mat<S> basis = nullspace(constraints);
      for (std::size_t bcol = 0; bcol < basis.cols(); ++bcol) {
        S drift(0);
        for (std::size_t i = 0; i < nc; ++i) drift += w_p[i] / total_p * basis(i, bcol);
        if (!nearly_zero<S>(drift)) {
          r.route_a.holds = false;
          if (!r.route_a.witness) {
            std::string z = "[";
            for (std::size_t i = 0; i < nc; ++i)
              z += (i ? "," : "") + scalar_to_string(basis(i, bcol));
            z += "]";
            r.route_a.witness = "node (k=" + std::to_string(k) + ", cell=" + std::to_string(c) +
                                "), direction " + z + ", P-drift " + scalar_to_string(drift);
          }
        }
      }
    }
  }

  ProcessTable<S> m_table = jm.martingale_m(p);
  r.route_b.m_is_martingale = is_martingale(m_table, g, p);
  r.route_b.covariation_is_martingale = is_martingale(covariation(m_table, h_table), g, p);
  r.route_b.holds = r.route_b.m_is_martingale && r.route_b.covariation_is_martingale;

  if (r.route_a.holds != r.route_b.holds)
    throw InternalConsistencyError(
        std::string("is_minimal_martingale_measure: routes disagree; route (a) ") +
        (r.route_a.holds ? "true" : "false") +
        (r.route_a.witness ? " (" + *r.route_a.witness + ")" : "") + ", route (b) M " +
        (r.route_b.m_is_martingale ? "martingale" : "drifts") + ", [M,H] " +
        (r.route_b.covariation_is_martingale ? "martingale" : "drifts"));
  r.is_mmm = r.route_a.holds;
  return r;
}

template <class S>
struct DensityProcessResult {
  ProcessTable<S> l;                      // L_t = d(target)/d(base) on G_t cells
  std::optional<ProcessTable<S>> gamma;   // integrand of 1 - L against H, when recoverable
  bool gamma_exact = false;
};

// Radon-Nikodym density process of target w.r.t. base along G, plus recovery
// of the predictable gamma with dL = -gamma L_- dH where one exists.
template <class S>
DensityProcessResult<S> density_process(const JointModel<S>& jm, const Measure<S>& target,
                                        const Measure<S>& base) {
  if (!target.equivalent(base))
    throw ContractError("density_process: measures are not equivalent");
  const Filtration& g = jm.g();
  std::size_t n = jm.space.n_atoms(), nt = jm.space.n_times();
  DensityProcessResult<S> r;
  r.l = ProcessTable<S>(n, nt, S(0), Kind::kAdapted);
  for (std::size_t k = 0; k < nt; ++k) {
    std::vector<S> tm = detail::cell_masses(g.at(k), target);
    std::vector<S> bm = detail::cell_masses(g.at(k), base);
    for (AtomIx a = 0; a < n; ++a) {
      std::size_t c = g.at(k).cell_of(a);
      r.l.at(a, k) = mass_positive(bm[c]) ? tm[c] / bm[c] : S(0);
    }
  }

  ProcessTable<S> h_table = compensated_occurrence(jm.tau(), jm.h(), target);
  ProcessTable<S> gamma(n, nt, S(0), Kind::kPredictable);
  bool exact = true;
  for (std::size_t k = 1; k < nt && exact; ++k) {
    const Partition& prev = g.at(k - 1);
    for (std::size_t c = 0; c < prev.cell_count() && exact; ++c) {
      const auto& cell = prev.cell(c);
      std::optional<S> gval;
      for (AtomIx a : cell) {
        if (!base.positive(a)) continue;
        S dl = r.l.increment(a, k);
        S dh = h_table.increment(a, k);
        S lprev = r.l.at(a, k - 1);
        if (nearly_zero<S>(dh)) {
          if (!nearly_zero<S>(dl)) exact = false;  // L jumps where H does not
        } else {
          S cand = -dl / (lprev * dh);
          if (gval && !nearly_equal<S>(*gval, cand)) exact = false;
          if (!gval) gval = cand;
        }
      }
      if (gval)
        for (AtomIx a : cell) gamma.at(a, k) = *gval;
    }
  }
  r.gamma_exact = exact;
  if (exact) r.gamma = std::move(gamma);
  return r;
}

// Immersion: every (P,F)-martingale stays a (P,G)-martingale. On a finite
// space the Doob martingales of the terminal F-cell indicators span all
// F-martingales, so testing that family decides the property.
template <class S>
ImmersionResult immersion_check(const JointModel<S>& jm, const Measure<S>& p) {
  const Filtration& f = jm.f();
  const Filtration& g = jm.g();
  std::size_t last = jm.space.n_times() - 1;
  const Partition& ft = f.at(last);
  ImmersionResult r;
  r.holds = true;
  for (std::size_t c = 0; c < ft.cell_count(); ++c) {
    std::vector<S> indicator(jm.space.n_atoms(), S(0));
    for (AtomIx a : ft.cell(c)) indicator[a] = S(1);
    ProcessTable<S> doob(jm.space.n_atoms(), jm.space.n_times(), S(0), Kind::kAdapted);
    for (std::size_t k = 0; k < jm.space.n_times(); ++k) {
      std::vector<S> e = cond_exp(indicator, f.at(k), p, ZeroCellPolicy::kZeroFill);
      for (AtomIx a = 0; a < jm.space.n_atoms(); ++a) doob.at(a, k) = e[a];
    }
    for (std::size_t k = 1; k < jm.space.n_times(); ++k) {
      std::vector<S> e =
          cond_exp(slice_increment(doob, k), g.at(k - 1), p, ZeroCellPolicy::kZeroFill);
      for (AtomIx a = 0; a < jm.space.n_atoms(); ++a) {
        if (p.positive(a) && !nearly_zero<S>(e[a])) {
          r.holds = false;
          if (!r.witness) r.witness = ImmersionWitness{c, k, a};
        }
      }
    }
  }
  return r;
}

}  // namespace martrep
