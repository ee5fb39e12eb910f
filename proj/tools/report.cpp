#include "report.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace martrep::cli {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

ordered_json table_json(const FiniteSpace<double>& space, const ProcessTable<double>& t) {
  ordered_json out = ordered_json::object();
  for (AtomIx a = 0; a < t.n_atoms; ++a) {
    ordered_json row = ordered_json::array();
    for (std::size_t k = 0; k < t.n_times; ++k) row.push_back(t.at(a, k));
    out[space.atom_name(a)] = std::move(row);
  }
  return out;
}

ordered_json measure_json(const FiniteSpace<double>& space, const Measure<double>& m) {
  ordered_json out = ordered_json::object();
  for (AtomIx a = 0; a < space.n_atoms(); ++a) out[space.atom_name(a)] = m.w[a];
  return out;
}

ordered_json bracket_json(const FiniteSpace<double>& space, const BracketMeasure<double>& b) {
  ordered_json out = ordered_json::object();
  for (AtomIx a = 0; a < space.n_atoms(); ++a) {
    ordered_json rows = ordered_json::array();
    for (const auto& [k, mass] : b.atom_masses(a))
      rows.push_back(ordered_json{{"t", space.time(k)}, {"mass", mass}});
    out[space.atom_name(a)] = std::move(rows);
  }
  return out;
}

ordered_json node_json(const FiniteSpace<double>& space, const NodeRef& n) {
  return ordered_json{{"time", space.time(n.k)}, {"cell", n.cell}};
}

}  // namespace

AnalysisOutcome run_analysis(const JointModel<double>& jm, const std::string& origin,
                             const AnalyzeOptions& opt) {
  Clock::time_point start = Clock::now();
  const FiniteSpace<double>& space = jm.space;
  const Measure<double>& p = jm.p();

  AnalysisOutcome out;
  ordered_json& rep = out.report;
  rep["schema"] = "martrep-report/1";
  rep["kind"] = "analysis";
  rep["origin"] = origin;
  {
    ordered_json model;
    model["atoms"] = space.atom_names();
    model["grid"] = space.grid();
    model["f_time"] = jm.eta_label;
    model["h_time"] = jm.tau_label;
    model["measure"] = jm.p_label;
    model["p"] = measure_json(space, p);
    rep["model"] = std::move(model);
  }

  // Distinguished martingales and their pathwise covariation under P.
  ProcessTable<double> m_table = jm.martingale_m(p);
  ProcessTable<double> n_table = jm.martingale_n(p);
  ProcessTable<double> cov = covariation(m_table, n_table);
  rep["martingales"] = ordered_json{{"M", table_json(space, m_table)},
                                    {"N", table_json(space, n_table)},
                                    {"covariation", table_json(space, cov)}};

  // Covariation never reads a measure: repeated evaluation on the same
  // inputs is bit-identical, and martingales rebuilt under any declared
  // equivalent measure that preserves the marginal laws give the same
  // covariation up to float reassociation.
  {
    bool operator_pathwise = covariation(m_table, n_table).v == cov.v;
    ordered_json checked = ordered_json::array();
    bool all_identical = operator_pathwise;
    for (const std::string& name : opt.extra_measures) {
      const Measure<double>& other = space.measure(name);
      if (!other.equivalent(p)) continue;
      // Only marginal-preserving measures leave M and N the same processes.
      std::size_t last = space.n_times() - 1;
      bool marginals_ok = true;
      for (const Partition* part : {&jm.f().at(last), &jm.h().at(last)}) {
        for (const auto& cell : part->cells()) {
          double wp = 0, wo = 0;
          for (AtomIx a : cell) {
            wp += p.w[a];
            wo += other.w[a];
          }
          if (std::abs(wp - wo) > 1e-12) marginals_ok = false;
        }
      }
      if (!marginals_ok) {
        checked.push_back(ordered_json{{"measure", name}, {"skipped", "changes the marginal laws"}});
        continue;
      }
      ProcessTable<double> cov2 = covariation(jm.martingale_m(other), jm.martingale_n(other));
      double max_diff = 0;
      for (std::size_t i = 0; i < cov2.v.size(); ++i)
        max_diff = std::max(max_diff, std::abs(cov2.v[i] - cov.v[i]));
      bool same = max_diff <= 1e-12;
      all_identical = all_identical && same;
      checked.push_back(
          ordered_json{{"measure", name}, {"max_difference", max_diff}, {"agrees", same}});
    }
    rep["covariation_measure_free"] = ordered_json{{"operator_bit_identical", operator_pathwise},
                                                   {"checked", std::move(checked)},
                                                   {"all_identical", all_identical}};
  }

  // Assumptions: decoupling and the uniqueness analogue.
  ordered_json assumptions;
  DecouplingResult<double> dec = decoupling_exists(jm);
  {
    ordered_json d;
    d["holds"] = dec.exists;
    if (dec.exists) {
      d["q"] = measure_json(space, *dec.q);
    } else if (dec.missing_pair) {
      d["certificate"] = ordered_json{{"eta_value_index", dec.missing_pair->first},
                                      {"tau_value_index", dec.missing_pair->second}};
    }
    assumptions["decoupling"] = std::move(d);
  }
  UniquenessResult<double> um = uniqueness_check<double>({m_table}, jm.f(), p);
  UniquenessResult<double> un = uniqueness_check<double>({n_table}, jm.h(), p);
  assumptions["uniqueness"] = ordered_json{{"m_unique", um.unique},
                                   {"n_unique", un.unique},
                                   {"m_free_dimension", um.free_dimension},
                                   {"n_free_dimension", un.free_dimension}};

  ImmersionResult imm = immersion_check(jm, p);
  {
    ordered_json i;
    i["holds"] = imm.holds;
    if (imm.witness)
      i["witness"] = ordered_json{{"f_cell", imm.witness->f_cell},
                                  {"time", space.time(imm.witness->time)},
                                  {"atom", space.atom_name(imm.witness->atom)}};
    assumptions["immersion"] = std::move(i);
  }
  rep["assumptions"] = std::move(assumptions);

  // Compensators of the occurrence of tau, H and G routes.
  {
    GCompensatorResult<double> gc = g_compensator_of_tau(jm, p);
    HPrimeResult<double> hp = compensated_occurrence_G(jm, p);
    rep["compensators"] = ordered_json{{"a_h", table_json(space, hp.a_h)},
                                       {"a_g", table_json(space, hp.a_g)},
                                       {"hazard_route_agrees", gc.routes_agree},
                                       {"h_prime", table_json(space, hp.h_prime)},
                                       {"identity_h_prime", hp.identity_holds},
                                       {"h_prime_martingale", hp.is_g_martingale}};
  }

  // Brackets and their mutual singularity.
  BracketMeasure<double> bm = bracket_measure(sharp_bracket(m_table, m_table, jm.f(), p));
  BracketMeasure<double> bn = bracket_measure(sharp_bracket(n_table, n_table, jm.h(), p));
  SingularityResult<double> sing = mutually_singular(bm, bn, jm.g(), p);
  {
    ordered_json b;
    b["m_bracket"] = bracket_json(space, bm);
    b["n_bracket"] = bracket_json(space, bn);
    b["mutually_singular"] = sing.singular;
    if (sing.witness)
      b["witness"] = ordered_json{{"atom", space.atom_name(sing.witness->first)},
                                  {"t", space.time(sing.witness->second)}};
    rep["brackets"] = std::move(b);
  }

  // Theorem-level verdicts need the decoupling measure.
  if (!dec.exists || !um.unique || !un.unique) {
    rep["classifier"] =
        ordered_json{{"refused", true},
                     {"reason", !dec.exists ? "no equivalent decoupling measure (condition D)"
                                            : "martingale measure not unique on a marginal filtration"}};
    out.refused = true;
  } else {
    Measure<double> p_star = martingale_preserving_measure(jm, *dec.q).p_star;
    rep["p_star"] = measure_json(space, p_star);

    ClassifierResult cls = classify_multiplicity(jm, p, p_star);
    ordered_json c;
    c["verdict"] = cls.verdict;
    c["totals_singular"] = cls.totals_singular;
    c["accessibles_singular"] = cls.accessibles_singular;
    c["direct_multiplicity"] = cls.direct_multiplicity;
    if (cls.overlap_witness)
      c["overlap_witness"] = ordered_json{{"atom", space.atom_name(cls.overlap_witness->first)},
                                          {"t", space.time(cls.overlap_witness->second)}};
    rep["classifier"] = std::move(c);

    MultiplicityReport<double> mult = multiplicity(jm.g(), p_star);
    ordered_json certs = ordered_json::array();
    for (const auto& cert : mult.basis_certificates.certificates)
      certs.push_back(ordered_json{{"node", node_json(space, cert.node)},
                                   {"children", cert.child_reps.size()},
                                   {"required_rank", cert.required_rank},
                                   {"achieved_rank", cert.achieved_rank}});
    rep["multiplicity"] = ordered_json{{"value", mult.multiplicity},
                                       {"extremal_node", node_json(space, mult.extremal_node)},
                                       {"basis_size", mult.basis.size()},
                                       {"basis_prp", mult.basis_certificates.holds},
                                       {"certificates", std::move(certs)}};

    MmmResult mmm = is_minimal_martingale_measure(jm, p, p_star);
    {
      ordered_json mj;
      mj["holds"] = mmm.is_mmm;
      mj["route_a"] = ordered_json{{"holds", mmm.route_a.holds}};
      if (mmm.route_a.witness) mj["route_a"]["witness"] = *mmm.route_a.witness;
      mj["route_b"] = ordered_json{{"holds", mmm.route_b.holds},
                                   {"m_martingale", mmm.route_b.m_is_martingale},
                                   {"covariation_martingale",
                                    mmm.route_b.covariation_is_martingale}};
      rep["mmm"] = std::move(mj);
    }

    ordered_json kj;
    if (mmm.is_mmm) {
      KusuokaResult<double> k = kusuoka_triplet(jm, p);
      kj["applicable"] = true;
      kj["prp_under_p"] = k.prp.holds;
      {
        ordered_json kcerts = ordered_json::array();
        for (const auto& cert : k.prp.certificates)
          kcerts.push_back(ordered_json{{"node", node_json(space, cert.node)},
                                        {"children", cert.child_reps.size()},
                                        {"required_rank", cert.required_rank},
                                        {"achieved_rank", cert.achieved_rank}});
        kj["prp_certificates"] = std::move(kcerts);
      }
      kj["m_g_martingale"] = k.m_is_g_martingale;
      kj["mh_g_martingale"] = k.mh_is_g_martingale;
      kj["immersion"] = k.immersion;
      kj["m_hprime_orthogonal"] = k.m_hprime_orthogonal;
      kj["mh_vanishes"] = k.mh_vanishes;
      if (!k.mh_vanishes) kj["m_mh_not_orthogonal"] = k.m_mh_not_orthogonal;
      kj["mh"] = table_json(space, k.mh);
    } else {
      kj["applicable"] = false;
      kj["reason"] = "P is not the minimal martingale measure for H'";
    }
    rep["kusuoka"] = std::move(kj);
  }

  rep["timing_ms"] = opt.with_timing ? ordered_json(ms_since(start)) : ordered_json(nullptr);
  attach_rendering(rep);
  return out;
}

ordered_json run_simulation(const MixedModel& model, const SimulationConfig& cfg,
                            const std::string& origin, const SimulateOptions& opt) {
  Clock::time_point start = Clock::now();
  ordered_json rep;
  rep["schema"] = "martrep-report/1";
  rep["kind"] = "simulation";
  rep["origin"] = origin;
  {
    ordered_json mj;
    mj["horizon"] = model.horizon;
    mj["brownian"] = model.brownian;
    mj["eta_values"] = model.eta_values;
    mj["eta_probs"] = model.eta_probs;
    mj["tau_values"] = model.tau_values;
    mj["tau_given_eta"] = model.tau_given_eta;
    mj["tau_density_weight"] = model.tau_density_weight;
    rep["model"] = std::move(mj);
  }
  rep["config"] =
      ordered_json{{"paths", cfg.n_paths}, {"dt", cfg.dt}, {"seed", cfg.seed}};

  MixedClassification cls = classify_mixed(model);
  rep["classification"] = ordered_json{{"verdict", cls.verdict},
                                       {"totals_singular", cls.totals_singular},
                                       {"accessibles_singular", cls.accessibles_singular},
                                       {"explanation", cls.explanation}};

  PathBatch batch = simulate(model, cfg);
  rep["report_times"] = batch.report_times;

  ordered_json zj = ordered_json::array();
  for (Channel c : {Channel::kM, Channel::kHPrime, Channel::kMH}) {
    ZTestResult z = martingale_ztest(batch, c);
    ordered_json rows = ordered_json::array();
    for (const ZTestRow& row : z.rows) {
      ordered_json r;
      r["from"] = batch.report_times[row.interval];
      r["to"] = batch.report_times[row.interval + 1];
      r["cell"] = row.cell;
      r["n"] = row.count;
      if (row.skipped) {
        r["skipped"] = true;
      } else {
        r["mean"] = row.mean;
        r["se"] = row.se;
        r["z"] = std::isfinite(row.z) ? ordered_json(row.z) : ordered_json("inf");
        r["violation"] = row.violation;
      }
      rows.push_back(std::move(r));
    }
    zj.push_back(ordered_json{
        {"channel", channel_name(c)}, {"all_pass", z.all_pass}, {"rows", std::move(rows)}});
  }
  rep["ztests"] = std::move(zj);

  if (opt.payoff) {
    PayoffExpr payoff = PayoffExpr::parse(*opt.payoff);
    std::vector<Channel> triplet{Channel::kM, Channel::kHPrime, Channel::kMH};
    HedgeMcResult full = hedge_mc(batch, payoff, triplet);
    HedgeMcResult ablated = hedge_mc(batch, payoff, {Channel::kM, Channel::kHPrime});
    auto hedge_json = [&](const HedgeMcResult& h) {
      ordered_json basis = ordered_json::array();
      for (Channel c : h.basis) basis.push_back(channel_name(c));
      ordered_json cells = ordered_json::array();
      for (const auto& coef : h.coefficients) {
        cells.push_back(ordered_json{{"from", batch.report_times[coef.interval]},
                                     {"to", batch.report_times[coef.interval + 1]},
                                     {"cell", coef.cell},
                                     {"n", coef.count},
                                     {"beta", coef.beta},
                                     {"ridge", coef.ridge}});
      }
      return ordered_json{{"basis", std::move(basis)},
                          {"v0", h.v0},
                          {"rmse", h.rmse},
                          {"r_squared", h.r_squared},
                          {"cells", std::move(cells)}};
    };
    rep["hedge"] = ordered_json{{"payoff", *opt.payoff},
                                {"triplet", hedge_json(full)},
                                {"without_covariation_channel", hedge_json(ablated)}};
  }

  rep["timing_ms"] = opt.with_timing ? ordered_json(ms_since(start)) : ordered_json(nullptr);
  attach_rendering(rep);
  return rep;
}

namespace {

void render_analysis(std::ostringstream& os, const ordered_json& rep) {
  os << "== analysis: " << rep["origin"].get<std::string>() << " ==\n";
  os << "atoms: " << rep["model"]["atoms"].size()
     << ", grid points: " << rep["model"]["grid"].size() << "\n\n";

  const auto& as = rep["assumptions"];
  os << "assumptions\n";
  os << "  decoupling (D):     " << (as["decoupling"]["holds"].get<bool>() ? "holds" : "FAILS")
     << "\n";
  os << "  uniqueness:         "
     << (as["uniqueness"]["m_unique"].get<bool>() && as["uniqueness"]["n_unique"].get<bool>() ? "holds" : "FAILS")
     << "\n";
  os << "  immersion:          " << (as["immersion"]["holds"].get<bool>() ? "holds" : "fails")
     << "\n";
  if (rep.contains("mmm"))
    os << "  minimal mart. meas: " << (rep["mmm"]["holds"].get<bool>() ? "holds" : "fails")
       << "\n";
  os << "\n";

  os << "brackets mutually singular: "
     << (rep["brackets"]["mutually_singular"].get<bool>() ? "yes" : "no") << "\n";
  if (rep["brackets"].contains("witness"))
    os << "  shared mass at t=" << rep["brackets"]["witness"]["t"].dump() << " on atom "
       << rep["brackets"]["witness"]["atom"].get<std::string>() << "\n";

  if (rep["classifier"].contains("refused") && rep["classifier"]["refused"].get<bool>()) {
    os << "classifier: refused (" << rep["classifier"]["reason"].get<std::string>() << ")\n";
  } else {
    os << "classifier verdict: " << rep["classifier"]["verdict"].dump()
       << "  (direct multiplicity " << rep["classifier"]["direct_multiplicity"].dump() << ")\n";
    os << "multiplicity: " << rep["multiplicity"]["value"].dump() << " at node t="
       << rep["multiplicity"]["extremal_node"]["time"].dump() << "\n";
    const auto& k = rep["kusuoka"];
    if (k["applicable"].get<bool>()) {
      os << "kusuoka triplet: prp " << (k["prp_under_p"].get<bool>() ? "holds" : "fails")
         << ", [M,H] " << (k["mh_vanishes"].get<bool>() ? "vanishes" : "nonzero") << "\n";
    } else {
      os << "kusuoka triplet: not applicable (" << k["reason"].get<std::string>() << ")\n";
    }
  }
  os << "\n";
}

void render_simulation(std::ostringstream& os, const ordered_json& rep) {
  os << "== simulation: " << rep["origin"].get<std::string>() << " ==\n";
  os << "paths: " << rep["config"]["paths"].dump() << ", dt: " << rep["config"]["dt"].dump()
     << ", seed: " << rep["config"]["seed"].dump() << "\n";
  os << "bracket classification verdict: " << rep["classification"]["verdict"].dump() << " ("
     << rep["classification"]["explanation"].get<std::string>() << ")\n\n";
  os << "martingale z-tests (threshold 4)\n";
  for (const auto& z : rep["ztests"]) {
    os << "  " << z["channel"].get<std::string>() << ": "
       << (z["all_pass"].get<bool>() ? "pass" : "FAIL");
    for (const auto& row : z["rows"]) {
      if (row.contains("violation") && row["violation"].get<bool>())
        os << "  [t=" << row["to"].dump() << " cell " << row["cell"].get<std::string>()
           << " z=" << row["z"].dump() << "]";
    }
    os << "\n";
  }
  if (rep.contains("hedge")) {
    const auto& h = rep["hedge"];
    os << "\nhedge of " << h["payoff"].get<std::string>() << "\n";
    os << "  triplet basis:     R^2 = " << h["triplet"]["r_squared"].dump()
       << ", rmse = " << h["triplet"]["rmse"].dump() << "\n";
    os << "  without [M,H]:     R^2 = " << h["without_covariation_channel"]["r_squared"].dump()
       << "\n";
  }
  os << "\n";
}

}  // namespace

void attach_rendering(ordered_json& report) {
  std::ostringstream os;
  if (report["kind"] == "simulation")
    render_simulation(os, report);
  else
    render_analysis(os, report);
  report["rendered"] = os.str();
}

}  // namespace martrep::cli
