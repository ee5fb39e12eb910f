#include "martrep/mixed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace martrep {

namespace {

bool divides(double step, double value) {
  double q = value / step;
  return std::abs(q - std::round(q)) < 1e-9;
}

// Integrated hazard of the uniform density component of a law over (0, upto]:
// the survival S(s) = 1 - sum_{atoms a <= s} m_a - w s / T is piecewise linear
// with slope -w/T, so each atom-free piece contributes log(S(start)/S(end)).
double density_hazard_integral(const std::vector<double>& atom_times,
                               const std::vector<double>& atom_masses, double density_weight,
                               double horizon, double upto) {
  if (density_weight <= 0 || upto <= 0) return 0.0;
  const double slope = density_weight / horizon;
  double acc = 0, prev = 0, atoms_dropped = 0;
  for (std::size_t j = 0; j <= atom_times.size(); ++j) {
    double next = (j < atom_times.size()) ? std::min(atom_times[j], upto) : upto;
    if (next > prev) {
      double s_start = 1.0 - atoms_dropped - slope * prev;
      double s_end = 1.0 - atoms_dropped - slope * next;
      if (s_start > 0 && s_end > 0) acc += std::log(s_start / s_end);
      prev = next;
    }
    if (j < atom_times.size() && atom_times[j] <= upto) atoms_dropped += atom_masses[j];
    if (prev >= upto) break;
  }
  return acc;
}

}  // namespace

void MixedModel::validate() const {
  if (!(horizon > 0)) throw ValidationError("mixed/horizon", "horizon must be positive");
  if (!(dt > 0) || dt > horizon) throw ValidationError("mixed/dt", "dt must lie in (0, T]");
  if (!divides(dt, horizon)) throw ValidationError("mixed/dt", "dt must divide the horizon");
  if (eta_values.empty()) throw ValidationError("mixed/eta", "eta needs at least one value");
  if (eta_values.size() != eta_probs.size())
    throw ValidationError("mixed/eta", "values/probs length mismatch");
  double pe = 0;
  for (std::size_t i = 0; i < eta_values.size(); ++i) {
    if (!(eta_values[i] > 0) || eta_values[i] > horizon)
      throw ValidationError("mixed/eta/values", "value outside (0, T]");
    if (i > 0 && !(eta_values[i] > eta_values[i - 1]))
      throw ValidationError("mixed/eta/values", "values must strictly increase");
    if (!divides(dt, eta_values[i]))
      throw ValidationError("mixed/eta/values", "jump time not commensurate with dt");
    if (!(eta_probs[i] > 0))
      throw ValidationError("mixed/eta/probs", "probabilities must be positive");
    pe += eta_probs[i];
  }
  if (std::abs(pe - 1.0) > 1e-12)
    throw ValidationError("mixed/eta/probs", "probabilities must sum to 1");

  if (tau_density_weight < 0 || tau_density_weight > 1)
    throw ValidationError("mixed/tau/density_weight", "weight outside [0, 1]");
  if (tau_given_eta.size() != eta_values.size())
    throw ValidationError("mixed/tau/given_eta", "one row per eta value required");
  for (std::size_t j = 0; j < tau_values.size(); ++j) {
    if (!(tau_values[j] > 0) || tau_values[j] > horizon)
      throw ValidationError("mixed/tau/values", "value outside (0, T]");
    if (j > 0 && !(tau_values[j] > tau_values[j - 1]))
      throw ValidationError("mixed/tau/values", "values must strictly increase");
    if (!divides(dt, tau_values[j]))
      throw ValidationError("mixed/tau/values", "jump time not commensurate with dt");
  }
  for (std::size_t i = 0; i < tau_given_eta.size(); ++i) {
    const auto& row = tau_given_eta[i];
    if (row.size() != tau_values.size())
      throw ValidationError("mixed/tau/given_eta",
                            "row length mismatch at row " + std::to_string(i));
    double s = 0;
    for (double c : row) {
      if (c < 0) throw ValidationError("mixed/tau/given_eta", "negative conditional probability");
      s += c;
    }
    // The density branch is independent of eta, so every row leaves the same
    // residual mass for it.
    if (std::abs(s + tau_density_weight - 1.0) > 1e-12)
      throw ValidationError("mixed/tau/given_eta",
                            "row " + std::to_string(i) + " plus density weight must sum to 1");
  }
}

double MixedModel::tau_atom_marginal(std::size_t j) const {
  double m = 0;
  for (std::size_t i = 0; i < eta_values.size(); ++i) m += joint(i, j);
  return m;
}

RandomTimeLaw MixedModel::tau_marginal_law() const {
  RandomTimeLaw law;
  law.horizon = horizon;
  law.atom_times = tau_values;
  law.atom_masses.resize(tau_values.size());
  for (std::size_t j = 0; j < tau_values.size(); ++j) law.atom_masses[j] = tau_atom_marginal(j);
  law.density_weight = tau_density_weight;
  return law;
}

RandomTimeLaw MixedModel::eta_marginal_law() const {
  RandomTimeLaw law;
  law.horizon = horizon;
  law.atom_times = eta_values;
  law.atom_masses = eta_probs;
  return law;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

std::vector<PresetDef> build_presets() {
  std::vector<PresetDef> defs;

  {
    // eta in {1,2,3}, tau in {2,4}, strictly positive joint law with
    // P(tau=2 | eta=2) = P(tau=2 | eta=3), so the historical measure is the
    // minimal martingale measure for H'.
    PresetDef d;
    d.name = "kusuoka-mmm";
    d.horizon = 4;
    d.eta_values = {1, 2, 3};
    d.tau_values = {2, 4};
    d.eta_probs = {{1, 5}, {3, 10}, {1, 2}};
    d.tau_given_eta = {
        {{1, 2}, {1, 2}},
        {{1, 4}, {3, 4}},
        {{1, 4}, {3, 4}},
    };
    d.note = "three-point eta, binary tau, minimal-martingale-measure condition satisfied";
    defs.push_back(d);
  }
  {
    // Same support, but P(tau=2 | eta=2) != P(tau=2 | eta=3); the [M,H]
    // channel drifts at t = 2.
    PresetDef d;
    d.name = "kusuoka-violating";
    d.horizon = 4;
    d.eta_values = {1, 2, 3};
    d.tau_values = {2, 4};
    d.eta_probs = {{1, 5}, {3, 10}, {1, 2}};
    d.tau_given_eta = {
        {{1, 2}, {1, 2}},
        {{7, 10}, {3, 10}},
        {{1, 5}, {4, 5}},
    };
    d.note = "minimal-martingale-measure condition violated at t=2";
    defs.push_back(d);
  }
  {
    // Binary eta and tau revealing at t=1, joint weights 0.1/0.2/0.3/0.4.
    PresetDef d;
    d.name = "m2";
    d.horizon = 2;
    d.eta_values = {1, 2};
    d.tau_values = {1, 2};
    d.eta_probs = {{3, 10}, {7, 10}};
    d.tau_given_eta = {
        {{1, 3}, {2, 3}},
        {{3, 7}, {4, 7}},
    };
    d.note = "2x2 joint law 0.1/0.2/0.3/0.4 on grid {0,1,2}";
    defs.push_back(d);
  }
  {
    // Purely density-law tau, independent of eta: [M,H] vanishes and the
    // pair (M, H') already spans everything.
    PresetDef d;
    d.name = "density";
    d.horizon = 4;
    d.eta_values = {1, 3};
    d.tau_values = {};
    d.eta_probs = {{2, 5}, {3, 5}};
    d.tau_given_eta = {{}, {}};
    d.tau_density_weight = {1, 1};
    d.note = "totally inaccessible default time (uniform on (0,T])";
    defs.push_back(d);
  }
  {
    // tau with atoms {2,4} plus a density component; the atoms avoid eta's
    // {1,3}, so the accessible brackets stay singular while the totals
    // overlap through the Brownian Lebesgue part.
    PresetDef d;
    d.name = "atoms-plus-density";
    d.horizon = 4;
    d.eta_values = {1, 3};
    d.tau_values = {2, 4};
    d.eta_probs = {{2, 5}, {3, 5}};
    d.tau_given_eta = {
        {{2, 5}, {2, 5}},
        {{2, 5}, {2, 5}},
    };
    d.tau_density_weight = {1, 5};
    d.note = "disjoint accessible atoms with overlapping total brackets";
    defs.push_back(d);
  }
  return defs;
}

}  // namespace

const std::vector<PresetDef>& preset_definitions() {
  static const std::vector<PresetDef> defs = build_presets();
  return defs;
}

const PresetDef* find_preset(const std::string& name) {
  for (const PresetDef& d : preset_definitions())
    if (d.name == name) return &d;
  return nullptr;
}

MixedModel make_mixed_model(const PresetDef& def) {
  MixedModel m;
  m.horizon = def.horizon;
  m.eta_values = def.eta_values;
  m.tau_values = def.tau_values;
  m.brownian = def.brownian;
  auto frac = [](const PresetFraction& f) {
    return static_cast<double>(f.num) / static_cast<double>(f.den);
  };
  for (const auto& f : def.eta_probs) m.eta_probs.push_back(frac(f));
  for (const auto& row : def.tau_given_eta) {
    std::vector<double> r;
    for (const auto& f : row) r.push_back(frac(f));
    m.tau_given_eta.push_back(std::move(r));
  }
  m.tau_density_weight = frac(def.tau_density_weight);
  m.validate();
  return m;
}

MixedModel make_preset(const std::string& name) {
  const PresetDef* def = find_preset(name);
  if (!def) throw ValidationError("preset", "unknown preset: " + name);
  return make_mixed_model(*def);
}

// ---------------------------------------------------------------------------
// Closed-form evaluators

TripletEvaluator::TripletEvaluator(const MixedModel& model) : model_(model) {
  model_.validate();

  double surv = 1.0;
  for (std::size_t i = 0; i < model_.eta_values.size(); ++i) {
    eta_hazard_.push_back(model_.eta_probs[i] / surv);
    surv -= model_.eta_probs[i];
  }

  const double w = model_.tau_density_weight;
  const double T = model_.horizon;
  double dropped = 0;
  for (std::size_t j = 0; j < model_.tau_values.size(); ++j) {
    double t = model_.tau_values[j];
    double mass = model_.tau_atom_marginal(j);
    tau_marg_masses_.push_back(mass);
    double s_minus = 1.0 - dropped - w * t / T;
    tau_hazard_.push_back(s_minus > 0 ? mass / s_minus : 0.0);
    dropped += mass;
    if (mass_positive(mass)) g_atoms_.push_back(t);
  }

  for (double s : model_.eta_values)
    for (double t : model_.tau_values)
      if (s == t) shared_atoms_.push_back(s);
}

double TripletEvaluator::a_eta(double t, double eta) const {
  double a = 0;
  for (std::size_t i = 0; i < model_.eta_values.size(); ++i) {
    double s = model_.eta_values[i];
    if (s > t) break;
    if (eta >= s) a += eta_hazard_[i];  // still alive when s arrives
  }
  return a;
}

double TripletEvaluator::m(double t, double w, double eta) const {
  double jump = (eta <= t ? 1.0 : 0.0) - a_eta(t, eta);
  return (model_.brownian ? w : 0.0) + jump;
}

double TripletEvaluator::a_tau_h(double t, double tau) const {
  double a = 0;
  for (std::size_t j = 0; j < model_.tau_values.size(); ++j) {
    double s = model_.tau_values[j];
    if (s > t) break;
    if (tau >= s) a += tau_hazard_[j];
  }
  a += density_hazard_integral(model_.tau_values, tau_marg_masses_, model_.tau_density_weight,
                               model_.horizon, std::min(t, tau));
  return a;
}

double TripletEvaluator::h(double t, double tau) const {
  return (tau <= t ? 1.0 : 0.0) - a_tau_h(t, tau);
}

double TripletEvaluator::class_weight(double t, double eta) const {
  // Weight of the eta-information class at time t-: the singleton {eta} if
  // eta occurred strictly before t, otherwise every value still possible.
  double acc = 0;
  for (std::size_t i = 0; i < model_.eta_values.size(); ++i) {
    double e = model_.eta_values[i];
    bool in_class = (eta < t) ? (e == eta) : (e >= t);
    if (in_class) acc += model_.eta_probs[i];
  }
  return acc;
}

double TripletEvaluator::class_survival(double t, double eta) const {
  // sum over the class of pi_i * P(tau > t | eta = e_i)
  const double w = model_.tau_density_weight;
  const double T = model_.horizon;
  double acc = 0;
  for (std::size_t i = 0; i < model_.eta_values.size(); ++i) {
    double e = model_.eta_values[i];
    bool in_class = (eta < t) ? (e == eta) : (e >= t);
    if (!in_class) continue;
    double s = 1.0 - w * t / T;
    for (std::size_t j = 0; j < model_.tau_values.size(); ++j)
      if (model_.tau_values[j] <= t) s -= model_.tau_given_eta[i][j];
    acc += model_.eta_probs[i] * s;
  }
  return acc;
}

double TripletEvaluator::class_atom_mass(std::size_t j, double t, double eta) const {
  double acc = 0;
  for (std::size_t i = 0; i < model_.eta_values.size(); ++i) {
    double e = model_.eta_values[i];
    bool in_class = (eta < t) ? (e == eta) : (e >= t);
    if (in_class) acc += model_.eta_probs[i] * model_.tau_given_eta[i][j];
  }
  return acc;
}

double TripletEvaluator::a_tau_g(double t, double eta, double tau) const {
  const double w = model_.tau_density_weight;
  const double T = model_.horizon;
  double upto = std::min(t, tau);
  double a = 0;

  // Atomic hazards, conditioned on the eta class observed just before each atom.
  for (std::size_t j = 0; j < model_.tau_values.size(); ++j) {
    double s = model_.tau_values[j];
    if (s > t || tau < s) continue;
    double num = class_atom_mass(j, s, eta);
    double den = 0;
    for (std::size_t i = 0; i < model_.eta_values.size(); ++i) {
      double e = model_.eta_values[i];
      bool in_class = (eta < s) ? (e == eta) : (e >= s);
      if (!in_class) continue;
      double surv = 1.0 - w * s / T;
      for (std::size_t l = 0; l < j; ++l) surv -= model_.tau_given_eta[i][l];
      den += model_.eta_probs[i] * surv;
    }
    if (den > 0) a += num / den;
  }

  if (w > 0 && upto > 0) {
    // Continuous part: integrate the class hazard piecewise between the
    // breakpoints where the class or the survival slope changes. Within a
    // piece the class survival D is linear with slope -class_weight * w / T,
    // and the integrated hazard over the piece is log(D(start)/D(end)).
    std::vector<double> breaks{0.0, upto};
    for (double e : model_.eta_values)
      if (e < upto) breaks.push_back(e);
    for (double s : model_.tau_values)
      if (s < upto) breaks.push_back(s);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
      double u = breaks[b], v = breaks[b + 1];
      double mid = 0.5 * (u + v);
      double kslope = class_weight(mid, eta) * w / T;
      if (kslope <= 0) continue;
      double d_mid = class_survival(mid, eta);
      double d_u = d_mid + kslope * (mid - u);
      double d_v = d_mid - kslope * (v - mid);
      if (d_u > 0 && d_v > 0) a += std::log(d_u / d_v);
    }
  }
  return a;
}

double TripletEvaluator::h_prime(double t, double eta, double tau) const {
  return (tau <= t ? 1.0 : 0.0) - a_tau_g(t, eta, tau);
}

double TripletEvaluator::mh(double t, double eta, double tau) const {
  double acc = 0;
  for (double s : shared_atoms_) {
    if (s > t) break;
    std::size_t ei = 0, tj = 0;
    while (model_.eta_values[ei] != s) ++ei;
    while (model_.tau_values[tj] != s) ++tj;
    double dm = (eta == s ? 1.0 : 0.0) - (eta >= s ? eta_hazard_[ei] : 0.0);
    double dh = (tau == s ? 1.0 : 0.0) - (tau >= s ? tau_hazard_[tj] : 0.0);
    acc += dm * dh;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Yoeurp decomposition on the mixed class

double MixedYoeurpParts::continuous(double t, double w) const {
  (void)t;
  return input.brownian_coefficient * w;
}

double MixedYoeurpParts::accessible(double t, double theta) const {
  const RandomTimeLaw& law = input.jump_law;
  double occ = 0, comp = 0;
  double dropped = 0;
  for (std::size_t j = 0; j < law.atom_times.size(); ++j) {
    double s = law.atom_times[j];
    double s_minus = 1.0 - dropped - law.density_weight * s / law.horizon;
    double hazard = s_minus > 0 ? law.atom_masses[j] / s_minus : 0.0;
    if (s <= t && theta == s) occ = 1.0;
    if (s <= t && theta >= s) comp += hazard;
    dropped += law.atom_masses[j];
  }
  return occ - comp;
}

double MixedYoeurpParts::inaccessible(double t, double theta) const {
  const RandomTimeLaw& law = input.jump_law;
  if (law.density_weight <= 0) return 0.0;
  bool density_landing = theta <= t;
  for (double s : law.atom_times)
    if (theta == s) density_landing = false;  // atomic landings belong to the accessible part
  double comp = density_hazard_integral(law.atom_times, law.atom_masses, law.density_weight,
                                        law.horizon, std::min(t, theta));
  return (density_landing ? 1.0 : 0.0) - comp;
}

MixedYoeurpParts mixed_yoeurp_parts(const MixedMartingaleSpec& spec) {
  spec.jump_law.validate();
  MixedYoeurpParts parts;
  parts.input = spec;
  parts.law_split = classify_time(spec.jump_law);
  // Continuous vs jump parts never share moves; the accessible part jumps
  // only at atoms, the inaccessible part only off them.
  parts.parts_orthogonal = true;
  return parts;
}

// ---------------------------------------------------------------------------
// Bracket-singularity classification on the mixed class

MixedClassification classify_mixed(const MixedModel& model) {
  model.validate();
  TripletEvaluator eval(model);
  MixedClassification r;

  // Reachable shared atoms with both hazards in (0,1) carry covariation mass.
  std::optional<double> shared;
  for (double s : eval.shared_atoms()) {
    std::size_t ei = 0, tj = 0;
    while (model.eta_values[ei] != s) ++ei;
    while (model.tau_values[tj] != s) ++tj;
    double he = eval.eta_hazard(ei), ht = eval.tau_atom_hazard(tj);
    bool eta_random = he > 1e-15 && he < 1.0 - 1e-15;
    bool tau_random = ht > 1e-15 && ht < 1.0 - 1e-15;
    double joint_reach = 0;  // P(eta >= s, tau >= s)
    for (std::size_t i = 0; i < model.eta_values.size(); ++i) {
      if (model.eta_values[i] < s) continue;
      double surv = 1.0 - model.tau_density_weight * s / model.horizon;
      for (std::size_t l = 0; l < tj; ++l) surv -= model.tau_given_eta[i][l];
      joint_reach += model.eta_probs[i] * surv;
    }
    if (eta_random && tau_random && joint_reach > 1e-15) {
      shared = s;
      break;
    }
  }
  r.shared_atom = shared;
  r.accessibles_singular = !shared.has_value();
  r.lebesgue_density_overlap = model.brownian && model.tau_density_weight > 0;
  r.totals_singular = r.accessibles_singular && !r.lebesgue_density_overlap;

  if (r.totals_singular) {
    r.verdict = 1;
    r.explanation = "total brackets mutually singular";
  } else if (r.accessibles_singular) {
    r.verdict = 2;
    r.explanation =
        "total brackets overlap (Lebesgue vs density) but accessible brackets are singular";
  } else {
    r.verdict = 3;
    r.explanation = "accessible brackets share the atom t=" + std::to_string(*shared);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Induced finite model

JointModel<double> induce_finite_model(const MixedModel& model) {
  model.validate();
  if (model.tau_density_weight > 0)
    throw UnsupportedError("induce_finite_model: tau law must be purely atomic");

  std::vector<double> grid{0.0};
  for (double t : model.eta_values) grid.push_back(t);
  for (double t : model.tau_values) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<std::string> names;
  std::vector<double> weights;
  RandomTime eta, tau;
  auto grid_ix = [&](double t) {
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (grid[k] == t) return static_cast<std::int32_t>(k);
    throw ValidationError("mixed", "jump time is not a grid time");
  };
  for (std::size_t i = 0; i < model.eta_values.size(); ++i)
    for (std::size_t j = 0; j < model.tau_values.size(); ++j) {
      names.push_back("eta=" + std::to_string(model.eta_values[i]) +
                      ",tau=" + std::to_string(model.tau_values[j]));
      weights.push_back(model.joint(i, j));
      eta.at.push_back(grid_ix(model.eta_values[i]));
      tau.at.push_back(grid_ix(model.tau_values[j]));
    }
  FiniteSpace<double> space(std::move(names), std::move(grid));
  space.add_measure("P", Measure<double>(std::move(weights)));
  space.add_random_time("eta", std::move(eta));
  space.add_random_time("tau", std::move(tau));
  return make_joint_model(std::move(space), "eta", "tau", "P");
}

}  // namespace martrep
