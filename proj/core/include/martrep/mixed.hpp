#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "martrep/enlargement.hpp"
#include "martrep/errors.hpp"
#include "martrep/scalar.hpp"
#include "martrep/space.hpp"
#include "martrep/timelaw.hpp"

namespace martrep {

// Brownian-plus-jumps model class: M = W + H^eta with eta atomic, and a
// default time tau whose law has an atomic part (correlated with eta through
// a conditional table) and an optional uniform density part independent of
// eta. All jump times sit on the simulation grid.
struct MixedModel {
  double horizon = 0;
  double dt = 1e-3;
  bool brownian = true;  // whether W feeds F

  std::vector<double> eta_values;  // strictly increasing, in (0, T]
  std::vector<double> eta_probs;   // strictly positive, sum 1

  std::vector<double> tau_values;                   // atomic support, in (0, T]
  std::vector<std::vector<double>> tau_given_eta;   // c[i][j] = P(tau = a_j | eta = e_i)
  double tau_density_weight = 0;                    // uniform on (0, T], independent of eta

  void validate() const;

  double joint(std::size_t i, std::size_t j) const { return eta_probs[i] * tau_given_eta[i][j]; }
  double tau_atom_marginal(std::size_t j) const;
  RandomTimeLaw tau_marginal_law() const;
  RandomTimeLaw eta_marginal_law() const;
};

// Built-in presets; probabilities are kept as integer fractions so the
// induced finite model can be instantiated exactly in rational mode.
struct PresetFraction {
  long long num = 0;
  long long den = 1;
};

struct PresetDef {
  std::string name;
  double horizon;
  std::vector<double> eta_values;
  std::vector<double> tau_values;
  std::vector<PresetFraction> eta_probs;
  std::vector<std::vector<PresetFraction>> tau_given_eta;  // conditional table
  PresetFraction tau_density_weight;
  bool brownian = true;
  std::string note;
};

const std::vector<PresetDef>& preset_definitions();
const PresetDef* find_preset(const std::string& name);
MixedModel make_preset(const std::string& name);
MixedModel make_mixed_model(const PresetDef& def);

// Closed-form evaluators for the triplet channels as functions of
// (t, W_t, eta, tau). Non-occurrence is encoded as +infinity.
class TripletEvaluator {
 public:
  explicit TripletEvaluator(const MixedModel& model);

  double eta_hazard(std::size_t atom_ix) const { return eta_hazard_[atom_ix]; }
  double tau_atom_hazard(std::size_t atom_ix) const { return tau_hazard_[atom_ix]; }

  double a_eta(double t, double eta) const;         // F-compensator of the eta occurrence
  double m(double t, double w, double eta) const;   // W + compensated eta occurrence
  double a_tau_h(double t, double tau) const;       // H-compensator (marginal law)
  double h(double t, double tau) const;
  double a_tau_g(double t, double eta, double tau) const;  // G-compensator
  double h_prime(double t, double eta, double tau) const;
  double mh(double t, double eta, double tau) const;       // [M, H]

  // Jump times where [M,H] can charge mass: shared atoms of eta and tau.
  const std::vector<double>& shared_atoms() const { return shared_atoms_; }
  // Atom times of the G-compensator of tau (empty iff tau is purely density).
  const std::vector<double>& g_compensator_atoms() const { return g_atoms_; }

 private:
  double class_survival(double t, double eta) const;     // sum_i pi_i S_{tau|i}(t) over the class
  double class_weight(double t, double eta) const;       // sum_i pi_i over the class
  double class_atom_mass(std::size_t j, double t, double eta) const;

  MixedModel model_;
  std::vector<double> eta_hazard_;      // marginal hazard at each eta atom
  std::vector<double> tau_hazard_;      // marginal hazard at each tau atom
  std::vector<double> tau_marg_masses_; // marginal mass at each tau atom
  std::vector<double> shared_atoms_;
  std::vector<double> g_atoms_;
};

// Yoeurp decomposition of a mixed-model martingale built from an optional
// Brownian component and the compensated occurrence of one jump variable.
struct MixedMartingaleSpec {
  double brownian_coefficient = 1.0;
  RandomTimeLaw jump_law;  // atomic part -> accessible, density part -> inaccessible
};

struct MixedYoeurpParts {
  MixedMartingaleSpec input;
  LawDecomposition law_split;
  bool parts_orthogonal = false;  // structural: the three parts never share jumps

  // Component evaluators as functions of (t, w_t, theta).
  double continuous(double t, double w) const;
  double accessible(double t, double theta) const;
  double inaccessible(double t, double theta) const;
};

MixedYoeurpParts mixed_yoeurp_parts(const MixedMartingaleSpec& spec);

// Bracket-singularity verdict for the mixed model, read off structure:
//   - total brackets overlap through Lebesgue x density or a shared reachable
//     atom with both hazards in (0,1);
//   - accessible brackets overlap only through shared atoms.
struct MixedClassification {
  int verdict = 0;
  bool totals_singular = false;
  bool accessibles_singular = false;
  std::optional<double> shared_atom;        // witness for atomic overlap
  bool lebesgue_density_overlap = false;    // witness for continuous overlap
  std::string explanation;
};

MixedClassification classify_mixed(const MixedModel& model);

// Finite grid model induced by the atomic part of a mixed model: atoms are
// the (eta, tau) pairs, the grid is {0} plus all jump times, F and H the
// natural occurrence filtrations. Requires a purely atomic tau law.
template <class S>
JointModel<S> induced_joint_model(const PresetDef& def) {
  if (!(def.tau_density_weight.num == 0))
    throw UnsupportedError("induced_joint_model: tau law must be purely atomic");
  std::vector<double> grid{0.0};
  for (double t : def.eta_values) grid.push_back(t);
  for (double t : def.tau_values) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::size_t ne = def.eta_values.size(), ntv = def.tau_values.size();
  std::vector<std::string> atom_names;
  std::vector<S> weights;
  RandomTime eta, tau;
  auto grid_ix = [&](double t) {
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (grid[k] == t) return static_cast<std::int32_t>(k);
    throw ValidationError("preset", "jump time is not a grid time");
  };
  for (std::size_t i = 0; i < ne; ++i) {
    for (std::size_t j = 0; j < ntv; ++j) {
      atom_names.push_back("eta=" + std::to_string(def.eta_values[i]) +
                           ",tau=" + std::to_string(def.tau_values[j]));
      S w = fraction<S>(def.eta_probs[i].num, def.eta_probs[i].den) *
            fraction<S>(def.tau_given_eta[i][j].num, def.tau_given_eta[i][j].den);
      weights.push_back(w);
      eta.at.push_back(grid_ix(def.eta_values[i]));
      tau.at.push_back(grid_ix(def.tau_values[j]));
    }
  }
  FiniteSpace<S> space(std::move(atom_names), std::move(grid));
  space.add_measure("P", Measure<S>(std::move(weights)));
  space.add_random_time("eta", std::move(eta));
  space.add_random_time("tau", std::move(tau));
  return make_joint_model(std::move(space), "eta", "tau", "P");
}

JointModel<double> induce_finite_model(const MixedModel& model);

}  // namespace martrep
