#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "martrep/errors.hpp"

namespace martrep {

// Law of a random time on (0, T]: finitely many atoms plus a uniform density
// component. Atomic mass is the accessible part of the time, density mass the
// totally inaccessible part; anything left over sits at +infinity.
struct RandomTimeLaw {
  double horizon = 0;
  std::vector<double> atom_times;   // strictly increasing, in (0, T]
  std::vector<double> atom_masses;  // same length, each > 0
  double density_weight = 0;        // uniform on (0, T]

  double atomic_mass() const {
    double s = 0;
    for (double m : atom_masses) s += m;
    return s;
  }
  double never_mass() const { return 1.0 - atomic_mass() - density_weight; }

  void validate(const std::string& where = "time law") const {
    if (!(horizon > 0)) throw ValidationError(where + "/horizon", "horizon must be positive");
    if (atom_times.size() != atom_masses.size())
      throw ValidationError(where, "atom times/masses length mismatch");
    for (std::size_t i = 0; i < atom_times.size(); ++i) {
      if (!(atom_times[i] > 0) || atom_times[i] > horizon)
        throw ValidationError(where + "/atom_times", "atom outside (0, T]");
      if (i > 0 && !(atom_times[i] > atom_times[i - 1]))
        throw ValidationError(where + "/atom_times", "atoms must strictly increase");
      if (!(atom_masses[i] > 0))
        throw ValidationError(where + "/atom_masses", "atom mass must be positive");
    }
    if (density_weight < 0) throw ValidationError(where + "/density_weight", "negative weight");
    double total = atomic_mass() + density_weight;
    if (total > 1.0 + 1e-12) throw ValidationError(where, "total mass exceeds 1");
  }
};

struct LawDecomposition {
  RandomTimeLaw accessible;    // the atomic component
  RandomTimeLaw inaccessible;  // the density component
  double accessible_mass = 0;
  double inaccessible_mass = 0;
};

inline LawDecomposition classify_time(const RandomTimeLaw& law) {
  law.validate();
  LawDecomposition d;
  d.accessible.horizon = law.horizon;
  d.accessible.atom_times = law.atom_times;
  d.accessible.atom_masses = law.atom_masses;
  d.accessible_mass = law.atomic_mass();
  d.inaccessible.horizon = law.horizon;
  d.inaccessible.density_weight = law.density_weight;
  d.inaccessible_mass = law.density_weight;
  return d;
}

}  // namespace martrep
