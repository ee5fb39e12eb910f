#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "martrep/errors.hpp"
#include "martrep/scalar.hpp"

namespace martrep {

using AtomIx = std::uint32_t;

// Partition of the atom set, canonicalized so that cells are numbered by
// first appearance when scanning atoms in index order. Two partitions are
// equal iff they induce the same grouping.
class Partition {
 public:
  Partition() = default;

  static Partition trivial(std::size_t n_atoms) {
    return from_keys(std::vector<int>(n_atoms, 0));
  }

  static Partition discrete(std::size_t n_atoms) {
    std::vector<int> keys(n_atoms);
    for (std::size_t i = 0; i < n_atoms; ++i) keys[i] = static_cast<int>(i);
    return from_keys(keys);
  }

  template <class Key>
  static Partition from_keys(const std::vector<Key>& keys) {
    Partition p;
    p.cell_of_.assign(keys.size(), 0);
    std::map<Key, std::uint32_t> ids;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto [it, inserted] = ids.try_emplace(keys[i], 0);
      if (inserted) {
        it->second = static_cast<std::uint32_t>(p.cells_.size());
        p.cells_.emplace_back();
      }
      p.cell_of_[i] = it->second;
      p.cells_[it->second].push_back(static_cast<AtomIx>(i));
    }
    p.renumber_by_first_atom();
    return p;
  }

  static Partition from_cells(std::size_t n_atoms, const std::vector<std::vector<AtomIx>>& cells,
                              const std::string& where = "partition") {
    std::vector<int> keys(n_atoms, -1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) throw ValidationError(where, "empty cell");
      for (AtomIx a : cells[c]) {
        if (a >= n_atoms) throw ValidationError(where, "atom index out of range");
        if (keys[a] != -1) throw ValidationError(where, "atom assigned to two cells");
        keys[a] = static_cast<int>(c);
      }
    }
    for (std::size_t a = 0; a < n_atoms; ++a)
      if (keys[a] == -1) throw ValidationError(where, "atom missing from every cell");
    return from_keys(keys);
  }

  std::size_t n_atoms() const { return cell_of_.size(); }
  std::size_t cell_count() const { return cells_.size(); }
  std::uint32_t cell_of(AtomIx a) const { return cell_of_[a]; }
  const std::vector<AtomIx>& cell(std::size_t c) const { return cells_[c]; }
  const std::vector<std::vector<AtomIx>>& cells() const { return cells_; }

  bool is_trivial() const { return cells_.size() <= 1; }

  // True if every cell of *this lies inside a cell of the coarser partition.
  bool refines(const Partition& coarser) const {
    if (coarser.n_atoms() != n_atoms()) return false;
    for (const auto& c : cells_) {
      std::uint32_t target = coarser.cell_of(c.front());
      for (AtomIx a : c)
        if (coarser.cell_of(a) != target) return false;
    }
    return true;
  }

  // Common refinement (cell-wise intersection).
  Partition join(const Partition& other) const {
    if (other.n_atoms() != n_atoms())
      throw ContractError("partition join: atom count mismatch");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> keys(n_atoms());
    for (std::size_t a = 0; a < n_atoms(); ++a)
      keys[a] = {cell_of_[a], other.cell_of_[static_cast<AtomIx>(a)]};
    return from_keys(keys);
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.cell_of_ == b.cell_of_;
  }

 private:
  void renumber_by_first_atom() {
    std::vector<std::uint32_t> order(cells_.size());
    std::vector<std::uint32_t> rank(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) order[c] = static_cast<std::uint32_t>(c);
    std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) {
      return cells_[x].front() < cells_[y].front();
    });
    std::vector<std::vector<AtomIx>> new_cells(cells_.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      rank[order[r]] = static_cast<std::uint32_t>(r);
      new_cells[r] = std::move(cells_[order[r]]);
    }
    cells_ = std::move(new_cells);
    for (auto& c : cell_of_) c = rank[c];
  }

  std::vector<std::uint32_t> cell_of_;
  std::vector<std::vector<AtomIx>> cells_;
};

// Probability weights per atom. Equivalence of two measures means identical
// zero sets; "a.s." statements quantify over atoms of positive weight.
template <class S>
struct Measure {
  std::vector<S> w;

  Measure() = default;
  explicit Measure(std::vector<S> weights) : w(std::move(weights)) {}

  std::size_t n_atoms() const { return w.size(); }

  void validate(const std::string& where = "measure") const {
    S total(0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] < S(0)) throw ValidationError(where, "negative weight at atom " + std::to_string(i));
      total += w[i];
    }
    if (!nearly_equal<S>(total, S(1)))
      throw ValidationError(where, "weights sum to " + scalar_to_string(total) + ", expected 1");
  }

  bool positive(AtomIx a) const { return mass_positive(w[a]); }

  bool equivalent(const Measure& other) const {
    if (other.w.size() != w.size()) return false;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (mass_positive(w[i]) != mass_positive(other.w[i])) return false;
    return true;
  }
};

// One partition per grid time; later partitions refine earlier ones.
struct Filtration {
  std::vector<Partition> levels;

  std::size_t n_times() const { return levels.size(); }
  const Partition& at(std::size_t k) const { return levels[k]; }

  void validate(std::size_t n_atoms, std::size_t n_times,
                const std::string& where = "filtration") const {
    if (levels.size() != n_times)
      throw ValidationError(where, "expected one partition per grid time");
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (levels[k].n_atoms() != n_atoms)
        throw ValidationError(where + "/" + std::to_string(k), "atom count mismatch");
      if (k > 0 && !levels[k].refines(levels[k - 1]))
        throw ValidationError(where + "/" + std::to_string(k),
                              "partition does not refine the previous one");
    }
  }
};

inline Filtration join_filtrations(const Filtration& a, const Filtration& b) {
  if (a.n_times() != b.n_times())
    throw ValidationError("filtrations", "grid mismatch between joined filtrations");
  Filtration g;
  g.levels.reserve(a.n_times());
  for (std::size_t k = 0; k < a.n_times(); ++k) g.levels.push_back(a.at(k).join(b.at(k)));
  return g;
}

// Random time taking values on the grid, with kNever standing for "after T"
// (the +infinity sentinel).
struct RandomTime {
  static constexpr std::int32_t kNever = -1;

  std::vector<std::int32_t> at;  // grid index per atom, or kNever

  std::size_t n_atoms() const { return at.size(); }
  bool occurred_by(AtomIx a, std::size_t k) const {
    return at[a] != kNever && static_cast<std::size_t>(at[a]) <= k;
  }
  bool occurs_at(AtomIx a, std::size_t k) const {
    return at[a] != kNever && static_cast<std::size_t>(at[a]) == k;
  }

  void validate(std::size_t n_atoms, std::size_t n_times,
                const std::string& where = "random time") const {
    if (at.size() != n_atoms) throw ValidationError(where, "atom count mismatch");
    for (std::size_t a = 0; a < at.size(); ++a) {
      if (at[a] != kNever && (at[a] < 0 || static_cast<std::size_t>(at[a]) >= n_times))
        throw ValidationError(where + "/" + std::to_string(a),
                              "time value outside the grid and not the +inf sentinel");
    }
  }
};

// Natural filtration of the occurrence process: at t_k atoms are grouped by
// the observed history (the value of the time if it already occurred, one
// shared "not yet" class otherwise).
inline Filtration natural_filtration(std::size_t n_times, const RandomTime& time) {
  Filtration f;
  f.levels.reserve(n_times);
  for (std::size_t k = 0; k < n_times; ++k) {
    std::vector<std::int64_t> keys(time.n_atoms());
    for (std::size_t a = 0; a < time.n_atoms(); ++a) {
      AtomIx ai = static_cast<AtomIx>(a);
      keys[a] = time.occurred_by(ai, k) ? time.at[ai] : -1;
    }
    f.levels.push_back(Partition::from_keys(keys));
  }
  return f;
}

// Stopping-time property: {time <= t_k} is a union of cells at every level.
inline bool is_stopping_time(const RandomTime& time, const Filtration& f) {
  for (std::size_t k = 0; k < f.n_times(); ++k) {
    for (const auto& cell : f.at(k).cells()) {
      bool first = time.occurred_by(cell.front(), k);
      for (AtomIx a : cell)
        if (time.occurred_by(a, k) != first) return false;
    }
  }
  return true;
}

enum class Kind { kAdapted, kPredictable };

// A value per (atom, grid time). Adapted means constant on cells of the
// partition at the same time; predictable means constant on cells at the
// previous time (at t_0, deterministic).
template <class S>
struct ProcessTable {
  std::size_t n_atoms = 0;
  std::size_t n_times = 0;
  std::vector<S> v;  // row-major: atom * n_times + k
  Kind kind = Kind::kAdapted;

  ProcessTable() = default;
  ProcessTable(std::size_t atoms, std::size_t times, S init = S(0), Kind kind_flag = Kind::kAdapted)
      : n_atoms(atoms), n_times(times), v(atoms * times, init), kind(kind_flag) {}

  S& at(AtomIx a, std::size_t k) { return v[a * n_times + k]; }
  const S& at(AtomIx a, std::size_t k) const { return v[a * n_times + k]; }

  S increment(AtomIx a, std::size_t k) const { return at(a, k) - at(a, k - 1); }

  friend bool operator==(const ProcessTable& x, const ProcessTable& y) {
    return x.n_atoms == y.n_atoms && x.n_times == y.n_times && x.v == y.v;
  }
};

template <class S>
bool constant_on_cells(const ProcessTable<S>& x, std::size_t k, const Partition& p) {
  for (const auto& cell : p.cells()) {
    const S& ref = x.at(cell.front(), k);
    for (AtomIx a : cell)
      if (!nearly_equal<S>(x.at(a, k), ref)) return false;
  }
  return true;
}

template <class S>
bool is_adapted(const ProcessTable<S>& x, const Filtration& f) {
  for (std::size_t k = 0; k < x.n_times; ++k)
    if (!constant_on_cells(x, k, f.at(k))) return false;
  return true;
}

template <class S>
bool is_predictable(const ProcessTable<S>& x, const Filtration& f) {
  if (x.n_times == 0) return true;
  if (!constant_on_cells(x, 0, Partition::trivial(x.n_atoms))) return false;
  for (std::size_t k = 1; k < x.n_times; ++k)
    if (!constant_on_cells(x, k, f.at(k - 1))) return false;
  return true;
}

template <class S>
ProcessTable<S> occurrence_process(std::size_t n_times, const RandomTime& time) {
  ProcessTable<S> x(time.n_atoms(), n_times, S(0), Kind::kAdapted);
  for (AtomIx a = 0; a < time.n_atoms(); ++a)
    for (std::size_t k = 0; k < n_times; ++k)
      if (time.occurred_by(a, k)) x.at(a, k) = S(1);
  return x;
}

enum class ZeroCellPolicy {
  kThrow,     // degenerate cells are an error
  kZeroFill,  // null cells get value 0 (harmless under a.s. semantics)
};

// Measure-weighted cell average, constant per cell. The backbone of every
// compensator and bracket computation.
template <class S>
std::vector<S> cond_exp(const std::vector<S>& rv, const Partition& p, const Measure<S>& m,
                        ZeroCellPolicy policy = ZeroCellPolicy::kThrow) {
  if (rv.size() != p.n_atoms() || m.n_atoms() != p.n_atoms())
    throw ContractError("cond_exp: dimension mismatch");
  std::vector<S> out(rv.size(), S(0));
  for (std::size_t c = 0; c < p.cell_count(); ++c) {
    const auto& cell = p.cell(c);
    S num(0), den(0);
    for (AtomIx a : cell) {
      num += m.w[a] * rv[a];
      den += m.w[a];
    }
    S value(0);
    if (den == S(0)) {
      if (policy == ZeroCellPolicy::kThrow)
        throw DegenerateCellError("cond_exp: cell " + std::to_string(c) +
                                  " (first atom " + std::to_string(cell.front()) +
                                  ") has total measure zero");
    } else {
      value = num / den;
    }
    for (AtomIx a : cell) out[a] = value;
  }
  return out;
}

template <class S>
S expectation(const std::vector<S>& rv, const Measure<S>& m) {
  S acc(0);
  for (std::size_t a = 0; a < rv.size(); ++a) acc += m.w[a] * rv[a];
  return acc;
}

// Exact finite filtered probability space: named atoms, a strictly increasing
// time grid, and registries of filtrations, measures and random times.
// Immutable once populated; registration happens single-threaded at setup.
template <class S>
class FiniteSpace {
 public:
  FiniteSpace() = default;
  FiniteSpace(std::vector<std::string> atom_names, std::vector<double> grid)
      : atom_names_(std::move(atom_names)), grid_(std::move(grid)) {
    if (atom_names_.empty()) throw ValidationError("atoms", "at least one atom required");
    if (grid_.empty()) throw ValidationError("grid", "at least one grid time required");
    for (std::size_t k = 1; k < grid_.size(); ++k)
      if (!(grid_[k] > grid_[k - 1]))
        throw ValidationError("grid/" + std::to_string(k), "grid times must strictly increase");
  }

  std::size_t n_atoms() const { return atom_names_.size(); }
  std::size_t n_times() const { return grid_.size(); }
  const std::vector<double>& grid() const { return grid_; }
  double time(std::size_t k) const { return grid_[k]; }
  const std::vector<std::string>& atom_names() const { return atom_names_; }
  const std::string& atom_name(AtomIx a) const { return atom_names_[a]; }

  void add_filtration(const std::string& name, Filtration f) {
    f.validate(n_atoms(), n_times(), "filtrations/" + name);
    filtrations_[name] = std::move(f);
  }

  void add_measure(const std::string& name, Measure<S> m) {
    if (m.n_atoms() != n_atoms())
      throw ValidationError("measures/" + name, "atom count mismatch");
    m.validate("measures/" + name);
    measures_[name] = std::move(m);
  }

  void add_random_time(const std::string& name, RandomTime t) {
    t.validate(n_atoms(), n_times(), "random_times/" + name);
    times_[name] = std::move(t);
  }

  bool has_filtration(const std::string& name) const { return filtrations_.count(name) > 0; }
  bool has_measure(const std::string& name) const { return measures_.count(name) > 0; }
  bool has_random_time(const std::string& name) const { return times_.count(name) > 0; }

  const Filtration& filtration(const std::string& name) const {
    auto it = filtrations_.find(name);
    if (it == filtrations_.end()) throw ContractError("unknown filtration: " + name);
    return it->second;
  }
  const Measure<S>& measure(const std::string& name) const {
    auto it = measures_.find(name);
    if (it == measures_.end()) throw ContractError("unknown measure: " + name);
    return it->second;
  }
  const RandomTime& random_time(const std::string& name) const {
    auto it = times_.find(name);
    if (it == times_.end()) throw ContractError("unknown random time: " + name);
    return it->second;
  }

  const std::map<std::string, Filtration>& filtrations() const { return filtrations_; }
  const std::map<std::string, Measure<S>>& measures() const { return measures_; }
  const std::map<std::string, RandomTime>& random_times() const { return times_; }

  std::size_t grid_index(double t, const std::string& where = "time") const {
    for (std::size_t k = 0; k < grid_.size(); ++k)
      if (grid_[k] == t) return k;
    throw ValidationError(where, "value is not a grid time");
  }

 private:
  std::vector<std::string> atom_names_;
  std::vector<double> grid_;
  std::map<std::string, Filtration> filtrations_;
  std::map<std::string, Measure<S>> measures_;
  std::map<std::string, RandomTime> times_;
};

}  // namespace martrep
