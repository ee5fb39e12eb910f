#include "martrep/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "martrep/errors.hpp"

namespace martrep {

namespace {

using json = nlohmann::json;

json parse_json(const std::string& text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ValidationError("/", "document is not valid JSON");
  return doc;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json& require(const json& doc, const std::string& key, const std::string& path) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(path + "/" + key, "missing required field");
  return *it;
}

double require_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ValidationError(path, "expected a number");
  return v.get<double>();
}

}  // namespace

JointModel<double> SpaceDocument::joint_model() const {
  if (!has_roles())
    throw ContractError(
        "generators not declared: the model file needs roles/f_time, roles/h_time and "
        "roles/measure");
  return make_joint_model(space, *f_time, *h_time, *measure);
}

SpaceDocument load_model_text(const std::string& text) {
  json doc = parse_json(text);
  if (!doc.is_object()) throw ValidationError("/", "top-level value must be an object");

  const json& atoms_j = require(doc, "atoms", "");
  if (!atoms_j.is_array() || atoms_j.empty())
    throw ValidationError("/atoms", "expected a non-empty array of atom ids");
  std::vector<std::string> atoms;
  std::map<std::string, AtomIx> atom_ix;
  for (std::size_t i = 0; i < atoms_j.size(); ++i) {
    if (!atoms_j[i].is_string())
      throw ValidationError("/atoms/" + std::to_string(i), "atom ids must be strings");
    std::string id = atoms_j[i].get<std::string>();
    if (atom_ix.count(id))
      throw ValidationError("/atoms/" + std::to_string(i), "duplicate atom id '" + id + "'");
    atom_ix[id] = static_cast<AtomIx>(atoms.size());
    atoms.push_back(std::move(id));
  }

  const json& grid_j = require(doc, "grid", "");
  if (!grid_j.is_array() || grid_j.empty())
    throw ValidationError("/grid", "expected a non-empty array of times");
  std::vector<double> grid;
  for (std::size_t k = 0; k < grid_j.size(); ++k)
    grid.push_back(require_number(grid_j[k], "/grid/" + std::to_string(k)));

  SpaceDocument out{FiniteSpace<double>(atoms, grid), {}, {}, {}};
  FiniteSpace<double>& space = out.space;

  if (doc.contains("measures")) {
    const json& measures = doc["measures"];
    if (!measures.is_object()) throw ValidationError("/measures", "expected an object");
    for (auto it = measures.begin(); it != measures.end(); ++it) {
      std::string path = "/measures/" + it.key();
      if (!it.value().is_object()) throw ValidationError(path, "expected atom -> weight map");
      Measure<double> m;
      m.w.assign(atoms.size(), 0.0);
      for (auto w = it.value().begin(); w != it.value().end(); ++w) {
        auto a = atom_ix.find(w.key());
        if (a == atom_ix.end()) throw ValidationError(path + "/" + w.key(), "unknown atom id");
        m.w[a->second] = require_number(w.value(), path + "/" + w.key());
      }
      space.add_measure(it.key(), std::move(m));
    }
  }

  if (doc.contains("random_times")) {
    const json& times = doc["random_times"];
    if (!times.is_object()) throw ValidationError("/random_times", "expected an object");
    for (auto it = times.begin(); it != times.end(); ++it) {
      std::string path = "/random_times/" + it.key();
      if (!it.value().is_object()) throw ValidationError(path, "expected atom -> time map");
      RandomTime t;
      t.at.assign(atoms.size(), RandomTime::kNever);
      std::vector<bool> seen(atoms.size(), false);
      for (auto v = it.value().begin(); v != it.value().end(); ++v) {
        auto a = atom_ix.find(v.key());
        if (a == atom_ix.end()) throw ValidationError(path + "/" + v.key(), "unknown atom id");
        seen[a->second] = true;
        if (v.value().is_null() || (v.value().is_string() && v.value() == "inf")) {
          t.at[a->second] = RandomTime::kNever;
        } else {
          double tv = require_number(v.value(), path + "/" + v.key());
          bool found = false;
          for (std::size_t k = 0; k < grid.size(); ++k)
            if (grid[k] == tv) {
              t.at[a->second] = static_cast<std::int32_t>(k);
              found = true;
            }
          if (!found)
            throw ValidationError(path + "/" + v.key(),
                                  "time value is neither a grid time nor \"inf\"");
        }
      }
      for (std::size_t a = 0; a < atoms.size(); ++a)
        if (!seen[a]) throw ValidationError(path, "missing value for atom '" + atoms[a] + "'");
      space.add_random_time(it.key(), std::move(t));
    }
  }

  if (doc.contains("filtrations")) {
    const json& filts = doc["filtrations"];
    if (!filts.is_object()) throw ValidationError("/filtrations", "expected an object");
    for (auto it = filts.begin(); it != filts.end(); ++it) {
      std::string path = "/filtrations/" + it.key();
      if (!it.value().is_array())
        throw ValidationError(path, "expected an array of partitions, one per grid time");
      Filtration f;
      for (std::size_t k = 0; k < it.value().size(); ++k) {
        const json& part = it.value()[k];
        std::string ppath = path + "/" + std::to_string(k);
        if (!part.is_array()) throw ValidationError(ppath, "expected an array of cells");
        std::vector<std::vector<AtomIx>> cells;
        for (std::size_t c = 0; c < part.size(); ++c) {
          const json& cell = part[c];
          std::string cpath = ppath + "/" + std::to_string(c);
          if (!cell.is_array()) throw ValidationError(cpath, "expected an array of atom ids");
          std::vector<AtomIx> ixs;
          for (const auto& id : cell) {
            if (!id.is_string()) throw ValidationError(cpath, "atom ids must be strings");
            auto a = atom_ix.find(id.get<std::string>());
            if (a == atom_ix.end())
              throw ValidationError(cpath, "unknown atom id '" + id.get<std::string>() + "'");
            ixs.push_back(a->second);
          }
          cells.push_back(std::move(ixs));
        }
        f.levels.push_back(Partition::from_cells(atoms.size(), cells, ppath));
      }
      space.add_filtration(it.key(), std::move(f));
    }
  }

  if (doc.contains("roles")) {
    const json& roles = doc["roles"];
    if (!roles.is_object()) throw ValidationError("/roles", "expected an object");
    auto get_role = [&](const char* key) -> std::optional<std::string> {
      if (!roles.contains(key)) return std::nullopt;
      if (!roles[key].is_string())
        throw ValidationError(std::string("/roles/") + key, "expected a string");
      return roles[key].get<std::string>();
    };
    out.f_time = get_role("f_time");
    out.h_time = get_role("h_time");
    out.measure = get_role("measure");
    if (out.f_time && !space.has_random_time(*out.f_time))
      throw ValidationError("/roles/f_time", "unknown random time '" + *out.f_time + "'");
    if (out.h_time && !space.has_random_time(*out.h_time))
      throw ValidationError("/roles/h_time", "unknown random time '" + *out.h_time + "'");
    if (out.measure && !space.has_measure(*out.measure))
      throw ValidationError("/roles/measure", "unknown measure '" + *out.measure + "'");
  }

  return out;
}

SpaceDocument load_model_file(const std::string& path) {
  return load_model_text(read_file(path));
}

MixedModel load_mixed_text(const std::string& text) {
  json doc = parse_json(text);
  if (!doc.is_object()) throw ValidationError("/", "top-level value must be an object");
  MixedModel m;
  m.horizon = require_number(require(doc, "horizon", ""), "/horizon");
  if (doc.contains("dt")) m.dt = require_number(doc["dt"], "/dt");
  if (doc.contains("brownian")) {
    if (!doc["brownian"].is_boolean()) throw ValidationError("/brownian", "expected a boolean");
    m.brownian = doc["brownian"].get<bool>();
  }

  const json& eta = require(doc, "eta", "");
  const json& values = require(eta, "values", "/eta");
  const json& probs = require(eta, "probs", "/eta");
  if (!values.is_array() || !probs.is_array())
    throw ValidationError("/eta", "values and probs must be arrays");
  for (std::size_t i = 0; i < values.size(); ++i)
    m.eta_values.push_back(require_number(values[i], "/eta/values/" + std::to_string(i)));
  for (std::size_t i = 0; i < probs.size(); ++i)
    m.eta_probs.push_back(require_number(probs[i], "/eta/probs/" + std::to_string(i)));

  const json& tau = require(doc, "tau", "");
  if (tau.contains("values")) {
    const json& tv = tau["values"];
    if (!tv.is_array()) throw ValidationError("/tau/values", "expected an array");
    for (std::size_t j = 0; j < tv.size(); ++j)
      m.tau_values.push_back(require_number(tv[j], "/tau/values/" + std::to_string(j)));
  }
  if (tau.contains("density_weight"))
    m.tau_density_weight = require_number(tau["density_weight"], "/tau/density_weight");
  const json& given = require(tau, "given_eta", "/tau");
  if (!given.is_array()) throw ValidationError("/tau/given_eta", "expected an array of rows");
  for (std::size_t i = 0; i < given.size(); ++i) {
    const json& row = given[i];
    std::string rpath = "/tau/given_eta/" + std::to_string(i);
    if (!row.is_array()) throw ValidationError(rpath, "expected an array");
    std::vector<double> r;
    for (std::size_t j = 0; j < row.size(); ++j)
      r.push_back(require_number(row[j], rpath + "/" + std::to_string(j)));
    m.tau_given_eta.push_back(std::move(r));
  }
  m.validate();
  return m;
}

MixedModel load_mixed_file(const std::string& path) { return load_mixed_text(read_file(path)); }

DocumentKind sniff_document_kind(const std::string& text) {
  json doc = parse_json(text);
  if (doc.is_object() && doc.contains("schema") && doc["schema"].is_string()) {
    std::string s = doc["schema"].get<std::string>();
    if (s.rfind("martrep-mixed", 0) == 0) return DocumentKind::kMixedModel;
    if (s.rfind("martrep-model", 0) == 0) return DocumentKind::kFiniteModel;
  }
  if (doc.is_object() && doc.contains("eta") && doc.contains("tau") && doc.contains("horizon"))
    return DocumentKind::kMixedModel;
  return DocumentKind::kFiniteModel;
}

DocumentKind sniff_document_file(const std::string& path) {
  return sniff_document_kind(read_file(path));
}

}  // namespace martrep
