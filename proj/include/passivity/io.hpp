#pragma once

// State-spec parsing and JSON/CSV serialization. Floats are written with 17
// significant digits through std::to_chars, so output is locale independent.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "passivity/athermality.hpp"
#include "passivity/core.hpp"
#include "passivity/ensemble.hpp"
#include "passivity/geometry.hpp"
#include "passivity/spectra.hpp"
#include "passivity/thermo.hpp"
#include "passivity/trajectories.hpp"

namespace passivity::io {

using json = nlohmann::json;

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// NaN and infinities become null.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

/// Parsed contents of a state-spec file.
struct StateSpec {
  EnergySpectrum spectrum;
  std::optional<DiagonalState> state;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline std::vector<double> number_array(const json& doc, const char* field) {
  const auto it = doc.find(field);
  if (it == doc.end()) throw InputError(std::string("missing field \"") + field + "\"");
  if (!it->is_array()) throw InputError(std::string("field \"") + field + "\" must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& v = (*it)[i];
    if (!v.is_number())
      throw InputError(std::string("field \"") + field + "\"[" + std::to_string(i) + "] is not a number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

/// Parses {"energies": [...], "probs": [...]}. With require_probs false the
/// probs field may be omitted. Unsorted energies are sorted together with
/// their probabilities and unnormalized probabilities are rescaled; both
/// produce warnings.
inline StateSpec parse_state_spec(const std::string& text, bool require_probs = true) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError("JSON parse error at " + detail::locate(text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                     std::string(e.what()));
  }
  if (!doc.is_object()) throw InputError("state spec must be a JSON object");
  StateSpec spec;
  auto energies = detail::number_array(doc, "energies");
  if (energies.empty()) throw InputError("field \"energies\" is empty");
  std::vector<double> probs;
  const bool has_probs = doc.contains("probs");
  if (has_probs) {
    probs = detail::number_array(doc, "probs");
    if (probs.size() != energies.size())
      throw InputError("field \"probs\" has " + std::to_string(probs.size()) + " entries but \"energies\" has " +
                       std::to_string(energies.size()));
  } else if (require_probs) {
    throw InputError("missing field \"probs\"");
  }
  if (!std::is_sorted(energies.begin(), energies.end())) {
    std::vector<std::size_t> order(energies.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energies[a] < energies[b]; });
    std::vector<double> e2, p2;
    for (std::size_t i : order) {
      e2.push_back(energies[i]);
      if (has_probs) p2.push_back(probs[i]);
    }
    energies = std::move(e2);
    probs = std::move(p2);
    spec.warnings.push_back("energies were not sorted; levels reordered ascending");
  }
  spec.spectrum = EnergySpectrum(energies);
  if (has_probs) {
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (!std::isfinite(probs[i]) || probs[i] < 0.0)
        throw InputError("field \"probs\"[" + std::to_string(i) + "] must be finite and non-negative");
    const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(sum - 1.0) > tol::norm) {
      spec.warnings.push_back("probabilities summed to " + format_double(sum) + "; normalized");
      spec.state = DiagonalState::normalized(spec.spectrum, probs);
    } else {
      spec.state = DiagonalState(spec.spectrum, probs);
    }
  }
  return spec;
}

inline json to_json(const EsPoint& p) {
  return {{"epsilon", number(p.epsilon)}, {"s", number(p.s)}, {"multiplicity", p.multiplicity}};
}

inline json to_json(const EsEnsemble& ens) {
  json arr = json::array();
  for (const auto& p : ens.points) arr.push_back(to_json(p));
  return arr;
}

inline std::string ensemble_csv(const EsEnsemble& ens) {
  std::string out = "epsilon,s,multiplicity\n";
  for (const auto& p : ens.points)
    out += format_double(p.epsilon) + "," + format_double(p.s) + "," + std::to_string(p.multiplicity) + "\n";
  return out;
}

inline json to_json(const BranchDecomposition& bd) {
  json faces = json::object();
  for (const auto& [edge, pts] : bd.face_points) {
    json list = json::array();
    for (const auto& f : pts) list.push_back({{"id", f.id}, {"q", number(f.q)}});
    faces[std::to_string(edge)] = list;
  }
  json verts = json::array();
  for (std::size_t k = 0; k < bd.hull.n(); ++k) {
    json v = to_json(bd.hull.vertices[k]);
    v["id"] = bd.hull.vertex_ids[k];
    verts.push_back(v);
  }
  return {{"vertices", verts}, {"upper", bd.upper}, {"lower", bd.lower}, {"face_points", faces}};
}

inline std::string curve_csv(const EquilibriumCurve& c) {
  std::string out = "beta,E,S\n";
  for (const auto& s : c.samples)
    out += format_double(s.beta) + "," + format_double(s.point.E) + "," + format_double(s.point.S) + "\n";
  return out;
}

inline json to_json(const EquilibriumCurve& c) {
  json arr = json::array();
  for (const auto& s : c.samples) arr.push_back({{"beta", number(s.beta)}, {"E", number(s.point.E)}, {"S", number(s.point.S)}});
  return arr;
}

inline std::string grid_csv(const AthermalityGrid& g) {
  std::string out = g.rescale ? "E,S,athermality,rescaled\n" : "E,S,athermality\n";
  for (std::size_t j = 0; j < g.nS(); ++j)
    for (std::size_t i = 0; i < g.nE(); ++i) {
      const double v = g.at(i, j);
      out += format_double(g.E_axis[i]) + "," + format_double(g.S_axis[j]) + "," + format_double(v);
      if (g.rescale) out += "," + format_double(rescale_athermality(v));
      out += "\n";
    }
  return out;
}

inline json to_json(const AthermalityGrid& g) {
  const auto matrix = [&](bool rescaled) {
    json rows = json::array();
    for (std::size_t j = 0; j < g.nS(); ++j) {
      json row = json::array();
      for (std::size_t i = 0; i < g.nE(); ++i)
        row.push_back(number(rescaled ? rescale_athermality(g.at(i, j)) : g.at(i, j)));
      rows.push_back(row);
    }
    return rows;
  };
  json eq = json::array();
  for (const auto& e : g.equilibrium)
    eq.push_back({{"E", number(e[0])}, {"S", number(e[1])}, {"athermality", number(e[2])}});
  json out = {{"E_axis", g.E_axis}, {"S_axis", g.S_axis}, {"values", matrix(false)}, {"equilibrium", eq}};
  if (g.rescale) out["rescaled"] = matrix(true);
  return out;
}

inline std::string trajectory_csv(const TrajectoryRecord& r) {
  std::string out = "step,E,S,area,athermality,W_max,dS_max,a_beta_min\n";
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    out += std::to_string(i) + "," + format_double(s.point.E) + "," + format_double(s.point.S) + "," +
           format_double(s.area) + "," + format_double(s.athermality) + "," + format_double(s.W_max) + "," +
           format_double(s.dS_max) + "," + format_double(s.a_beta_min) + "\n";
  }
  return out;
}

inline json to_json(const TrajectoryRecord& r) {
  json steps = json::array();
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    steps.push_back({{"step", i},
                     {"E", number(s.point.E)},
                     {"S", number(s.point.S)},
                     {"area", number(s.area)},
                     {"athermality", number(s.athermality)},
                     {"W_max", number(s.W_max)},
                     {"dS_max", number(s.dS_max)},
                     {"a_beta_min", number(s.a_beta_min)},
                     {"h", number(s.h)},
                     {"probs", std::vector<double>(s.state.probs().begin(), s.state.probs().end())}});
  }
  return {{"spec",
           {{"tangent", {number(r.spec.tangent.E), number(r.spec.tangent.S)}},
            {"h", number(r.spec.h)},
            {"max_steps", r.spec.max_steps},
            {"adaptive", r.spec.adaptive},
            {"dist_tol", number(r.spec.dist_tol)},
            {"h_min", number(r.spec.h_min)}}},
          {"terminated", to_string(r.terminated)},
          {"resorts", r.resorts},
          {"halvings", r.halvings},
          {"steps", steps}};
}

inline json to_json(const MonotonicityReport& rep) {
  json v = json::array();
  for (const auto& x : rep.violations) v.push_back({{"step", x.step}, {"quantity", x.quantity}, {"delta", number(x.delta)}});
  return {{"pairs_checked", rep.pairs_checked}, {"violations", v}};
}

}  // namespace passivity::io
