#pragma once

// Command-line front end. run() takes explicit streams so the tests can drive
// it in-process.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "passivity/io.hpp"
#include "passivity/passivity.hpp"

namespace passivity::cli {

inline constexpr const char* tool_name = "passivity";
inline constexpr const char* tool_version = "0.1.0";

enum Exit : int { ok = 0, violation = 1, input_error = 2 };

using io::json;

struct Globals {
  std::string format = "csv";
  std::string out;
  std::uint64_t seed = 0;
  double tol_order = tol::merge;
  bool quiet = false;
};

struct Output {
  json data;             // JSON result body
  std::string csv;       // CSV body including its header row
  int exit_code = ok;
  std::vector<std::string> notes;  // human-readable lines for stderr
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string kv_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string out = "key,value\n";
  for (const auto& [k, v] : rows) out += k + "," + v + "\n";
  return out;
}

inline std::string fmt(double x) { return io::format_double(x); }

inline std::string probs_string(const DiagonalState& st) {
  std::string s;
  for (std::size_t i = 0; i < st.size(); ++i) s += (i ? ";" : "") + fmt(st[i]);
  return s;
}

inline std::vector<double> probs_vector(const DiagonalState& st) { return {st.probs().begin(), st.probs().end()}; }

inline DiagonalState prepared_state(const io::StateSpec& spec, double regularize) {
  DiagonalState st = *spec.state;
  if (regularize > 0.0) st = full_rank_regularize(st, regularize);
  if (!st.is_full_rank())
    throw NotFullRank("state has a population below " + fmt(tol::p_floor) + "; rerun with --regularize DELTA");
  return st;
}

}  // namespace detail

/// Parses arguments, runs one subcommand and writes its artifact.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Geometric passivity analysis of finite-dimensional diagonal states", tool_name};
  app.set_version_flag("--version", std::string(tool_name) + " " + tool_version);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", g.out, "Output path (default: stdout)");
  app.add_option("--seed", g.seed, "Seed for random tangents and multistart searches");
  app.add_option("--tol-order", g.tol_order, "Tolerance of the total-order test");
  app.add_flag("--quiet", g.quiet, "Suppress warnings");

  std::string input;
  double regularize = 0.0;
  std::size_t k_max = default_k_max;
  std::size_t hull_k = 1;
  std::size_t nE = 101, nS = 101;
  double e_min = NAN, e_max = NAN, s_min = NAN, s_max = NAN;
  bool rescale = false;
  std::size_t starts = 32;
  std::string tangent_mode = "isoenergetic";
  std::vector<double> tangent;
  double step = 1e-3, dist_tol = tol::dist, slack = 10.0;
  std::size_t max_steps = 100000;
  bool no_adapt = false;
  std::size_t n_curve = 200;
  double at_E = NAN, at_S = NAN;

  const auto add_input = [&](CLI::App* sub, const char* what) {
    sub->add_option("input", input, what)->required();
  };
  const auto add_regularize = [&](CLI::App* sub) {
    sub->add_option("--regularize", regularize, "Mix with the maximally mixed state by DELTA first")
        ->check(CLI::Range(0.0, 1.0));
  };

  auto* analyze = app.add_subcommand("analyze", "Passivity, Gibbs fit, area and thermodynamic measures of a state");
  add_input(analyze, "State-spec JSON file");
  add_regularize(analyze);
  analyze->add_option("--k-max", k_max, "Largest k for the activation search");

  auto* kpass = app.add_subcommand("kpass", "Smallest k at which k copies become activatable");
  add_input(kpass, "State-spec JSON file");
  add_regularize(kpass);
  kpass->add_option("--k-max", k_max, "Largest k to test");

  auto* hull = app.add_subcommand("hull", "Convex hull with branch and face-point decomposition");
  add_input(hull, "State-spec JSON file");
  add_regularize(hull);
  hull->add_option("--k", hull_k, "Use the regularized k-copy ensemble")->check(CLI::PositiveNumber);

  auto* grid = app.add_subcommand("grid", "Geometric athermality on an (E, S) grid");
  add_input(grid, "Spectrum JSON file (probs optional)");
  grid->add_option("--nE", nE, "Energy grid points");
  grid->add_option("--nS", nS, "Entropy grid points");
  grid->add_option("--E-min", e_min, "Lowest energy (default: ground energy)");
  grid->add_option("--E-max", e_max, "Highest energy (default: mean energy)");
  grid->add_option("--S-min", s_min, "Lowest entropy (default: 0)");
  grid->add_option("--S-max", s_max, "Highest entropy (default: log d)");
  grid->add_flag("--rescale", rescale, "Also emit f(x) = 1 - exp(-x)");
  grid->add_option("--starts", starts, "Multistart count for d > 3");

  auto* traj = app.add_subcommand("trajectory", "Integrate an activation trajectory and check monotonicity");
  add_input(traj, "State-spec JSON file");
  add_regularize(traj);
  traj->add_option("--mode", tangent_mode, "Tangent preset")
      ->check(CLI::IsMember({"isoenergetic", "isentropic", "random"}));
  traj->add_option("--tangent", tangent, "Explicit tangent u_E,u_S (overrides --mode)")->delimiter(',')->expected(2);
  traj->add_option("--step", step, "Step size in E-S arc length");
  traj->add_option("--max-steps", max_steps, "Step budget");
  traj->add_option("--dist-tol", dist_tol, "Stop within this distance of the equilibrium curve");
  traj->add_option("--slack", slack, "Monotonicity slack constant C in C h^2");
  traj->add_flag("--no-adapt", no_adapt, "Fixed step size, no stop at the equilibrium curve");

  auto* escurve = app.add_subcommand("escurve", "Sampled equilibrium curve beta, E, S");
  add_input(escurve, "Spectrum JSON file (probs optional)");
  escurve->add_option("-n,--samples", n_curve, "Number of samples")->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));

  auto* ath = app.add_subcommand("athermality", "Geometric athermality at one (E, S) point");
  add_input(ath, "Spectrum JSON file (probs optional)");
  ath->add_option("-E,--energy", at_E, "Average energy")->required();
  ath->add_option("-S,--entropy", at_S, "Entropy in nats")->required();
  ath->add_option("--starts", starts, "Multistart count for d > 3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : input_error;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  json config = {{"command", command},
                 {"input", input},
                 {"format", g.format},
                 {"seed", g.seed},
                 {"tol_order", g.tol_order}};

  Output res;
  std::string text;
  std::vector<std::string> warnings;
  try {
    text = detail::read_file(input);
    const bool spectrum_only = command == "grid" || command == "escurve" || command == "athermality";
    io::StateSpec spec = io::parse_state_spec(text, !spectrum_only);
    warnings = spec.warnings;
    const EnergySpectrum& H = spec.spectrum;

    if (command == "analyze") {
      config["regularize"] = regularize;
      config["k_max"] = k_max;
      const DiagonalState st = detail::prepared_state(spec, regularize);
      const EsEnsemble ens = build_ensemble(st);
      const bool passive = is_passive(st);
      const bool complete = is_completely_passive(st);
      const auto fit = gibbs_fit(ens);
      const LineFit line = fit_line(ens);
      const double A = ensemble_area(ens);
      const MacroPoint m = macro_point(st);
      const double W = max_extractable_work(st);
      const bool in_range = m.E <= H.mean() + 1e-10 * (H.width() + 1e-300);
      double dS = NAN, bmin = NAN, abmin = NAN;
      if (in_range) {
        dS = max_entropic_gain(st);
        const auto mb = min_beta_athermality(st);
        bmin = mb.beta;
        abmin = mb.value;
      }
      std::string kdesc;
      json kjson;
      try {
        const ActivationResult ar = min_activation_k(ens, k_max, default_composition_cap, g.tol_order);
        if (ar.k) {
          kdesc = std::to_string(*ar.k);
          kjson = *ar.k;
        } else if (ar.certified_complete) {
          kdesc = "none (colinear hull: completely passive)";
        } else {
          kdesc = "none (k-passive up to " + std::to_string(k_max) + ")";
        }
      } catch (const CompositionCapExceeded&) {
        kdesc = "undetermined (composition cap exceeded)";
      }
      const auto vt = virtual_temperatures(ens);
      json vtj = json::array();
      std::vector<std::pair<std::string, std::string>> rows = {
          {"passive", passive ? "true" : "false"},
          {"completely_passive", complete ? "true" : "false"},
          {"line", line.status == LineStatus::gibbs           ? "gibbs"
                   : line.status == LineStatus::inverted_line ? "inverted"
                   : line.status == LineStatus::vertical      ? "vertical"
                                                              : "not_colinear"},
          {"beta", fit ? detail::fmt(fit->beta) : "none"},
          {"log_partition", fit ? detail::fmt(fit->log_partition) : "none"},
          {"area", detail::fmt(A)},
          {"E", detail::fmt(m.E)},
          {"S", detail::fmt(m.S)},
          {"W_max", detail::fmt(W)},
          {"dS_max", detail::fmt(dS)},
          {"beta_min", detail::fmt(bmin)},
          {"a_beta_min", detail::fmt(abmin)},
          {"ergotropy", detail::fmt(single_shot_ergotropy(st))},
          {"min_activation_k", kdesc}};
      for (const auto& [ij, b] : vt) {
        rows.push_back({"beta_" + std::to_string(ij.first) + "_" + std::to_string(ij.second), detail::fmt(b)});
        vtj.push_back({{"i", ij.first}, {"j", ij.second}, {"beta", io::number(b)}});
      }
      res.csv = detail::kv_csv(rows);
      res.data = {{"passive", passive},
                  {"completely_passive", complete},
                  {"line", rows[2].second},
                  {"gibbs", fit ? json{{"beta", fit->beta}, {"log_partition", fit->log_partition}} : json(nullptr)},
                  {"area", io::number(A)},
                  {"E", io::number(m.E)},
                  {"S", io::number(m.S)},
                  {"W_max", io::number(W)},
                  {"dS_max", io::number(dS)},
                  {"beta_min", io::number(bmin)},
                  {"a_beta_min", io::number(abmin)},
                  {"ergotropy", io::number(single_shot_ergotropy(st))},
                  {"min_activation_k", kjson.is_null() ? json(kdesc) : kjson},
                  {"virtual_temperatures", vtj},
                  {"ensemble", io::to_json(ens)}};
      res.notes.push_back("passive: " + rows[0].second + ", completely passive: " + rows[1].second +
                          ", area: " + rows[5].second + ", ergotropy: " + rows[12].second +
                          ", min activation k: " + kdesc);
    } else if (command == "kpass") {
      config["regularize"] = regularize;
      config["k_max"] = k_max;
      const DiagonalState st = detail::prepared_state(spec, regularize);
      const ActivationResult ar = min_activation_k(build_ensemble(st), k_max, default_composition_cap, g.tol_order);
      std::string desc;
      if (ar.k)
        desc = "activatable at k = " + std::to_string(*ar.k);
      else if (ar.certified_complete)
        desc = "completely passive (colinear hull with non-negative slope)";
      else
        desc = "k-passive up to " + std::to_string(k_max);
      res.csv = detail::kv_csv({{"k", ar.k ? std::to_string(*ar.k) : "none"},
                                {"certified_complete", ar.certified_complete ? "true" : "false"},
                                {"k_max", std::to_string(k_max)},
                                {"result", desc}});
      res.data = {{"k", ar.k ? json(*ar.k) : json(nullptr)},
                  {"certified_complete", ar.certified_complete},
                  {"k_max", k_max},
                  {"result", desc}};
      res.notes.push_back(desc);
    } else if (command == "hull") {
      config["regularize"] = regularize;
      config["k"] = hull_k;
      const DiagonalState st = detail::prepared_state(spec, regularize);
      const EsEnsemble ens = regularized_k_ensemble(build_ensemble(st), hull_k);
      const BranchDecomposition bd = branch_decomposition(ens);
      res.data = io::to_json(bd);
      res.data["area"] = io::number(area(bd.hull));
      res.data["points"] = io::to_json(ens);
      std::string csv = "role,id,epsilon,s,edge,q\n";
      for (std::size_t k = 0; k < bd.hull.n(); ++k) {
        const std::size_t id = bd.hull.vertex_ids[k];
        const bool up = std::find(bd.upper.begin(), bd.upper.end(), id) != bd.upper.end();
        csv += std::string(up ? "upper" : "lower") + "," + std::to_string(id) + "," +
               detail::fmt(bd.hull.vertices[k].epsilon) + "," + detail::fmt(bd.hull.vertices[k].s) + ",,\n";
      }
      for (const auto& [edge, pts] : bd.face_points)
        for (const auto& f : pts)
          csv += "face," + std::to_string(f.id) + "," + detail::fmt(ens.points[f.id].epsilon) + "," +
                 detail::fmt(ens.points[f.id].s) + "," + std::to_string(edge) + "," + detail::fmt(f.q) + "\n";
      res.csv = csv;
      res.notes.push_back("area: " + detail::fmt(area(bd.hull)) + ", vertices: " + std::to_string(bd.hull.n()));
    } else if (command == "grid") {
      if (std::isnan(e_min)) e_min = H.min();
      if (std::isnan(e_max)) e_max = H.mean();
      if (std::isnan(s_min)) s_min = 0.0;
      if (std::isnan(s_max)) s_max = std::log(static_cast<double>(H.size()));
      config["nE"] = nE;
      config["nS"] = nS;
      config["E_range"] = {e_min, e_max};
      config["S_range"] = {s_min, s_max};
      config["rescale"] = rescale;
      config["starts"] = starts;
      AthermalityOptions opt;
      opt.starts = starts;
      opt.seed = g.seed;
      const AthermalityGrid grid_v = athermality_grid(H, {e_min, e_max}, {s_min, s_max}, nE, nS, rescale, opt);
      res.csv = io::grid_csv(grid_v);
      res.data = io::to_json(grid_v);
    } else if (command == "trajectory") {
      config["regularize"] = regularize;
      config["h"] = step;
      config["max_steps"] = max_steps;
      config["dist_tol"] = dist_tol;
      config["adaptive"] = !no_adapt;
      config["slack"] = slack;
      const DiagonalState st = detail::prepared_state(spec, regularize);
      TrajectorySpec ts;
      if (!tangent.empty()) {
        ts.tangent = Tangent::make(tangent[0], tangent[1]);
      } else if (tangent_mode == "isentropic") {
        ts.tangent = Tangent::isentropic();
      } else if (tangent_mode == "random") {
        Rng rng(g.seed);
        ts.tangent = Tangent::from_angle(rng.uniform(0.0, 1.5707963267948966));
      }
      config["tangent"] = {ts.tangent.E, ts.tangent.S};
      ts.h = step;
      ts.max_steps = max_steps;
      ts.dist_tol = dist_tol;
      ts.adaptive = !no_adapt;
      const TrajectoryRecord rec = integrate_trajectory(st, ts);
      const MonotonicityReport rep = verify_monotonicity(rec, slack);
      res.csv = io::trajectory_csv(rec);
      res.data = io::to_json(rec);
      res.data["monotonicity"] = io::to_json(rep);
      if (!rep.ok()) res.exit_code = violation;
      const auto& last = rec.steps.back();
      const double beta_end = solve_beta_for_energy(H, std::min(last.point.E, H.mean()));
      res.data["endpoint_beta"] = beta_end;
      res.notes.push_back("steps: " + std::to_string(rec.steps_taken()) + ", terminated: " + to_string(rec.terminated) +
                          ", endpoint beta: " + detail::fmt(beta_end) +
                          ", violations: " + std::to_string(rep.violations.size()));
      for (const auto& v : rep.violations)
        res.notes.push_back("violation at step " + std::to_string(v.step) + ": " + v.quantity + " changed by " +
                            detail::fmt(v.delta));
    } else if (command == "escurve") {
      config["n"] = n_curve;
      const EquilibriumCurve c = equilibrium_curve(H, n_curve);
      res.csv = io::curve_csv(c);
      res.data = {{"samples", io::to_json(c)}};
    } else if (command == "athermality") {
      config["E"] = at_E;
      config["S"] = at_S;
      config["starts"] = starts;
      AthermalityOptions opt;
      opt.starts = starts;
      opt.seed = g.seed;
      const AthermalityResult r = geometric_athermality(H, at_E, at_S, opt);
      const char* method = r.method == AthermalityMethod::exact_qutrit ? "exact_qutrit"
                           : r.method == AthermalityMethod::multistart ? "multistart"
                                                                        : "equilibrium";
      res.csv = detail::kv_csv({{"value", detail::fmt(r.value)},
                                {"method", method},
                                {"upper_bound", r.upper_bound ? "true" : "false"},
                                {"starts_used", std::to_string(r.starts_used)},
                                {"residual_E", detail::fmt(r.residual_E)},
                                {"residual_S", detail::fmt(r.residual_S)},
                                {"witness", detail::probs_string(r.witness)}});
      res.data = {{"value", io::number(r.value)},
                  {"method", method},
                  {"upper_bound", r.upper_bound},
                  {"starts_used", r.starts_used},
                  {"residual", {io::number(r.residual_E), io::number(r.residual_S)}},
                  {"witness", detail::probs_vector(r.witness)}};
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return input_error;
  } catch (const Infeasible& e) {
    err << "error: " << e.what() << "\n";
    return input_error;
  } catch (const CompletelyPassiveError& e) {
    err << "error: " << e.what() << "\n";
    return input_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return violation;
  }

  if (!g.quiet)
    for (const auto& w : warnings) err << "warning: " << w << "\n";

  const std::string hash = "fnv1a64:" + detail::hex64(fnv1a(text));
  std::string body;
  if (g.format == "json") {
    json doc = {{"meta",
                 {{"tool", tool_name},
                  {"version", tool_version},
                  {"config", config},
                  {"input_hash", hash},
                  {"warnings", warnings}}},
                {"result", res.data}};
    body = doc.dump(2) + "\n";
  } else {
    body = "# tool: " + std::string(tool_name) + " " + tool_version + "\n# config: " + config.dump() +
           "\n# input_hash: " + hash + "\n" + res.csv;
  }
  if (g.out.empty()) {
    out << body;
  } else {
    std::ofstream f(g.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write '" << g.out << "'\n";
      return input_error;
    }
    f << body;
  }
  if (!g.quiet)
    for (const auto& n : res.notes) err << n << "\n";
  return res.exit_code;
}

}  // namespace passivity::cli
