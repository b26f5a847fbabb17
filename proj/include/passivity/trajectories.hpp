#pragma once

// Activation trajectories: partial thermalization, virtual-qutrit steps in the
// E-S plane, trajectory integration with per-step measures, and the
// monotonicity checks along a record.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "passivity/athermality.hpp"
#include "passivity/core.hpp"
#include "passivity/ensemble.hpp"
#include "passivity/geometry.hpp"
#include "passivity/spectra.hpp"
#include "passivity/thermo.hpp"

namespace passivity {

/// (1 - p) rho + p gamma.
inline DiagonalState partial_thermalization_step(const DiagonalState& state, const DiagonalState& gamma, double p) {
  if (!(state.spectrum() == gamma.spectrum())) throw InputError("state and Gibbs state have different spectra");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("mixing weight must lie in [0, 1]");
  if (p == 0.0) return state;
  if (p == 1.0) return gamma;
  std::vector<double> out(state.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - p) * state[i] + p * gamma[i];
  return DiagonalState::normalized(state.spectrum(), std::move(out));
}

/// Unit tangent (u_E <= 0, u_S >= 0) in the E-S plane.
struct Tangent {
  double E = 0.0;
  double S = 1.0;

  static Tangent make(double uE, double uS) {
    if (!std::isfinite(uE) || !std::isfinite(uS) || uE > 0.0 || uS < 0.0 || (uE == 0.0 && uS == 0.0))
      throw InputError("tangent must satisfy u_E <= 0, u_S >= 0 and be non-zero");
    const double n = std::hypot(uE, uS);
    return {uE / n, uS / n};
  }

  static Tangent isoenergetic() { return {0.0, 1.0}; }
  static Tangent isentropic() { return {-1.0, 0.0}; }

  /// Angle in [0, pi/2] from the isentropic direction (-1, 0) toward (0, 1).
  static Tangent from_angle(double theta) { return make(-std::cos(theta), std::sin(theta)); }
};

struct ActivationStep {
  DiagonalState state;
  VirtualQutrit qutrit;
  /// First-order area change predicted for the step.
  double dA = 0.0;
  /// Set when the step broke the passive ordering and was re-sorted.
  bool resorted = false;
};

namespace detail {

inline std::vector<double> apply_dp(const DiagonalState& state, const std::array<std::size_t, 3>& levels,
                                    const std::array<double, 3>& dp) {
  std::vector<double> p(state.probs().begin(), state.probs().end());
  for (int i = 0; i < 3; ++i) p[levels[i]] += dp[i];
  return p;
}

}  // namespace detail

/// Moves the state by (dE, dS) to first order through its virtual qutrit.
inline ActivationStep activation_step_state(const DiagonalState& state, double dE, double dS) {
  ActivationStep out;
  if (dE == 0.0 && dS == 0.0) {
    out.state = state;
    return out;
  }
  out.qutrit = select_virtual_qutrit(state);
  const QutritDeformation def = qutrit_deformation(state, out.qutrit.levels, dE, dS);
  out.dA = def.dA;
  auto p = detail::apply_dp(state, out.qutrit.levels, def.dp);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!(p[i] >= tol::p_floor))
      throw StepError("step would push population " + std::to_string(i) + " below the floor; shrink h");
  DiagonalState next = DiagonalState::normalized(state.spectrum(), std::move(p));
  if (!is_passive(next)) {
    next = passify(next).state;
    out.resorted = true;
  }
  out.state = std::move(next);
  return out;
}

inline ActivationStep activation_step_state(const DiagonalState& state, const Tangent& u, double h) {
  if (!(h >= 0.0)) throw InputError("step size must be non-negative");
  return activation_step_state(state, h * u.E, h * u.S);
}

struct TrajectorySpec {
  Tangent tangent = Tangent::isoenergetic();
  double h = 1e-3;
  std::size_t max_steps = 100000;
  /// Shrink steps near the equilibrium curve and retry failed steps; when off,
  /// steps of fixed size h run until max_steps.
  bool adaptive = true;
  double dist_tol = tol::dist;
  double h_min = 1e-9;
};

struct StepRecord {
  DiagonalState state;
  MacroPoint point;
  double area = 0.0;
  /// Exact geometric athermality for non-degenerate qutrits, NaN otherwise.
  double athermality = std::numeric_limits<double>::quiet_NaN();
  double W_max = 0.0;
  double dS_max = 0.0;
  double a_beta_min = 0.0;
  /// Step size that produced this entry (0 for the initial state).
  double h = 0.0;
  double dA_predicted = 0.0;
};

enum class Termination { reached_equilibrium, max_steps, stalled, step_failed };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::reached_equilibrium: return "reached_equilibrium";
    case Termination::max_steps: return "max_steps";
    case Termination::stalled: return "stalled";
    case Termination::step_failed: return "step_failed";
  }
  return "unknown";
}

struct TrajectoryRecord {
  TrajectorySpec spec;
  /// steps[0] is the initial state.
  std::vector<StepRecord> steps;
  Termination terminated = Termination::max_steps;
  std::size_t resorts = 0;
  std::size_t halvings = 0;

  std::size_t steps_taken() const { return steps.empty() ? 0 : steps.size() - 1; }
};

namespace detail {

inline StepRecord measure(const DiagonalState& state, double h, double dA) {
  StepRecord r;
  r.state = state;
  r.point = macro_point(state);
  r.area = state_area(state);
  const auto& spec = state.spectrum();
  if (spec.size() == 3 && !spec.is_degenerate()) {
    try {
      r.athermality = geometric_athermality(spec, r.point.E, r.point.S).value;
    } catch (const std::exception&) {
      r.athermality = r.area;
    }
  }
  r.W_max = max_extractable_work(state);
  r.dS_max = max_entropic_gain(state);
  r.a_beta_min = min_beta_athermality(state).value;
  r.h = h;
  r.dA_predicted = dA;
  return r;
}

// Arc parameter along P0 + lambda u where the line meets the equilibrium curve.
inline double curve_crossing(const EnergySpectrum& h, MacroPoint p0, const Tangent& u) {
  const auto f = [&](double beta) {
    return (detail::gibbs_energy(h, beta) - p0.E) * u.S - (detail::gibbs_entropy(h, beta) - p0.S) * u.E;
  };
  double lo = 0.0, hi = beta_cap(h);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  const double beta = 0.5 * (lo + hi);
  return (detail::gibbs_energy(h, beta) - p0.E) * u.E + (detail::gibbs_entropy(h, beta) - p0.S) * u.S;
}

// Newton iterations on the step's own virtual qutrit until the state sits at
// the target (E, S).
inline void correct_to(ActivationStep& st, MacroPoint target) {
  if (st.resorted) return;
  for (int it = 0;; ++it) {
    const MacroPoint m = macro_point(st.state);
    const double rE = target.E - m.E, rS = target.S - m.S;
    if (std::abs(rE) <= 1e-13 && std::abs(rS) <= 1e-13) return;
    if (it == 8) throw StepError("step correction did not converge");
    const QutritDeformation def = qutrit_deformation(st.state, st.qutrit.levels, rE, rS);
    auto p = apply_dp(st.state, st.qutrit.levels, def.dp);
    for (double x : p)
      if (!(x >= tol::p_floor)) throw StepError("correction would breach the population floor");
    st.state = DiagonalState::normalized(st.state.spectrum(), std::move(p));
  }
}

// Allowed second-order drift of a monitored quantity over one step of size h.
inline double step_slack(double h, double C = 10.0) { return std::max(C * h * h, 1e-6 * h) + 1e-12; }

inline bool same_hull(const DiagonalState& a, const DiagonalState& b) {
  return convex_hull(build_ensemble(a)).vertex_ids == convex_hull(build_ensemble(b)).vertex_ids;
}

}  // namespace detail

/// Integrates an activation trajectory from a passive full-rank state.
///
/// Each adaptive step aims at the point lambda + h further along the straight
/// line P0 + lambda u and is refined by Newton iterations on its virtual
/// qutrit until it sits on that point. Steps shrink so that the line's
/// crossing with the equilibrium curve is approached geometrically. A step
/// that breaches the population floor or breaks passivity is retried at half
/// size, as is a step that changes the hull vertices, until three halvings
/// have been made; after that a hull change is kept if the area does not grow.
/// With d > 3 a point can end up sliding along a hull edge, and the run then
/// stops as stalled.
inline TrajectoryRecord integrate_trajectory(const DiagonalState& state0, const TrajectorySpec& spec) {
  if (!(spec.h > 0.0)) throw InputError("step size must be positive");
  if (!is_passive(state0)) throw InputError("trajectory start must be passive");
  if (!state0.is_full_rank()) throw NotFullRank("trajectory start must be full rank");
  const Tangent u = Tangent::make(spec.tangent.E, spec.tangent.S);
  const auto& hs = state0.spectrum();

  TrajectoryRecord rec;
  rec.spec = spec;
  rec.spec.tangent = u;
  rec.steps.push_back(detail::measure(state0, 0.0, 0.0));
  const MacroPoint p0 = rec.steps.front().point;
  const double lambda_end = detail::curve_crossing(hs, p0, u);

  DiagonalState state = state0;
  if (spec.adaptive && (lambda_end <= spec.dist_tol || is_completely_passive(state))) {
    rec.terminated = Termination::reached_equilibrium;
    return rec;
  }

  for (std::size_t n = 0; n < spec.max_steps; ++n) {
    if (is_completely_passive(state)) {
      rec.terminated = Termination::reached_equilibrium;
      return rec;
    }
    const MacroPoint cur = macro_point(state);
    const double lambda = (cur.E - p0.E) * u.E + (cur.S - p0.S) * u.S;
    if (!spec.adaptive) {
      try {
        const ActivationStep st = activation_step_state(state, u, spec.h);
        rec.resorts += st.resorted ? 1 : 0;
        state = st.state;
        rec.steps.push_back(detail::measure(state, spec.h, st.dA));
      } catch (const StepError&) {
        rec.terminated = Termination::step_failed;
        return rec;
      } catch (const CompletelyPassiveError&) {
        rec.terminated = Termination::reached_equilibrium;
        return rec;
      }
      continue;
    }

    const double remaining = lambda_end - lambda;
    if (remaining <= spec.dist_tol) {
      rec.terminated = Termination::reached_equilibrium;
      return rec;
    }
    double h = std::min(spec.h, 0.5 * remaining);
    const double area_now = rec.steps.back().area;
    std::optional<ActivationStep> accepted;
    for (int tries = 0; tries < 60; ++tries) {
      if (h < spec.h_min) break;
      const double dE = p0.E + (lambda + h) * u.E - cur.E;
      const double dS = p0.S + (lambda + h) * u.S - cur.S;
      try {
        ActivationStep st = activation_step_state(state, dE, dS);
        detail::correct_to(st, {cur.E + dE, cur.S + dS});
        st.resorted = st.resorted || !is_passive(st.state);
        // Past the first 3 halvings a hull change is accepted as long as it
        // does not grow the ensemble area.
        const bool ok = !st.resorted && (detail::same_hull(state, st.state) ||
                                         (tries >= 3 && state_area(st.state) <= area_now + detail::step_slack(h)));
        if (ok) {
          accepted = std::move(st);
          break;
        }
      } catch (const StepError&) {
      } catch (const CompletelyPassiveError&) {
        rec.terminated = Termination::reached_equilibrium;
        return rec;
      }
      h *= 0.5;
      ++rec.halvings;
    }
    if (!accepted) {
      rec.terminated = Termination::stalled;
      return rec;
    }
    state = accepted->state;
    rec.steps.push_back(detail::measure(state, h, accepted->dA));
  }
  rec.terminated = Termination::max_steps;
  return rec;
}

struct Violation {
  std::size_t step = 0;  // index of the later entry of the pair
  std::string quantity;
  double delta = 0.0;
};

struct MonotonicityReport {
  std::vector<Violation> violations;
  std::size_t pairs_checked = 0;
  bool ok() const { return violations.empty(); }
};

/// Checks consecutive entries: E non-increasing, S non-decreasing, the
/// athermality (area for non-qutrits), W_max and dS_max non-increasing, and
/// athermality co-monotone with W_max and dS_max. Each pair gets a slack of
/// C h^2 with h the step size of the later entry.
inline MonotonicityReport verify_monotonicity(const TrajectoryRecord& record, double C = 10.0) {
  MonotonicityReport rep;
  const auto& s = record.steps;
  for (std::size_t i = 1; i < s.size(); ++i) {
    ++rep.pairs_checked;
    const double h = s[i].h > 0.0 ? s[i].h : record.spec.h;
    const double slack = detail::step_slack(h, C);
    const auto flag = [&](const char* q, double d) { rep.violations.push_back({i, q, d}); };
    const double dE = s[i].point.E - s[i - 1].point.E;
    const double dS = s[i].point.S - s[i - 1].point.S;
    const bool exact = !std::isnan(s[i].athermality) && !std::isnan(s[i - 1].athermality);
    const double dA = exact ? s[i].athermality - s[i - 1].athermality : s[i].area - s[i - 1].area;
    const double dW = s[i].W_max - s[i - 1].W_max;
    const double dG = s[i].dS_max - s[i - 1].dS_max;
    if (dE > slack) flag("E", dE);
    if (dS < -slack) flag("S", dS);
    if (dA > slack) flag("athermality", dA);
    if (dW > slack) flag("W_max", dW);
    if (dG > slack) flag("dS_max", dG);
    if ((dA > slack && dW < -slack) || (dA < -slack && dW > slack)) flag("athermality~W_max", dA);
    if ((dA > slack && dG < -slack) || (dA < -slack && dG > slack)) flag("athermality~dS_max", dA);
  }
  return rep;
}

}  // namespace passivity
