#pragma once

// Geometric athermality: the smallest asymptotic-ensemble area among passive
// states with a given (E, S). Qutrits are inverted exactly; larger systems
// use a multistart penalty search over the ordered simplex.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "passivity/core.hpp"
#include "passivity/ensemble.hpp"
#include "passivity/geometry.hpp"
#include "passivity/spectra.hpp"
#include "passivity/thermo.hpp"

namespace passivity {

struct PassiveBounds {
  double S_min = 0.0;  // smallest entropy of a passive state at this energy
  double S_max = 0.0;  // entropy of the Gibbs state at this energy
};

/// Entropy window of passive states at energy E in [eps_1, mean energy].
///
/// Passive states form the simplex spanned by u_j, the uniform state on the
/// lowest j levels. Entropy is concave, so its minimum over the slice E = const
/// sits at a vertex of the slice, and those vertices lie on edges u_i u_j.
inline PassiveBounds passive_region_bounds(const EnergySpectrum& h, double E) {
  const double slack = 1e-10 * (h.width() > 0.0 ? h.width() : 1.0);
  if (E < h.min() - slack || E > h.mean() + slack)
    throw Infeasible("energy " + std::to_string(E) + " is outside the passive range [" + std::to_string(h.min()) +
                     ", " + std::to_string(h.mean()) + "]");
  E = std::clamp(E, h.min(), h.mean());
  PassiveBounds b;
  b.S_max = detail::gibbs_entropy(h, solve_beta_for_energy(h, E));

  const std::size_t d = h.size();
  std::vector<double> mean(d + 1, 0.0);  // mean[j] = E(u_j)
  double acc = 0.0;
  for (std::size_t j = 1; j <= d; ++j) {
    acc += h[j - 1];
    mean[j] = acc / static_cast<double>(j);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j <= d; ++j) {
    if (std::abs(mean[j] - E) <= slack) best = std::min(best, std::log(static_cast<double>(j)));
    for (std::size_t i = 1; i < j; ++i) {
      if (!(mean[i] <= E && E <= mean[j]) || mean[j] - mean[i] <= 0.0) continue;
      const double lam = (mean[j] - E) / (mean[j] - mean[i]);  // weight of u_i
      const double hi = lam / static_cast<double>(i) + (1.0 - lam) / static_cast<double>(j);
      const double lo = (1.0 - lam) / static_cast<double>(j);
      const double s = static_cast<double>(i) * entropy_term(hi) + static_cast<double>(j - i) * entropy_term(lo);
      best = std::min(best, s);
    }
  }
  b.S_min = std::min(best, b.S_max);
  return b;
}

/// The passive qutrit states with a given (E, S), ordered by area.
///
/// Along the isoenergetic line p_2 = t, p_3 = a - b t the entropy is concave in
/// t with its maximum at the Gibbs state, so a given S has at most one passive
/// preimage on each side of it.
struct QutritPreimages {
  std::vector<DiagonalState> states;  // ascending area
  std::vector<double> areas;
};

namespace detail {

inline double qutrit_entropy(double a, double b, double t) {
  const double p3 = a - b * t;
  const double p1 = 1.0 - t - p3;
  return entropy_term(p1) + entropy_term(t) + entropy_term(p3);
}

inline std::array<double, 3> qutrit_probs(double a, double b, double t) {
  const double p3 = a - b * t;
  return {1.0 - t - p3, t, p3};
}

// Damped Newton on (E(p) - E, S(p) - S) in the (p_2, p_3) chart.
inline void newton_polish(const EnergySpectrum& h, double E, double S, std::array<double, 3>& p) {
  for (int it = 0; it < 20; ++it) {
    const double rE = p[0] * h[0] + p[1] * h[1] + p[2] * h[2] - E;
    const double rS = entropy_term(p[0]) + entropy_term(p[1]) + entropy_term(p[2]) - S;
    if (std::abs(rE) < 1e-15 && std::abs(rS) < 1e-15) return;
    // d/dp_j with p_1 = 1 - p_2 - p_3.
    const double l1 = std::log(p[0]);
    const double j11 = h[1] - h[0], j12 = h[2] - h[0];
    const double j21 = l1 - std::log(p[1]), j22 = l1 - std::log(p[2]);
    const double det = j11 * j22 - j12 * j21;
    if (!(std::abs(det) > 1e-300)) return;
    const double d2 = (rE * j22 - j12 * rS) / det;
    const double d3 = (j11 * rS - j21 * rE) / det;
    double damp = 1.0;
    for (int k = 0; k < 30; ++k) {
      const std::array<double, 3> q{1.0 - (p[1] - damp * d2) - (p[2] - damp * d3), p[1] - damp * d2,
                                    p[2] - damp * d3};
      if (q[0] > 0.0 && q[1] > 0.0 && q[2] > 0.0) {
        const double nE = q[0] * h[0] + q[1] * h[1] + q[2] * h[2] - E;
        const double nS = entropy_term(q[0]) + entropy_term(q[1]) + entropy_term(q[2]) - S;
        if (std::hypot(nE, nS) <= std::hypot(rE, rS)) {
          p = q;
          break;
        }
      }
      damp *= 0.5;
      if (k == 29) return;
    }
  }
}

inline std::optional<DiagonalState> make_full_rank(const EnergySpectrum& h, const std::array<double, 3>& p) {
  if (!(p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0)) return std::nullopt;
  DiagonalState st = DiagonalState::normalized(h, {p[0], p[1], p[2]});
  if (!st.is_full_rank()) return std::nullopt;
  return st;
}

inline void require_qutrit(const EnergySpectrum& h) {
  if (h.size() != 3) throw InputError("exact inversion needs a 3-level spectrum");
  if (h.is_degenerate()) throw InputError("exact inversion needs a non-degenerate spectrum");
}

}  // namespace detail

inline QutritPreimages qutrit_preimages(const EnergySpectrum& h, double E, double S) {
  detail::require_qutrit(h);
  const PassiveBounds bounds = passive_region_bounds(h, E);
  if (S > bounds.S_max + tol::es || S < bounds.S_min - tol::es)
    throw Infeasible("(E, S) = (" + std::to_string(E) + ", " + std::to_string(S) +
                     ") is outside the passive region");
  E = std::clamp(E, h.min(), h.mean());
  const double w = h[2] - h[0];
  const double a = (E - h[0]) / w;
  const double b = (h[1] - h[0]) / w;
  const double t_lo = a / (1.0 + b);
  const double t_hi = std::min(a / b, (1.0 - a) / (2.0 - b));

  QutritPreimages out;
  const DiagonalState gibbs = gibbs_state(h, solve_beta_for_energy(h, E));
  if (S >= bounds.S_max - 1e-14) {
    out.states.push_back(gibbs);
    out.areas.push_back(state_area(gibbs));
    return out;
  }
  const double t_g = std::clamp(gibbs[1], t_lo, t_hi);
  std::vector<std::array<double, 3>> roots;
  for (const auto& [lo0, hi0] : {std::pair{t_lo, t_g}, std::pair{t_g, t_hi}}) {
    // Entropy increases from lo0 to the Gibbs point on the left side and
    // decreases after it on the right side.
    const bool rising = hi0 == t_g;
    const double s_end = detail::qutrit_entropy(a, b, rising ? lo0 : hi0);
    if (hi0 - lo0 <= 0.0 || s_end > S) continue;
    double lo = lo0, hi = hi0;
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
      const double mid = 0.5 * (lo + hi);
      const bool below = detail::qutrit_entropy(a, b, mid) < S;
      ((below == rising) ? lo : hi) = mid;
    }
    auto p = detail::qutrit_probs(a, b, 0.5 * (lo + hi));
    detail::newton_polish(h, E, S, p);
    roots.push_back(p);
  }
  for (const auto& p : roots) {
    auto st = detail::make_full_rank(h, p);
    if (!st || !is_passive(*st)) continue;
    out.areas.push_back(state_area(*st));
    out.states.push_back(std::move(*st));
  }
  if (out.states.empty())
    throw ConvergenceError("no full-rank passive qutrit state found at (E, S) = (" + std::to_string(E) + ", " +
                           std::to_string(S) + ")");
  if (out.states.size() == 2 && out.areas[1] < out.areas[0]) {
    std::swap(out.states[0], out.states[1]);
    std::swap(out.areas[0], out.areas[1]);
  }
  return out;
}

/// The smallest-area passive qutrit state with the given (E, S).
inline DiagonalState qutrit_state_from_macro(const EnergySpectrum& h, double E, double S) {
  return qutrit_preimages(h, E, S).states.front();
}

enum class AthermalityMethod { exact_qutrit, multistart, equilibrium };

struct AthermalityOptions {
  std::size_t starts = 32;
  /// Penalty weights applied in sequence.
  std::vector<double> penalties{1e2, 1e4, 1e6};
  /// Added to the seed derived from (E, S, spectrum).
  std::uint64_t seed = 0;
  std::size_t max_evaluations = 4000;  // per penalty stage and start
};

struct AthermalityResult {
  double value = 0.0;
  DiagonalState witness;
  double residual_E = 0.0;
  double residual_S = 0.0;
  AthermalityMethod method = AthermalityMethod::exact_qutrit;
  std::size_t starts_used = 0;
  /// Set when value is only an upper bound on the infimum.
  bool upper_bound = false;
};

namespace detail {

// Passive states as mixtures p = sum_j w_j u_j of the flat states u_j on the
// lowest j levels: p_i = sum_{j >= i} w_j / j.
inline std::vector<double> mixture_probs(const std::vector<double>& w) {
  std::vector<double> p(w.size());
  double tail = 0.0;
  for (std::size_t j = w.size(); j-- > 0;) {
    tail += w[j] / static_cast<double>(j + 1);
    p[j] = tail;
  }
  return p;
}

inline std::vector<double> mixture_weights(std::span<const double> p) {
  std::vector<double> w(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double next = j + 1 < p.size() ? p[j + 1] : 0.0;
    w[j] = std::max(0.0, static_cast<double>(j + 1) * (p[j] - next));
  }
  return w;
}

inline double probs_entropy(const std::vector<double>& p) {
  double s = 0.0;
  for (double x : p) s += entropy_term(x);
  return s;
}

inline double probs_area(const EnergySpectrum& h, const std::vector<double>& p) {
  for (double x : p)
    if (!(x >= tol::p_floor)) return std::numeric_limits<double>::infinity();
  EsEnsemble ens;
  for (std::size_t i = 0; i < p.size(); ++i) ens.points.push_back({h[i], -std::log(p[i]), 1});
  detail::merge_points(ens.points, nullptr, tol::merge);
  return area(convex_hull(ens));
}

// Hooke-Jeeves pattern search.
template <class F>
std::vector<double> pattern_search(F&& f, std::vector<double> x, double step, double min_step, std::size_t max_eval) {
  double fx = f(x);
  std::size_t evals = 1;
  const auto explore = [&](std::vector<double> base, double& fb) {
    for (std::size_t i = 0; i < base.size() && evals < max_eval; ++i) {
      for (double dir : {1.0, -1.0}) {
        base[i] += dir * step;
        const double ft = f(base);
        ++evals;
        if (ft < fb) {
          fb = ft;
          break;
        }
        base[i] -= dir * step;
      }
    }
    return base;
  };
  while (step > min_step && evals < max_eval) {
    double fn = fx;
    auto xn = explore(x, fn);
    if (fn < fx) {
      // Pattern moves while they keep improving.
      while (evals < max_eval) {
        std::vector<double> xp(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) xp[i] = 2.0 * xn[i] - x[i];
        x = xn;
        fx = fn;
        double fp = f(xp);
        ++evals;
        auto xe = explore(xp, fp);
        if (fp < fx) {
          xn = xe;
          fn = fp;
        } else {
          break;
        }
      }
    } else {
      step *= 0.5;
    }
  }
  return x;
}

// Rays from an interior maximum-entropy point of the isoenergetic slice. The
// slice directions are {x : sum x = 0, sum m_j x_j = 0} with m_j = E(u_j).
struct RadialChart {
  std::vector<double> center;               // mixture weights, E(center) = E
  std::vector<std::vector<double>> basis;   // orthonormal slice directions
  double S = 0.0;

  struct Ray {
    bool feasible = false;
    double gap = 0.0;  // S(boundary) - S for rays that never reach S
    std::vector<double> probs;
  };

  Ray cast(const std::vector<double>& y) const {
    const std::size_t d = center.size();
    std::vector<double> dir(d, 0.0);
    for (std::size_t k = 0; k < basis.size(); ++k)
      for (std::size_t j = 0; j < d; ++j) dir[j] += y[k] * basis[k][j];
    double lam_max = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j)
      if (dir[j] < 0.0) lam_max = std::min(lam_max, center[j] / -dir[j]);
    Ray ray;
    if (!std::isfinite(lam_max)) return ray;
    const auto at = [&](double lam) {
      std::vector<double> w(d);
      for (std::size_t j = 0; j < d; ++j) w[j] = std::max(0.0, center[j] + lam * dir[j]);
      return mixture_probs(w);
    };
    const double s_end = probs_entropy(at(lam_max));
    if (s_end > S) {
      ray.gap = s_end - S;
      return ray;
    }
    // Entropy is concave on the slice and maximal at the center, so it
    // decreases along the ray.
    double lo = 0.0, hi = lam_max;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * lam_max; ++it) {
      const double mid = 0.5 * (lo + hi);
      (probs_entropy(at(mid)) > S ? lo : hi) = mid;
    }
    ray.feasible = true;
    ray.probs = at(0.5 * (lo + hi));
    return ray;
  }
};

inline RadialChart radial_chart(const EnergySpectrum& h, double E, double S) {
  const std::size_t d = h.size();
  std::vector<double> m(d);
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    acc += h[j];
    m[j] = acc / static_cast<double>(j + 1);
  }
  RadialChart chart;
  chart.S = S;
  const DiagonalState g = gibbs_state(h, solve_beta_for_energy(h, E));
  chart.center = mixture_weights(g.probs());
  if (h.is_degenerate()) {
    // Equal Gibbs populations put the center on a face; pull it slightly
    // inside with an interior point of the same energy.
    const double mean_all = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(d);
    const std::size_t vertex = E <= mean_all ? 0 : d - 1;
    const double theta =
        std::abs(m[vertex] - mean_all) > 0.0 ? std::clamp((E - m[vertex]) / (mean_all - m[vertex]), 0.0, 1.0) : 1.0;
    std::vector<double> inner(d, theta / static_cast<double>(d));
    inner[vertex] += 1.0 - theta;
    for (std::size_t j = 0; j < d; ++j) chart.center[j] = (1.0 - 1e-9) * chart.center[j] + 1e-9 * inner[j];
  }
  // Gram-Schmidt against (1, ..., 1) and m.
  std::vector<std::vector<double>> q;
  const auto orth = [&](std::vector<double> v) {
    for (const auto& b : q) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += v[j] * b[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= dot * b[j];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-9) return false;
    for (double& x : v) x /= n;
    q.push_back(std::move(v));
    return true;
  };
  orth(std::vector<double>(d, 1.0));
  orth(m);
  const std::size_t fixed = q.size();
  for (std::size_t i = 0; i < d && q.size() < d; ++i) {
    std::vector<double> e(d, 0.0);
    e[i] = 1.0;
    orth(e);
  }
  chart.basis.assign(q.begin() + static_cast<std::ptrdiff_t>(fixed), q.end());
  return chart;
}

inline std::uint64_t macro_seed(const EnergySpectrum& h, double E, double S, std::uint64_t extra) {
  std::uint64_t key = fnv1a(&E, sizeof E);
  key = fnv1a(&S, sizeof S, key);
  for (double e : h.energies()) key = fnv1a(&e, sizeof e, key);
  return key ^ extra;
}

inline AthermalityResult finish(AthermalityResult r, double E, double S) {
  const MacroPoint m = macro_point(r.witness);
  r.residual_E = std::abs(m.E - E);
  r.residual_S = std::abs(m.S - S);
  return r;
}

}  // namespace detail

/// Upper bound on the geometric athermality for any d by multistart pattern
/// search. Candidates are rays from the Gibbs state through the isoenergetic
/// slice, cut where the entropy reaches S; rays that leave the passive set
/// first are charged a quadratic penalty on their entropy gap under the
/// increasing weight schedule.
inline AthermalityResult multistart_athermality(const EnergySpectrum& h, double E, double S,
                                                const AthermalityOptions& options = {}) {
  const detail::RadialChart chart = detail::radial_chart(h, E, S);
  const std::size_t dim = chart.basis.size();
  Rng rng(detail::macro_seed(h, E, S, options.seed));
  // Any feasible area is below this, so penalized rays always lose.
  const double offset = 1.0 + 2.0 * (h.width() + 1.0) * -std::log(tol::p_floor);

  AthermalityResult best;
  best.value = std::numeric_limits<double>::infinity();
  best.method = AthermalityMethod::multistart;
  best.upper_bound = true;
  best.starts_used = options.starts;
  if (dim == 0) throw Infeasible("the isoenergetic slice has no interior directions");
  for (std::size_t start = 0; start < options.starts; ++start) {
    std::vector<double> y(dim);
    for (double& x : y) x = rng.normal();
    for (double mu : options.penalties) {
      const auto obj = [&](const std::vector<double>& yy) {
        const auto ray = chart.cast(yy);
        if (!ray.feasible) return offset + mu * ray.gap * ray.gap;
        return std::min(detail::probs_area(h, ray.probs), offset);
      };
      y = detail::pattern_search(obj, y, 0.5, 1e-9, options.max_evaluations);
    }
    const auto ray = chart.cast(y);
    if (!ray.feasible) continue;
    const double value = detail::probs_area(h, ray.probs);
    if (!(value < best.value)) continue;
    best.value = value;
    best.witness = DiagonalState::normalized(h, ray.probs);
  }
  if (!std::isfinite(best.value))
    throw ConvergenceError("multistart search found no feasible passive state at (E, S) = (" + std::to_string(E) +
                           ", " + std::to_string(S) + ")");
  best.value = state_area(best.witness);
  return detail::finish(std::move(best), E, S);
}

/// Infimum of the asymptotic-ensemble area over passive states with average
/// energy E and entropy S. Exact for non-degenerate qutrits, an upper bound
/// otherwise; zero with a Gibbs witness on the equilibrium curve.
inline AthermalityResult geometric_athermality(const EnergySpectrum& h, double E, double S,
                                               const AthermalityOptions& options = {}) {
  const PassiveBounds bounds = passive_region_bounds(h, E);
  if (S > bounds.S_max + tol::es || S < bounds.S_min - tol::es)
    throw Infeasible("(E, S) = (" + std::to_string(E) + ", " + std::to_string(S) +
                     ") is outside the passive region");
  AthermalityResult r;
  if (S >= bounds.S_max - tol::es || h.size() <= 2) {
    r.method = AthermalityMethod::equilibrium;
    r.witness = gibbs_state(h, solve_beta_for_energy(h, E));
    // Near the ground energy the Gibbs witness drops below the population
    // floor; its ensemble is colinear in the limit, so the area is zero.
    r.value = r.witness.is_full_rank() ? state_area(r.witness) : 0.0;
    return detail::finish(std::move(r), E, S);
  }
  if (h.size() == 3 && !h.is_degenerate()) {
    r.method = AthermalityMethod::exact_qutrit;
    const auto pre = qutrit_preimages(h, E, S);
    r.witness = pre.states.front();
    r.value = pre.areas.front();
    return detail::finish(std::move(r), E, S);
  }
  return multistart_athermality(h, E, S, options);
}

struct AthermalityGrid {
  std::vector<double> E_axis;
  std::vector<double> S_axis;
  /// Row-major, values[iS * nE + iE]; NaN outside the passive region.
  std::vector<double> values;
  bool rescale = false;
  /// One equilibrium-curve sample per energy column: (E, S_max(E), value).
  std::vector<std::array<double, 3>> equilibrium;

  std::size_t nE() const { return E_axis.size(); }
  std::size_t nS() const { return S_axis.size(); }
  double at(std::size_t iE, std::size_t iS) const { return values[iS * nE() + iE]; }
};

/// f(x) = 1 - exp(-x), applied at export time only.
inline double rescale_athermality(double x) { return std::isnan(x) ? x : -std::expm1(-x); }

inline AthermalityGrid athermality_grid(const EnergySpectrum& h, std::array<double, 2> E_range,
                                        std::array<double, 2> S_range, std::size_t nE, std::size_t nS,
                                        bool rescale = false, const AthermalityOptions& options = {}) {
  if (nE < 2 || nS < 2) throw InputError("grid resolutions must be at least 2");
  if (!(E_range[1] > E_range[0]) || !(S_range[1] > S_range[0])) throw InputError("grid ranges must be increasing");
  AthermalityGrid g;
  g.rescale = rescale;
  for (std::size_t i = 0; i < nE; ++i)
    g.E_axis.push_back(E_range[0] + (E_range[1] - E_range[0]) * static_cast<double>(i) / static_cast<double>(nE - 1));
  for (std::size_t j = 0; j < nS; ++j)
    g.S_axis.push_back(S_range[0] + (S_range[1] - S_range[0]) * static_cast<double>(j) / static_cast<double>(nS - 1));
  g.values.assign(nE * nS, std::numeric_limits<double>::quiet_NaN());
  const double slack = 1e-10 * (h.width() > 0.0 ? h.width() : 1.0);
  for (std::size_t i = 0; i < nE; ++i) {
    const double E = g.E_axis[i];
    if (E < h.min() - slack || E > h.mean() + slack) continue;
    const PassiveBounds b = passive_region_bounds(h, E);
    const auto eq = geometric_athermality(h, E, b.S_max, options);
    g.equilibrium.push_back({E, b.S_max, eq.value});
    for (std::size_t j = 0; j < nS; ++j) {
      const double S = g.S_axis[j];
      if (S < b.S_min || S > b.S_max) continue;
      try {
        g.values[j * nE + i] = geometric_athermality(h, E, S, options).value;
      } catch (const ConvergenceError&) {
        // Cells whose witness would fall below the population floor.
      }
    }
  }
  return g;
}

}  // namespace passivity
