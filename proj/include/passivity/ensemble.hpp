#pragma once

// Energy-entropy ensembles: the planar multiset {(eps_i, -log p_i)}, its
// total-order test, Minkowski sums and regularized k-copy ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "passivity/core.hpp"
#include "passivity/spectra.hpp"

namespace passivity {

struct EsPoint {
  double epsilon = 0.0;
  double s = 0.0;
  /// Number of copies in the multiset. Saturates at UINT64_MAX for large
  /// k-copy multinomials.
  std::uint64_t multiplicity = 1;
};

inline bool operator<(const EsPoint& a, const EsPoint& b) {
  return a.epsilon < b.epsilon || (a.epsilon == b.epsilon && a.s < b.s);
}

/// Finite multiset of (epsilon, s) points kept sorted by (epsilon, s).
struct EsEnsemble {
  std::vector<EsPoint> points;
  /// Probability mass carried by each distinct point (sum over its copies);
  /// empty when the ensemble was not built from a state.
  std::vector<double> mass;
  /// level_point[i] is the index of the point holding energy level i; only
  /// filled by build_ensemble.
  std::vector<std::size_t> level_point;

  std::size_t size() const { return points.size(); }
  bool has_weights() const { return !mass.empty(); }

  std::uint64_t total_multiplicity() const {
    std::uint64_t n = 0;
    for (const auto& p : points) n += p.multiplicity;
    return n;
  }

  /// Weights aligned with the expanded multiset (each point repeated
  /// multiplicity times). Copies of a merged point share its mass equally.
  std::vector<double> source_probs() const {
    std::vector<double> out;
    if (!has_weights()) return out;
    for (std::size_t j = 0; j < points.size(); ++j)
      out.insert(out.end(), points[j].multiplicity,
                 mass[j] / static_cast<double>(points[j].multiplicity));
    return out;
  }
};

namespace detail {

inline std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

inline std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return b > std::numeric_limits<std::uint64_t>::max() - a ? std::numeric_limits<std::uint64_t>::max()
                                                           : a + b;
}

/// Sorts and merges points closer than `tol` in the L-infinity norm.
/// `map` (optional) receives, for each input index, its output index.
inline void merge_points(std::vector<EsPoint>& pts, std::vector<double>* mass, double tol,
                         std::vector<std::size_t>* map = nullptr) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a] < pts[b] || (!(pts[b] < pts[a]) && a < b);
  });

  std::vector<EsPoint> out;
  std::vector<double> out_mass;
  if (map) map->assign(n, 0);
  for (std::size_t idx : order) {
    const EsPoint& p = pts[idx];
    std::size_t target = out.size();
    // Candidates within tol in epsilon form a contiguous tail of `out`.
    for (std::size_t j = out.size(); j-- > 0;) {
      if (p.epsilon - out[j].epsilon > tol) break;
      if (std::abs(out[j].s - p.s) <= tol) {
        target = j;
        break;
      }
    }
    if (target == out.size()) {
      out.push_back(p);
      if (mass) out_mass.push_back((*mass)[idx]);
    } else {
      out[target].multiplicity = sat_add(out[target].multiplicity, p.multiplicity);
      if (mass) out_mass[target] += (*mass)[idx];
    }
    if (map) (*map)[idx] = target;
  }
  pts = std::move(out);
  if (mass) *mass = std::move(out_mass);
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

}  // namespace detail

/// One point per energy level with s_i = -log p_i; coincident points merge
/// into a single point with multiplicity.
inline EsEnsemble build_ensemble(const DiagonalState& state) {
  if (!state.is_full_rank())
    throw NotFullRank("state is not full rank (min population " + std::to_string(state.min_prob()) +
                      "); regularize it before building an ensemble");
  EsEnsemble ens;
  ens.points.reserve(state.size());
  ens.mass.reserve(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    ens.points.push_back({state.spectrum()[i], -std::log(state[i]), 1});
    ens.mass.push_back(state[i]);
  }
  detail::merge_points(ens.points, &ens.mass, tol::merge, &ens.level_point);
  return ens;
}

/// Builds an ensemble directly from planar points (multiplicity 1 each, no weights).
inline EsEnsemble ensemble_from_points(std::vector<EsPoint> pts) {
  EsEnsemble ens;
  ens.points = std::move(pts);
  detail::merge_points(ens.points, nullptr, tol::merge);
  return ens;
}

/// True iff no pair has eps_a < eps_b - tol and s_a > s_b + tol.
inline bool is_totally_ordered(const EsEnsemble& ens, double tol = tol::merge) {
  const auto& pts = ens.points;  // sorted by epsilon
  double prefix_max = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    while (i < j && pts[i].epsilon < pts[j].epsilon - tol) prefix_max = std::max(prefix_max, pts[i++].s);
    if (prefix_max > pts[j].s + tol) return false;
  }
  return true;
}

/// All pairwise vector sums; multiplicities multiply and masses multiply.
inline EsEnsemble minkowski_sum(const EsEnsemble& a, const EsEnsemble& b) {
  EsEnsemble out;
  const bool weighted = a.has_weights() && b.has_weights();
  out.points.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out.points.push_back({a.points[i].epsilon + b.points[j].epsilon, a.points[i].s + b.points[j].s,
                            detail::sat_mul(a.points[i].multiplicity, b.points[j].multiplicity)});
      if (weighted) out.mass.push_back(a.mass[i] * b.mass[j]);
    }
  }
  detail::merge_points(out.points, weighted ? &out.mass : nullptr, tol::merge);
  return out;
}

inline constexpr double default_composition_cap = 1e7;

/// Number of points enumerated by regularized_k_ensemble before deduplication.
inline double composition_count(std::size_t distinct_points, std::size_t k) {
  if (distinct_points == 0) return 0.0;
  return detail::binomial(k + distinct_points - 1, distinct_points - 1);
}

/// (1/k) V(rho^{(x)k}): every (1/k) sum_i c_i v_i with non-negative integer
/// c_i summing to k, enumerated over distinct base points.
inline EsEnsemble regularized_k_ensemble(const EsEnsemble& ens, std::size_t k,
                                         double cap = default_composition_cap) {
  if (k == 0) throw InputError("number of copies k must be positive");
  if (k == 1) {
    EsEnsemble copy = ens;
    copy.level_point.clear();
    return copy;
  }
  const std::size_t m = ens.size();
  const double count = composition_count(m, k);
  if (count > cap)
    throw CompositionCapExceeded("k = " + std::to_string(k) + " needs " + std::to_string(count) +
                                 " compositions of " + std::to_string(m) +
                                 " points, above the cap of " + std::to_string(cap));

  const bool weighted = ens.has_weights();
  std::vector<double> log_fact(k + 1, 0.0);
  for (std::size_t i = 1; i <= k; ++i) log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  std::vector<double> log_mass(m, 0.0);
  if (weighted)
    for (std::size_t i = 0; i < m; ++i) log_mass[i] = std::log(ens.mass[i]);

  EsEnsemble out;
  out.points.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> c(m, 0);
  c[m - 1] = k;
  const double inv_k = 1.0 / static_cast<double>(k);
  while (true) {
    double e = 0.0, s = 0.0, lm = log_fact[k];
    std::uint64_t mult = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (c[i] == 0) continue;
      const double ci = static_cast<double>(c[i]);
      e += ci * ens.points[i].epsilon;
      s += ci * ens.points[i].s;
      lm += ci * log_mass[i] - log_fact[c[i]];
      for (std::size_t r = 0; r < c[i]; ++r) mult = detail::sat_mul(mult, ens.points[i].multiplicity);
    }
    // Multinomial coefficient k! / prod c_i!, computed exactly while it fits.
    double lmulti = log_fact[k];
    for (std::size_t i = 0; i < m; ++i) lmulti -= log_fact[c[i]];
    const double multi = std::round(std::exp(lmulti));
    mult = multi >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max()
                           : detail::sat_mul(mult, static_cast<std::uint64_t>(multi));
    out.points.push_back({e * inv_k, s * inv_k, mult});
    if (weighted) out.mass.push_back(std::exp(lm));

    // Next composition in reverse-lexicographic order over the first m-1 slots.
    std::size_t j = m - 1;
    while (j > 0 && c[j] == 0) --j;
    if (j == 0) break;
    // Move one unit from slot j to slot j-1 and gather the rest at the end.
    const std::size_t rest = c[j] - 1;
    c[j] = 0;
    c[j - 1] += 1;
    c[m - 1] += rest;
  }
  detail::merge_points(out.points, weighted ? &out.mass : nullptr, tol::merge);
  return out;
}

/// Weighted mean of the ensemble: (E(rho), S(rho)) for an ensemble built from rho.
inline MacroPoint expectation(const EsEnsemble& ens) {
  if (!ens.has_weights()) throw InputError("ensemble carries no source probabilities");
  MacroPoint m;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    m.E += ens.mass[j] * ens.points[j].epsilon;
    m.S += ens.mass[j] * ens.points[j].s;
  }
  return m;
}

}  // namespace passivity
