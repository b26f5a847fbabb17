#pragma once

// Planar convex geometry of asymptotic ensembles: hulls, area, colinearity,
// Gibbs fits, virtual temperatures, branch/face decomposition and the
// virtual-qutrit deformation calculus.
//
// Orientation convention: hull vertices are listed counter-clockwise in the
// (epsilon, s) plane with epsilon to the right and s upward, starting at the
// leftmost-lowest vertex, running along the lower boundary to the rightmost
// vertex and back along the upper boundary. The trapezium sum
//   A = 1/2 sum_k s_k (eps_{k-1} - eps_{k+1})
// is non-negative in this labeling and the k-1 <= k <= k+1 chain condition
// picks out the increasing (lower) boundary of a passive ensemble.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "passivity/core.hpp"
#include "passivity/ensemble.hpp"
#include "passivity/spectra.hpp"

namespace passivity {

/// A non-vertex ensemble point lying on hull edge `edge` (vertex edge -> edge+1),
/// with position q * v_edge + (1 - q) * v_{edge+1}.
struct FacePoint {
  std::size_t edge = 0;
  std::size_t id = 0;
  double q = 0.0;
};

struct ConvexRegion {
  std::vector<EsPoint> vertices;
  /// Ensemble point index of each vertex.
  std::vector<std::size_t> vertex_ids;
  std::vector<FacePoint> face_points;

  std::size_t n() const { return vertices.size(); }
  const EsPoint& vertex(long long k) const {
    const auto m = static_cast<long long>(vertices.size());
    return vertices[static_cast<std::size_t>(((k % m) + m) % m)];
  }
};

namespace detail {

inline double cross(const EsPoint& o, const EsPoint& a, const EsPoint& b) {
  return (a.epsilon - o.epsilon) * (b.s - o.s) - (a.s - o.s) * (b.epsilon - o.epsilon);
}

inline double dist(const EsPoint& a, const EsPoint& b) { return std::hypot(a.epsilon - b.epsilon, a.s - b.s); }

// Turn o -> a -> b counts as colinear when the sine of the angle is below tol::hull_cross.
inline bool left_turn(const EsPoint& o, const EsPoint& a, const EsPoint& b) {
  const double c = cross(o, a, b);
  return c > tol::hull_cross * dist(o, a) * dist(o, b);
}

inline double diameter(const std::vector<EsPoint>& pts) {
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, dist(pts[i], pts[j]));
  return d;
}

}  // namespace detail

/// Monotone-chain hull of the distinct ensemble points. Single points give
/// n = 1, colinear sets n = 2; points on hull edges are recorded as face points.
inline ConvexRegion convex_hull(const EsEnsemble& ens) {
  ConvexRegion region;
  const auto& pts = ens.points;  // sorted by (epsilon, s), deduplicated
  const std::size_t m = pts.size();
  if (m == 0) throw InputError("convex hull of an empty ensemble");
  if (m == 1) {
    region.vertices = {pts[0]};
    region.vertex_ids = {0};
    return region;
  }

  std::vector<std::size_t> hull;
  hull.reserve(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    while (hull.size() >= 2 && !detail::left_turn(pts[hull[hull.size() - 2]], pts[hull.back()], pts[i]))
      hull.pop_back();
    hull.push_back(i);
  }
  const std::size_t lower_size = hull.size() + 1;
  for (std::size_t i = m - 1; i-- > 0;) {
    while (hull.size() >= lower_size &&
           !detail::left_turn(pts[hull[hull.size() - 2]], pts[hull.back()], pts[i]))
      hull.pop_back();
    hull.push_back(i);
  }
  hull.pop_back();  // first point repeated at the end

  for (std::size_t id : hull) {
    region.vertex_ids.push_back(id);
    region.vertices.push_back(pts[id]);
  }
  if (region.n() == 2 && detail::dist(region.vertices[0], region.vertices[1]) == 0.0) {
    region.vertices.resize(1);
    region.vertex_ids.resize(1);
  }

  // Face points: non-vertex points within a relative distance of an edge.
  const double scale = detail::diameter(region.vertices);
  std::vector<bool> is_vertex(m, false);
  for (std::size_t id : region.vertex_ids) is_vertex[id] = true;
  const std::size_t n = region.n();
  const std::size_t edges = n == 2 ? 1 : (n >= 3 ? n : 0);
  for (std::size_t id = 0; id < m; ++id) {
    if (is_vertex[id]) continue;
    for (std::size_t e = 0; e < edges; ++e) {
      const EsPoint& a = region.vertices[e];
      const EsPoint& b = region.vertices[(e + 1) % n];
      const double len = detail::dist(a, b);
      if (len == 0.0) continue;
      const double off = std::abs(detail::cross(a, b, pts[id])) / len;
      const double t = ((pts[id].epsilon - a.epsilon) * (b.epsilon - a.epsilon) +
                        (pts[id].s - a.s) * (b.s - a.s)) /
                       (len * len);
      if (off <= tol::hull_cross * scale && t > 0.0 && t < 1.0) {
        region.face_points.push_back({e, id, 1.0 - t});
        break;
      }
    }
  }
  return region;
}

/// Trapezium-rule area over the counter-clockwise vertex list; 0 for n <= 2.
inline double area(const ConvexRegion& region) {
  const auto n = static_cast<long long>(region.n());
  if (n <= 2) return 0.0;
  double a = 0.0;
  for (long long k = 0; k < n; ++k)
    a += region.vertex(k).s * (region.vertex(k - 1).epsilon - region.vertex(k + 1).epsilon);
  return 0.5 * a;
}

/// Absolute shoelace area, independent of the vertex orientation.
inline double shoelace_area(const ConvexRegion& region) {
  const std::size_t n = region.n();
  if (n <= 2) return 0.0;
  double a = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const EsPoint& p = region.vertices[k];
    const EsPoint& q = region.vertices[(k + 1) % n];
    a += p.epsilon * q.s - q.epsilon * p.s;
  }
  return 0.5 * std::abs(a);
}

inline double ensemble_area(const EsEnsemble& ens) { return area(convex_hull(ens)); }

inline double state_area(const DiagonalState& state) { return ensemble_area(build_ensemble(state)); }

inline bool is_colinear(const ConvexRegion& region) { return region.n() <= 2; }

struct GibbsParams {
  double beta = 0.0;
  double log_partition = 0.0;
};

enum class LineStatus {
  gibbs,           // colinear with slope >= 0
  inverted_line,   // colinear with negative slope (population inverted)
  vertical,        // colinear at a single energy with distinct s values
  not_colinear,
};

struct LineFit {
  LineStatus status = LineStatus::not_colinear;
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;  // largest orthogonal distance from the fitted line
};

/// Total-least-squares line through the distinct points. Colinear when every
/// orthogonal residual is below rel_tol times the ensemble diameter.
inline LineFit fit_line(const EsEnsemble& ens, double rel_tol = 1e-8) {
  LineFit fit;
  const auto& pts = ens.points;
  if (pts.size() == 1) {
    fit.status = LineStatus::gibbs;
    fit.intercept = pts[0].s;
    return fit;
  }
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.epsilon;
    cy += p.s;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const double dx = p.epsilon - cx, dy = p.s - cy;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Principal axis of the 2x2 scatter matrix.
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double ux = std::cos(theta), uy = std::sin(theta);
  double resid = 0.0;
  for (const auto& p : pts) resid = std::max(resid, std::abs(-(p.epsilon - cx) * uy + (p.s - cy) * ux));
  fit.max_residual = resid;
  const double diam = detail::diameter(pts);
  if (resid > rel_tol * diam) {
    fit.status = LineStatus::not_colinear;
    return fit;
  }
  if (std::abs(ux) <= 1e-15 * std::abs(uy) || sxx <= tol::eps * tol::eps * static_cast<double>(pts.size())) {
    fit.status = syy == 0.0 ? LineStatus::gibbs : LineStatus::vertical;
    fit.intercept = cy;
    return fit;
  }
  fit.slope = uy / ux;
  fit.intercept = cy - fit.slope * cx;
  fit.status = fit.slope >= -rel_tol ? LineStatus::gibbs : LineStatus::inverted_line;
  if (fit.status == LineStatus::gibbs) fit.slope = std::max(fit.slope, 0.0);
  return fit;
}

/// (beta, log Z) with s_i = beta * eps_i + log Z when the ensemble is a
/// non-negative-slope line; nullopt otherwise.
inline std::optional<GibbsParams> gibbs_fit(const EsEnsemble& ens, double rel_tol = 1e-8) {
  const LineFit fit = fit_line(ens, rel_tol);
  if (fit.status != LineStatus::gibbs) return std::nullopt;
  return GibbsParams{fit.slope, fit.intercept};
}

/// A state which only populates the lowest energy block.
inline bool is_ground_state(const DiagonalState& state, double floor = tol::p_floor) {
  const auto blocks = state.spectrum().degenerate_blocks();
  for (std::size_t i = blocks.front().second; i < state.size(); ++i)
    if (state[i] >= floor) return false;
  return true;
}

/// Passive, colinear with non-negative slope, and uniform inside every
/// occupied degenerate block (ground states excepted).
inline bool is_completely_passive(const DiagonalState& state) {
  if (!is_passive(state)) return false;
  if (is_ground_state(state)) return true;
  if (!state.is_full_rank()) return false;
  for (const auto& [begin, end] : state.spectrum().degenerate_blocks())
    for (std::size_t i = begin + 1; i < end; ++i)
      if (std::abs(state[i] - state[begin]) > tol::order) return false;
  return gibbs_fit(build_ensemble(state)).has_value();
}

/// Pairwise slopes beta_{i,j} = (s_j - s_i) / (eps_j - eps_i) for i < j over
/// ensemble points, skipping degenerate pairs.
inline std::map<std::pair<std::size_t, std::size_t>, double> virtual_temperatures(const EsEnsemble& ens) {
  std::map<std::pair<std::size_t, std::size_t>, double> out;
  for (std::size_t i = 0; i < ens.size(); ++i)
    for (std::size_t j = i + 1; j < ens.size(); ++j) {
      const double de = ens.points[j].epsilon - ens.points[i].epsilon;
      if (std::abs(de) > tol::eps) out[{i, j}] = (ens.points[j].s - ens.points[i].s) / de;
    }
  return out;
}

struct BranchDecomposition {
  ConvexRegion hull;
  /// Ensemble point ids of vertices satisfying v_{k-1} <= v_k <= v_{k+1}, plus
  /// the leftmost and rightmost vertices.
  std::vector<std::size_t> upper;
  std::vector<std::size_t> lower;
  /// Face points keyed by hull edge index.
  std::map<std::size_t, std::vector<FacePoint>> face_points;
};

namespace detail {
inline bool leq(const EsPoint& a, const EsPoint& b, double t) {
  return a.epsilon <= b.epsilon + t && a.s <= b.s + t;
}
}  // namespace detail

inline BranchDecomposition branch_decomposition(const EsEnsemble& ens) {
  BranchDecomposition out;
  out.hull = convex_hull(ens);
  const auto& hull = out.hull;
  for (const auto& f : hull.face_points) out.face_points[f.edge].push_back(f);
  const auto n = static_cast<long long>(hull.n());
  if (ens.size() < 3 || n < 3) {
    out.upper = hull.vertex_ids;
    return out;
  }
  double emin = std::numeric_limits<double>::infinity(), emax = -emin;
  for (const auto& v : hull.vertices) {
    emin = std::min(emin, v.epsilon);
    emax = std::max(emax, v.epsilon);
  }
  for (long long k = 0; k < n; ++k) {
    const EsPoint& v = hull.vertex(k);
    const bool extremal = v.epsilon <= emin + tol::eps || v.epsilon >= emax - tol::eps;
    const bool chain = detail::leq(hull.vertex(k - 1), v, tol::merge) && detail::leq(v, hull.vertex(k + 1), tol::merge);
    (extremal || chain ? out.upper : out.lower).push_back(hull.vertex_ids[static_cast<std::size_t>(k)]);
  }
  return out;
}

struct VirtualQutrit {
  /// Energy level indices, ascending.
  std::array<std::size_t, 3> levels{};
  /// Selection case 'a'..'e'.
  char protocol_case = 'a';
  /// True when a vertex carrying face points was replaced by a face point.
  bool substituted = false;
};

namespace detail {

inline void require_nondegenerate(const DiagonalState& state) {
  if (state.spectrum().is_degenerate())
    throw InputError("virtual qutrit calculus requires a non-degenerate spectrum");
}

// Ensemble point id -> energy level (one-to-one for non-degenerate spectra).
inline std::vector<std::size_t> point_levels(const EsEnsemble& ens) {
  std::vector<std::size_t> lv(ens.size(), 0);
  for (std::size_t level = 0; level < ens.level_point.size(); ++level) lv[ens.level_point[level]] = level;
  return lv;
}

inline double chord_height(const EsPoint& a, const EsPoint& b, const EsPoint& p) {
  return std::abs(cross(a, b, p)) / dist(a, b);
}

}  // namespace detail

/// Chooses three non-colinear levels whose deformation has dA/dE >= 0 and
/// dA/dS <= 0. With the hull split into its lower boundary L = b_0..b_m = R
/// and upper boundary R = t_0..t_{r+1} = L, the case is fixed by whether the
/// lower boundary has interior vertices and by the signs of the hull-neighbour
/// spacings at the two extremal vertices:
///   (a) both extremes "closed": (L, b, R) with b the deepest interior lower vertex
///   (b) left extreme open:      (t_r, b_1, R)
///   (c) right extreme open:     (L, b_{m-1}, t_1)
///   (d) both open:              (t_r, b_1, t_1)
///   (e) no interior lower vertex: (L, t, R) with t the highest upper vertex
/// A member vertex with face points on an adjacent edge is replaced by the
/// nearest such face point, so that the deformation does not change which
/// points are vertices.
inline VirtualQutrit select_virtual_qutrit(const DiagonalState& state) {
  detail::require_nondegenerate(state);
  if (!is_passive(state)) throw InputError("virtual qutrit selection requires a passive state");
  if (is_completely_passive(state))
    throw CompletelyPassiveError("state is completely passive; no virtual qutrit exists");
  const EsEnsemble ens = build_ensemble(state);
  const BranchDecomposition bd = branch_decomposition(ens);
  const ConvexRegion& hull = bd.hull;
  const std::size_t n = hull.n();
  if (n < 3) throw CompletelyPassiveError("ensemble hull has no area; no virtual qutrit exists");

  std::size_t iR = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (hull.vertices[k].epsilon > hull.vertices[iR].epsilon) iR = k;
  const auto eps_at = [&](std::size_t k) { return hull.vertices[k % n].epsilon; };

  VirtualQutrit vq;
  std::array<std::size_t, 3> pos{};  // hull vertex positions
  const std::size_t L = 0, R = iR;
  if (iR == 1) {
    // Lower boundary is the single edge L-R.
    std::size_t best = iR + 1;
    for (std::size_t k = iR + 1; k < n; ++k)
      if (detail::chord_height(hull.vertices[L], hull.vertices[R], hull.vertices[k]) >
          detail::chord_height(hull.vertices[L], hull.vertices[R], hull.vertices[best]))
        best = k;
    pos = {L, best, R};
    vq.protocol_case = 'e';
  } else {
    const bool left_open = iR + 1 < n && eps_at(1) > eps_at(n - 1);
    const bool right_open = iR + 1 < n && eps_at(iR + 1) > eps_at(iR - 1);
    if (!left_open && !right_open) {
      std::size_t best = 1;
      for (std::size_t k = 1; k < iR; ++k)
        if (detail::chord_height(hull.vertices[L], hull.vertices[R], hull.vertices[k]) >
            detail::chord_height(hull.vertices[L], hull.vertices[R], hull.vertices[best]))
          best = k;
      pos = {L, best, R};
      vq.protocol_case = 'a';
    } else if (left_open && !right_open) {
      pos = {n - 1, 1, R};
      vq.protocol_case = 'b';
    } else if (!left_open && right_open) {
      pos = {L, iR - 1, iR + 1};
      vq.protocol_case = 'c';
    } else {
      pos = {n - 1, 1, iR + 1};
      vq.protocol_case = 'd';
    }
  }

  std::array<std::size_t, 3> ids{};
  for (int i = 0; i < 3; ++i) ids[i] = hull.vertex_ids[pos[i]];

  // Face-point substitution.
  if (!hull.face_points.empty()) {
    for (int i = 0; i < 3; ++i) {
      const std::size_t k = pos[i];
      const std::size_t prev_edge = (k + n - 1) % n;
      const FacePoint* nearest = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& f : hull.face_points) {
        if (f.edge != k && f.edge != prev_edge) continue;
        const double dd = detail::dist(ens.points[f.id], hull.vertices[k]);
        if (dd < best) {
          best = dd;
          nearest = &f;
        }
      }
      if (!nearest) continue;
      auto trial = ids;
      trial[i] = nearest->id;
      const double c = detail::cross(ens.points[trial[0]], ens.points[trial[1]], ens.points[trial[2]]);
      const double sc = detail::dist(ens.points[trial[0]], ens.points[trial[1]]) *
                        detail::dist(ens.points[trial[0]], ens.points[trial[2]]);
      if (trial[0] != trial[1] && trial[1] != trial[2] && trial[0] != trial[2] &&
          std::abs(c) > tol::hull_cross * sc) {
        ids = trial;
        vq.substituted = true;
      }
    }
  }

  const auto lv = detail::point_levels(ens);
  for (int i = 0; i < 3; ++i) vq.levels[i] = lv[ids[i]];
  std::sort(vq.levels.begin(), vq.levels.end());
  return vq;
}

/// Result of a qutrit deformation p_k -> p_k + dp_k that moves the state by (dE, dS).
struct QutritDeformation {
  std::array<double, 3> dp{};
  double dA = 0.0;
  /// det M for the members in ascending level order.
  double det = 0.0;
};

/// det of [[eps_1, eps_2, eps_3], [s_1, s_2, s_3], [1, 1, 1]]: twice the signed
/// triangle area, positive for counter-clockwise order.
inline double qutrit_determinant(const std::array<EsPoint, 3>& v) { return detail::cross(v[0], v[1], v[2]); }

/// Solves (dE, dS, 0) = M dp by Cramer's rule and evaluates the first-order
/// area change 1/2 sum_i Delta_{k_i+1, k_i-1} / p_{k_i} chi[v_{k_i}] dp_{k_i},
/// with k_i +- 1 the hull neighbours of member i and chi = 1 on hull vertices.
inline QutritDeformation qutrit_deformation(const DiagonalState& state, const std::array<std::size_t, 3>& levels,
                                            double dE, double dS) {
  detail::require_nondegenerate(state);
  const EsEnsemble ens = build_ensemble(state);
  std::array<EsPoint, 3> v;
  for (int i = 0; i < 3; ++i) {
    if (levels[i] >= state.size()) throw InputError("qutrit level index out of range");
    v[i] = ens.points[ens.level_point[levels[i]]];
  }
  const double det = qutrit_determinant(v);
  const double sc = detail::dist(v[0], v[1]) * detail::dist(v[0], v[2]);
  if (!(std::abs(det) > tol::hull_cross * sc)) throw InputError("qutrit members are colinear (det M = 0)");

  QutritDeformation out;
  out.det = det;
  // Columns of M are (eps_i, s_i, 1); the right-hand side is (dE, dS, 0).
  const auto col = [&](int i) { return std::array<double, 3>{v[i].epsilon, v[i].s, 1.0}; };
  const std::array<double, 3> rhs{dE, dS, 0.0};
  const auto det3 = [](const std::array<double, 3>& a, const std::array<double, 3>& b,
                       const std::array<double, 3>& c) {
    return a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1]) +
           c[0] * (a[1] * b[2] - a[2] * b[1]);
  };
  const double dm = det3(col(0), col(1), col(2));
  out.dp[0] = det3(rhs, col(1), col(2)) / dm;
  out.dp[1] = det3(col(0), rhs, col(2)) / dm;
  out.dp[2] = det3(col(0), col(1), rhs) / dm;

  const ConvexRegion hull = convex_hull(ens);
  const auto n = static_cast<long long>(hull.n());
  for (int i = 0; i < 3; ++i) {
    const std::size_t id = ens.level_point[levels[i]];
    const auto it = std::find(hull.vertex_ids.begin(), hull.vertex_ids.end(), id);
    if (it == hull.vertex_ids.end() || n < 3) continue;  // chi = 0
    const long long k = it - hull.vertex_ids.begin();
    const double spacing = hull.vertex(k + 1).epsilon - hull.vertex(k - 1).epsilon;
    out.dA += 0.5 * spacing / state[levels[i]] * out.dp[i];
  }
  return out;
}

inline double qutrit_area_differential(const DiagonalState& state, const std::array<std::size_t, 3>& levels,
                                       double dE, double dS) {
  return qutrit_deformation(state, levels, dE, dS).dA;
}

/// (dA/dE, dA/dS) for the given virtual qutrit.
inline std::array<double, 2> qutrit_area_gradient(const DiagonalState& state, const std::array<std::size_t, 3>& levels) {
  return {qutrit_deformation(state, levels, 1.0, 0.0).dA, qutrit_deformation(state, levels, 0.0, 1.0).dA};
}

struct ActivationResult {
  /// Smallest k with V_k not totally ordered; empty if none up to k_max.
  std::optional<std::size_t> k;
  /// True when the hull is a non-negative-slope line, which certifies
  /// k-passivity for every k rather than only up to k_max.
  bool certified_complete = false;
  std::size_t k_max = 0;
};

inline constexpr std::size_t default_k_max = 64;

/// Scans k = 1..k_max for the first regularized k-copy ensemble that is not
/// totally ordered.
inline ActivationResult min_activation_k(const EsEnsemble& ens, std::size_t k_max = default_k_max,
                                         double cap = default_composition_cap, double order_tol = tol::merge) {
  if (k_max == 0) throw InputError("k_max must be at least 1");
  ActivationResult out;
  out.k_max = k_max;
  if (!is_totally_ordered(ens, order_tol)) {
    out.k = 1;
    return out;
  }
  if (gibbs_fit(ens).has_value()) {
    out.certified_complete = true;
    return out;
  }
  for (std::size_t k = 2; k <= k_max; ++k) {
    if (!is_totally_ordered(regularized_k_ensemble(ens, k, cap), order_tol)) {
      out.k = k;
      return out;
    }
  }
  return out;
}

}  // namespace passivity
