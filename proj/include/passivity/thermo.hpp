#pragma once

// Gibbs states, inverse-temperature solvers, the equilibrium curve and the
// asymptotic work/entropy measures W_max, dS_max and a_beta.

#include <algorithm>
#include <cmath>
#include <vector>

#include "passivity/core.hpp"
#include "passivity/spectra.hpp"

namespace passivity {

/// Largest inverse temperature handled explicitly; beyond it exp(-beta * width)
/// underflows and the Gibbs state is treated as its beta -> infinity limit.
inline double beta_cap(const EnergySpectrum& h) { return 700.0 / (h.width() + 1e-300); }

namespace detail {

// Gibbs populations with energies shifted so the ground level sits at zero.
inline std::vector<double> gibbs_probs(const EnergySpectrum& h, double beta) {
  std::vector<double> p(h.size());
  double z = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    p[i] = std::exp(-beta * (h[i] - h.min()));
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

inline double log_partition_shifted(const EnergySpectrum& h, double beta) {
  double z = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) z += std::exp(-beta * (h[i] - h.min()));
  return std::log(z);
}

inline double gibbs_energy(const EnergySpectrum& h, double beta) {
  const auto p = gibbs_probs(h, beta);
  double e = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) e += p[i] * (h[i] - h.min());
  return e + h.min();
}

inline double gibbs_entropy(const EnergySpectrum& h, double beta) {
  const auto p = gibbs_probs(h, beta);
  double s = 0.0;
  for (double x : p) s += entropy_term(x);
  return s;
}

// Root of a decreasing function on [0, hi] by bisection.
template <class F>
double bisect_decreasing(F&& f, double target, double hi) {
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// gamma_beta = exp(-beta H) / Z. Inverse temperatures above beta_cap are
/// clamped to beta_cap.
inline DiagonalState gibbs_state(const EnergySpectrum& h, double beta) {
  if (!std::isfinite(beta) || beta < 0.0) throw InputError("inverse temperature must be finite and >= 0");
  beta = std::min(beta, beta_cap(h));
  return DiagonalState::normalized(h, detail::gibbs_probs(h, beta));
}

/// log Z_beta in the original (unshifted) energy frame.
inline double log_partition(const EnergySpectrum& h, double beta) {
  return -beta * h.min() + detail::log_partition_shifted(h, beta);
}

/// beta with E(gamma_beta) = E, for E in (eps_1, mean energy].
inline double solve_beta_for_energy(const EnergySpectrum& h, double E) {
  const double width = h.width();
  const double slack = 1e-10 * (width > 0.0 ? width : 1.0);
  if (E > h.mean() + slack || E < h.min() - slack)
    throw Infeasible("energy " + std::to_string(E) + " is outside the attainable Gibbs range [" +
                     std::to_string(h.min()) + ", " + std::to_string(h.mean()) + "]");
  if (width == 0.0 || E >= h.mean()) return 0.0;
  const double cap = beta_cap(h);
  if (E <= detail::gibbs_energy(h, cap)) return cap;
  return detail::bisect_decreasing([&](double b) { return detail::gibbs_energy(h, b); }, E, cap);
}

/// beta with S(gamma_beta) = S, for S in (log g, log d] with g the ground degeneracy.
inline double solve_beta_for_entropy(const EnergySpectrum& h, double S) {
  const double smax = std::log(static_cast<double>(h.size()));
  const double cap = beta_cap(h);
  const double smin = detail::gibbs_entropy(h, cap);
  if (S > smax + 1e-12 || S < -1e-12)
    throw Infeasible("entropy " + std::to_string(S) + " is outside [0, log d]");
  if (h.width() == 0.0 || S >= smax) return 0.0;
  if (S <= smin) return cap;
  return detail::bisect_decreasing([&](double b) { return detail::gibbs_entropy(h, b); }, S, cap);
}

/// W_max = E(rho) - E(gamma_beta_max) with S(gamma_beta_max) = S(rho).
inline double max_extractable_work(const DiagonalState& state) {
  const auto& h = state.spectrum();
  const double beta = solve_beta_for_entropy(h, von_neumann_entropy(state));
  return std::max(0.0, average_energy(state) - detail::gibbs_energy(h, beta));
}

/// dS_max = S(gamma_beta_min) - S(rho) with E(gamma_beta_min) = E(rho).
inline double max_entropic_gain(const DiagonalState& state) {
  const auto& h = state.spectrum();
  const double beta = solve_beta_for_energy(h, average_energy(state));
  return std::max(0.0, detail::gibbs_entropy(h, beta) - von_neumann_entropy(state));
}

struct BetaAthermality {
  double value = 0.0;
  /// sum_i p_i (log p_i + beta eps_i) + log Z_beta
  double relative_entropy_form = 0.0;
  /// beta (E(rho) - E(gamma)) - (S(rho) - S(gamma))
  double free_energy_form = 0.0;
};

inline BetaAthermality beta_athermality_forms(const DiagonalState& state, double beta) {
  if (!std::isfinite(beta) || beta < 0.0) throw InputError("inverse temperature must be finite and >= 0");
  const auto& h = state.spectrum();
  BetaAthermality out;
  // Shifted frame: the ground-energy offsets cancel between the two terms.
  double rel = detail::log_partition_shifted(h, beta);
  for (std::size_t i = 0; i < state.size(); ++i)
    if (state[i] > 0.0) rel += state[i] * (std::log(state[i]) + beta * (h[i] - h.min()));
  out.relative_entropy_form = rel;
  const double e_gap = average_energy(state) - detail::gibbs_energy(h, beta);
  const double s_gap = von_neumann_entropy(state) - detail::gibbs_entropy(h, beta);
  out.free_energy_form = beta * e_gap - s_gap;
  out.value = std::max(0.0, rel);
  return out;
}

/// a_beta(rho) = S_rel(rho || gamma_beta).
inline double beta_athermality(const DiagonalState& state, double beta) {
  return beta_athermality_forms(state, beta).value;
}

struct MinBetaAthermality {
  double beta = 0.0;
  double value = 0.0;
  /// Set for ground states, whose infimum is only reached as beta -> infinity.
  bool beta_infinite_limit = false;
};

inline MinBetaAthermality min_beta_athermality(const DiagonalState& state) {
  const auto& h = state.spectrum();
  const double beta = solve_beta_for_energy(h, average_energy(state));
  MinBetaAthermality out;
  out.beta = beta;
  out.beta_infinite_limit = h.width() > 0.0 && beta >= beta_cap(h);
  out.value = beta_athermality(state, beta);
  return out;
}

struct CurveSample {
  double beta = 0.0;
  MacroPoint point;
};

struct EquilibriumCurve {
  std::vector<CurveSample> samples;
};

/// beta = 0 followed by n_samples - 1 log-spaced inverse temperatures ending at beta_cap.
inline EquilibriumCurve equilibrium_curve(const EnergySpectrum& h, std::size_t n_samples) {
  if (n_samples < 2) throw InputError("an equilibrium curve needs at least 2 samples");
  EquilibriumCurve curve;
  const double cap = beta_cap(h);
  const double lo = std::min(1e-3 / (h.width() + 1e-300), cap);
  const std::size_t m = n_samples - 1;
  for (std::size_t i = 0; i < n_samples; ++i) {
    double beta = 0.0;
    if (i > 0)
      beta = m == 1 ? cap
                    : std::exp(std::log(lo) + (std::log(cap) - std::log(lo)) * static_cast<double>(i - 1) /
                                                  static_cast<double>(m - 1));
    curve.samples.push_back({beta, {detail::gibbs_energy(h, beta), detail::gibbs_entropy(h, beta)}});
  }
  return curve;
}

}  // namespace passivity
