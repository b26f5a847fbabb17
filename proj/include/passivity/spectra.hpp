#pragma once

// Energy spectra and diagonal states: validation, passivity, passification,
// energy/entropy functionals and single-copy ergotropy.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "passivity/core.hpp"

namespace passivity {

/// Hamiltonian eigenvalues in ascending order.
class EnergySpectrum {
 public:
  EnergySpectrum() = default;

  explicit EnergySpectrum(std::vector<double> energies) : energies_(std::move(energies)) {
    if (energies_.empty()) throw InputError("energy spectrum must have at least one level");
    for (std::size_t i = 0; i < energies_.size(); ++i) {
      if (!std::isfinite(energies_[i]))
        throw InputError("energy " + std::to_string(i) + " is not finite");
      if (i > 0 && energies_[i] < energies_[i - 1])
        throw InputError("energies must be sorted non-decreasing (level " + std::to_string(i) +
                         ")");
    }
  }

  std::size_t size() const { return energies_.size(); }
  double operator[](std::size_t i) const { return energies_[i]; }
  std::span<const double> energies() const { return energies_; }
  double min() const { return energies_.front(); }
  double max() const { return energies_.back(); }
  double width() const { return max() - min(); }
  double mean() const {
    return std::accumulate(energies_.begin(), energies_.end(), 0.0) /
           static_cast<double>(energies_.size());
  }

  /// Half-open [begin, end) ranges of levels whose consecutive spacing is below tol::eps.
  std::vector<std::pair<std::size_t, std::size_t>> degenerate_blocks() const {
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= energies_.size(); ++i) {
      if (i == energies_.size() || energies_[i] - energies_[i - 1] > tol::eps) {
        blocks.emplace_back(begin, i);
        begin = i;
      }
    }
    return blocks;
  }

  bool is_degenerate() const { return degenerate_blocks().size() != energies_.size(); }

  friend bool operator==(const EnergySpectrum&, const EnergySpectrum&) = default;

 private:
  std::vector<double> energies_;
};

/// Populations (p_i) of a state diagonal in the energy eigenbasis.
class DiagonalState {
 public:
  DiagonalState() = default;

  DiagonalState(EnergySpectrum spectrum, std::vector<double> probs)
      : spectrum_(std::move(spectrum)), probs_(std::move(probs)) {
    if (probs_.size() != spectrum_.size())
      throw InputError("state has " + std::to_string(probs_.size()) +
                       " populations but the spectrum has " + std::to_string(spectrum_.size()) +
                       " levels");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(probs_[i]) || probs_[i] < 0.0 || probs_[i] > 1.0 + tol::norm)
        throw InputError("population " + std::to_string(i) + " is outside [0, 1]");
      sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > tol::norm)
      throw InputError("populations sum to " + std::to_string(sum) + ", expected 1");
  }

  /// Rescales non-negative weights to unit sum before validation.
  static DiagonalState normalized(EnergySpectrum spectrum, std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) throw InputError("weights must be finite and non-negative");
      sum += w;
    }
    if (sum <= 0.0) throw InputError("weights sum to zero");
    for (double& w : weights) w /= sum;
    fix_sum(weights);
    return DiagonalState(std::move(spectrum), std::move(weights));
  }

  const EnergySpectrum& spectrum() const { return spectrum_; }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const { return probs_.size(); }

  double min_prob() const { return *std::min_element(probs_.begin(), probs_.end()); }
  bool is_full_rank(double floor = tol::p_floor) const { return min_prob() >= floor; }

 private:
  // Pushes the rounding residue of a normalization into the largest entry.
  static void fix_sum(std::vector<double>& p) {
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    auto big = std::max_element(p.begin(), p.end());
    *big += 1.0 - sum;
  }

  EnergySpectrum spectrum_;
  std::vector<double> probs_;
};

/// An (average energy, entropy) pair on the energy-entropy diagram. Entropy in nats.
struct MacroPoint {
  double E = 0.0;
  double S = 0.0;
};

inline double average_energy(const DiagonalState& state) {
  double e = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) e += state[i] * state.spectrum()[i];
  return e;
}

inline double von_neumann_entropy(const DiagonalState& state) {
  double s = 0.0;
  for (double p : state.probs()) s += entropy_term(p);
  return s;
}

inline MacroPoint macro_point(const DiagonalState& state) {
  return {average_energy(state), von_neumann_entropy(state)};
}

/// Populations are anti-ordered with respect to energies. Levels inside a
/// degenerate block are not compared with each other.
inline bool is_passive(const DiagonalState& state) {
  const auto& h = state.spectrum();
  const auto blocks = h.degenerate_blocks();
  // Comparing the minimum of each block with the maximum of every later block
  // is equivalent to the pairwise condition.
  double running_min = std::numeric_limits<double>::infinity();
  for (const auto& [begin, end] : blocks) {
    double block_max = 0.0;
    double block_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < end; ++i) {
      block_max = std::max(block_max, state[i]);
      block_min = std::min(block_min, state[i]);
    }
    if (block_max > running_min + tol::order) return false;
    running_min = std::min(running_min, block_min);
  }
  return true;
}

/// Dimension-checked overload for populations supplied separately from a spectrum.
inline bool is_passive(const EnergySpectrum& spectrum, std::span<const double> probs) {
  if (probs.size() != spectrum.size()) throw InputError("dimension mismatch between state and spectrum");
  return is_passive(DiagonalState(spectrum, std::vector<double>(probs.begin(), probs.end())));
}

struct Passification {
  DiagonalState state;
  /// permutation[i] is the original level whose population now sits on level i.
  std::vector<std::size_t> permutation;
};

/// Sorts populations non-increasing against ascending energies. The sort is
/// stable so an already passive, non-degenerate input maps to the identity.
inline Passification passify(const DiagonalState& state) {
  std::vector<std::size_t> perm(state.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return state[a] > state[b]; });
  std::vector<double> p(state.size());
  for (std::size_t i = 0; i < perm.size(); ++i) p[i] = state[perm[i]];
  return {DiagonalState(state.spectrum(), std::move(p)), std::move(perm)};
}

/// Work extractable from a single copy by a unitary: E(rho) - E(passify(rho)).
inline double single_shot_ergotropy(const DiagonalState& state) {
  const double w = average_energy(state) - average_energy(passify(state).state);
  return std::max(w, 0.0);
}

/// Mixes with the maximally mixed state: (1 - delta) p + delta / d.
inline DiagonalState full_rank_regularize(const DiagonalState& state, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("regularization delta must lie in (0, 1)");
  const double d = static_cast<double>(state.size());
  std::vector<double> p(state.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - delta) * state[i] + delta / d;
  return DiagonalState::normalized(state.spectrum(), std::move(p));
}

}  // namespace passivity
