#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "passivity/geometry.hpp"
#include "passivity/thermo.hpp"

using namespace passivity;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const EnergySpectrum& qutrit() {
  static const EnergySpectrum h({0, 1, 2});
  return h;
}

DiagonalState rho0() {
  return full_rank_regularize(DiagonalState(qutrit(), {0.5, 0.5, 0.0}), 1e-4);
}

std::vector<double> vec(const DiagonalState& s) { return {s.probs().begin(), s.probs().end()}; }

}  // namespace

TEST_CASE("Gibbs states", "[thermo]") {
  const auto u = gibbs_state(qutrit(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(u[i], WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(average_energy(gibbs_state(qutrit(), 0.83)), WithinAbs(0.502, 1e-3));
  const auto g = gibbs_state(qutrit(), 1.3);
  const auto o = oracle::gibbs({0, 1, 2}, 1.3);
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(g[i], WithinAbs(o[i], 1e-15));
  CHECK_THROWS_AS(gibbs_state(qutrit(), -1.0), InputError);
  const auto cold = gibbs_state(qutrit(), 1e9);
  CHECK(cold[0] == 1.0);
  // Shifting the energies leaves the state alone.
  const auto shifted = gibbs_state(EnergySpectrum({-5, -4, -3}), 1.3);
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(shifted[i], WithinAbs(g[i], 1e-15));
  CHECK_THAT(log_partition(EnergySpectrum({-5, -4, -3}), 1.3),
             WithinAbs(5 * 1.3 + log_partition(qutrit(), 1.3), 1e-12));
}

TEST_CASE("inverse temperature solvers", "[thermo]") {
  CHECK_THAT(solve_beta_for_energy(qutrit(), 0.5), WithinAbs(0.83, 0.01));
  CHECK(solve_beta_for_energy(qutrit(), 1.0) == 0.0);
  CHECK_THAT(solve_beta_for_entropy(qutrit(), std::log(2.0)), WithinAbs(1.32, 0.01));
  CHECK(solve_beta_for_entropy(qutrit(), std::log(3.0)) == 0.0);
  CHECK_THROWS_AS(solve_beta_for_energy(qutrit(), 1.5), Infeasible);
  CHECK_THROWS_AS(solve_beta_for_energy(qutrit(), -0.1), Infeasible);
  CHECK_THROWS_AS(solve_beta_for_entropy(qutrit(), 1.2), Infeasible);
  CHECK(solve_beta_for_energy(qutrit(), 0.0) == beta_cap(qutrit()));

  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 2 + t % 7;
    const auto e = oracle::random_energies(rng, d);
    const EnergySpectrum h(e);
    const double beta = 10 * rng.uniform();
    const auto g = oracle::gibbs(e, beta);
    CHECK_THAT(solve_beta_for_energy(h, oracle::dot(e, g)), WithinAbs(beta, 1e-8 * (1 + beta)));
    CHECK_THAT(solve_beta_for_entropy(h, oracle::shannon(g)), WithinAbs(beta, 1e-7 * (1 + beta)));
  }
}

TEST_CASE("work and entropy measures of the half-half state", "[thermo]") {
  const auto r = rho0();
  const double bmax = solve_beta_for_entropy(qutrit(), von_neumann_entropy(r));
  const double bmin = solve_beta_for_energy(qutrit(), average_energy(r));
  CHECK_THAT(bmax, WithinAbs(1.32, 0.01));
  CHECK_THAT(bmin, WithinAbs(0.83, 0.01));
  const auto gmax = oracle::gibbs({0, 1, 2}, bmax);
  const auto gmin = oracle::gibbs({0, 1, 2}, bmin);
  CHECK_THAT(max_extractable_work(r), WithinAbs(average_energy(r) - oracle::dot({0, 1, 2}, gmax), 1e-10));
  CHECK_THAT(max_entropic_gain(r), WithinAbs(oracle::shannon(gmin) - von_neumann_entropy(r), 1e-10));
  CHECK_THAT(max_extractable_work(r), WithinAbs(0.196, 0.003));
  CHECK_THAT(max_entropic_gain(r), WithinAbs(0.208, 0.003));
}

TEST_CASE("measures vanish exactly on Gibbs states", "[thermo]") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 2 + t % 7;
    const auto e = oracle::random_energies(rng, d, 0.01);
    const EnergySpectrum h(e);
    // Every passive qubit is a Gibbs state.
    const bool gibbs = t % 2 == 0 || d == 2;
    const auto s = t % 2 == 0 ? gibbs_state(h, 8 * rng.uniform())
                         : DiagonalState(h, oracle::random_passive_probs(rng, d, 1e-3));
    CHECK(is_completely_passive(s) == gibbs);
    if (gibbs) {
      CHECK(max_extractable_work(s) < 1e-9);
      CHECK(max_entropic_gain(s) < 1e-9);
    } else {
      CHECK(max_extractable_work(s) > 1e-9);
      CHECK(max_entropic_gain(s) > 1e-9);
    }
  }
}

TEST_CASE("beta athermality", "[thermo]") {
  const auto g = gibbs_state(qutrit(), 1.1);
  CHECK_THAT(beta_athermality(g, 1.1), WithinAbs(0.0, 1e-14));
  CHECK(beta_athermality(g, 0.5) > 0.0);
  CHECK(beta_athermality(g, 2.0) > 0.0);
  CHECK_THROWS_AS(beta_athermality(g, -0.1), InputError);

  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t d = 2 + t % 6;
    const auto e = oracle::random_energies(rng, d);
    const auto p = oracle::random_probs(rng, d);
    const DiagonalState s(EnergySpectrum(e), p);
    const double beta = 15 * rng.uniform();
    const auto f = beta_athermality_forms(s, beta);
    CHECK_THAT(f.relative_entropy_form, WithinAbs(f.free_energy_form, 1e-10));
    CHECK_THAT(f.relative_entropy_form, WithinAbs(oracle::a_beta(e, p, beta), 1e-10));
    CHECK(f.value >= 0.0);
  }
}

TEST_CASE("minimal beta athermality equals the entropic gain", "[thermo]") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto e = oracle::random_energies(rng, 3, 0.05);
    auto p = oracle::random_passive_probs(rng, 3, 1e-3);
    const DiagonalState s(EnergySpectrum(e), p);
    const auto m = min_beta_athermality(s);
    const double cap = beta_cap(EnergySpectrum(e));
    const double numeric = oracle::golden_min([&](double b) { return oracle::a_beta(e, p, b); }, 0.0, cap);
    CHECK_THAT(m.value, WithinAbs(numeric, 1e-8));
    CHECK_THAT(m.value, WithinAbs(max_entropic_gain(s), 1e-10));
    // The derivative E(rho) - E(gamma_beta) changes sign at beta_min.
    const double E = average_energy(s);
    if (m.beta > 1e-6) {
      CHECK(E - oracle::dot(e, oracle::gibbs(e, m.beta * 0.99)) < 0);
      CHECK(E - oracle::dot(e, oracle::gibbs(e, m.beta * 1.01)) > 0);
    }
  }

  const auto g = min_beta_athermality(gibbs_state(qutrit(), 0.7));
  CHECK_THAT(g.beta, WithinAbs(0.7, 1e-9));
  CHECK(g.value < 1e-12);

  const auto r = min_beta_athermality(rho0());
  CHECK_THAT(r.beta, WithinAbs(0.83, 0.01));
  CHECK_THAT(r.value, WithinAbs(0.208, 0.003));

  const auto ground = min_beta_athermality(DiagonalState(qutrit(), {1.0, 0.0, 0.0}));
  CHECK(ground.beta_infinite_limit);
  CHECK(ground.beta == beta_cap(qutrit()));
  CHECK(ground.value < 1e-12);
}

TEST_CASE("equilibrium curve", "[thermo]") {
  const auto c = equilibrium_curve(qutrit(), 200);
  REQUIRE(c.samples.size() == 200);
  CHECK(c.samples.front().beta == 0.0);
  CHECK_THAT(c.samples.front().point.E, WithinAbs(1.0, 1e-15));
  CHECK_THAT(c.samples.front().point.S, WithinAbs(std::log(3.0), 1e-15));
  CHECK_THAT(c.samples.back().point.E, WithinAbs(0.0, 1e-12));
  CHECK_THAT(c.samples.back().point.S, WithinAbs(0.0, 1e-12));
  for (std::size_t i = 1; i < c.samples.size(); ++i) {
    CHECK(c.samples[i].beta > c.samples[i - 1].beta);
    CHECK(c.samples[i].point.E <= c.samples[i - 1].point.E);
    CHECK(c.samples[i].point.S <= c.samples[i - 1].point.S);
  }
  CHECK(equilibrium_curve(qutrit(), 2).samples.size() == 2);
  CHECK_THROWS_AS(equilibrium_curve(qutrit(), 1), InputError);
}

TEST_CASE("equilibrium curve slope is the inverse temperature", "[thermo]") {
  const std::vector<double> e{0, 1, 2};
  for (double beta : {0.1, 0.5, 0.83, 1.32, 2.0, 4.0}) {
    const double h = 1e-5;
    const double dE = oracle::dot(e, oracle::gibbs(e, beta + h)) - oracle::dot(e, oracle::gibbs(e, beta - h));
    const double dS = oracle::shannon(oracle::gibbs(e, beta + h)) - oracle::shannon(oracle::gibbs(e, beta - h));
    CHECK_THAT(dS / dE, WithinRel(beta, 1e-3));
    const auto mid = gibbs_state(qutrit(), beta);
    CHECK_THAT(oracle::shannon(vec(mid)), WithinAbs(von_neumann_entropy(mid), 1e-15));
  }
}
