#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "passivity/passivity.hpp"

using namespace passivity;
using Catch::Matchers::WithinAbs;

namespace {

const EnergySpectrum& qutrit() {
  static const EnergySpectrum h({0, 1, 2});
  return h;
}

DiagonalState rho0() { return full_rank_regularize(DiagonalState(qutrit(), {0.5, 0.5, 0.0}), 1e-4); }

TrajectoryRecord run(const DiagonalState& s, Tangent u, double h = 1e-3) {
  TrajectorySpec spec;
  spec.tangent = u;
  spec.h = h;
  return integrate_trajectory(s, spec);
}

double endpoint_beta(const TrajectoryRecord& r) {
  return solve_beta_for_energy(r.steps.back().state.spectrum(), r.steps.back().point.E);
}

}  // namespace

TEST_CASE("partial thermalization", "[trajectories]") {
  const auto s = DiagonalState(qutrit(), {0.6, 0.3, 0.1});
  const auto g = gibbs_state(qutrit(), solve_beta_for_energy(qutrit(), average_energy(s)));
  const auto id = partial_thermalization_step(s, g, 0.0);
  const auto full = partial_thermalization_step(s, g, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(id[i] == s[i]);
    CHECK_THAT(full[i], WithinAbs(g[i], 1e-15));
  }
  for (double p : {0.1, 0.5, 0.9}) {
    const auto out = partial_thermalization_step(s, g, p);
    CHECK(std::abs(average_energy(out) - average_energy(s)) <= 1e-12);
    CHECK(von_neumann_entropy(out) >= von_neumann_entropy(s));
  }
  CHECK_THAT(von_neumann_entropy(full) - von_neumann_entropy(s), WithinAbs(max_entropic_gain(s), 1e-10));
  CHECK_THROWS_AS(partial_thermalization_step(s, gibbs_state(EnergySpectrum({0, 1, 3}), 1.0), 0.5), InputError);
  CHECK_THROWS_AS(partial_thermalization_step(s, g, 1.5), InputError);
}

TEST_CASE("tangents", "[trajectories]") {
  const auto t = Tangent::make(-3, 4);
  CHECK_THAT(t.E, WithinAbs(-0.6, 1e-15));
  CHECK_THAT(t.S, WithinAbs(0.8, 1e-15));
  CHECK_THROWS_AS(Tangent::make(1, 1), InputError);
  CHECK_THROWS_AS(Tangent::make(-1, -1), InputError);
  CHECK_THROWS_AS(Tangent::make(0, 0), InputError);
  const auto a = Tangent::from_angle(0.0);
  CHECK(a.E == -1.0);
  CHECK_THAT(Tangent::from_angle(std::acos(-1.0) / 2).S, WithinAbs(1.0, 1e-15));
}

TEST_CASE("single activation steps", "[trajectories]") {
  const auto s = rho0();
  const auto zero = activation_step_state(s, Tangent::isoenergetic(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(zero.state[i] == s[i]);

  const auto start = DiagonalState(qutrit(), {0.6, 0.3, 0.1});
  std::vector<double> s_err;
  for (double h : {1e-2, 1e-3, 1e-4}) {
    const auto st = activation_step_state(start, Tangent::isoenergetic(), h);
    const double dE = average_energy(st.state) - average_energy(start);
    CHECK(std::abs(dE) <= 10 * h * h);
    const double dS = von_neumann_entropy(st.state) - von_neumann_entropy(start);
    s_err.push_back(std::abs(dS - h));
    double sum = 0;
    for (double p : st.state.probs()) sum += p;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-14));
    CHECK(st.dA < 0.0);
  }
  // The entropy misses its target at second order.
  CHECK_THAT(s_err[0] / s_err[1], WithinAbs(100.0, 10.0));
  CHECK_THAT(s_err[1] / s_err[2], WithinAbs(100.0, 10.0));
  CHECK_THROWS_AS(activation_step_state(start, Tangent::isoenergetic(), 10.0), StepError);
  CHECK_THROWS_AS(activation_step_state(gibbs_state(qutrit(), 1.0), Tangent::isoenergetic(), 1e-3),
                  CompletelyPassiveError);
  CHECK_THROWS_AS(activation_step_state(start, Tangent::isoenergetic(), -1e-3), InputError);
}

TEST_CASE("half-half state endpoint temperatures", "[trajectories]") {
  const auto iso_s = run(rho0(), Tangent::isentropic());
  CHECK(iso_s.terminated == Termination::reached_equilibrium);
  CHECK_THAT(endpoint_beta(iso_s), WithinAbs(1.32, 0.01));
  CHECK_THAT(iso_s.steps.back().point.S, WithinAbs(iso_s.steps.front().point.S, 1e-9));

  const auto iso_e = run(rho0(), Tangent::isoenergetic());
  CHECK(iso_e.terminated == Termination::reached_equilibrium);
  CHECK_THAT(endpoint_beta(iso_e), WithinAbs(0.83, 0.01));
  CHECK_THAT(iso_e.steps.back().point.E, WithinAbs(iso_e.steps.front().point.E, 1e-9));

  const auto diag = run(rho0(), Tangent::make(-1, 1));
  CHECK(diag.terminated == Termination::reached_equilibrium);
  CHECK(endpoint_beta(diag) > endpoint_beta(iso_e));
  CHECK(endpoint_beta(diag) < endpoint_beta(iso_s));

  for (const auto* r : {&iso_s, &iso_e, &diag}) {
    const auto rep = verify_monotonicity(*r);
    CHECK(rep.ok());
    CHECK(rep.pairs_checked == r->steps_taken());
    // The endpoint sits on the equilibrium curve and its virtual
    // temperatures have nearly collapsed to one value.
    const auto& end = r->steps.back();
    const auto b = passive_region_bounds(qutrit(), end.point.E);
    CHECK(b.S_max - end.point.S <= 2e-6);
    double lo = 1e9, hi = -1e9;
    for (const auto& [key, beta] : virtual_temperatures(build_ensemble(end.state))) {
      lo = std::min(lo, beta);
      hi = std::max(hi, beta);
    }
    CHECK(hi - lo < 0.02);
    CHECK(end.W_max < 1e-5);
    CHECK(end.dS_max < 1e-5);
  }
}

TEST_CASE("trajectories record every measure", "[trajectories]") {
  const auto r = run(DiagonalState(qutrit(), {0.6, 0.3, 0.1}), Tangent::make(-0.3, 1), 1e-2);
  REQUIRE(r.steps.size() > 2);
  for (const auto& s : r.steps) {
    CHECK(s.area == state_area(s.state));
    CHECK_THAT(s.athermality, WithinAbs(geometric_athermality(qutrit(), s.point.E, s.point.S).value, 1e-9));
    CHECK_THAT(s.W_max, WithinAbs(max_extractable_work(s.state), 1e-15));
    CHECK_THAT(s.dS_max, WithinAbs(max_entropic_gain(s.state), 1e-15));
    CHECK_THAT(s.a_beta_min, WithinAbs(min_beta_athermality(s.state).value, 1e-15));
    double sum = 0;
    for (double p : s.state.probs()) sum += p;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
  }
  CHECK(r.steps.front().h == 0.0);
}

TEST_CASE("starting on the equilibrium curve takes no steps", "[trajectories]") {
  const auto r = run(gibbs_state(qutrit(), 0.9), Tangent::isoenergetic());
  CHECK(r.steps_taken() == 0);
  CHECK(r.terminated == Termination::reached_equilibrium);
  CHECK_THROWS_AS(run(DiagonalState(qutrit(), {0.2, 0.5, 0.3}), Tangent::isoenergetic()), InputError);
  CHECK_THROWS_AS(run(DiagonalState(qutrit(), {0.5, 0.5, 0.0}), Tangent::isoenergetic()), NotFullRank);
}

TEST_CASE("integrated area change converges at first order", "[trajectories]") {
  for (const auto u : {Tangent::isentropic(), Tangent::isoenergetic(), Tangent::make(-1, 1)}) {
    std::vector<double> err;
    for (double h : {2e-3, 1e-3, 5e-4}) {
      TrajectorySpec spec;
      spec.tangent = u;
      spec.h = h;
      spec.max_steps = static_cast<std::size_t>(std::llround(0.1 / h));
      const auto r = integrate_trajectory(rho0(), spec);
      REQUIRE(r.steps_taken() == spec.max_steps);
      double sum = r.steps.front().athermality;
      for (std::size_t i = 1; i < r.steps.size(); ++i) sum += r.steps[i].dA_predicted;
      err.push_back(std::abs(r.steps.back().athermality - sum));
    }
    for (std::size_t i = 1; i < err.size(); ++i) {
      const double ratio = err[i - 1] / err[i];
      CHECK(ratio > 1.7);
      CHECK(ratio < 2.6);
    }
  }
}

TEST_CASE("monotonicity report flags injected increases", "[trajectories]") {
  auto r = run(rho0(), Tangent::isoenergetic());
  REQUIRE(verify_monotonicity(r).ok());
  auto bad = r;
  bad.steps[10].athermality += 0.5;
  const auto rep = verify_monotonicity(bad);
  CHECK_FALSE(rep.ok());
  bool flagged = false;
  for (const auto& v : rep.violations) flagged = flagged || (v.step == 10 && v.quantity == "athermality");
  CHECK(flagged);

  auto bad_w = r;
  bad_w.steps[20].W_max += 0.5;
  CHECK_FALSE(verify_monotonicity(bad_w).ok());
}

TEST_CASE("fixed-step runs accumulate violations", "[trajectories]") {
  TrajectorySpec spec;
  spec.tangent = Tangent::isentropic();
  spec.h = 1e-3;
  spec.adaptive = false;
  spec.max_steps = 400;
  const auto r = integrate_trajectory(rho0(), spec);
  CHECK(r.steps_taken() > 0);
  CHECK_FALSE(verify_monotonicity(r).ok());
}

TEST_CASE("random qutrit trajectories are monotone", "[trajectories]") {
  Rng rng(77);
  for (int t = 0; t < 20; ++t) {
    const auto e = oracle::random_energies(rng, 3, 0.1);
    const auto p = oracle::random_passive_probs(rng, 3, 1e-2);
    const DiagonalState s(EnergySpectrum(e), p);
    const auto r = run(s, Tangent::from_angle(rng.uniform() * std::acos(-1.0) / 2));
    CHECK(r.terminated == Termination::reached_equilibrium);
    CHECK(verify_monotonicity(r).ok());
  }
}

TEST_CASE("higher-dimensional trajectories", "[trajectories]") {
  Rng rng(5);
  std::size_t reached = 0;
  for (int t = 0; t < 10; ++t) {
    const auto e = oracle::random_energies(rng, 5, 0.1);
    const DiagonalState s(EnergySpectrum(e), oracle::random_passive_probs(rng, 5, 1e-2));
    const auto r = run(s, Tangent::make(-1, 2), 1e-3);
    CHECK(r.steps_taken() > 0);
    CHECK(std::isnan(r.steps.back().athermality));
    CHECK((r.terminated == Termination::reached_equilibrium || r.terminated == Termination::stalled));
    reached += r.terminated == Termination::reached_equilibrium ? 1 : 0;
    CHECK(verify_monotonicity(r).ok());
    CHECK(r.steps.back().area < r.steps.front().area);
  }
  CHECK(reached >= 5);
}
