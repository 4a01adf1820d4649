#include "elastica/dynamics.hpp"
#include "elastica/energy_monitor.hpp"
#include "elastica/initial_data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace elastica;

namespace {

constexpr double kPi = std::numbers::pi;

DerivativeSet at_rest(const Grid& g) {
  return {identity_map(g), VectorField(g), VectorField(g), VectorField(g), VectorField(g)};
}

VectorField bump(const Grid& g) {
  VectorField w(g);
  w[0] = ScalarField::from_function(g, [](double x1, double x2) { return std::sin(x1) * x2 * (1 - x2); });
  w[1] = ScalarField::from_function(g, [](double x1, double x2) { return std::cos(2 * x1) + x2; });
  return w;
}

// eta(t) = x + sin(t) w sampled as a history with spacing dt, newest at t
HistoryRing sine_history(const Grid& g, double t, double dt) {
  const VectorField w = bump(g);
  HistoryRing h;
  for (int n = 2; n >= 0; --n) {
    const double s = t - n * dt;
    h.push({s, identity_map(g) + std::sin(s) * w, std::cos(s) * w, -std::sin(s) * w});
  }
  return h;
}

}  // namespace

TEST(Sobolev, ConstantField) {
  const Grid g = make_grid(32, 17);
  EXPECT_NEAR(sobolev_norm(ScalarField(g, 1.5), 3), 1.5 * std::sqrt(2 * kPi), 1e-13);
}

TEST(Sobolev, SineH1) {
  // the centered difference loses a factor 1 - h^2/6 on cos x1
  const Grid g = make_grid(4096, 5);
  const ScalarField f = ScalarField::from_function(g, [](double x1, double) { return std::sin(x1); });
  EXPECT_NEAR(sobolev_norm(f, 1), std::sqrt(2 * kPi), 1e-6);
}

TEST(Sobolev, GradientOfIdentity) {
  const Grid g = make_grid(32, 17);
  EXPECT_NEAR(sobolev_norm(gradient(identity_map(g)), 3), std::sqrt(2 * 2 * kPi), 1e-12);
}

TEST(Sobolev, OrderZeroIsL2Bitwise) {
  const Grid g = make_grid(32, 17);
  const VectorField w = bump(g);
  EXPECT_EQ(sobolev_norm(w[0], 0), l2_norm(w[0]));
  EXPECT_EQ(sobolev_norm(w, 0), l2_norm(w));
  EXPECT_EQ(xm_norm_sq<VectorField>({&w}, 0), l2_norm(w) * l2_norm(w));
  EXPECT_THROW(sobolev_norm(w[0], 4), std::invalid_argument);
}

TEST(History, RejectsNonIncreasingTimes) {
  const Grid g = make_grid(16, 9);
  HistoryRing h;
  h.push({0.0, identity_map(g), VectorField(g), VectorField(g)});
  EXPECT_THROW(h.push({0.0, identity_map(g), VectorField(g), VectorField(g)}), std::invalid_argument);
  EXPECT_THROW(time_derivatives(h, 2), std::logic_error);
}

TEST(History, KeepsFiveUniformEntries) {
  const Grid g = make_grid(16, 9);
  HistoryRing h;
  for (int n = 0; n < 8; ++n) h.push({0.1 * n, identity_map(g), VectorField(g), VectorField(g)});
  EXPECT_EQ(h.size(), 5u);
  EXPECT_NEAR(h.dt(), 0.1, 1e-14);
  // a change of spacing restarts the stencil
  h.push({0.75, identity_map(g), VectorField(g), VectorField(g)});
  EXPECT_EQ(h.size(), 2u);
}

TEST(TimeDerivative, EquilibriumHistoryIsStill) {
  const Grid g = make_grid(16, 9);
  HistoryRing h;
  for (int n = 0; n < 4; ++n) h.push({0.01 * n, identity_map(g), VectorField(g), VectorField(g)});
  for (int k = 1; k <= 3; ++k) EXPECT_EQ(time_derivatives(h, k).max_abs(), 0.0);
}

TEST(TimeDerivative, QuadraticPathIsExact) {
  // eta(t) = x + t^2 w, v = 2 t w, dt v = 2 w
  const Grid g = make_grid(16, 9);
  const VectorField w = bump(g);
  const double dt = 0.125;
  HistoryRing h;
  for (int n = 0; n < 3; ++n) {
    const double t = 1.0 + n * dt;
    h.push({t, identity_map(g) + (t * t) * w, (2 * t) * w, 2.0 * w});
  }
  const VectorField d2eta = backward_difference(h.back(0).eta, h.back(1).eta, h.back(2).eta, dt, 2);
  EXPECT_LE((d2eta - 2.0 * w).max_abs(), 1e-12);
  const VectorField dv = backward_difference(h.back(0).v, h.back(1).v, h.back(2).v, dt, 1);
  EXPECT_LE((dv - 2.0 * w).max_abs(), 1e-13);
  EXPECT_LE(time_derivatives(h, 2).max_abs(), 1e-13);
}

TEST(TimeDerivative, ThirdDerivativeErrorIsFirstOrder) {
  const Grid g = make_grid(16, 9);
  const VectorField w = bump(g);
  const double t = 0.7;
  auto err = [&](double dt) { return (time_derivatives(sine_history(g, t, dt), 3) - std::sin(t) * w).max_abs(); };
  auto err2 = [&](double dt) { return (time_derivatives(sine_history(g, t, dt), 2) - (-std::cos(t)) * w).max_abs(); };
  const double r3 = err(0.02) / err(0.01), r2 = err2(0.02) / err2(0.01);
  EXPECT_NEAR(r3, 2.0, 0.1);
  EXPECT_NEAR(r2, 4.0, 0.2);
}

TEST(TimeDerivative, SimulatorRichardson) {
  // dt^3 v from simulator histories at dt and dt/2 against a dt/4 reference
  const Grid g = make_grid(32, 17);
  const RawData d = perturbed_data(g, 0.05, 0.0);
  const VectorField e0 = smooth_eta0(d.eta, 0.2);
  auto third = [&](double dt) {
    SimConfig cfg;
    Simulator sim(g, cfg, build_kinematics(e0).J);
    State s{0.0, e0, VectorField(g), ScalarField(g), sim.J0()};
    HistoryRing h;
    const int n = static_cast<int>(std::lround(0.02 / dt));
    for (int k = 0; k <= n; ++k) {
      const Evaluation ev = k < n ? sim.step(s, dt) : sim.evaluate(s.eta, s.v, s.t);
      h.push({k * dt, k < n ? VectorField() : s.eta, VectorField(), ev.accel});
    }
    return time_derivatives(h, 3);
  };
  const VectorField a = third(2e-3), b = third(1e-3), c = third(5e-4);
  const double r = (a - c).max_abs() / (b - c).max_abs();
  EXPECT_GT(r, 2.2);
  EXPECT_LT(r, 3.8);
}

TEST(Energy, EquilibriumValue) {
  const Grid g = make_grid(32, 17);
  const EnergyReport r = energy_E(at_rest(g));
  EXPECT_NEAR(r.E_total, 2 * 2 * kPi, 1e-11);
  EXPECT_NEAR(r.component("dt0_grad_eta_H3"), 2 * 2 * kPi, 1e-11);
  for (const auto& [name, value] : r.components)
    if (name != "dt0_grad_eta_H3") EXPECT_LE(value, 1e-20) << name;
}

TEST(Energy, TotalIsExactSumOfNonNegativeComponents) {
  const Grid g = make_grid(32, 17);
  const DerivativeSet d = derivatives_from_history(sine_history(g, 0.4, 0.01));
  RunningIntegrals I;
  I.eps = 0.01;
  I.accumulate(eps_integrands(d, 0.01), 0.01);
  I.accumulate(eps_integrands(d, 0.01), 0.01);
  for (const EnergyReport& r : {energy_E(d), energy_E_eps(d, 0.01, I)}) {
    double s = 0.0;
    for (const auto& [name, value] : r.components) {
      EXPECT_GE(value, 0.0) << name;
      s += value;
    }
    EXPECT_EQ(s, r.E_total);
  }
}

TEST(Energy, BoundaryVariantsAgree) {
  const Grid g = make_grid(32, 17);
  const DerivativeSet d = derivatives_from_history(sine_history(g, 0.4, 0.01));
  for (int j = 0; j <= 3; ++j) EXPECT_NEAR(boundary_term(d, j), boundary_term(d, j, true), 1e-12 * (1 + boundary_term(d, j)));
}

TEST(Energy, InviscidZeroesEpsilonTerms) {
  const Grid g = make_grid(32, 17);
  const DerivativeSet d = derivatives_from_history(sine_history(g, 0.4, 0.01));
  RunningIntegrals I;
  for (int n = 0; n < 3; ++n) I.accumulate(eps_integrands(d, 0.0), 0.01);
  const EnergyReport r = energy_E_eps(d, 0.0, I);
  for (const char* name : {"int_eps_grad_v_X3", "int_eps_dbar2_d1_grad_v", "eps_grad2_eta_X2", "int_eps2_inner_dt3_grad_v^2"})
    EXPECT_EQ(r.component(name), 0.0) << name;
  EXPECT_GT(r.component("int_grad_eta_X3"), 0.0);
}

TEST(Energy, ConstantOnEquilibriumTrajectory) {
  const Grid g = make_grid(32, 17);
  SimConfig cfg;
  Simulator sim(g, cfg, ScalarField(g, 1.0));
  State s{0.0, identity_map(g), VectorField(g), ScalarField(g), sim.J0()};
  HistoryRing h;
  const double E0 = energy_E(at_rest(g)).E_total;
  for (int n = 0; n < 6; ++n) {
    const Evaluation ev = sim.step(s, 1e-3);
    h.push({s.t, s.eta, s.v, ev.accel});
    if (h.size() >= 3) EXPECT_NEAR(energy_E(h).E_total, E0, 1e-13);
  }
}

TEST(Energy, ComponentsConvergeOnSmoothTrajectory) {
  // eta = x + sin(t) w on nested grids: differences shrink with h and dt
  auto report = [](int n, double dt) {
    const Grid g = make_grid(2 * n, n + 1);
    return energy_E(derivatives_from_history(sine_history(g, 0.5, dt)));
  };
  const EnergyReport a = report(16, 0.02), b = report(32, 0.01), c = report(64, 0.005);
  for (std::size_t k = 0; k < a.components.size(); ++k) {
    const double d1 = std::abs(a.components[k].second - c.components[k].second);
    const double d2 = std::abs(b.components[k].second - c.components[k].second);
    if (d1 > 1e-10) EXPECT_LT(d2, d1) << a.components[k].first;
  }
}

TEST(BasicEnergy, EquilibriumAndDissipation) {
  const Grid g = make_grid(32, 17);
  const KinematicBundle k = build_kinematics(identity_map(g));
  const BasicEnergy e = basic_energy(identity_map(g), VectorField(g), k);
  EXPECT_NEAR(e.elastic, 2 * kPi, 1e-12);
  EXPECT_NEAR(e.surface, 4 * kPi, 1e-12);
  EXPECT_EQ(e.kinetic, 0.0);
  // v = (x2, 0): S_12 = S_21 = 1/2, 2 eps int |S|^2 = eps |Omega|
  VectorField v(g);
  v[0] = ScalarField::from_function(g, [](double, double x2) { return x2; });
  EXPECT_NEAR(dissipation_rate(v, k, 0.1), 0.1 * 2 * kPi, 1e-12);
  EXPECT_EQ(dissipation_rate(v, k, 0.0), 0.0);
}
