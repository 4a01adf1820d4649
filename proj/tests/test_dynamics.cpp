#include "elastica/dynamics.hpp"
#include "elastica/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace elastica;

namespace {

constexpr double kPi = std::numbers::pi;

State flat_state(const Grid& g) {
  State s;
  s.eta = identity_map(g);
  s.v = VectorField(g);
  s.q = ScalarField(g);
  s.J0 = ScalarField(g, 1.0);
  return s;
}

// Smooth generic state, not compatible.
State generic_state(const Grid& g) {
  State s = flat_state(g);
  s.eta[0] += ScalarField::from_function(g, [](double x1, double x2) { return 0.02 * std::sin(x1) * std::cos(kPi * x2); });
  s.eta[1] += ScalarField::from_function(g, [](double x1, double x2) { return 0.03 * std::cos(x1) * (1 + x2 * x2); });
  s.v[0] = ScalarField::from_function(g, [](double x1, double x2) { return 0.1 * std::cos(x1) * std::sin(kPi * x2); });
  s.v[1] = ScalarField::from_function(g, [](double x1, double x2) { return 0.05 * std::sin(2 * x1) * x2; });
  return s;
}

double interior_max(const ScalarField& f) {
  const Grid& g = f.grid();
  double m = 0.0;
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) m = std::max(m, std::abs(f(i, j)));
  return m;
}

}  // namespace

TEST(Dynamics, FlatEquilibriumIsSteady) {
  const Grid g = make_grid(16, 9);
  for (double eps : {0.0, 0.1}) {
    SimConfig cfg;
    cfg.epsilon = eps;
    Simulator sim(g, cfg, ScalarField(g, 1.0));
    State s = flat_state(g);
    const double dt = sim.auto_dt(s);
    for (int n = 0; n < 1000; ++n) {
      sim.step(s, dt);
      if ((n + 1) % cfg.reproject_every == 0) sim.reproject(s);
    }
    EXPECT_LE(s.v.max_abs(), 1e-10) << "eps = " << eps;
    EXPECT_LE((s.eta - identity_map(g)).max_abs(), 1e-10);
    EXPECT_LE(s.q.max_abs(), 1e-10);
  }
}

TEST(Dynamics, FlatClosureContinuesIdentity) {
  const Grid g = make_grid(16, 9);
  SimConfig cfg;
  Simulator sim(g, cfg, ScalarField(g, 1.0));
  const State s = flat_state(g);
  const WallClosure c = sim.ghost_closure(s.eta, s.v, 0.0);
  for (Wall w : kWalls) {
    EXPECT_LE(c.d2eta[w][0].abs().maxCoeff(), 1e-14);
    EXPECT_LE((c.d2eta[w][1] - 1.0).abs().maxCoeff(), 1e-14);
    EXPECT_EQ(c.d2v[w].max_abs(), 0.0);
  }
}

TEST(Dynamics, ViscousClosureWithZeroVelocityIsElasticClosure) {
  const Grid g = make_grid(32, 17);
  State s = generic_state(g);
  s.v = VectorField(g);
  SimConfig c0, c1;
  c1.epsilon = 0.3;
  const Simulator s0(g, c0, ScalarField(g, 1.0)), s1(g, c1, ScalarField(g, 1.0));
  const WallClosure a = s0.ghost_closure(s.eta, s.v, 0.0), b = s1.ghost_closure(s.eta, s.v, 0.0);
  for (Wall w : kWalls)
    for (int k = 0; k < 2; ++k) {
      EXPECT_LE((a.d2eta[w][k] - b.d2eta[w][k]).abs().maxCoeff(), 1e-15);
      EXPECT_LE((a.flux[w][k] - b.flux[w][k]).abs().maxCoeff(), 1e-15);
    }
}

TEST(Dynamics, ClosureIsContinuousInViscosity) {
  const Grid g = make_grid(32, 17);
  const State s = generic_state(g);
  SimConfig c0;
  const Simulator s0(g, c0, ScalarField(g, 1.0));
  const WallClosure a = s0.ghost_closure(s.eta, s.v, 0.0);
  double prev = 0.0;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    SimConfig c1;
    c1.epsilon = eps;
    const Simulator s1(g, c1, ScalarField(g, 1.0));
    const WallClosure b = s1.ghost_closure(s.eta, s.v, 0.0);
    double d = 0.0;
    for (Wall w : kWalls)
      for (int k = 0; k < 2; ++k) d = std::max(d, (a.d2eta[w][k] - b.d2eta[w][k]).abs().maxCoeff());
    if (prev > 0.0) EXPECT_NEAR(prev / d, 10.0, 0.5);
    prev = d;
  }
}

TEST(Dynamics, ElasticClosureMatchesTractionIdentity) {
  const Grid g = make_grid(32, 17);
  const State s = generic_state(g);
  SimConfig cfg;
  const Simulator sim(g, cfg, ScalarField(g, 1.0));
  const WallClosure c = sim.ghost_closure(s.eta, s.v, 0.0);
  const KinematicBundle k = sim.closed_bundle(s.eta, c);
  const auto r = traction_identity_residual(s.eta, s.v, k, nullptr, 0.0);
  for (Wall w : kWalls) EXPECT_LE(r[w].max_abs(), 1e-13);
  // and the closed wall Jacobian is one
  const ScalarField J = build_kinematics(s.eta, &c.d2eta).J;
  for (Wall w : kWalls) EXPECT_LE((trace(J, w).v - 1.0).abs().maxCoeff(), 1e-13);
}

TEST(Dynamics, ViscousClosureMatchesTractionIdentity) {
  const Grid g = make_grid(32, 17);
  const State s = generic_state(g);
  SimConfig cfg;
  cfg.epsilon = 0.2;
  const Simulator sim(g, cfg, ScalarField(g, 1.0));
  const WallClosure c = sim.ghost_closure(s.eta, s.v, 0.0);
  // Residual with d2 v taken from the closure on the walls.
  const KinematicBundle k = sim.closed_bundle(s.eta, c);
  for (Wall w : kWalls) {
    const BoundaryVector t = wall_tangent(s.eta, w);
    const Array dv1 = diff(trace(s.v[0], w)).v, dv2 = diff(trace(s.v[1], w)).v;
    const int j = wall_row(g, w);
    for (int i = 0; i < g.n1; ++i) {
      const int n = g.index(i, j);
      // grad_eta v A_.2 = J^{-1} (d1 v E_12 + d2 v E_22)
      const double E12 = k.E(0, 1).values()[n], E22 = k.E(1, 1).values()[n];
      for (int m = 0; m < 2; ++m) {
        const double dv = m == 0 ? dv1[i] : dv2[i];
        const double lhs = c.d2eta[w][m][i] + cfg.epsilon * (dv * E12 + c.d2v[w][m][i] * E22);
        EXPECT_NEAR(lhs, c.flux[w][m][i], 1e-13);
      }
      EXPECT_NEAR(E22, t[0][i] * t[0][i] + t[1][i] * t[1][i], 1e-14);
    }
  }
}

TEST(Dynamics, RhsAtIdentityIsViscousLaplacian) {
  const Grid g = make_grid(32, 17);
  SimConfig cfg;
  cfg.epsilon = 0.5;
  const Simulator sim(g, cfg, ScalarField(g, 1.0));
  State s = flat_state(g);
  s.v[0] = ScalarField::from_function(g, [](double x1, double x2) { return std::sin(x1) * std::sin(kPi * x2); });
  const WallClosure c = sim.ghost_closure(s.eta, s.v, 0.0);
  const KinematicBundle k = sim.closed_bundle(s.eta, c);
  const VectorField a = sim.momentum_rhs(s.eta, s.v, ScalarField(g), k, c, 0.0);
  const ScalarField lap = second_diff(s.v[0], 1) + second_diff(s.v[0], 2);
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) {
      EXPECT_NEAR(a[0](i, j), cfg.epsilon * lap(i, j), 1e-10);
      EXPECT_NEAR(a[1](i, j), 0.0, 1e-10);
    }
}

TEST(Dynamics, StepMatchesRhsToFirstOrder) {
  const Grid g = make_grid(32, 17);
  for (double eps : {0.0, 0.05}) {
    SimConfig cfg;
    cfg.epsilon = eps;
    Simulator sim(g, cfg, ScalarField(g, 1.0));
    const State s0 = generic_state(g);
    double prev = 0.0;
    for (double dt : {1e-4, 5e-5, 2.5e-5}) {
      State s = s0;
      const Evaluation e = sim.step(s, dt);
      const VectorField fd = (1.0 / dt) * (s.v - s0.v);
      const double err = (fd - e.accel).max_abs();
      if (prev > 0.0) EXPECT_NEAR(prev / err, 2.0, 0.2) << "eps = " << eps;
      prev = err;
    }
  }
}

TEST(Dynamics, EvaluationSatisfiesDiscreteConstraintRate) {
  // A : D(accel) + cof(Dv) : Dv = 0 at interior nodes
  const Grid g = make_grid(32, 17);
  SimConfig cfg;
  cfg.epsilon = 0.05;
  Simulator sim(g, cfg, ScalarField(g, 1.0));
  const State s = generic_state(g);
  const Evaluation e = sim.evaluate(s.eta, s.v, 0.0);
  const TensorField Dv = gradient(s.v), Da = gradient(e.accel);
  const ScalarField r = cof_contract(e.bundle.F, Da) + cof_contract(Dv, Dv);
  EXPECT_LE(interior_max(r), 1e-9 * (1.0 + e.accel.max_abs()));
}

TEST(Reproject, DivergenceFreeIsUnchanged) {
  const Grid g = make_grid(32, 17);
  SimConfig cfg;
  Simulator sim(g, cfg, ScalarField(g, 1.0));
  State s = flat_state(g);
  const ScalarField psi = ScalarField::from_function(g, [](double x1, double x2) { return std::cos(x1) * std::sin(kPi * x2); });
  s.v[0] = -1.0 * diff(psi, 2);
  s.v[1] = diff(psi, 1);
  const VectorField v0 = s.v;
  sim.reproject(s);
  EXPECT_LE((s.v - v0).max_abs(), 1e-12);
}

TEST(Reproject, GradientIsRemoved) {
  const Grid g = make_grid(64, 33);
  SimConfig cfg;
  cfg.reproject_tol = 1e-9;
  Simulator sim(g, cfg, ScalarField(g, 1.0));
  State s = flat_state(g);
  const ScalarField phi = ScalarField::from_function(g, [](double x1, double x2) { return std::sin(2 * x1) * std::sin(kPi * x2); });
  s.v[0] = diff(phi, 1);
  s.v[1] = diff(phi, 2);
  const double before = s.v.max_abs();
  const int sweeps = sim.reproject(s);
  EXPECT_GE(sweeps, 1);
  EXPECT_LE(interior_max(sim.divergence(s.eta, s.v, 0.0)), 1e-9);
  double vi = std::max(interior_max(s.v[0]), interior_max(s.v[1]));
  EXPECT_LE(vi, 1e-2 * before);
}

TEST(AutoDt, Bounds) {
  State s;
  {
    const Grid g = make_grid(64, 33);
    s = flat_state(g);
    SimConfig cfg;
    const Simulator sim(g, cfg, ScalarField(g, 1.0));
    const double h = 1.0 / 32;
    EXPECT_DOUBLE_EQ(sim.auto_dt(s), std::min(cfg.cfl_elastic * h, cfg.cfl_st * std::pow(h, 1.5)));
    cfg.epsilon = 1.0;
    const Simulator sv(g, cfg, ScalarField(g, 1.0));
    EXPECT_NEAR(sv.auto_dt(s), cfg.cfl_visc * h * h / 4.0, 1e-12);
  }
  for (int n : {16, 32, 64}) {
    const Grid g = make_grid(2 * n, n + 1), g2 = make_grid(4 * n, 2 * n + 1);
    SimConfig cfg;
    const double a = Simulator(g, cfg, ScalarField(g, 1.0)).auto_dt(flat_state(g));
    const double b = Simulator(g2, cfg, ScalarField(g2, 1.0)).auto_dt(flat_state(g2));
    EXPECT_GE(a / b, 2.0 - 1e-12);
    EXPECT_LE(a / b, std::pow(2.0, 1.5) + 1e-12);
  }
}

TEST(Dynamics, CollapsedBoundaryIsRejected) {
  const Grid g = make_grid(16, 9);
  SimConfig cfg;
  Simulator sim(g, cfg, ScalarField(g, 1.0));
  State s = flat_state(g);
  sim.set_arclen_floor(0.5);
  s.eta[0] *= 0.25;
  s.eta[0].set_seam_jump(0.25 * 2 * kPi);
  EXPECT_THROW(sim.step(s, 1e-3), BoundaryDegeneracy);
  EXPECT_EQ(s.t, 0.0);
}
