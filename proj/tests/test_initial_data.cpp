#include "elastica/dynamics.hpp"
#include "elastica/errors.hpp"
#include "elastica/initial_data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace elastica;

namespace {

constexpr double kPi = std::numbers::pi;

double interior_max(const ScalarField& f) {
  const Grid& g = f.grid();
  double m = 0.0;
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) m = std::max(m, std::abs(f(i, j)));
  return m;
}

OnWalls<BoundaryVector> zero_walls(const Grid& g) {
  return {{Wall::bottom, {Array::Zero(g.n1), Array::Zero(g.n1)}}, {Wall::top, {Array::Zero(g.n1), Array::Zero(g.n1)}}};
}

}  // namespace

TEST(Compatibility, EquilibriumHasNoResidual) {
  const Grid g = make_grid(32, 17);
  const CompatReport r = check_compatibility(identity_map(g), VectorField(g));
  EXPECT_LE(r.zcomp_residual, 1e-13);
  EXPECT_LE(r.comp1_residual, 1e-13);
  EXPECT_LE(r.comp2_residual, 1e-10);
}

TEST(Compatibility, ShearViolatesFirstOrder) {
  // d2 v = (cos x2, 0) is tangential on both walls; the bottom wall gives 1.
  const Grid g = make_grid(32, 65);
  VectorField v(g);
  v[0] = ScalarField::from_function(g, [](double, double x2) { return std::sin(x2); });
  const CompatReport r = check_compatibility(identity_map(g), v);
  EXPECT_LE(r.zcomp_residual, 1e-13);
  EXPECT_NEAR(r.comp1_residual, 1.0, 1e-3);
}

TEST(Compatibility, PerturbedBoundaryIsIllPosedForQ0) {
  const Grid g = make_grid(32, 17);
  const RawData d = perturbed_data(g, 0.05, 0.0);
  EXPECT_GT(zcomp_residual(d.eta), 1e-2);
  EXPECT_THROW(solve_q0(d.eta, d.v), IllPosedData);
}

TEST(Kappa, MatchesLogarithm) {
  EXPECT_EQ(kappa_from_epsilon(std::exp(-10.0)), 0.1);
  EXPECT_NEAR(kappa_from_epsilon(1e-2), 1.0 / std::log(100.0), 1e-15);
  EXPECT_THROW(kappa_from_epsilon(0.0), std::invalid_argument);
}

TEST(SmoothEta, IdentityIsFixed) {
  const Grid g = make_grid(64, 33);
  const VectorField x = identity_map(g);
  EXPECT_LE((smooth_eta0(x, 0.2) - x).max_abs(), 1e-10);
}

TEST(SmoothEta, PerturbedBecomesCompatible) {
  const Grid g = make_grid(64, 33);
  const RawData d = perturbed_data(g, 0.05, 0.0);
  const VectorField e = smooth_eta0(d.eta, 0.2);
  EXPECT_LE(zcomp_residual(e), 1e-8);
  // stays close to the raw map away from the walls
  EXPECT_LE(l2_norm(e - d.eta), 0.05);
  EXPECT_GT(build_kinematics(e).J.values().minCoeff(), 0.9);
}

TEST(SolveQ0, VanishesAtRest) {
  const Grid g = make_grid(32, 17);
  EXPECT_LE(solve_q0(identity_map(g), VectorField(g)).max_abs(), 1e-12);
}

TEST(SolveQ0, ConvergesSecondOrder) {
  // flat map, cellular flow: -Lap q = -2 det Dv with q = 0 on the walls
  auto at_center = [](int n) {
    const Grid g = make_grid(2 * n, n + 1);
    VectorField v(g);
    v[0] = ScalarField::from_function(g, [](double x1, double x2) { return -kPi * std::cos(x1) * std::cos(kPi * x2); });
    v[1] = ScalarField::from_function(g, [](double x1, double x2) { return -std::sin(x1) * std::sin(kPi * x2); });
    const ScalarField q = solve_q0(identity_map(g), v);
    return q(n / 2, n / 2);
  };
  const double a = at_center(16), b = at_center(32), c = at_center(64);
  const double ratio = (a - b) / (b - c);
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Stokes, ManufacturedSolutionConverges) {
  // flat map: v = curl of 16 sin(x1) p(x2) with p = x2^2 (1 - x2)^2, r = cos(x1) x2
  auto error = [](int n) {
    const Grid g = make_grid(2 * n, n + 1);
    const VectorField x = identity_map(g);
    auto p0 = [](double y) { return 16 * y * y * (1 - y) * (1 - y); };
    auto p1 = [](double y) { return 32 * y * (1 - y) * (1 - 2 * y); };
    auto p2 = [](double y) { return 32 * (1 - 6 * y + 6 * y * y); };
    auto p3 = [](double y) { return 32 * (12 * y - 6); };
    VectorField v(g), f(g);
    v[0] = ScalarField::from_function(g, [&](double x1, double x2) { return -std::sin(x1) * p1(x2); });
    v[1] = ScalarField::from_function(g, [&](double x1, double x2) { return std::cos(x1) * p0(x2); });
    f[0] = ScalarField::from_function(g, [&](double x1, double x2) {
      return std::sin(x1) * (p3(x2) - p1(x2)) - std::sin(x1) * x2;
    });
    f[1] = ScalarField::from_function(g, [&](double x1, double x2) {
      return std::cos(x1) * (p0(x2) - p2(x2)) + std::cos(x1);
    });
    // (-2 S v + r I) n with n = +-e2; d1 v2 and d2 v2 vanish on the walls
    OnWalls<BoundaryVector> tr = zero_walls(g);
    for (Wall w : kWalls) {
      const double x2 = w == Wall::top ? 1.0 : 0.0, s = normal_sign(w);
      for (int i = 0; i < g.n1; ++i) {
        tr[w][0][i] = s * std::sin(g.x1(i)) * p2(x2);
        tr[w][1][i] = s * std::cos(g.x1(i)) * x2;
      }
    }
    const StokesSolution sol = solve_stokes(x, f, ScalarField(g), tr, {0.0, 0.0});
    return (sol.v - v).max_abs();
  };
  const double e1 = error(16), e2 = error(32);
  EXPECT_LT(e2, 0.5);
  EXPECT_GT(e1 / e2, 3.5);
}

TEST(SmoothV0, ZeroStaysZero) {
  const Grid g = make_grid(32, 17);
  const RawData d = perturbed_data(g, 0.05, 0.0);
  const VectorField e = smooth_eta0(d.eta, 0.2);
  const StokesSolution s = smooth_v0(e, d.eta, d.v, solve_r0(d.eta, d.v), 0.2);
  EXPECT_LE(s.v.max_abs(), 1e-12);
}

TEST(SmoothInit, PerturbedDataIsCompatibleAndDivergenceFree) {
  const Grid g = make_grid(32, 17);
  const RawData d = perturbed_data(g, 0.05, 0.1);
  const SmoothInitResult res = smooth_init(d.eta, d.v, 1e-2);
  const InitialDataBundle& b = res.bundle;
  EXPECT_EQ(b.w1_source, "smoothed");
  EXPECT_LE(zcomp_residual(b.eta0), 1e-8);
  SimConfig cfg;
  const Simulator sim(g, cfg, b.J0);
  EXPECT_LE(sim.divergence(b.eta0, b.v0, 0.0).max_abs(), 1e-8);
  EXPECT_LE(res.manifest["residuals"]["div_v0"].get<double>(), 1e-8);
  // the velocity keeps its mean
  for (int c = 0; c < 2; ++c) EXPECT_NEAR(integrate(b.v0[c]), integrate(d.v[c]), 1e-12);
}

TEST(SmoothInit, IdentityIsUnchanged) {
  const Grid g = make_grid(32, 17);
  const VectorField x = identity_map(g);
  const SmoothInitResult res = smooth_init(x, VectorField(g), 1e-2);
  EXPECT_LE((res.bundle.eta0 - x).max_abs(), 1e-10);
  EXPECT_LE(res.bundle.v0.max_abs(), 1e-10);
  EXPECT_LE(res.forcing.phi.max_abs(), 1e-8);
}

TEST(SmoothInit, PsiAtZeroMatchesStressExactly) {
  const Grid g = make_grid(32, 17);
  const RawData d = perturbed_data(g, 0.05, 0.1);
  const SmoothInitResult res = smooth_init(d.eta, d.v, 1e-2);
  const TensorField psi = res.forcing.psi(0.0);
  const TensorField S = stress_cofactor(build_kinematics(res.bundle.eta0), gradient(res.bundle.v0));
  for (Wall w : kWalls) {
    const int j = wall_row(g, w);
    for (int a = 0; a < 2; ++a)
      for (int i = 0; i < g.n1; ++i) EXPECT_EQ(psi(a, 1)(i, j) - S(a, 1)(i, j), 0.0);
  }
}

TEST(TimeDerivatives, MatchSimulatorTrajectory) {
  const Grid g = make_grid(32, 17);
  const RawData d = perturbed_data(g, 0.05, 0.1);
  const VectorField e = smooth_eta0(d.eta, 0.2);
  SimConfig cfg;
  Simulator sim(g, cfg, build_kinematics(e).J);
  State s;
  s.eta = e;
  s.v = smooth_v0(e, d.eta, d.v, solve_r0(d.eta, d.v), 0.2).v;
  s.q = ScalarField(g);
  s.J0 = sim.J0();
  InitialDataBundle b = make_bundle(s.eta, s.v);
  EXPECT_LE((b.dtv0 - sim.evaluate(s.eta, s.v, 0.0).accel).max_abs(), 1e-10);
  // central differences of the accelerations along short forward and backward runs
  const double dt = 2e-3;
  State fwd = s, bwd = s;
  for (int n = 0; n < 2; ++n) {
    sim.step(fwd, dt / 2);
    sim.step(bwd, -dt / 2);
  }
  const Evaluation ef = sim.evaluate(fwd.eta, fwd.v, dt), eb = sim.evaluate(bwd.eta, bwd.v, -dt);
  const VectorField dt2 = (1.0 / (2 * dt)) * (ef.accel - eb.accel);
  const ScalarField q1 = (1.0 / (2 * dt)) * (ef.q - eb.q);
  const double scale = b.dt2v0.max_abs();
  EXPECT_LE((dt2 - b.dt2v0).max_abs(), 1e-3 * scale + 1e-6);
  EXPECT_LE(interior_max(q1 - b.q1), 1e-3 * b.q1.max_abs() + 1e-6);
}
