#include "elastica/dynamics.hpp"

#include "elastica/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace elastica {

namespace {

Array row_of(const ScalarField& f, Wall w) {
  const Grid& g = f.grid();
  return f.values().segment(g.index(0, wall_row(g, w)), g.n1);
}

void set_row(ScalarField& f, Wall w, const Array& a) {
  const Grid& g = f.grid();
  f.values().segment(g.index(0, wall_row(g, w)), g.n1) = a;
}

TensorField identity_tensor(const Grid& g) {
  TensorField I(g);
  I(0, 0) = ScalarField(g, 1.0);
  I(1, 1) = ScalarField(g, 1.0);
  return I;
}

// x2 derivative of u with the wall rows replaced.
ScalarField d2_with_walls(const ScalarField& u, const OnWalls<BoundaryVector>& walls, int comp) {
  ScalarField d = diff(u, 2);
  for (Wall w : kWalls) set_row(d, w, walls[w][comp]);
  return d;
}

}  // namespace

Simulator::Simulator(const Grid& g, const SimConfig& cfg, ScalarField J0, std::optional<ForcingData> forcing)
    : grid_(g),
      cfg_(cfg),
      J0_(std::move(J0)),
      forcing_(cfg.forcing ? std::move(forcing) : std::nullopt),
      solver_(cfg.solver_tol),
      projector_(cfg.solver_tol) {
  if (cfg_.forcing && !forcing_) throw ConfigError("forcing requested but no forcing data supplied");
}

WallClosure Simulator::ghost_closure(const VectorField& eta, const VectorField& v, double t) const {
  const double eps = cfg_.epsilon;
  WallClosure c;
  TensorField psi;
  const bool use_psi = forcing_ && eps != 0.0;
  if (use_psi) psi = forcing_->psi(t);
  for (Wall w : kWalls) {
    const BoundaryVector tv = wall_tangent(eta, w);
    const Array& t1 = tv[0];
    const Array& t2 = tv[1];
    const Array len2 = t1.square() + t2.square();
    const double m = std::sqrt(len2.minCoeff());
    if (!(m >= min_arclen_)) {
      std::ostringstream os;
      os << "|d1 eta| = " << m << " below the floor " << min_arclen_ << " on the "
         << (w == Wall::top ? "top" : "bottom") << " wall";
      throw BoundaryDegeneracy(os.str());
    }
    const Array dv1 = diff(trace(v[0], w)).v, dv2 = diff(trace(v[1], w)).v;
    const Array a1 = -t2, a2 = t1;      // A_.2
    const Array da1 = -dv2, da2 = dv1;  // dt A_.2
    BoundaryVector y{w, {}}, z{w, {}}, flux{w, {}};
    if (eps == 0.0) {
      const Array tdv = t1 * dv1 + t2 * dv2;
      y.c = {a1 / len2, a2 / len2};
      z.c = {da1 / len2 - 2.0 * tdv * a1 / len2.square(), da2 / len2 - 2.0 * tdv * a2 / len2.square()};
      flux = y;
    } else {
      const Array dtAA = da1 * a1 + da2 * a2;
      Array p1 = Array::Zero(grid_.n1), p2 = Array::Zero(grid_.n1);
      if (use_psi) {
        const Array s1 = row_of(psi(0, 1), w), s2 = row_of(psi(1, 1), w);
        const Array dot = (s1 * a1 + s2 * a2) / len2;
        p1 = s1 - dot * a1;
        p2 = s2 - dot * a2;
      }
      const Array X1 = (a1 - 2.0 * eps * dtAA * a1) / len2 + eps * da1 + eps * p1;
      const Array X2 = (a2 - 2.0 * eps * dtAA * a2) / len2 + eps * da2 + eps * p2;
      z.c = {row_of(diff(v[0], 2), w), row_of(diff(v[1], 2), w)};
      const Array ej = eps / row_of(J0_, w);
      // y - ej (y . t) d1v = X - ej |t|^2 z
      const Array r1 = X1 - ej * len2 * z[0], r2 = X2 - ej * len2 * z[1];
      const Array s = (r1 * t1 + r2 * t2) / (1.0 - ej * (dv1 * t1 + dv2 * t2));
      y.c = {r1 + ej * s * dv1, r2 + ej * s * dv2};
      flux.c = {X1, X2};
    }
    c.d2eta[w] = y;
    c.d2v[w] = z;
    c.flux[w] = flux;
  }
  return c;
}

KinematicBundle Simulator::closed_bundle(const VectorField& eta, const WallClosure& c) const {
  KinematicBundle k = build_kinematics(eta, &c.d2eta);
  k.J = J0_;
  return k;
}

VectorField Simulator::explicit_force(const VectorField& eta, const VectorField& v, const KinematicBundle& k,
                                      const WallClosure& c, double t) const {
  const double eps = cfg_.epsilon;
  const TensorField I = identity_tensor(grid_);
  TensorField Cv;
  if (eps != 0.0) {
    Cv = k.E;
    for (auto& x : Cv.c) x.values() *= eps / J0_.values();
  }
  VectorField f(grid_);
  for (int i = 0; i < 2; ++i) {
    OnWalls<BoundaryField> el;
    for (Wall w : kWalls) el[w] = BoundaryField{w, c.d2eta[w][i], 0.0};
    f[i] = conservative_div(eta[i], I, d2_with_walls(eta[i], c.d2eta, i), &el);
    if (eps != 0.0) {
      OnWalls<BoundaryField> vf;
      for (Wall w : kWalls) vf[w] = BoundaryField{w, c.flux[w][i] - c.d2eta[w][i], 0.0};
      f[i] += conservative_div(v[i], Cv, d2_with_walls(v[i], c.d2v, i), &vf);
    }
  }
  if (forcing_) {
    f -= forcing_->phi;
    if (eps != 0.0) f -= eps * forcing_->div_psi(t);
  }
  return f;
}

VectorField Simulator::momentum_rhs(const VectorField& eta, const VectorField& v, const ScalarField& q,
                                    const KinematicBundle& k, const WallClosure& c, double t) const {
  VectorField a = explicit_force(eta, v, k, c, t);
  const ScalarField d1 = diff(q, 1), d2 = diff(q, 2);
  for (int i = 0; i < 2; ++i)
    a[i].values() -= k.A(i, 0).values() * d1.values() + k.A(i, 1).values() * d2.values();
  return a;
}

PressureBVP Simulator::pressure_problem(const VectorField& eta, const VectorField& v, const KinematicBundle& k,
                                        const VectorField& force, double t) const {
  // d/dt (A : Dv) = 0 with dt v = force - A Dq:  -A : D(A Dq) = -cof(Dv) : Dv - A : D force
  const TensorField G = gradient(v);
  ScalarField src = -1.0 * cof_contract(G, G);
  for (int i = 0; i < 2; ++i)
    for (int kk = 0; kk < 2; ++kk) src -= k.A(i, kk) * diff(force[i], kk + 1);
  TensorField psi;
  const bool use_psi = forcing_ && cfg_.epsilon != 0.0;
  if (use_psi) psi = forcing_->psi(t);
  return make_collocated_bvp(k.A, std::move(src), pressure_dirichlet(eta, v, use_psi ? &psi : nullptr, cfg_.epsilon));
}

Evaluation Simulator::evaluate(const VectorField& eta, const VectorField& v, double t) {
  Evaluation e;
  e.closure = ghost_closure(eta, v, t);
  e.bundle = closed_bundle(eta, e.closure);
  const VectorField force = explicit_force(eta, v, e.bundle, e.closure, t);
  const PressureBVP bvp = pressure_problem(eta, v, e.bundle, force, t);
  e.q = solver_.solve(bvp);
  e.stats = solver_.last();
  e.accel = force;
  const ScalarField d1 = diff(e.q, 1), d2 = diff(e.q, 2);
  for (int i = 0; i < 2; ++i)
    e.accel[i].values() -= e.bundle.A(i, 0).values() * d1.values() + e.bundle.A(i, 1).values() * d2.values();
  for (int i = 0; i < 2; ++i)
    if (!e.accel[i].values().allFinite()) throw NumericalError("non-finite acceleration at t = " + std::to_string(t));
  return e;
}

Evaluation Simulator::step(State& s, double dt) {
  Evaluation e1 = evaluate(s.eta, s.v, s.t);
  const VectorField eta1 = s.eta + dt * s.v;
  const VectorField v1 = s.v + dt * e1.accel;
  Evaluation e2 = evaluate(eta1, v1, s.t + dt);
  s.eta += (0.5 * dt) * (s.v + v1);
  s.v += (0.5 * dt) * (e1.accel + e2.accel);
  s.t += dt;
  s.q = e2.q;
  return e1;
}

ScalarField Simulator::divergence(const VectorField& eta, const VectorField& v, double t) const {
  const WallClosure c = ghost_closure(eta, v, t);
  const KinematicBundle k = closed_bundle(eta, c);
  ScalarField d(grid_);
  for (int i = 0; i < 2; ++i)
    d.values() += k.A(i, 0).values() * diff(v[i], 1).values() +
                  k.A(i, 1).values() * d2_with_walls(v[i], c.d2v, i).values();
  d.values() /= J0_.values();
  return d;
}

int Simulator::reproject(State& s) {
  const int max_sweeps = 4;
  int sweeps = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (; sweeps < max_sweeps; ++sweeps) {
    const ScalarField d = divergence(s.eta, s.v, s.t);
    double m = 0.0;
    for (int j = 1; j < grid_.n2 - 1; ++j)
      for (int i = 0; i < grid_.n1; ++i) m = std::max(m, std::abs(d(i, j)));
    if (m <= cfg_.reproject_tol || m > 0.5 * prev) break;
    prev = m;
    const WallClosure c = ghost_closure(s.eta, s.v, s.t);
    const KinematicBundle k = closed_bundle(s.eta, c);
    ScalarField src(grid_);
    src.values() = -d.values() * J0_.values();
    OnWalls<BoundaryField> zero{{Wall::bottom, Array::Zero(grid_.n1), 0.0}, {Wall::top, Array::Zero(grid_.n1), 0.0}};
    const ScalarField chi = projector_.solve(make_collocated_bvp(k.A, src, zero));
    const ScalarField d1 = diff(chi, 1), d2 = diff(chi, 2);
    for (int i = 0; i < 2; ++i)
      s.v[i].values() -= k.A(i, 0).values() * d1.values() + k.A(i, 1).values() * d2.values();
  }
  return sweeps;
}

double Simulator::auto_dt(const State& s) const {
  const double h = std::min(grid_.h1, grid_.h2);
  double dt = std::min(cfg_.cfl_elastic * h, cfg_.cfl_st * std::pow(h, 1.5));
  if (cfg_.epsilon > 0.0) {
    const WallClosure c = ghost_closure(s.eta, s.v, s.t);
    const KinematicBundle k = closed_bundle(s.eta, c);
    const Array tr = k.E(0, 0).values() + k.E(1, 1).values();
    const Array dd = (k.E(0, 0).values() - k.E(1, 1).values()).square() + 4.0 * k.E(0, 1).values().square();
    const double lam = ((0.5 * (tr + dd.sqrt())) / J0_.values()).maxCoeff();
    dt = std::min(dt, cfg_.cfl_visc * h * h / (4.0 * cfg_.epsilon * lam));
  }
  return dt;
}

}  // namespace elastica
