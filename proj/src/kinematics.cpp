#include "elastica/kinematics.hpp"

#include "elastica/errors.hpp"

#include <cmath>
#include <sstream>

namespace elastica {

TensorField cofactor(const TensorField& F) {
  TensorField A;
  A(0, 0) = F(1, 1);
  A(0, 1) = -1.0 * F(1, 0);
  A(1, 0) = -1.0 * F(0, 1);
  A(1, 1) = F(0, 0);
  return A;
}

ScalarField cof_contract(const TensorField& X, const TensorField& Y) {
  ScalarField r(X.grid());
  r.values() = X(1, 1).values() * Y(0, 0).values() - X(1, 0).values() * Y(0, 1).values() -
               X(0, 1).values() * Y(1, 0).values() + X(0, 0).values() * Y(1, 1).values();
  return r;
}

TensorField transpose(const TensorField& T) {
  TensorField r = T;
  std::swap(r(0, 1), r(1, 0));
  return r;
}

TensorField matmul(const TensorField& X, const TensorField& Y) {
  TensorField r(X.grid());
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      r(a, b).values() = X(a, 0).values() * Y(0, b).values() + X(a, 1).values() * Y(1, b).values();
  return r;
}

VectorField apply(const TensorField& T, const VectorField& v) {
  VectorField r(T.grid());
  for (int a = 0; a < 2; ++a) r[a].values() = T(a, 0).values() * v[0].values() + T(a, 1).values() * v[1].values();
  return r;
}

KinematicBundle kinematics_from_gradient(const TensorField& F) {
  KinematicBundle k;
  k.F = F;
  k.A = cofactor(F);
  k.E = matmul(transpose(k.A), k.A);
  k.J = ScalarField(F.grid());
  k.J.values() = F(0, 0).values() * F(1, 1).values() - F(0, 1).values() * F(1, 0).values();
  const Grid& g = F.grid();
  for (int n = 0; n < g.size(); ++n) {
    if (!(k.J.values()[n] > 0.0)) {
      std::ostringstream os;
      os << "det(grad eta) = " << k.J.values()[n] << " at node (" << n % g.n1 << ", " << n / g.n1 << ")";
      throw DegenerateMap(os.str());
    }
  }
  return k;
}

KinematicBundle build_kinematics(const VectorField& eta, const OnWalls<BoundaryVector>* wall_d2eta) {
  TensorField F = gradient(eta);
  if (wall_d2eta) {
    const Grid& g = eta.grid();
    for (Wall w : kWalls) {
      const int j = wall_row(g, w);
      for (int c = 0; c < 2; ++c)
        F(c, 1).values().segment(g.index(0, j), g.n1) = (*wall_d2eta)[w][c];
    }
  }
  return kinematics_from_gradient(F);
}

VectorField piola_residual(const KinematicBundle& k) {
  VectorField r;
  for (int i = 0; i < 2; ++i) r[i] = diff(k.A(i, 0), 1) + diff(k.A(i, 1), 2);
  return r;
}

ScalarField antisymmetry_residual(const VectorField& eta, std::array<int, 2> a, std::array<int, 2> b) {
  ScalarField wa1 = diff(eta[0], a[0], a[1]), wa2 = diff(eta[1], a[0], a[1]);
  ScalarField wb1 = diff(eta[0], b[0], b[1]), wb2 = diff(eta[1], b[0], b[1]);
  wa1.set_seam_jump(0.0);
  wa2.set_seam_jump(0.0);
  wb1.set_seam_jump(0.0);
  wb2.set_seam_jump(0.0);
  ScalarField r(eta.grid());
  // w . z_perp + z . w_perp with u_perp = (-u2, u1)
  r.values() = (wa2.values() * wb1.values() - wa1.values() * wb2.values()) +
               (wb2.values() * wa1.values() - wb1.values() * wa2.values());
  return r;
}

BoundaryVector wall_tangent(const VectorField& eta, Wall w) {
  BoundaryVector t;
  t.wall = w;
  t.c[0] = diff(trace(eta[0], w)).v;
  t.c[1] = diff(trace(eta[1], w)).v;
  return t;
}

BoundaryFrame boundary_frame(const VectorField& eta, double min_arclen) {
  BoundaryFrame fr;
  for (Wall w : kWalls) {
    BoundaryVector t = wall_tangent(eta, w);
    Array len = (t[0].square() + t[1].square()).sqrt();
    const double m = len.minCoeff();
    if (!(m >= min_arclen)) {
      std::ostringstream os;
      os << "|d1 eta| = " << m << " below " << min_arclen << " on the "
         << (w == Wall::top ? "top" : "bottom") << " wall";
      throw BoundaryDegeneracy(os.str());
    }
    const double s = normal_sign(w);
    BoundaryVector tau, nrm;
    tau.wall = nrm.wall = w;
    tau.c[0] = t[0] / len;
    tau.c[1] = t[1] / len;
    // A N = s * d1 eta_perp
    nrm.c[0] = -s * t[1] / len;
    nrm.c[1] = s * t[0] / len;
    fr.tau[w] = tau;
    fr.normal[w] = nrm;
    fr.arclen[w] = BoundaryField{w, len, 0.0};
  }
  return fr;
}

OnWalls<BoundaryVector> curvature_term(const VectorField& eta, double min_arclen) {
  BoundaryFrame fr = boundary_frame(eta, min_arclen);
  OnWalls<BoundaryVector> k;
  for (Wall w : kWalls) {
    k[w].wall = w;
    for (int c = 0; c < 2; ++c) k[w].c[c] = diff(BoundaryField{w, fr.tau[w][c], 0.0}).v;
  }
  return k;
}

ScalarField div_eta(const VectorField& v, const KinematicBundle& k) {
  ScalarField r(v.grid());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.values() += k.A(i, j).values() * diff(v[i], j + 1).values();
  r.values() /= k.J.values();
  return r;
}

VectorField grad_eta(const ScalarField& q, const KinematicBundle& k) {
  const ScalarField d1 = diff(q, 1), d2 = diff(q, 2);
  VectorField r(q.grid());
  for (int i = 0; i < 2; ++i)
    r[i].values() = (k.A(i, 0).values() * d1.values() + k.A(i, 1).values() * d2.values()) / k.J.values();
  return r;
}

TensorField strain_eta(const VectorField& v, const KinematicBundle& k) {
  const TensorField G = gradient(v);
  // grad_eta v = J^{-1} G A^T
  TensorField Gv(v.grid());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      Gv(i, j).values() = (G(i, 0).values() * k.A(j, 0).values() + G(i, 1).values() * k.A(j, 1).values()) /
                          k.J.values();
  TensorField S(v.grid());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) S(i, j).values() = 0.5 * (Gv(i, j).values() + Gv(j, i).values());
  return S;
}

ScalarField conservative_div(const ScalarField& u, const TensorField& C, const ScalarField& d2u,
                             const OnWalls<BoundaryField>* wall_flux) {
  const Grid& g = u.grid();
  const int n1 = g.n1, m = g.n2 - 1;
  const double ih1s = 1.0 / (g.h1 * g.h1), ih2 = 1.0 / g.h2;
  const ScalarField d1u = diff(u, 1);
  ScalarField c12d2(g), c21d1(g);
  c12d2.values() = C(0, 1).values() * d2u.values();
  c21d1.values() = C(1, 0).values() * d1u.values();
  const ScalarField cross1 = diff(c12d2, 1);
  ScalarField r(g);
  for (int j = 0; j <= m; ++j) {
    for (int i = 0; i < n1; ++i) {
      const int ip = g.wrap(i + 1), im = g.wrap(i - 1);
      const double c = C(0, 0)(i, j);
      const double fe = 0.5 * (c + C(0, 0)(ip, j)) * (u.at(i + 1, j) - u(i, j));
      const double fw = 0.5 * (c + C(0, 0)(im, j)) * (u(i, j) - u.at(i - 1, j));
      double val = (fe - fw) * ih1s + cross1(i, j);
      auto flux_up = [&](int jj) {  // x2 flux on the face between rows jj and jj+1
        return 0.5 * (C(1, 1)(i, jj) + C(1, 1)(i, jj + 1)) * (u(i, jj + 1) - u(i, jj)) * ih2 +
               0.5 * (c21d1(i, jj) + c21d1(i, jj + 1));
      };
      auto wall_value = [&](Wall w) {
        if (wall_flux) return (*wall_flux)[w].v[i];
        return C(1, 1)(i, j) * d2u(i, j) + c21d1(i, j);
      };
      if (j == 0) {
        val += (flux_up(0) - wall_value(Wall::bottom)) * 2.0 * ih2;
      } else if (j == m) {
        val += (wall_value(Wall::top) - flux_up(m - 1)) * 2.0 * ih2;
      } else {
        val += (flux_up(j) - flux_up(j - 1)) * ih2;
      }
      r(i, j) = val;
    }
  }
  return r;
}

VectorField visc_div(const VectorField& v, const KinematicBundle& k) {
  TensorField C = k.E;
  for (auto& c : C.c) c.values() /= k.J.values();
  VectorField r;
  for (int i = 0; i < 2; ++i) r[i] = conservative_div(v[i], C, diff(v[i], 2));
  return r;
}

IdentityAudit audit_identities(const VectorField& eta, const OnWalls<BoundaryVector>* wall_d2eta) {
  const KinematicBundle k = build_kinematics(eta, wall_d2eta);
  const Grid& g = eta.grid();
  IdentityAudit a;
  a.cofactor = (k.A - cofactor(k.F)).max_abs();
  const ScalarField d1e1 = diff(eta[0], 1), d1e2 = diff(eta[1], 1);
  a.column2 = std::max((k.A(0, 1) + d1e2).max_abs(), (k.A(1, 1) - d1e1).max_abs());
  const std::array<std::array<int, 2>, 6> idx{{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};
  for (const auto& x : idx)
    for (const auto& y : idx) a.antisymmetry = std::max(a.antisymmetry, antisymmetry_residual(eta, x, y).max_abs());
  const VectorField p = piola_residual(k);
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const double r = std::max(std::abs(p[0](i, j)), std::abs(p[1](i, j)));
      double& slot = (j == 0 || j == g.n2 - 1) ? a.piola_wall : a.piola_interior;
      slot = std::max(slot, r);
    }
  return a;
}

}  // namespace elastica
