#pragma once

#include "elastica/grid_fields.hpp"

#include <array>
#include <optional>

namespace elastica {

// F = grad eta, J = det F, A = cofactor of F (A = J F^{-T}), E = A^T A.
struct KinematicBundle {
  TensorField F;
  TensorField A;
  TensorField E;
  ScalarField J;
};

// cof([[a, b], [c, d]]) = [[d, -c], [-b, a]].
TensorField cofactor(const TensorField& F);
// cof(X) : Y, a symmetric bilinear form with cof(X) : X = 2 det X.
ScalarField cof_contract(const TensorField& X, const TensorField& Y);
TensorField transpose(const TensorField& T);
TensorField matmul(const TensorField& X, const TensorField& Y);
VectorField apply(const TensorField& T, const VectorField& v);

// Builds the bundle from eta. When wall_d2eta is given, its values replace the
// one-sided x2 differences of eta on the walls (the boundary closure).
// Throws DegenerateMap if J <= 0 at any node.
KinematicBundle build_kinematics(const VectorField& eta,
                                 const OnWalls<BoundaryVector>* wall_d2eta = nullptr);
KinematicBundle kinematics_from_gradient(const TensorField& F);

// d_j A_ij for i = 1, 2.
VectorField piola_residual(const KinematicBundle& k);

// d^a eta . d^b eta_perp + d^b eta . d^a eta_perp with u_perp = (-u2, u1).
ScalarField antisymmetry_residual(const VectorField& eta, std::array<int, 2> a, std::array<int, 2> b);

struct BoundaryFrame {
  OnWalls<BoundaryVector> tau;     // d1 eta / |d1 eta|
  OnWalls<BoundaryVector> normal;  // A N / |A N|
  OnWalls<BoundaryField> arclen;   // |d1 eta|
};

// Throws BoundaryDegeneracy if |d1 eta| < min_arclen on either wall.
BoundaryFrame boundary_frame(const VectorField& eta, double min_arclen = 1e-12);

// d1 eta on a wall (periodic difference along the wall).
BoundaryVector wall_tangent(const VectorField& eta, Wall w);

// d1 (d1 eta / |d1 eta|) on each wall.
OnWalls<BoundaryVector> curvature_term(const VectorField& eta, double min_arclen = 1e-12);

ScalarField div_eta(const VectorField& v, const KinematicBundle& k);
VectorField grad_eta(const ScalarField& q, const KinematicBundle& k);
// S_ij = (d_eta_j v_i + d_eta_i v_j) / 2.
TensorField strain_eta(const VectorField& v, const KinematicBundle& k);
// J Delta_eta v_i = d_j (J^{-1} E_jm d_m v_i) in conservative form.
VectorField visc_div(const VectorField& v, const KinematicBundle& k);

// d_j (C_jm d_m u) for a symmetric coefficient C: face-averaged diagonal
// coefficients, centered cross terms. d2u supplies d2 u at every node (it is
// used in the cross term). On wall rows the x2 flux C_2m d_m u at the wall is
// taken from wall_flux when given, otherwise from d2u; the row is then a
// half-cell balance.
ScalarField conservative_div(const ScalarField& u, const TensorField& C, const ScalarField& d2u,
                             const OnWalls<BoundaryField>* wall_flux = nullptr);

struct IdentityAudit {
  double cofactor = 0.0;       // max |A - cof(F)|
  double column2 = 0.0;        // max |A_{.2} - d1 eta_perp|
  double antisymmetry = 0.0;   // max over multi-indices up to order 2
  double piola_interior = 0.0;
  double piola_wall = 0.0;
};

IdentityAudit audit_identities(const VectorField& eta, const OnWalls<BoundaryVector>* wall_d2eta = nullptr);

}  // namespace elastica
