#pragma once

#include "elastica/forcing.hpp"
#include "elastica/grid_fields.hpp"
#include "elastica/kinematics.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string>

namespace elastica {

struct CompatReport {
  double zcomp_residual = 0.0;
  double comp1_residual = 0.0;
  double comp2_residual = 0.0;
};

// Max over the walls of |d2 eta - d1 eta_perp / |d1 eta|^2|, one-sided d2.
double zcomp_residual(const VectorField& eta);

// comp2 uses dt v(0) of the inviscid semi-discrete system, which is defined
// through the wall closure even when zcomp fails.
CompatReport check_compatibility(const VectorField& eta0, const VectorField& v0);

// Pressure of the inviscid semi-discrete system at t = 0. Throws IllPosedData
// when zcomp_residual exceeds zcomp_tol.
ScalarField solve_q0(const VectorField& eta0, const VectorField& v0, double zcomp_tol = 1e-6);

// 1 / |ln eps|
double kappa_from_epsilon(double eps);

// Biharmonic smoothing: Lap^2 eta = mollified Lap^2 eta0 in the interior,
// eta = mollified trace and one-sided d2 eta = d1 eta_perp / |d1 eta|^2 on the walls.
VectorField smooth_eta0(const VectorField& eta0, double kappa);

// 2 S_eta(v) A with 2 S_eta(v) = J^{-1} (Dv A^T + A Dv^T).
TensorField stress_cofactor(const KinematicBundle& k, const TensorField& Dv);

// -Lap_eta0 r0 = 0, r0 = 2 S(v0)_ij A_j2 A_i2 / |d1 eta0|^2 on the walls.
ScalarField solve_r0(const VectorField& eta0, const VectorField& v0);

struct StokesSolution {
  VectorField v;
  ScalarField r;
  double div_residual = 0.0;       // max |Div_eta v - d|
  double traction_residual = 0.0;  // max |(-2 S v + r I) n - g|
  double lsq_residual = 0.0;       // relative residual of the whole system
};

// -Lap_eta v + grad_eta r = f + lambda at interior nodes, Div_eta v = d at all
// nodes, (-2 S_eta v + r I) n = g on the walls (n the outward unit normal),
// with the mean of each velocity component fixed and lambda a constant vector.
StokesSolution solve_stokes(const VectorField& eta, const VectorField& f, const ScalarField& d,
                            const OnWalls<BoundaryVector>& g, const std::array<double, 2>& mean);

// -Lap_eta v + grad_eta r evaluated on given fields, extended to the wall rows.
VectorField stokes_residual_field(const VectorField& eta, const VectorField& v, const ScalarField& r);

StokesSolution smooth_v0(const VectorField& eta0k, const VectorField& eta0, const VectorField& v0,
                         const ScalarField& r0, double kappa);

struct InitialDataBundle {
  VectorField eta0, v0;
  ScalarField q0, J0;
  VectorField dtv0, dt2v0, dt3v0;
  ScalarField q1, q2;
  ScalarField r0, r1;
  VectorField w1;
  double kappa = 0.0;
  std::string w1_source;
};

// Equilibrium-free bundle from compatible data: J0, q0 and the time derivatives.
InitialDataBundle make_bundle(const VectorField& eta0, const VectorField& v0);

// dtv0, q1, dt2v0, q2, dt3v0 by differentiating the semi-discrete inviscid
// system along its Taylor curve; phi is included in the right-hand side.
void initial_time_derivatives(InitialDataBundle& b, const VectorField* phi = nullptr, double delta = 1e-2);

// phi = Lap eta0 - A grad q0 - w1 with the dynamics' operators.
VectorField forcing_phi(const InitialDataBundle& b);

// Psi coefficients from the jets of 2 S_eta(v) A at t = 0, and phi.
ForcingData build_forcing(const InitialDataBundle& b);

struct SmoothInitResult {
  InitialDataBundle bundle;
  ForcingData forcing;
  nlohmann::json manifest;
};

SmoothInitResult smooth_init(const VectorField& eta_raw, const VectorField& v_raw, double eps,
                             std::optional<double> kappa = std::nullopt);

// eta = (x1, x2 + a sin x1), v = b u(eta) with u the curl of cos(y1) sin(pi y2).
struct RawData {
  VectorField eta, v;
};
RawData perturbed_data(const Grid& g, double amplitude, double velocity);

}  // namespace elastica
