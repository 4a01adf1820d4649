#pragma once

#include "elastica/forcing.hpp"
#include "elastica/grid_fields.hpp"
#include "elastica/kinematics.hpp"
#include "elastica/pressure_solver.hpp"

#include <optional>
#include <string>

namespace elastica {

struct State {
  double t = 0.0;
  VectorField eta;
  VectorField v;
  ScalarField q;
  ScalarField J0;
};

struct SimConfig {
  double epsilon = 0.0;
  double sigma = 1.0;
  double dt = 0.0;  // 0 selects auto_dt at the start of a run
  double t_end = 0.1;
  double cfl_elastic = 0.25;
  double cfl_visc = 0.4;
  double cfl_st = 0.5;
  int reproject_every = 10;
  double reproject_tol = 1e-10;
  double solver_tol = 1e-12;
  bool forcing = false;
  // Boundary floor for |d1 eta| as a fraction of its initial minimum.
  double arclen_floor = 0.25;
};

// Wall-normal derivatives supplied by the boundary closure.
struct WallClosure {
  OnWalls<BoundaryVector> d2eta;  // replaces the one-sided d2 eta on the walls
  OnWalls<BoundaryVector> d2v;    // d2 v on the walls
  OnWalls<BoundaryVector> flux;   // d2 eta + eps J^{-1} E_2m d_m v on the walls
};

// One evaluation of the semi-discrete right-hand side.
struct Evaluation {
  WallClosure closure;
  KinematicBundle bundle;  // closure on the walls, J replaced by J0
  ScalarField q;
  VectorField accel;
  SolveStats stats;
};

class Simulator {
 public:
  Simulator(const Grid& g, const SimConfig& cfg, ScalarField J0, std::optional<ForcingData> forcing = std::nullopt);

  const SimConfig& config() const { return cfg_; }
  const Grid& grid() const { return grid_; }
  const ScalarField& J0() const { return J0_; }
  const ForcingData* forcing() const { return forcing_ ? &*forcing_ : nullptr; }
  void set_arclen_floor(double f) { min_arclen_ = f; }

  // At eps = 0: d2 eta = d1 eta_perp / |d1 eta|^2 and d2 v its time derivative.
  // At eps > 0: d2 eta solves the traction identity with d2 v one-sided.
  WallClosure ghost_closure(const VectorField& eta, const VectorField& v, double t) const;

  KinematicBundle closed_bundle(const VectorField& eta, const WallClosure& c) const;

  // Delta eta + eps visc_div(v) - phi - eps div Psi(t), the non-pressure part.
  VectorField explicit_force(const VectorField& eta, const VectorField& v, const KinematicBundle& k,
                             const WallClosure& c, double t) const;

  // explicit_force - A grad q.
  VectorField momentum_rhs(const VectorField& eta, const VectorField& v, const ScalarField& q,
                           const KinematicBundle& k, const WallClosure& c, double t) const;

  PressureBVP pressure_problem(const VectorField& eta, const VectorField& v, const KinematicBundle& k,
                               const VectorField& force, double t) const;

  Evaluation evaluate(const VectorField& eta, const VectorField& v, double t);

  // Heun step; returns the evaluation at the start of the step.
  Evaluation step(State& s, double dt);

  // Removes the discrete divergence from v (chi = 0 on the walls); returns the number of sweeps.
  int reproject(State& s);

  double auto_dt(const State& s) const;

  // A_ij d_j v_i with the closure on the walls.
  ScalarField divergence(const VectorField& eta, const VectorField& v, double t) const;

 private:
  Grid grid_;
  SimConfig cfg_;
  ScalarField J0_;
  std::optional<ForcingData> forcing_;
  CollocatedSolver solver_;
  CollocatedSolver projector_;
  double min_arclen_ = 1e-12;
};

}  // namespace elastica
