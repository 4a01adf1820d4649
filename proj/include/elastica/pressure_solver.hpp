#pragma once

#include "elastica/forcing.hpp"
#include "elastica/grid_fields.hpp"
#include "elastica/kinematics.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <json.hpp>

#include <memory>

namespace elastica {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Interior unknowns are the rows j = 1 .. n2-2, numbered (j-1)*n1 + i.
// Wall unknowns are numbered i (bottom) and n1 + i (top).
struct PressureBVP {
  Grid grid;
  SparseMatrix op;             // interior block of -Div(E grad q), symmetric
  SparseMatrix wall_coupling;  // interior rows against wall values
  ScalarField source;          // right-hand side at interior nodes
  OnWalls<BoundaryField> dirichlet;
  OnWalls<BoundaryField> neumann;  // G3, diagnostic only

  Eigen::VectorXd interior_rhs() const;
};

// -Div(C grad q) with face-averaged diagonal coefficients and centered cross
// terms; the assembled interior block is bitwise symmetric.
void assemble_operator(const TensorField& C, SparseMatrix& op, SparseMatrix& wall_coupling);

PressureBVP make_bvp(const TensorField& C, ScalarField source, OnWalls<BoundaryField> dirichlet);

// Full operator applied to q (all nodes); wall rows are returned as zero.
ScalarField apply_operator(const PressureBVP& bvp, const ScalarField& q);

// Dirichlet data G2 - 1. psi may be null (no compensator).
OnWalls<BoundaryField> pressure_dirichlet(const VectorField& eta, const VectorField& v, const TensorField* psi,
                                          double eps);

// G1 = -dtA_ij d_j v_i + d_k A_ij d_kj eta_i - Lap J plus the forcing terms
// eps A_ik d_kj Psi_ij + A_jk d_k phi_j. forcing may be null.
ScalarField pressure_source(const KinematicBundle& k, const VectorField& eta, const VectorField& v,
                            const ForcingData* forcing, double eps, double t);

PressureBVP assemble_pressure(const KinematicBundle& k, const VectorField& eta, const VectorField& v,
                              const ForcingData* forcing, double eps, double t);

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // relative, interior rows
  bool refactored = false;
  double factorization_ms = 0.0;
};

// Sparse Cholesky of the operator, reused as a preconditioner for conjugate
// gradients on later, nearby operators; refactorizes when the iteration count
// passes refactor_after.
class PressureSolver {
 public:
  explicit PressureSolver(double tol = 1e-12, int refactor_after = 8);

  ScalarField solve(const PressureBVP& bvp);
  const SolveStats& last() const { return stats_; }
  void reset() { factor_.reset(); }

 private:
  double tol_;
  int refactor_after_;
  std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> factor_;
  Eigen::Index size_ = -1;
  SolveStats stats_;

  void factorize(const SparseMatrix& op);
};

// First differences on the whole grid as a sparse matrix, one-sided at the walls.
SparseMatrix difference_matrix(const Grid& g, int axis);

// -Div(C grad u) at interior rows against all nodes; wall rows are empty.
SparseMatrix full_operator(const TensorField& C);

// -A_ij D_j (A_ik D_k q) with the centered and one-sided first differences
// used for the divergence, so that the discrete constraint is met exactly.
// Not symmetric; neighbours reach two nodes along each axis.
PressureBVP make_collocated_bvp(const TensorField& A, ScalarField source, OnWalls<BoundaryField> dirichlet);

// Sparse LU of the collocated operator, reused as a GMRES preconditioner on
// later operators; refactorizes when the iteration count passes refactor_after.
class CollocatedSolver {
 public:
  explicit CollocatedSolver(double tol = 1e-12, int refactor_after = 6);

  ScalarField solve(const PressureBVP& bvp);
  const SolveStats& last() const { return stats_; }
  void reset() { factor_.reset(); }

 private:
  double tol_;
  int refactor_after_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix>> factor_;
  Eigen::Index size_ = -1;
  SolveStats stats_;

  void factorize(const SparseMatrix& op);
};

// One-shot solve with a fresh factorization.
ScalarField solve_pressure(const PressureBVP& bvp, double tol = 1e-12, SolveStats* stats = nullptr);

// G3 from the non-pressure part of the momentum balance b = -dt v + Lap eta +
// eps J Lap_eta v - f, given as a vector field; G3 = b . A_.2 on the walls.
OnWalls<BoundaryField> neumann_data(const KinematicBundle& k, const VectorField& balance);

// A_i2 A_ij d_j q - G3 on both walls, one-sided d2 q at the walls.
OnWalls<BoundaryField> neumann_residual(const ScalarField& q, const PressureBVP& bvp, const KinematicBundle& k);

// f - (f . A_.2) A_.2 / |A_.2|^2 with A_.2 = d1 eta_perp.
OnWalls<BoundaryVector> project_tangential(const OnWalls<BoundaryVector>& f, const VectorField& eta);

// F_.2 + eps grad_eta v A_.2 - eps Pi Psi_.2 - [(A_.2 - 2 eps (dtA_.2 . A_.2) A_.2) / |A_.2|^2 + eps dtA_.2]
// on both walls, with F and J from the bundle. psi may be null.
OnWalls<BoundaryVector> traction_identity_residual(const VectorField& eta, const VectorField& v,
                                                   const KinematicBundle& k, const TensorField* psi, double eps);

nlohmann::json pressure_diagnostics(const PressureBVP& bvp, const ScalarField& q, const KinematicBundle& k,
                                    const SolveStats& stats);

}  // namespace elastica
