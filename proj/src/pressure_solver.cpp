#include "elastica/pressure_solver.hpp"

#include "elastica/errors.hpp"

#include <unsupported/Eigen/IterativeSolvers>

#include <chrono>
#include <cmath>
#include <sstream>

namespace elastica {

namespace {

int interior_index(const Grid& g, int i, int j) { return (j - 1) * g.n1 + g.wrap(i); }

Eigen::VectorXd wall_vector(const Grid& g, const OnWalls<BoundaryField>& w) {
  Eigen::VectorXd x(2 * g.n1);
  for (int i = 0; i < g.n1; ++i) {
    x[i] = w.bottom.v.size() ? w.bottom.v[i] : 0.0;
    x[g.n1 + i] = w.top.v.size() ? w.top.v[i] : 0.0;
  }
  return x;
}

OnWalls<BoundaryField> zero_walls(const Grid& g) {
  return {{Wall::bottom, Array::Zero(g.n1), 0.0}, {Wall::top, Array::Zero(g.n1), 0.0}};
}

struct Tap {
  int i, j;
  double w;
};

// First-difference taps at (i, j); at most three.
int taps(const Grid& g, int i, int j, int axis, Tap* out) {
  if (axis == 0) {
    out[0] = {g.wrap(i + 1), j, 0.5 / g.h1};
    out[1] = {g.wrap(i - 1), j, -0.5 / g.h1};
    return 2;
  }
  const int m = g.n2 - 1;
  if (j == 0) {
    out[0] = {i, 0, -1.5 / g.h2};
    out[1] = {i, 1, 2.0 / g.h2};
    out[2] = {i, 2, -0.5 / g.h2};
    return 3;
  }
  if (j == m) {
    out[0] = {i, m, 1.5 / g.h2};
    out[1] = {i, m - 1, -2.0 / g.h2};
    out[2] = {i, m - 2, 0.5 / g.h2};
    return 3;
  }
  out[0] = {i, j + 1, 0.5 / g.h2};
  out[1] = {i, j - 1, -0.5 / g.h2};
  return 2;
}

// Frozen LU as a preconditioner for Eigen's GMRES.
struct FrozenLU {
  using Scalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic };
  const Eigen::SparseLU<SparseMatrix>* lu = nullptr;
  template <class M>
  FrozenLU& analyzePattern(const M&) { return *this; }
  template <class M>
  FrozenLU& factorize(const M&) { return *this; }
  template <class M>
  FrozenLU& compute(const M&) { return *this; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return lu->solve(b); }
  Eigen::ComputationInfo info() const { return Eigen::Success; }
};

}  // namespace

Eigen::VectorXd PressureBVP::interior_rhs() const {
  const Grid& g = grid;
  Eigen::VectorXd b(g.n1 * (g.n2 - 2));
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) b[interior_index(g, i, j)] = source(i, j);
  b -= wall_coupling * wall_vector(g, dirichlet);
  return b;
}

void assemble_operator(const TensorField& C, SparseMatrix& op, SparseMatrix& wall_coupling) {
  const Grid& g = C.grid();
  const int n1 = g.n1, m = g.n2 - 1;
  const int ni = n1 * (g.n2 - 2);
  std::vector<Eigen::Triplet<double>> ti, tw;
  ti.reserve(9 * ni);
  tw.reserve(6 * n1);
  const double s1 = 1.0 / (g.h1 * g.h1), s2 = 1.0 / (g.h2 * g.h2), sx = 1.0 / (4.0 * g.h1 * g.h2);
  const ScalarField &C11 = C(0, 0), &C12 = C(0, 1), &C22 = C(1, 1);
  for (int j = 1; j < m; ++j) {
    for (int i = 0; i < n1; ++i) {
      const int row = interior_index(g, i, j);
      const int ip = g.wrap(i + 1), im = g.wrap(i - 1);
      auto add = [&](int ii, int jj, double val) {
        if (jj == 0)
          tw.emplace_back(row, g.wrap(ii), val);
        else if (jj == m)
          tw.emplace_back(row, n1 + g.wrap(ii), val);
        else
          ti.emplace_back(row, interior_index(g, ii, jj), val);
      };
      const double ae = 0.5 * (C11(i, j) + C11(ip, j)) * s1;
      const double aw = 0.5 * (C11(i, j) + C11(im, j)) * s1;
      const double an = 0.5 * (C22(i, j) + C22(i, j + 1)) * s2;
      const double as = 0.5 * (C22(i, j) + C22(i, j - 1)) * s2;
      add(i, j, ae + aw + an + as);
      add(ip, j, -ae);
      add(im, j, -aw);
      add(i, j + 1, -an);
      add(i, j - 1, -as);
      // d1 (C12 d2 q)
      add(ip, j + 1, -C12(ip, j) * sx);
      add(ip, j - 1, C12(ip, j) * sx);
      add(im, j + 1, C12(im, j) * sx);
      add(im, j - 1, -C12(im, j) * sx);
      // d2 (C21 d1 q)
      add(ip, j + 1, -C12(i, j + 1) * sx);
      add(im, j + 1, C12(i, j + 1) * sx);
      add(ip, j - 1, C12(i, j - 1) * sx);
      add(im, j - 1, -C12(i, j - 1) * sx);
    }
  }
  op.resize(ni, ni);
  op.setFromTriplets(ti.begin(), ti.end());
  wall_coupling.resize(ni, 2 * n1);
  wall_coupling.setFromTriplets(tw.begin(), tw.end());
}

PressureBVP make_bvp(const TensorField& C, ScalarField source, OnWalls<BoundaryField> dirichlet) {
  PressureBVP b;
  b.grid = C.grid();
  assemble_operator(C, b.op, b.wall_coupling);
  b.source = std::move(source);
  b.dirichlet = std::move(dirichlet);
  b.neumann = zero_walls(b.grid);
  return b;
}

ScalarField apply_operator(const PressureBVP& bvp, const ScalarField& q) {
  const Grid& g = bvp.grid;
  Eigen::VectorXd x(g.n1 * (g.n2 - 2));
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) x[interior_index(g, i, j)] = q(i, j);
  const OnWalls<BoundaryField> w{trace(q, Wall::bottom), trace(q, Wall::top)};
  const Eigen::VectorXd y = bvp.op * x + bvp.wall_coupling * wall_vector(g, w);
  ScalarField r(g);
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) r(i, j) = y[interior_index(g, i, j)];
  return r;
}

OnWalls<BoundaryField> pressure_dirichlet(const VectorField& eta, const VectorField& v, const TensorField* psi,
                                          double eps) {
  const Grid& g = eta.grid();
  OnWalls<BoundaryField> out;
  for (Wall w : kWalls) {
    const double s = normal_sign(w);
    const BoundaryVector t = wall_tangent(eta, w);
    const Array c1 = diff(BoundaryField{w, t[0], 0.0}).v, c2 = diff(BoundaryField{w, t[1], 0.0}).v;
    const Array len2 = t[0].square() + t[1].square();
    const Array len = len2.sqrt();
    // A N = s (-t2, t1)
    const Array curv = s * (-c1 * t[1] + c2 * t[0]);
    Array visc = Array::Zero(g.n1);
    if (eps != 0.0) {
      const Array dv1 = diff(trace(v[0], w)).v, dv2 = diff(trace(v[1], w)).v;
      // dtA_.2 . A_.2 with dtA_.2 = d1 v_perp, A_.2 = d1 eta_perp
      const Array dtAA = dv2 * t[1] + dv1 * t[0];
      visc = -2.0 * dtAA;
      if (psi) {
        const int j = wall_row(g, w);
        const Array p12 = (*psi)(0, 1).values().segment(g.index(0, j), g.n1);
        const Array p22 = (*psi)(1, 1).values().segment(g.index(0, j), g.n1);
        visc -= -p12 * t[1] + p22 * t[0];
      }
    }
    BoundaryField b{w, Array(), 0.0};
    b.v = -curv / (len2 * len) + (1.0 + eps * visc) / len2 - 1.0;
    out[w] = b;
  }
  return out;
}

ScalarField pressure_source(const KinematicBundle& k, const VectorField& eta, const VectorField& v,
                            const ForcingData* forcing, double eps, double t) {
  (void)eta;
  const TensorField G = gradient(v);
  ScalarField src = -1.0 * cof_contract(G, G);
  for (int a = 1; a <= 2; ++a) {
    const TensorField dF = diff(k.F, a);
    src += cof_contract(dF, dF);
  }
  src -= second_diff(k.J, 1) + second_diff(k.J, 2);
  if (forcing) {
    for (int j = 0; j < 2; ++j)
      for (int kk = 0; kk < 2; ++kk) src += k.A(j, kk) * diff(forcing->phi[j], kk + 1);
    if (eps != 0.0) {
      const TensorField P = forcing->psi(t);
      for (int i = 0; i < 2; ++i) {
        const ScalarField divrow = diff(P(i, 0), 1) + diff(P(i, 1), 2);
        for (int kk = 0; kk < 2; ++kk) src += eps * (k.A(i, kk) * diff(divrow, kk + 1));
      }
    }
  }
  for (int n = 0; n < src.grid().size(); ++n)
    if (!std::isfinite(src.values()[n])) throw SolverFailure("non-finite pressure source");
  return src;
}

PressureBVP assemble_pressure(const KinematicBundle& k, const VectorField& eta, const VectorField& v,
                              const ForcingData* forcing, double eps, double t) {
  TensorField psi;
  if (forcing && eps != 0.0) psi = forcing->psi(t);
  return make_bvp(k.E, pressure_source(k, eta, v, forcing, eps, t),
                  pressure_dirichlet(eta, v, forcing && eps != 0.0 ? &psi : nullptr, eps));
}

PressureSolver::PressureSolver(double tol, int refactor_after) : tol_(tol), refactor_after_(refactor_after) {}

void PressureSolver::factorize(const SparseMatrix& op) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!factor_ || size_ != op.rows()) {
    factor_ = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>();
    factor_->analyzePattern(op);
    size_ = op.rows();
  }
  factor_->factorize(op);
  if (factor_->info() != Eigen::Success) {
    factor_.reset();
    throw SolverFailure("pressure factorization failed");
  }
  stats_.refactored = true;
  stats_.factorization_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

ScalarField PressureSolver::solve(const PressureBVP& bvp) {
  const Grid& g = bvp.grid;
  const Eigen::VectorXd b = bvp.interior_rhs();
  stats_ = SolveStats{};
  if (!factor_ || size_ != bvp.op.rows()) factorize(bvp.op);
  const double bnorm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  if (bnorm > 0.0) {
    const int max_iter = 3 * refactor_after_ + 10;
    for (int attempt = 0; attempt < 2; ++attempt) {
      x = factor_->solve(b);
      Eigen::VectorXd r = b - bvp.op * x;
      Eigen::VectorXd z = factor_->solve(r);
      Eigen::VectorXd p = z;
      double rz = r.dot(z);
      int it = 0;
      double res = r.norm() / bnorm;
      while (res > tol_ && it < max_iter) {
        const Eigen::VectorXd Ap = bvp.op * p;
        const double alpha = rz / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        z = factor_->solve(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++it;
        res = r.norm() / bnorm;
      }
      stats_.iterations += it;
      stats_.residual = (b - bvp.op * x).norm() / bnorm;
      if (stats_.residual <= tol_ && std::isfinite(stats_.residual)) break;
      if (attempt == 1 || stats_.refactored) {
        std::ostringstream os;
        os << "pressure solve did not converge: relative residual " << stats_.residual;
        throw SolverFailure(os.str());
      }
      factorize(bvp.op);
    }
    if (stats_.iterations > refactor_after_ && !stats_.refactored) factorize(bvp.op);
  }
  ScalarField q(g);
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) q(i, j) = x[interior_index(g, i, j)];
  for (Wall w : kWalls) q.values().segment(g.index(0, wall_row(g, w)), g.n1) = bvp.dirichlet[w].v;
  return q;
}

SparseMatrix difference_matrix(const Grid& g, int axis) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(3 * g.size());
  Tap tp[3];
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int n = taps(g, i, j, axis - 1, tp);
      for (int p = 0; p < n; ++p) t.emplace_back(g.index(i, j), g.index(tp[p].i, tp[p].j), tp[p].w);
    }
  SparseMatrix D(g.size(), g.size());
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

SparseMatrix full_operator(const TensorField& C) {
  const Grid& g = C.grid();
  SparseMatrix op, wc;
  assemble_operator(C, op, wc);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(op.nonZeros() + wc.nonZeros());
  auto row_node = [&](int r) { return g.index(r % g.n1, r / g.n1 + 1); };
  for (int k = 0; k < op.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(op, k); it; ++it) t.emplace_back(row_node(it.row()), row_node(it.col()), it.value());
  for (int k = 0; k < wc.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(wc, k); it; ++it) {
      const int c = it.col();
      const int node = c < g.n1 ? g.index(c, 0) : g.index(c - g.n1, g.n2 - 1);
      t.emplace_back(row_node(it.row()), node, it.value());
    }
  SparseMatrix M(g.size(), g.size());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

PressureBVP make_collocated_bvp(const TensorField& A, ScalarField source, OnWalls<BoundaryField> dirichlet) {
  const Grid& g = A.grid();
  const int n1 = g.n1, m = g.n2 - 1;
  const int ni = n1 * (g.n2 - 2);
  std::vector<Eigen::Triplet<double>> ti, tw;
  ti.reserve(12 * ni);
  tw.reserve(8 * n1);
  Tap outer[3], inner[3];
  for (int j = 1; j < m; ++j)
    for (int i = 0; i < n1; ++i) {
      const int row = interior_index(g, i, j), r = g.index(i, j);
      for (int a = 0; a < 2; ++a) {
        const int no = taps(g, i, j, a, outer);
        for (int p = 0; p < no; ++p) {
          const int n = g.index(outer[p].i, outer[p].j);
          for (int b = 0; b < 2; ++b) {
            const double e = A(0, a).values()[r] * A(0, b).values()[n] + A(1, a).values()[r] * A(1, b).values()[n];
            const int nn = taps(g, outer[p].i, outer[p].j, b, inner);
            for (int q = 0; q < nn; ++q) {
              const double val = -outer[p].w * inner[q].w * e;
              if (inner[q].j == 0)
                tw.emplace_back(row, inner[q].i, val);
              else if (inner[q].j == m)
                tw.emplace_back(row, n1 + inner[q].i, val);
              else
                ti.emplace_back(row, interior_index(g, inner[q].i, inner[q].j), val);
            }
          }
        }
      }
    }
  PressureBVP bvp;
  bvp.grid = g;
  bvp.op.resize(ni, ni);
  bvp.op.setFromTriplets(ti.begin(), ti.end());
  bvp.wall_coupling.resize(ni, 2 * n1);
  bvp.wall_coupling.setFromTriplets(tw.begin(), tw.end());
  bvp.source = std::move(source);
  bvp.dirichlet = std::move(dirichlet);
  bvp.neumann = zero_walls(g);
  return bvp;
}

CollocatedSolver::CollocatedSolver(double tol, int refactor_after) : tol_(tol), refactor_after_(refactor_after) {}

void CollocatedSolver::factorize(const SparseMatrix& op) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!factor_ || size_ != op.rows()) {
    factor_ = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
    factor_->analyzePattern(op);
    size_ = op.rows();
  }
  factor_->factorize(op);
  if (factor_->info() != Eigen::Success) {
    factor_.reset();
    throw SolverFailure("collocated factorization failed");
  }
  stats_.refactored = true;
  stats_.factorization_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

ScalarField CollocatedSolver::solve(const PressureBVP& bvp) {
  const Grid& g = bvp.grid;
  const Eigen::VectorXd b = bvp.interior_rhs();
  stats_ = SolveStats{};
  if (!factor_ || size_ != bvp.op.rows()) factorize(bvp.op);
  const double bnorm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  if (bnorm > 0.0) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      Eigen::GMRES<SparseMatrix, FrozenLU> gm;
      gm.preconditioner().lu = factor_.get();
      gm.set_restart(2 * refactor_after_ + 2);
      gm.setMaxIterations(2 * refactor_after_ + 2);
      gm.setTolerance(0.5 * tol_);
      gm.compute(bvp.op);
      x = gm.solveWithGuess(b, factor_->solve(b));
      stats_.iterations += static_cast<int>(gm.iterations());
      stats_.residual = (b - bvp.op * x).norm() / bnorm;
      if (stats_.residual <= tol_ && std::isfinite(stats_.residual)) break;
      if (attempt == 1 || stats_.refactored) {
        std::ostringstream os;
        os << "collocated solve did not converge: relative residual " << stats_.residual;
        throw SolverFailure(os.str());
      }
      factorize(bvp.op);
    }
    if (stats_.iterations > refactor_after_ && !stats_.refactored) factorize(bvp.op);
  }
  ScalarField q(g);
  for (int j = 1; j < g.n2 - 1; ++j)
    for (int i = 0; i < g.n1; ++i) q(i, j) = x[interior_index(g, i, j)];
  for (Wall w : kWalls) q.values().segment(g.index(0, wall_row(g, w)), g.n1) = bvp.dirichlet[w].v;
  return q;
}

ScalarField solve_pressure(const PressureBVP& bvp, double tol, SolveStats* stats) {
  PressureSolver s(tol);
  ScalarField q = s.solve(bvp);
  if (stats) *stats = s.last();
  return q;
}

OnWalls<BoundaryField> neumann_data(const KinematicBundle& k, const VectorField& balance) {
  const Grid& g = k.A.grid();
  OnWalls<BoundaryField> out;
  for (Wall w : kWalls) {
    const int j0 = g.index(0, wall_row(g, w));
    Array s = Array::Zero(g.n1);
    for (int i = 0; i < 2; ++i)
      s += balance[i].values().segment(j0, g.n1) * k.A(i, 1).values().segment(j0, g.n1);
    out[w] = BoundaryField{w, s, 0.0};
  }
  return out;
}

OnWalls<BoundaryField> neumann_residual(const ScalarField& q, const PressureBVP& bvp, const KinematicBundle& k) {
  const Grid& g = q.grid();
  const ScalarField d1 = diff(q, 1), d2 = diff(q, 2);
  OnWalls<BoundaryField> out;
  for (Wall w : kWalls) {
    const int j0 = g.index(0, wall_row(g, w));
    Array s = Array::Zero(g.n1);
    for (int i = 0; i < 2; ++i) {
      const Array grad = k.A(i, 0).values().segment(j0, g.n1) * d1.values().segment(j0, g.n1) +
                         k.A(i, 1).values().segment(j0, g.n1) * d2.values().segment(j0, g.n1);
      s += k.A(i, 1).values().segment(j0, g.n1) * grad;
    }
    const Array& g3 = bvp.neumann[w].v;
    out[w] = BoundaryField{w, g3.size() ? Array(s - g3) : s, 0.0};
  }
  return out;
}

OnWalls<BoundaryVector> project_tangential(const OnWalls<BoundaryVector>& f, const VectorField& eta) {
  OnWalls<BoundaryVector> out;
  for (Wall w : kWalls) {
    const BoundaryVector t = wall_tangent(eta, w);
    const Array a1 = -t[1], a2 = t[0];
    const Array len2 = a1.square() + a2.square();
    if (!(len2.minCoeff() > 0.0)) throw BoundaryDegeneracy("projection with degenerate A_.2");
    const Array dot = (f[w][0] * a1 + f[w][1] * a2) / len2;
    out[w].wall = w;
    out[w].c[0] = f[w][0] - dot * a1;
    out[w].c[1] = f[w][1] - dot * a2;
  }
  return out;
}

OnWalls<BoundaryVector> traction_identity_residual(const VectorField& eta, const VectorField& v,
                                                   const KinematicBundle& k, const TensorField* psi, double eps) {
  const Grid& g = eta.grid();
  const TensorField G = gradient(v);
  OnWalls<BoundaryVector> psi2;
  for (Wall w : kWalls) {
    const int j0 = g.index(0, wall_row(g, w));
    psi2[w].wall = w;
    for (int i = 0; i < 2; ++i)
      psi2[w].c[i] = psi ? Array((*psi)(i, 1).values().segment(j0, g.n1)) : Array(Array::Zero(g.n1));
  }
  const OnWalls<BoundaryVector> ppsi = project_tangential(psi2, eta);
  OnWalls<BoundaryVector> out;
  for (Wall w : kWalls) {
    const int j0 = g.index(0, wall_row(g, w));
    auto seg = [&](const ScalarField& f) { return Array(f.values().segment(j0, g.n1)); };
    const BoundaryVector t = wall_tangent(eta, w);
    const Array a1 = -t[1], a2 = t[0];
    const Array len2 = a1.square() + a2.square();
    const Array dv1 = diff(trace(v[0], w)).v, dv2 = diff(trace(v[1], w)).v;
    const Array d1 = -dv2, d2 = dv1;  // dtA_.2
    const Array dtAA = d1 * a1 + d2 * a2;
    const Array J = seg(k.J);
    out[w].wall = w;
    const std::array<Array, 2> a{a1, a2}, dta{d1, d2};
    for (int i = 0; i < 2; ++i) {
      // grad_eta v A_.2 = J^{-1} d_m v_i E_m2
      const Array visc = (seg(G(i, 0)) * seg(k.E(0, 1)) + seg(G(i, 1)) * seg(k.E(1, 1))) / J;
      const Array lhs = seg(k.F(i, 1)) + eps * visc - eps * ppsi[w][i];
      const Array rhs = (a[i] - 2.0 * eps * dtAA * a[i]) / len2 + eps * dta[i];
      out[w].c[i] = lhs - rhs;
    }
  }
  return out;
}

nlohmann::json pressure_diagnostics(const PressureBVP& bvp, const ScalarField& q, const KinematicBundle& k,
                                    const SolveStats& stats) {
  double dmin = 1e300, dmax = -1e300;
  for (Wall w : kWalls) {
    dmin = std::min(dmin, bvp.dirichlet[w].v.minCoeff());
    dmax = std::max(dmax, bvp.dirichlet[w].v.maxCoeff());
  }
  const auto nr = neumann_residual(q, bvp, k);
  return {{"dirichlet_data_minmax", {dmin, dmax}},
          {"neumann_residual_max", std::max(nr.bottom.max_abs(), nr.top.max_abs())},
          {"solve_residual", stats.residual},
          {"factorization_time_ms", stats.factorization_ms}};
}

}  // namespace elastica
