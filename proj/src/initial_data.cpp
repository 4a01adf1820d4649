#include "elastica/initial_data.hpp"

#include "elastica/dynamics.hpp"
#include "elastica/errors.hpp"
#include "elastica/pressure_solver.hpp"

#include <Eigen/SparseLU>
#include <Eigen/SPQRSupport>

#include <cmath>
#include <numbers>
#include <sstream>

namespace elastica {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Array row_of(const ScalarField& f, Wall w) {
  const Grid& g = f.grid();
  return f.values().segment(g.index(0, wall_row(g, w)), g.n1);
}

SparseMatrix diag(const Array& a) {
  SparseMatrix d(a.size(), a.size());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) t.emplace_back(i, i, a[i]);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

TensorField divide(TensorField T, const ScalarField& J) {
  for (auto& c : T.c) c.values() /= J.values();
  return T;
}

ScalarField laplacian(const ScalarField& f) { return second_diff(f, 1) + second_diff(f, 2); }

// Wall rows from the three nearest interior rows.
void extrapolate_walls(ScalarField& f) {
  const Grid& g = f.grid();
  const int m = g.n2 - 1;
  for (int i = 0; i < g.n1; ++i) {
    f(i, 0) = 3.0 * f(i, 1) - 3.0 * f(i, 2) + f(i, 3);
    f(i, m) = 3.0 * f(i, m - 1) - 3.0 * f(i, m - 2) + f(i, m - 3);
  }
}

double mean_of(const ScalarField& f) { return integrate(f) / kTwoPi; }

// Sparse pieces of -Lap_eta, grad_eta and Div_eta on one map.
struct StokesOps {
  Grid g;
  KinematicBundle k;
  SparseMatrix lap;       // -Lap_eta at interior rows
  SparseMatrix grad[2];   // component c of grad_eta
  SparseMatrix D[2];

  explicit StokesOps(const VectorField& eta) : g(eta.grid()), k(build_kinematics(eta)) {
    D[0] = difference_matrix(g, 1);
    D[1] = difference_matrix(g, 2);
    const SparseMatrix Ji = diag(1.0 / k.J.values());
    for (int c = 0; c < 2; ++c) grad[c] = Ji * (diag(k.A(c, 0).values()) * D[0] + diag(k.A(c, 1).values()) * D[1]);
    lap = Ji * full_operator(divide(k.E, k.J));
  }
};

// Outward m = A N on each wall: sign * A_.2.
BoundaryVector wall_normal_vector(const KinematicBundle& k, Wall w) {
  const double s = normal_sign(w);
  return BoundaryVector{w, {s * row_of(k.A(0, 1), w), s * row_of(k.A(1, 1), w)}};
}

// (2 S_eta(v) m) on a wall for a given gradient.
BoundaryVector stress_times(const KinematicBundle& k, const TensorField& G, const BoundaryVector& m) {
  const Wall w = m.wall;
  BoundaryVector out{w, {Array::Zero(m[0].size()), Array::Zero(m[0].size())}};
  const Array Ji = 1.0 / row_of(k.J, w);
  // 2S_ik = J^{-1} (G_il A_kl + A_il G_kl)
  for (int i = 0; i < 2; ++i)
    for (int kk = 0; kk < 2; ++kk) {
      Array s = Array::Zero(m[0].size());
      for (int l = 0; l < 2; ++l)
        s += row_of(G(i, l), w) * row_of(k.A(kk, l), w) + row_of(k.A(i, l), w) * row_of(G(kk, l), w);
      out[i] += Ji * s * m[kk];
    }
  return out;
}

// Transcribed boundary datum g of the w1 problem on one wall, oriented by N.
BoundaryVector g_datum(const KinematicBundle& k, const VectorField& v, const ScalarField& r0, Wall w) {
  const TensorField G = gradient(v);
  const TensorField dA = cofactor(G);
  const Array t1 = row_of(k.F(0, 0), w), t2 = row_of(k.F(1, 0), w);
  const Array len2 = t1.square() + t2.square(), len = len2.sqrt();
  const double s = normal_sign(w);
  const BoundaryVector dA2{w, {row_of(dA(0, 1), w), row_of(dA(1, 1), w)}};
  const BoundaryVector S_dA = stress_times(k, G, dA2);
  BoundaryVector out{w, {}};
  for (int i = 0; i < 2; ++i) {
    Array acc = len2 * row_of(r0, w) * dA2[i] + S_dA[i];
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < 2; ++j) {
        acc += row_of(dA(i, a), w) * row_of(G(j, a), w) * row_of(k.A(j, 1), w);
        acc += row_of(dA(j, a), w) * row_of(G(i, a), w) * row_of(k.A(j, 1), w);
      }
    out[i] = s * acc / len;
  }
  return out;
}

struct CurvePoint {
  ScalarField q;
  VectorField a;
};

}  // namespace

double zcomp_residual(const VectorField& eta) {
  double r = 0.0;
  for (Wall w : kWalls) {
    const BoundaryVector t = wall_tangent(eta, w);
    const Array len2 = t[0].square() + t[1].square();
    const Array y1 = row_of(diff(eta[0], 2), w), y2 = row_of(diff(eta[1], 2), w);
    r = std::max(r, (y1 + t[1] / len2).abs().maxCoeff());
    r = std::max(r, (y2 - t[0] / len2).abs().maxCoeff());
  }
  return r;
}

namespace {

// Pi0 f on a wall with a = A_.2.
std::array<Array, 2> tangential(const Array& f1, const Array& f2, const Array& a1, const Array& a2) {
  const Array dot = (f1 * a1 + f2 * a2) / (a1.square() + a2.square());
  return {f1 - dot * a1, f2 - dot * a2};
}

Simulator inviscid_simulator(const VectorField& eta, const VectorField* phi, const ScalarField* J0) {
  const Grid& g = eta.grid();
  SimConfig cfg;
  cfg.solver_tol = 1e-13;
  cfg.reproject_tol = 1e-12;
  std::optional<ForcingData> f;
  if (phi) {
    cfg.forcing = true;
    f = zero_forcing(g);
    f->phi = *phi;
  }
  return Simulator(g, cfg, J0 ? *J0 : build_kinematics(eta).J, f);
}

}  // namespace

CompatReport check_compatibility(const VectorField& eta0, const VectorField& v0) {
  CompatReport r;
  r.zcomp_residual = zcomp_residual(eta0);
  Simulator sim = inviscid_simulator(eta0, nullptr, nullptr);
  const VectorField a0 = sim.evaluate(eta0, v0, 0.0).accel;
  for (Wall w : kWalls) {
    const BoundaryVector t = wall_tangent(eta0, w);
    const Array len2 = t[0].square() + t[1].square();
    const Array a1 = -t[1], a2 = t[0];
    const Array dv1 = diff(trace(v0[0], w)).v, dv2 = diff(trace(v0[1], w)).v;
    const Array dA1 = -dv2, dA2 = dv1;
    // comp1
    const auto p1 = tangential(row_of(diff(v0[0], 2), w) - dA1 / len2, row_of(diff(v0[1], 2), w) - dA2 / len2, a1, a2);
    r.comp1_residual = std::max({r.comp1_residual, p1[0].abs().maxCoeff(), p1[1].abs().maxCoeff()});
    // comp2
    const Array da1 = diff(trace(a0[0], w)).v, da2 = diff(trace(a0[1], w)).v;
    const Array ddA1 = -da2, ddA2 = da1;
    const Array tdv = t[0] * dv1 + t[1] * dv2;
    const Array c1 = -ddA1 / len2 + 2.0 * tdv / len2.square() * dA1 + row_of(diff(a0[0], 2), w);
    const Array c2 = -ddA2 / len2 + 2.0 * tdv / len2.square() * dA2 + row_of(diff(a0[1], 2), w);
    const auto p2 = tangential(c1, c2, a1, a2);
    r.comp2_residual = std::max({r.comp2_residual, p2[0].abs().maxCoeff(), p2[1].abs().maxCoeff()});
  }
  return r;
}

ScalarField solve_q0(const VectorField& eta0, const VectorField& v0, double zcomp_tol) {
  const double z = zcomp_residual(eta0);
  if (!(z <= zcomp_tol)) {
    std::ostringstream os;
    os << "zeroth-order compatibility fails: residual " << z << " > " << zcomp_tol;
    throw IllPosedData(os.str());
  }
  Simulator sim = inviscid_simulator(eta0, nullptr, nullptr);
  return sim.evaluate(eta0, v0, 0.0).q;
}

double kappa_from_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("kappa_from_epsilon needs 0 < eps < 1");
  return 1.0 / std::abs(std::log(eps));
}

VectorField smooth_eta0(const VectorField& eta0, double kappa) {
  const Grid& g = eta0.grid();
  const int m = g.n2 - 1;
  // wall data
  OnWalls<std::array<Array, 2>> dir, neu;
  for (Wall w : kWalls) {
    const BoundaryField b0 = mollify(trace(eta0[0], w), kappa, g.h1);
    const BoundaryField b1 = mollify(trace(eta0[1], w), kappa, g.h1);
    const Array t1 = diff(b0).v, t2 = diff(b1).v;
    const Array len2 = t1.square() + t2.square();
    if (!(std::sqrt(len2.minCoeff()) > 1e-12)) throw BoundaryDegeneracy("mollified trace has a degenerate tangent");
    dir[w] = {b0.v, b1.v};
    neu[w] = {-t2 / len2, t1 / len2};
  }
  // rows 0, m: value; rows 1, m-1: one-sided d2; others: Lap^2
  TensorField I(g);
  I(0, 0) = ScalarField(g, 1.0);
  I(1, 1) = ScalarField(g, 1.0);
  const SparseMatrix lap = -1.0 * full_operator(I);
  const SparseMatrix bih = lap * lap;
  const SparseMatrix D2 = difference_matrix(g, 2);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(13 * g.size());
  const SparseMatrix bihR = SparseMatrix(bih.transpose());  // rows as columns for fast access
  const SparseMatrix D2R = SparseMatrix(D2.transpose());
  // rows scaled to unit size
  const double hm = std::min(g.h1, g.h2);
  const double sb = hm * hm * hm * hm, sn = g.h2;
  auto copy_row_fast = [&](const SparseMatrix& MT, int src, int dst, double sc) {
    for (SparseMatrix::InnerIterator it(MT, src); it; ++it) t.emplace_back(dst, it.row(), sc * it.value());
  };
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const int n = g.index(i, j);
      if (j == 0 || j == m)
        t.emplace_back(n, n, 1.0);
      else if (j == 1)
        copy_row_fast(D2R, g.index(i, 0), n, sn);
      else if (j == m - 1)
        copy_row_fast(D2R, g.index(i, m), n, sn);
      else
        copy_row_fast(bihR, n, n, sb);
    }
  SparseMatrix S(g.size(), g.size());
  S.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<SparseMatrix> lu(S);
  if (lu.info() != Eigen::Success) throw SolverFailure("biharmonic factorization failed");
  VectorField out(g);
  for (int c = 0; c < 2; ++c) {
    const double jump = eta0[c].seam_jump();
    const ScalarField f = mollify(laplacian(laplacian(eta0[c])), kappa);
    Eigen::VectorXd b(g.size());
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) {
        const int n = g.index(i, j);
        const double lin = jump * g.x1(i) / kTwoPi;
        if (j == 0)
          b[n] = dir.bottom[c][i] - lin;
        else if (j == m)
          b[n] = dir.top[c][i] - lin;
        else if (j == 1)
          b[n] = sn * neu.bottom[c][i];
        else if (j == m - 1)
          b[n] = sn * neu.top[c][i];
        else
          b[n] = sb * f(i, j);
      }
    Eigen::VectorXd p = lu.solve(b);
    for (int it = 0; it < 3; ++it) p += lu.solve(b - S * p);
    if (!p.allFinite()) throw SolverFailure("biharmonic solve produced non-finite values");
    out[c] = ScalarField(g, 0.0, jump);
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) out[c](i, j) = p[g.index(i, j)] + jump * g.x1(i) / kTwoPi;
    // wall rows carry the data exactly
    for (Wall w : kWalls) {
      const int j = wall_row(g, w);
      for (int i = 0; i < g.n1; ++i) out[c](i, j) = dir[w][c][i];
    }
  }
  return out;
}

TensorField stress_cofactor(const KinematicBundle& k, const TensorField& Dv) {
  const TensorField At = transpose(k.A);
  const TensorField T = matmul(matmul(Dv, At), k.A) + matmul(matmul(k.A, transpose(Dv)), k.A);
  return divide(T, k.J);
}

ScalarField solve_r0(const VectorField& eta0, const VectorField& v0) {
  const Grid& g = eta0.grid();
  const KinematicBundle k = build_kinematics(eta0);
  const TensorField G = gradient(v0);
  OnWalls<BoundaryField> data;
  for (Wall w : kWalls) {
    const BoundaryVector a{w, {row_of(k.A(0, 1), w), row_of(k.A(1, 1), w)}};
    const BoundaryVector s = stress_times(k, G, a);
    const Array len2 = a[0].square() + a[1].square();
    data[w] = BoundaryField{w, (s[0] * a[0] + s[1] * a[1]) / len2, 0.0};
  }
  return solve_pressure(make_bvp(divide(k.E, k.J), ScalarField(g), data), 1e-13);
}

StokesSolution solve_stokes(const VectorField& eta, const VectorField& f, const ScalarField& d,
                            const OnWalls<BoundaryVector>& gdat, const std::array<double, 2>& mean) {
  const Grid& g = eta.grid();
  const int N = g.size(), m = g.n2 - 1;
  const StokesOps ops(eta);
  const KinematicBundle& k = ops.k;
  const Array Ji = 1.0 / k.J.values();
  // traction blocks on the full grid, used at wall rows only
  Array m1 = Array::Zero(N), m2 = Array::Zero(N), len = Array::Ones(N);
  for (Wall w : kWalls) {
    const BoundaryVector mv = wall_normal_vector(k, w);
    const int j0 = g.index(0, wall_row(g, w));
    m1.segment(j0, g.n1) = mv[0];
    m2.segment(j0, g.n1) = mv[1];
    len.segment(j0, g.n1) = (mv[0].square() + mv[1].square()).sqrt();
  }
  const Array mm[2] = {m1, m2};
  SparseMatrix AD[2];  // A_il D_l
  for (int i = 0; i < 2; ++i) AD[i] = diag(k.A(i, 0).values()) * ops.D[0] + diag(k.A(i, 1).values()) * ops.D[1];
  // c_l = m_k A_kl
  SparseMatrix cD = diag(m1 * k.A(0, 0).values() + m2 * k.A(1, 0).values()) * ops.D[0] +
                    diag(m1 * k.A(0, 1).values() + m2 * k.A(1, 1).values()) * ops.D[1];
  // traction row i, velocity p: -J^{-1} (delta_ip cD + m_p A_i. D); pressure: m_i
  SparseMatrix T[2][2];
  for (int i = 0; i < 2; ++i)
    for (int p = 0; p < 2; ++p) {
      SparseMatrix b = diag(mm[p]) * AD[i];
      if (i == p) b += cD;
      T[i][p] = -1.0 * (diag(Ji) * b);
    }

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(40 * N);
  auto add_rows = [&](const SparseMatrix& B, int row_off, int col_off, bool wall_rows) {
    for (int kk = 0; kk < B.outerSize(); ++kk)
      for (SparseMatrix::InnerIterator it(B, kk); it; ++it) {
        const int j = static_cast<int>(it.row()) / g.n1;
        const bool is_wall = j == 0 || j == m;
        if (is_wall == wall_rows) t.emplace_back(row_off + it.row(), col_off + it.col(), it.value());
      }
  };
  // rows [0, 2N): momentum (interior) / traction (walls); rows [2N, 3N): divergence; then 2 mean rows
  for (int c = 0; c < 2; ++c) {
    add_rows(ops.lap, c * N, c * N, false);
    add_rows(ops.grad[c], c * N, 2 * N, false);
    for (int p = 0; p < 2; ++p) add_rows(T[c][p], c * N, p * N, true);
    for (Wall w : kWalls)
      for (int i = 0; i < g.n1; ++i) {
        const int n = g.index(i, wall_row(g, w));
        t.emplace_back(c * N + n, 2 * N + n, mm[c][n]);
      }
    for (int j = 1; j < m; ++j)
      for (int i = 0; i < g.n1; ++i) t.emplace_back(c * N + g.index(i, j), 3 * N + c, -1.0);
    const SparseMatrix div = diag(Ji) * AD[c];
    // Div_eta v = J^{-1} A_cl D_l v_c summed over c
    for (int kk = 0; kk < div.outerSize(); ++kk)
      for (SparseMatrix::InnerIterator it(div, kk); it; ++it) t.emplace_back(2 * N + it.row(), c * N + it.col(), it.value());
    // constants are in the kernel; pin one node and shift to the mean afterwards
    t.emplace_back(3 * N + c, c * N, 1.0);
  }
  {
    // h^2 pressure stabilization couples the odd and even rows of r
    const SparseMatrix C = (g.h2 * g.h2) * ops.lap;
    for (int kk = 0; kk < C.outerSize(); ++kk)
      for (SparseMatrix::InnerIterator it(C, kk); it; ++it) t.emplace_back(2 * N + it.row(), 2 * N + it.col(), it.value());
  }
  SparseMatrix M(3 * N + 2, 3 * N + 2);
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();

  Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * N + 2);
  for (int c = 0; c < 2; ++c) {
    for (int j = 1; j < m; ++j)
      for (int i = 0; i < g.n1; ++i) b[c * N + g.index(i, j)] = f[c](i, j);
    for (Wall w : kWalls)
      for (int i = 0; i < g.n1; ++i) {
        const int n = g.index(i, wall_row(g, w));
        b[c * N + n] = gdat[w].c[c].size() ? gdat[w][c][i] * len[n] : 0.0;
      }
  }
  b.segment(2 * N, N) = d.values().matrix();

  Eigen::SPQR<SparseMatrix> qr;
  qr.compute(M);
  if (qr.info() != Eigen::Success) throw SolverFailure("Stokes factorization failed");
  Eigen::VectorXd x = qr.solve(b);
  const Eigen::VectorXd res0 = b - M * x;
  x += qr.solve(res0);
  if (!x.allFinite()) throw SolverFailure("Stokes solve produced non-finite values");

  StokesSolution s;
  s.v = VectorField(g);
  s.r = ScalarField(g);
  s.v[0].values() = x.segment(0, N).array();
  s.v[1].values() = x.segment(N, N).array();
  s.r.values() = x.segment(2 * N, N).array();
  const Eigen::VectorXd res = M * x - b;
  for (int c = 0; c < 2; ++c) s.v[c].values() += mean[c] - mean_of(s.v[c]);
  s.lsq_residual = res.norm() / std::max(b.norm(), 1e-300);
  Eigen::VectorXd dv = -d.values().matrix();
  for (int c = 0; c < 2; ++c) dv += diag(Ji) * AD[c] * x.segment(c * N, N);
  s.div_residual = dv.cwiseAbs().maxCoeff();
  double tr = 0.0;
  for (int c = 0; c < 2; ++c)
    for (Wall w : kWalls)
      for (int i = 0; i < g.n1; ++i) {
        const int n = g.index(i, wall_row(g, w));
        tr = std::max(tr, std::abs(res[c * N + n]) / len[n]);
      }
  s.traction_residual = tr;
  return s;
}

VectorField stokes_residual_field(const VectorField& eta, const VectorField& v, const ScalarField& r) {
  const StokesOps ops(eta);
  const Eigen::VectorXd rv = r.values().matrix();
  VectorField out(eta.grid());
  for (int c = 0; c < 2; ++c) {
    out[c].values() = (ops.lap * v[c].values().matrix() + ops.grad[c] * rv).array();
    extrapolate_walls(out[c]);
  }
  return out;
}

StokesSolution smooth_v0(const VectorField& eta0k, const VectorField& eta0, const VectorField& v0,
                         const ScalarField& r0, double kappa) {
  const Grid& g = eta0.grid();
  const VectorField f = mollify(stokes_residual_field(eta0, v0, r0), kappa);
  OnWalls<BoundaryVector> zero{{Wall::bottom, {Array::Zero(g.n1), Array::Zero(g.n1)}},
                               {Wall::top, {Array::Zero(g.n1), Array::Zero(g.n1)}}};
  StokesSolution s = solve_stokes(eta0k, f, ScalarField(g), zero, {mean_of(v0[0]), mean_of(v0[1])});
  // the least-squares fit leaves a small divergence; remove it with the dynamics' projection
  Simulator sim = inviscid_simulator(eta0k, nullptr, nullptr);
  State st;
  st.eta = eta0k;
  st.v = s.v;
  sim.reproject(st);
  s.v = st.v;
  s.div_residual = sim.divergence(st.eta, st.v, 0.0).max_abs();
  return s;
}

void initial_time_derivatives(InitialDataBundle& b, const VectorField* phi, double delta) {
  Simulator sim = inviscid_simulator(b.eta0, phi, &b.J0);
  auto at = [&](const VectorField& eta, const VectorField& v, double s) {
    Evaluation e = sim.evaluate(eta, v, s);
    return CurvePoint{std::move(e.q), std::move(e.accel)};
  };
  const CurvePoint p0 = at(b.eta0, b.v0, 0.0);
  b.dtv0 = p0.a;
  const double h = delta;
  const double s[4] = {-2 * h, -h, h, 2 * h};
  // first-order curve
  CurvePoint c1[4];
  for (int n = 0; n < 4; ++n) c1[n] = at(b.eta0 + s[n] * b.v0, b.v0 + s[n] * b.dtv0, s[n]);
  auto d1 = [&](const auto& fm2, const auto& fm1, const auto& fp1, const auto& fp2) {
    return (1.0 / (12.0 * h)) * (fm2 - fp2 + 8.0 * (fp1 - fm1));
  };
  b.dt2v0 = d1(c1[0].a, c1[1].a, c1[2].a, c1[3].a);
  b.q1 = d1(c1[0].q, c1[1].q, c1[2].q, c1[3].q);
  // second-order curve
  CurvePoint c2[4];
  for (int n = 0; n < 4; ++n)
    c2[n] = at(b.eta0 + s[n] * b.v0 + (0.5 * s[n] * s[n]) * b.dtv0, b.v0 + s[n] * b.dtv0 + (0.5 * s[n] * s[n]) * b.dt2v0, s[n]);
  auto d2 = [&](const auto& fm2, const auto& fm1, const auto& f0, const auto& fp1, const auto& fp2) {
    return (1.0 / (12.0 * h * h)) * (-1.0 * (fm2 + fp2) + 16.0 * (fm1 + fp1) - 30.0 * f0);
  };
  b.dt3v0 = d2(c2[0].a, c2[1].a, p0.a, c2[2].a, c2[3].a);
  b.q2 = d2(c2[0].q, c2[1].q, p0.q, c2[2].q, c2[3].q);
}

InitialDataBundle make_bundle(const VectorField& eta0, const VectorField& v0) {
  InitialDataBundle b;
  b.eta0 = eta0;
  b.v0 = v0;
  b.J0 = build_kinematics(eta0).J;
  b.q0 = solve_q0(eta0, v0);
  b.r0 = solve_r0(eta0, v0);
  b.r1 = ScalarField(eta0.grid());
  initial_time_derivatives(b);
  b.w1 = b.dtv0;
  b.w1_source = "unsmoothed";
  return b;
}

VectorField forcing_phi(const InitialDataBundle& b) {
  Simulator sim = inviscid_simulator(b.eta0, nullptr, &b.J0);
  const Evaluation e = sim.evaluate(b.eta0, b.v0, 0.0);
  return e.accel - b.w1;
}

ForcingData build_forcing(const InitialDataBundle& b) {
  if (b.w1.c[0].values().size() == 0 || b.dtv0.c[0].values().size() == 0 || b.dt2v0.c[0].values().size() == 0)
    throw std::invalid_argument("build_forcing needs w1 and the time derivatives");
  ForcingData f;
  f.phi = forcing_phi(b);
  KinematicBundle k = build_kinematics(b.eta0);
  k.J = b.J0;
  const TensorField G0 = gradient(b.v0), G1 = gradient(b.dtv0), G2 = gradient(b.dt2v0);
  const TensorField A0 = k.A, A1 = cofactor(G0), A2 = cofactor(G1);
  // jets of P(X, Y, Z) = X Y^T Z
  auto P = [](const TensorField& X, const TensorField& Y, const TensorField& Z) {
    return matmul(matmul(X, transpose(Y)), Z);
  };
  auto jet = [&](const TensorField* X, const TensorField* Y, const TensorField* Z) {
    std::array<TensorField, 3> r;
    r[0] = P(X[0], Y[0], Z[0]);
    r[1] = P(X[1], Y[0], Z[0]) + P(X[0], Y[1], Z[0]) + P(X[0], Y[0], Z[1]);
    r[2] = P(X[2], Y[0], Z[0]) + P(X[0], Y[2], Z[0]) + P(X[0], Y[0], Z[2]) +
           2.0 * (P(X[1], Y[1], Z[0]) + P(X[1], Y[0], Z[1]) + P(X[0], Y[1], Z[1]));
    return r;
  };
  const TensorField G[3] = {G0, G1, G2};
  const TensorField A[3] = {A0, A1, A2};
  const auto a = jet(G, A, A);
  const auto c = jet(A, G, A);
  f.psi0 = stress_cofactor(k, G0);
  f.psi1 = divide(a[1] + c[1], k.J);
  f.psi2 = divide(a[2] + c[2], k.J);
  return f;
}

SmoothInitResult smooth_init(const VectorField& eta_raw, const VectorField& v_raw, double eps,
                             std::optional<double> kappa_opt) {
  const Grid& g = eta_raw.grid();
  const double kappa = kappa_opt ? *kappa_opt : kappa_from_epsilon(eps);
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  SmoothInitResult out;
  InitialDataBundle& b = out.bundle;
  b.kappa = kappa;

  const CompatReport raw = check_compatibility(eta_raw, v_raw);
  // eta
  b.eta0 = smooth_eta0(eta_raw, kappa);
  const KinematicBundle kk = build_kinematics(b.eta0);
  b.J0 = kk.J;
  // v
  const ScalarField r0_raw = solve_r0(eta_raw, v_raw);
  const StokesSolution sv = smooth_v0(b.eta0, eta_raw, v_raw, r0_raw, kappa);
  b.v0 = sv.v;
  b.r0 = sv.r;
  // q0 and dt v(0) of the source data for the w1 problem
  b.q0 = solve_q0(b.eta0, b.v0);
  const bool raw_ok = raw.zcomp_residual <= 1e-6;
  b.w1_source = raw_ok ? "raw" : "smoothed";
  const VectorField& eta_s = raw_ok ? eta_raw : b.eta0;
  const VectorField& v_s = raw_ok ? v_raw : b.v0;
  const ScalarField& r0_s = raw_ok ? r0_raw : b.r0;
  Simulator src = inviscid_simulator(eta_s, nullptr, nullptr);
  const VectorField dtv_s = src.evaluate(eta_s, v_s, 0.0).accel;
  // r1 on the source frame
  const KinematicBundle ks = build_kinematics(eta_s);
  const TensorField Gs = gradient(dtv_s);
  OnWalls<BoundaryField> r1_data;
  for (Wall w : kWalls) {
    const BoundaryVector mv = wall_normal_vector(ks, w);
    const Array len = (mv[0].square() + mv[1].square()).sqrt();
    const BoundaryVector s = stress_times(ks, Gs, mv);
    const BoundaryVector gw = g_datum(ks, v_s, r0_s, w);
    r1_data[w] = BoundaryField{w, ((s[0] / len + gw[0]) * mv[0] + (s[1] / len + gw[1]) * mv[1]) / len, 0.0};
  }
  b.r1 = solve_pressure(make_bvp(divide(ks.E, ks.J), ScalarField(g), r1_data), 1e-13);
  // w1
  const VectorField fw = mollify(stokes_residual_field(eta_s, dtv_s, b.r1), kappa);
  ScalarField dw(g);
  {
    const TensorField M = divide(matmul(gradient(b.v0), transpose(kk.A)), kk.J);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) dw += M(i, j) * M(j, i);
  }
  OnWalls<BoundaryVector> gk;
  for (Wall w : kWalls) gk[w] = g_datum(kk, b.v0, b.r0, w);
  const StokesSolution sw = solve_stokes(b.eta0, fw, dw, gk, {mean_of(dtv_s[0]), mean_of(dtv_s[1])});
  b.w1 = sw.v;
  // phi, time derivatives, Psi
  const VectorField phi = forcing_phi(b);
  initial_time_derivatives(b, &phi);
  out.forcing = build_forcing(b);

  const CompatReport sm = check_compatibility(b.eta0, b.v0);
  double psi_mismatch = 0.0;
  {
    const TensorField psi = out.forcing.psi(0.0);
    const TensorField S = stress_cofactor(kk, gradient(b.v0));
    for (Wall w : kWalls)
      for (int i = 0; i < 2; ++i)
        psi_mismatch = std::max(psi_mismatch, (row_of(psi(i, 1), w) - row_of(S(i, 1), w)).abs().maxCoeff());
  }
  double div_v0 = 0.0;
  {
    Simulator sim = inviscid_simulator(b.eta0, nullptr, &b.J0);
    div_v0 = sim.divergence(b.eta0, b.v0, 0.0).max_abs();
  }
  double jw = 0.0;
  for (Wall w : kWalls) jw = std::max(jw, (row_of(kk.J, w) - 1.0).abs().maxCoeff());
  nlohmann::json& m = out.manifest;
  m["kappa"] = kappa;
  m["epsilon"] = eps;
  m["w1_source"] = b.w1_source;
  m["residuals"] = {
      {"raw_zcomp", raw.zcomp_residual},
      {"raw_comp1", raw.comp1_residual},
      {"raw_comp2", raw.comp2_residual},
      {"zcomp", sm.zcomp_residual},
      {"comp1", sm.comp1_residual},
      {"comp2", sm.comp2_residual},
      {"div_v0", div_v0},
      {"wall_J_minus_one", jw},
      {"v0_traction", sv.traction_residual},
      {"v0_stokes_lsq", sv.lsq_residual},
      {"w1_div", sw.div_residual},
      {"w1_traction", sw.traction_residual},
      {"w1_stokes_lsq", sw.lsq_residual},
      {"psi0_wall_mismatch", psi_mismatch},
      {"dtv0_minus_w1", (b.dtv0 - b.w1).max_abs()},
  };
  m["norms"] = {
      {"phi_l2_sq", std::pow(l2_norm(out.forcing.phi), 2)},
      {"M0_proxy", out.forcing.size_proxy(eps)},
      {"J0_min", b.J0.values().minCoeff()},
      {"eta_change_l2", l2_norm(b.eta0 - eta_raw)},
      {"v_change_l2", l2_norm(b.v0 - v_raw)},
  };
  return out;
}

RawData perturbed_data(const Grid& g, double amplitude, double velocity) {
  RawData d;
  d.eta = identity_map(g);
  d.eta[1] += ScalarField::from_function(g, [=](double x1, double) { return amplitude * std::sin(x1); });
  d.v = VectorField(g);
  constexpr double pi = std::numbers::pi;
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      const double y1 = d.eta[0](i, j), y2 = d.eta[1](i, j);
      // Phi = cos(y1) sin(pi y2), u = (-d2 Phi, d1 Phi)
      d.v[0](i, j) = -velocity * pi * std::cos(y1) * std::cos(pi * y2);
      d.v[1](i, j) = -velocity * std::sin(y1) * std::sin(pi * y2);
    }
  return d;
}

}  // namespace elastica
