#include "elastica/grid_fields.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace elastica {

Grid make_grid(int n1, int n2) {
  if (n1 < 8 || n1 % 2 != 0)
    throw std::invalid_argument("n1 must be even and at least 8, got " + std::to_string(n1));
  if (n2 < 5) throw std::invalid_argument("n2 must be at least 5, got " + std::to_string(n2));
  Grid g;
  g.n1 = n1;
  g.n2 = n2;
  g.h1 = 2.0 * std::numbers::pi / n1;
  g.h2 = 1.0 / (n2 - 1);
  return g;
}

ScalarField::ScalarField(const Grid& g, double value, double seam_jump)
    : grid_(g), v_(Array::Constant(g.size(), value)), jump_(seam_jump) {}

double ScalarField::at(int i, int j) const {
  const int n = grid_.n1;
  int k = 0;
  while (i < 0) { i += n; --k; }
  while (i >= n) { i -= n; ++k; }
  double val = v_[grid_.index(i, j)];
  return k == 0 ? val : val + k * jump_;
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  v_ += o.v_;
  jump_ += o.jump_;
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  v_ -= o.v_;
  jump_ -= o.jump_;
  return *this;
}

ScalarField& ScalarField::operator*=(double a) {
  v_ *= a;
  jump_ *= a;
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

ScalarField operator*(const ScalarField& a, const ScalarField& b) {
  if (a.seam_jump() != 0.0 || b.seam_jump() != 0.0)
    throw std::logic_error("pointwise product of a non-periodic field");
  ScalarField r(a.grid());
  r.values() = a.values() * b.values();
  return r;
}

ScalarField operator/(const ScalarField& a, const ScalarField& b) {
  if (a.seam_jump() != 0.0 || b.seam_jump() != 0.0)
    throw std::logic_error("pointwise quotient of a non-periodic field");
  ScalarField r(a.grid());
  r.values() = a.values() / b.values();
  return r;
}

double VectorField::max_abs() const { return std::max(c[0].max_abs(), c[1].max_abs()); }

VectorField& VectorField::operator+=(const VectorField& o) {
  c[0] += o.c[0];
  c[1] += o.c[1];
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
  c[0] -= o.c[0];
  c[1] -= o.c[1];
  return *this;
}

VectorField& VectorField::operator*=(double a) {
  c[0] *= a;
  c[1] *= a;
  return *this;
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

VectorField identity_map(const Grid& g) {
  return VectorField(ScalarField::from_function(g, [](double x1, double) { return x1; }, 2.0 * std::numbers::pi),
                     ScalarField::from_function(g, [](double, double x2) { return x2; }));
}

double TensorField::max_abs() const {
  double m = 0.0;
  for (const auto& s : c) m = std::max(m, s.max_abs());
  return m;
}

TensorField operator+(const TensorField& a, const TensorField& b) {
  TensorField r = a;
  for (int k = 0; k < 4; ++k) r.c[k] += b.c[k];
  return r;
}

TensorField operator-(const TensorField& a, const TensorField& b) {
  TensorField r = a;
  for (int k = 0; k < 4; ++k) r.c[k] -= b.c[k];
  return r;
}

TensorField operator*(double s, TensorField a) {
  for (auto& x : a.c) x *= s;
  return a;
}

double BoundaryVector::max_abs() const {
  return std::max(c[0].abs().maxCoeff(), c[1].abs().maxCoeff());
}

BoundaryField trace(const ScalarField& f, Wall w) {
  const Grid& g = f.grid();
  BoundaryField b;
  b.wall = w;
  b.seam_jump = f.seam_jump();
  b.v = f.values().segment(g.index(0, wall_row(g, w)), g.n1);
  return b;
}

BoundaryVector trace(const VectorField& f, Wall w) {
  BoundaryVector b;
  b.wall = w;
  b.c[0] = trace(f[0], w).v;
  b.c[1] = trace(f[1], w).v;
  return b;
}

ScalarField diff(const ScalarField& f, int axis) {
  const Grid& g = f.grid();
  ScalarField r(g);
  if (axis == 1) {
    const double s = 1.0 / (2.0 * g.h1);
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) r(i, j) = (f.at(i + 1, j) - f.at(i - 1, j)) * s;
  } else if (axis == 2) {
    const double s = 1.0 / (2.0 * g.h2);
    const int m = g.n2 - 1;
    for (int i = 0; i < g.n1; ++i) {
      r(i, 0) = (-3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2)) * s;
      r(i, m) = (3.0 * f(i, m) - 4.0 * f(i, m - 1) + f(i, m - 2)) * s;
    }
    for (int j = 1; j < m; ++j)
      for (int i = 0; i < g.n1; ++i) r(i, j) = (f(i, j + 1) - f(i, j - 1)) * s;
  } else {
    throw std::invalid_argument("axis must be 1 or 2");
  }
  return r;
}

VectorField diff(const VectorField& f, int axis) { return VectorField(diff(f[0], axis), diff(f[1], axis)); }

TensorField diff(const TensorField& f, int axis) {
  TensorField r;
  for (int k = 0; k < 4; ++k) r.c[k] = diff(f.c[k], axis);
  return r;
}

ScalarField diff(const ScalarField& f, int a1, int a2) {
  ScalarField r = f;
  for (int k = 0; k < a1; ++k) r = diff(r, 1);
  for (int k = 0; k < a2; ++k) r = diff(r, 2);
  return r;
}

ScalarField second_diff(const ScalarField& f, int axis) {
  const Grid& g = f.grid();
  ScalarField r(g);
  if (axis == 1) {
    const double s = 1.0 / (g.h1 * g.h1);
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) r(i, j) = (f.at(i + 1, j) - 2.0 * f(i, j) + f.at(i - 1, j)) * s;
  } else if (axis == 2) {
    const double s = 1.0 / (g.h2 * g.h2);
    const int m = g.n2 - 1;
    for (int i = 0; i < g.n1; ++i) {
      r(i, 0) = (2.0 * f(i, 0) - 5.0 * f(i, 1) + 4.0 * f(i, 2) - f(i, 3)) * s;
      r(i, m) = (2.0 * f(i, m) - 5.0 * f(i, m - 1) + 4.0 * f(i, m - 2) - f(i, m - 3)) * s;
    }
    for (int j = 1; j < m; ++j)
      for (int i = 0; i < g.n1; ++i) r(i, j) = (f(i, j + 1) - 2.0 * f(i, j) + f(i, j - 1)) * s;
  } else {
    throw std::invalid_argument("axis must be 1 or 2");
  }
  return r;
}

TensorField gradient(const VectorField& v) {
  TensorField r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r(i, j) = diff(v[i], j + 1);
  return r;
}

BoundaryField diff(const BoundaryField& f) {
  const int n = static_cast<int>(f.v.size());
  const double h1 = 2.0 * std::numbers::pi / n;
  BoundaryField r;
  r.wall = f.wall;
  r.v.resize(n);
  for (int i = 0; i < n; ++i) {
    double up = i + 1 < n ? f.v[i + 1] : f.v[0] + f.seam_jump;
    double dn = i > 0 ? f.v[i - 1] : f.v[n - 1] - f.seam_jump;
    r.v[i] = (up - dn) / (2.0 * h1);
  }
  return r;
}

namespace {

double bump(double s) { return s < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

int reflect(int j, int n2) {
  const int m = n2 - 1;
  while (j < 0 || j > m) j = j < 0 ? -j : 2 * m - j;
  return j;
}

}  // namespace

ScalarField mollify(const ScalarField& f, double kappa) {
  const Grid& g = f.grid();
  const int A = static_cast<int>(std::ceil(kappa / g.h1)) - 1;
  const int B = static_cast<int>(std::ceil(kappa / g.h2)) - 1;
  if (A <= 0 && B <= 0) return f;
  struct Tap { int a, b; double w; };
  std::vector<Tap> taps;
  double total = 0.0;
  for (int b = -B; b <= B; ++b)
    for (int a = -A; a <= A; ++a) {
      const double w = bump(std::hypot(a * g.h1, b * g.h2) / kappa);
      if (w > 0.0) {
        taps.push_back({a, b, w});
        total += w;
      }
    }
  for (auto& t : taps) t.w /= total;
  ScalarField r(g, 0.0, f.seam_jump());
  for (int j = 0; j < g.n2; ++j)
    for (int i = 0; i < g.n1; ++i) {
      double acc = 0.0;
      for (const auto& t : taps) acc += t.w * f.at(i + t.a, reflect(j + t.b, g.n2));
      r(i, j) = acc;
    }
  return r;
}

VectorField mollify(const VectorField& f, double kappa) {
  return VectorField(mollify(f[0], kappa), mollify(f[1], kappa));
}

BoundaryField mollify(const BoundaryField& f, double kappa, double h1) {
  const int A = static_cast<int>(std::ceil(kappa / h1)) - 1;
  if (A <= 0) return f;
  const int n = static_cast<int>(f.v.size());
  std::vector<double> w(2 * A + 1);
  double total = 0.0;
  for (int a = -A; a <= A; ++a) total += (w[a + A] = bump(std::abs(a) * h1 / kappa));
  BoundaryField r = f;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int a = -A; a <= A; ++a) {
      int k = i + a, shift = 0;
      while (k < 0) { k += n; --shift; }
      while (k >= n) { k -= n; ++shift; }
      acc += w[a + A] / total * (f.v[k] + shift * f.seam_jump);
    }
    r.v[i] = acc;
  }
  return r;
}

double quadrature_weight(const Grid& g, int j) {
  return (j == 0 || j == g.n2 - 1 ? 0.5 : 1.0) * g.h1 * g.h2;
}

double integrate(const ScalarField& f) {
  const Grid& g = f.grid();
  double s = 0.0;
  for (int j = 0; j < g.n2; ++j) s += quadrature_weight(g, j) * f.values().segment(g.index(0, j), g.n1).sum();
  return s;
}

double boundary_integrate(const BoundaryField& f, double h1) { return h1 * f.v.sum(); }

double boundary_integrate(const OnWalls<BoundaryField>& f, double h1) {
  return boundary_integrate(f.bottom, h1) + boundary_integrate(f.top, h1);
}

double l2_norm(const ScalarField& f) {
  ScalarField s(f.grid());
  s.values() = f.values().square();
  return std::sqrt(integrate(s));
}

double l2_norm(const VectorField& f) {
  const double a = l2_norm(f[0]), b = l2_norm(f[1]);
  return std::sqrt(a * a + b * b);
}

double l2_norm(const TensorField& f) {
  double s = 0.0;
  for (const auto& c : f.c) {
    const double n = l2_norm(c);
    s += n * n;
  }
  return std::sqrt(s);
}

void write_snapshot(std::ostream& os, const Grid& g, const std::vector<const ScalarField*>& comps) {
  os << "n1,n2,h1,h2,components\n";
  os << std::setprecision(17) << g.n1 << ',' << g.n2 << ',' << g.h1 << ',' << g.h2 << ',' << comps.size() << '\n';
  for (int k = 0; k < g.size(); ++k) {
    for (std::size_t c = 0; c < comps.size(); ++c) os << (c ? "," : "") << comps[c]->values()[k];
    os << '\n';
  }
}

void write_snapshot(const std::string& path, const VectorField& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_snapshot(os, f.grid(), {&f[0], &f[1]});
}

void write_snapshot(const std::string& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_snapshot(os, f.grid(), {&f});
}

std::vector<ScalarField> read_snapshot(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "n1,n2,h1,h2,components") throw std::runtime_error("snapshot: bad header");
  int n1 = 0, n2 = 0, nc = 0;
  double h1 = 0.0, h2 = 0.0;
  char sep = 0;
  if (!std::getline(is, line)) throw std::runtime_error("snapshot: missing sizes");
  std::istringstream ls(line);
  if (!(ls >> n1 >> sep >> n2 >> sep >> h1 >> sep >> h2 >> sep >> nc) || nc < 1)
    throw std::runtime_error("snapshot: bad size line");
  const Grid g = make_grid(n1, n2);
  std::vector<ScalarField> out(nc, ScalarField(g));
  for (int k = 0; k < g.size(); ++k) {
    if (!std::getline(is, line)) throw std::runtime_error("snapshot: expected " + std::to_string(g.size()) + " rows");
    std::istringstream rs(line);
    for (int c = 0; c < nc; ++c) {
      if (c && !(rs >> sep && sep == ',')) throw std::runtime_error("snapshot: bad row " + std::to_string(k));
      if (!(rs >> out[c].values()[k])) throw std::runtime_error("snapshot: bad row " + std::to_string(k));
    }
  }
  return out;
}

std::vector<ScalarField> read_snapshot(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_snapshot(is);
}

}  // namespace elastica
