#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace elastica {

// Periodic in x1 with period 2*pi, walls at x2 = 0 and x2 = 1.
// Node (i, j) sits at (i*h1, j*h2); storage is row-major with x1 fastest.
struct Grid {
  int n1 = 0;
  int n2 = 0;
  double h1 = 0.0;
  double h2 = 0.0;

  int size() const { return n1 * n2; }
  int index(int i, int j) const { return j * n1 + i; }
  double x1(int i) const { return i * h1; }
  double x2(int j) const { return j * h2; }
  int wrap(int i) const { return ((i % n1) + n1) % n1; }

  bool operator==(const Grid& o) const { return n1 == o.n1 && n2 == o.n2; }
  bool operator!=(const Grid& o) const { return !(*this == o); }
};

// Throws std::invalid_argument for odd n1, n1 < 8 or n2 < 5.
Grid make_grid(int n1, int n2);

using Array = Eigen::ArrayXd;

enum class Wall { bottom = 0, top = 1 };

// Outward normal sign of the reference wall: N = sign * e2.
inline double normal_sign(Wall w) { return w == Wall::top ? 1.0 : -1.0; }
inline int wall_row(const Grid& g, Wall w) { return w == Wall::top ? g.n2 - 1 : 0; }

template <class T>
struct OnWalls {
  T bottom;
  T top;
  T& operator[](Wall w) { return w == Wall::top ? top : bottom; }
  const T& operator[](Wall w) const { return w == Wall::top ? top : bottom; }
};

inline constexpr std::array<Wall, 2> kWalls{Wall::bottom, Wall::top};

// A nodal scalar. seam_jump is f(x1 + 2*pi) - f(x1); it is 2*pi for the first
// component of a deformation and 0 for everything else.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& g, double value = 0.0, double seam_jump = 0.0);

  template <class F>
  static ScalarField from_function(const Grid& g, F&& f, double seam_jump = 0.0) {
    ScalarField s(g, 0.0, seam_jump);
    for (int j = 0; j < g.n2; ++j)
      for (int i = 0; i < g.n1; ++i) s(i, j) = f(g.x1(i), g.x2(j));
    return s;
  }

  const Grid& grid() const { return grid_; }
  double seam_jump() const { return jump_; }
  void set_seam_jump(double j) { jump_ = j; }

  double operator()(int i, int j) const { return v_[grid_.index(i, j)]; }
  double& operator()(int i, int j) { return v_[grid_.index(i, j)]; }
  // Value at (i, j) with i taken modulo n1 and the seam jump applied.
  double at(int i, int j) const;

  Array& values() { return v_; }
  const Array& values() const { return v_; }

  double max_abs() const { return v_.abs().maxCoeff(); }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double a);

 private:
  Grid grid_;
  Array v_;
  double jump_ = 0.0;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);
// Pointwise product and quotient; both operands must be periodic.
ScalarField operator*(const ScalarField& a, const ScalarField& b);
ScalarField operator/(const ScalarField& a, const ScalarField& b);

struct VectorField {
  std::array<ScalarField, 2> c;

  VectorField() = default;
  explicit VectorField(const Grid& g) : c{ScalarField(g), ScalarField(g)} {}
  VectorField(ScalarField a, ScalarField b) : c{std::move(a), std::move(b)} {}

  ScalarField& operator[](int k) { return c[k]; }
  const ScalarField& operator[](int k) const { return c[k]; }
  const Grid& grid() const { return c[0].grid(); }
  double max_abs() const;

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double a);
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);

// The identity deformation x, with seam jump 2*pi on the first component.
VectorField identity_map(const Grid& g);

// Component (a, b), zero based, stored at index 2a + b.
struct TensorField {
  std::array<ScalarField, 4> c;

  TensorField() = default;
  explicit TensorField(const Grid& g) : c{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)} {}

  ScalarField& operator()(int a, int b) { return c[2 * a + b]; }
  const ScalarField& operator()(int a, int b) const { return c[2 * a + b]; }
  const Grid& grid() const { return c[0].grid(); }
  double max_abs() const;
};

TensorField operator+(const TensorField& a, const TensorField& b);
TensorField operator-(const TensorField& a, const TensorField& b);
TensorField operator*(double s, TensorField a);

// Values of a field along one wall (n1 entries).
struct BoundaryField {
  Wall wall = Wall::bottom;
  Array v;
  double seam_jump = 0.0;

  double max_abs() const { return v.size() ? v.abs().maxCoeff() : 0.0; }
};

struct BoundaryVector {
  Wall wall = Wall::bottom;
  std::array<Array, 2> c;

  Array& operator[](int k) { return c[k]; }
  const Array& operator[](int k) const { return c[k]; }
  double max_abs() const;
};

BoundaryField trace(const ScalarField& f, Wall w);
BoundaryVector trace(const VectorField& f, Wall w);

// Centered differences; periodic in x1, one-sided second order at the walls in x2.
ScalarField diff(const ScalarField& f, int axis);
VectorField diff(const VectorField& f, int axis);
TensorField diff(const TensorField& f, int axis);
// D1^a1 D2^a2 applied in that order.
ScalarField diff(const ScalarField& f, int a1, int a2);

// Compact three-point second difference along an axis; one-sided four-point at the walls.
ScalarField second_diff(const ScalarField& f, int axis);

// Gradient of a vector field: (grad v)_{ij} = d_j v_i.
TensorField gradient(const VectorField& v);

// Periodic derivative along a wall.
BoundaryField diff(const BoundaryField& f);

// Bump-kernel mollification with radius kappa: periodic in x1, even reflection
// across the walls. Weights are renormalized on the grid so constants are kept.
// Returns the input unchanged when the kernel covers a single node.
ScalarField mollify(const ScalarField& f, double kappa);
VectorField mollify(const VectorField& f, double kappa);
BoundaryField mollify(const BoundaryField& f, double kappa, double h1);

// Rectangle rule in x1 times trapezoid in x2.
double integrate(const ScalarField& f);
// Sum over both walls of h1 * f.
double boundary_integrate(const OnWalls<BoundaryField>& f, double h1);
double boundary_integrate(const BoundaryField& f, double h1);

// Trapezoid weight of row j times h1*h2.
double quadrature_weight(const Grid& g, int j);

double l2_norm(const ScalarField& f);
double l2_norm(const VectorField& f);
double l2_norm(const TensorField& f);

// Snapshot CSV: a header line "n1,n2,h1,h2,components", its values, then one
// line per node (x1 fastest) with the components separated by commas.
void write_snapshot(std::ostream& os, const Grid& g, const std::vector<const ScalarField*>& comps);
void write_snapshot(const std::string& path, const VectorField& f);
void write_snapshot(const std::string& path, const ScalarField& f);

// Inverse of write_snapshot; seam jumps come back as zero. Throws std::runtime_error
// on a malformed file.
std::vector<ScalarField> read_snapshot(std::istream& is);
std::vector<ScalarField> read_snapshot(const std::string& path);

}  // namespace elastica
