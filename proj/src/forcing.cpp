#include "elastica/forcing.hpp"

namespace elastica {

TensorField ForcingData::psi(double t) const {
  TensorField r = psi0;
  for (int k = 0; k < 4; ++k) r.c[k].values() += t * psi1.c[k].values() + (0.5 * t * t) * psi2.c[k].values();
  return r;
}

VectorField ForcingData::div_psi(double t) const {
  const TensorField p = psi(t);
  VectorField r;
  for (int i = 0; i < 2; ++i) r[i] = diff(p(i, 0), 1) + diff(p(i, 1), 2);
  return r;
}

double ForcingData::size_proxy(double eps) const {
  double s = l2_norm(phi);
  s *= s;
  for (int a = 1; a <= 2; ++a) {
    const double n = l2_norm(diff(psi0, a));
    s += eps * n * n;
  }
  return s;
}

ForcingData zero_forcing(const Grid& g) {
  ForcingData f;
  f.phi = VectorField(g);
  f.psi0 = f.psi1 = f.psi2 = TensorField(g);
  return f;
}

}  // namespace elastica
