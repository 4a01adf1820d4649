#pragma once

#include "elastica/grid_fields.hpp"

namespace elastica {

// f = phi + eps * div Psi(t) with Psi(t) = psi0 + psi1 t + psi2 t^2 / 2.
struct ForcingData {
  VectorField phi;
  TensorField psi0, psi1, psi2;

  TensorField psi(double t) const;
  // div Psi(t), (div Psi)_i = d_j Psi_ij
  VectorField div_psi(double t) const;
  // |phi|^2 + eps |grad Psi(0)|^2
  double size_proxy(double eps) const;
};

// Zero forcing on a grid.
ForcingData zero_forcing(const Grid& g);

}  // namespace elastica
