#pragma once

#include "elastica/grid_fields.hpp"
#include "elastica/kinematics.hpp"

#include <json.hpp>

#include <deque>
#include <string>
#include <utility>
#include <vector>

namespace elastica {

// sqrt of the sum over |alpha| <= m of the integral of |D^alpha f|^2.
// m = 0 returns l2_norm exactly.
double sobolev_norm(const ScalarField& f, int m);
double sobolev_norm(const VectorField& f, int m);
double sobolev_norm(const TensorField& f, int m);

// sum over l <= m of ||dt^l u||_{m-l}^2; derivs[l] is dt^l u.
template <class Field>
double xm_norm_sq(const std::vector<const Field*>& derivs, int m) {
  double s = 0.0;
  for (int l = 0; l <= m && l < static_cast<int>(derivs.size()); ++l) {
    const double n = sobolev_norm(*derivs[l], m - l);
    s += n * n;
  }
  return s;
}

// One stored time level. accel is dt v from the momentum balance.
struct HistoryEntry {
  double t = 0.0;
  VectorField eta;
  VectorField v;
  VectorField accel;
};

// The most recent states, newest last. Pushes must be strictly increasing in t
// and uniformly spaced (1e-12 relative); a non-uniform push clears the older entries.
class HistoryRing {
 public:
  explicit HistoryRing(std::size_t capacity = 5) : cap_(capacity) {}

  void push(HistoryEntry e);
  void clear() { ring_.clear(); }
  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return cap_; }
  // back(0) is the newest entry.
  const HistoryEntry& back(std::size_t k = 0) const;
  double dt() const;

 private:
  std::size_t cap_;
  std::deque<HistoryEntry> ring_;
};

// Backward differences at the newest of three equally spaced samples f0 (newest), f1, f2:
// order 1 is the second-order BDF, order 2 the first-order second difference.
VectorField backward_difference(const VectorField& f0, const VectorField& f1, const VectorField& f2, double dt,
                                int order);

// dt^k v at the newest entry: k = 1 the stored acceleration, k = 2 and 3 backward
// differences of the accelerations (three entries needed). Throws std::logic_error
// when the history is too short.
VectorField time_derivatives(const HistoryRing& h, int k);

// eta and its time derivatives dt eta = v, ..., dt^4 eta = dt^3 v at one time.
struct DerivativeSet {
  VectorField eta, v, dtv, dt2v, dt3v;
};

DerivativeSet derivatives_from_history(const HistoryRing& h);

struct EnergyReport {
  double t = 0.0;
  double E_total = 0.0;
  std::vector<std::pair<std::string, double>> components;
  // Boundary terms with A_.2 / |A_.2| in place of n; not part of E_total.
  std::vector<std::pair<std::string, double>> boundary_A2;
  std::string note;

  double component(const std::string& name) const;
  nlohmann::json to_json() const;
};

// |dt^j d1^(4-j) eta . n|^2 on both walls, j = 0..3, with n from the current frame.
// normal_A2 selects A_.2 / |A_.2| instead.
double boundary_term(const DerivativeSet& d, int j, bool normal_A2 = false);

EnergyReport energy_E(const DerivativeSet& d, double t = 0.0);
EnergyReport energy_E(const HistoryRing& h);

// Integrands of the time integrals of the viscous functional at one time.
struct EpsIntegrands {
  double grad_eta_X3 = 0.0;
  double eps_grad_v_X3 = 0.0;
  double eps_dbar2_d1_grad_v = 0.0;
  double dt3v_sq = 0.0;
  double dt3_grad_eta_sq = 0.0;
  double d1_dt3eta_n_sq = 0.0;
  double d1_dt3eta_A2_sq = 0.0;
  double dt3_grad_v_sq = 0.0;  // ||dt^3 grad v||_0^2, the inner integrand
};

EpsIntegrands eps_integrands(const DerivativeSet& d, double eps);

// Rectangle-rule accumulators, advanced once per step with the step size.
struct RunningIntegrals {
  double grad_eta_X3 = 0.0;
  double eps_grad_v_X3 = 0.0;
  double eps_dbar2_d1_grad_v = 0.0;
  double quartic_dt3v = 0.0;
  double quartic_dt3_grad_eta = 0.0;
  double quartic_d1_dt3eta_n = 0.0;
  double quartic_d1_dt3eta_A2 = 0.0;
  double quartic_eps2_inner = 0.0;
  double inner = 0.0;  // int_0^t ||dt^3 grad v||_0^2
  double eps = 0.0;

  void accumulate(const EpsIntegrands& g, double dt);
};

EnergyReport energy_E_eps(const DerivativeSet& d, double eps, const RunningIntegrals& I, double t = 0.0);
EnergyReport energy_E_eps(const HistoryRing& h, double eps, const RunningIntegrals& I);

// 1/2 ||v||^2 + 1/2 ||F||^2 + int_Gamma |d1 eta|, with F from the bundle.
struct BasicEnergy {
  double kinetic = 0.0;
  double elastic = 0.0;
  double surface = 0.0;
  double total() const { return kinetic + elastic + surface; }
};

BasicEnergy basic_energy(const VectorField& eta, const VectorField& v, const KinematicBundle& k);

// 2 eps int J |S_eta(v)|^2
double dissipation_rate(const VectorField& v, const KinematicBundle& k, double eps);

}  // namespace elastica
