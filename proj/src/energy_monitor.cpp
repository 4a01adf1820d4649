#include "elastica/energy_monitor.hpp"

#include <cmath>
#include <stdexcept>

namespace elastica {

namespace {

constexpr const char* kAccuracyNote =
    "dt v from the momentum balance; dt^2 v by second-order and dt^3 v by first-order backward differences";

double sq(double x) { return x * x; }

double sobolev_sq(const ScalarField& f, int m) {
  if (m < 0 || m > 3) throw std::invalid_argument("sobolev order must be in 0..3");
  double s = 0.0;
  ScalarField d1 = f;
  for (int a1 = 0; a1 <= m; ++a1) {
    ScalarField d = d1;
    for (int a2 = 0; a1 + a2 <= m; ++a2) {
      s += sq(l2_norm(d));
      if (a1 + a2 < m) d = diff(d, 2);
    }
    if (a1 < m) d1 = diff(d1, 1);
  }
  return s;
}

double sobolev_sq(const VectorField& f, int m) { return sobolev_sq(f[0], m) + sobolev_sq(f[1], m); }

double sobolev_sq(const TensorField& f, int m) {
  double s = 0.0;
  for (const auto& c : f.c) s += sobolev_sq(c, m);
  return s;
}

template <class Field>
Field d1_pow(Field f, int k) {
  for (int n = 0; n < k; ++n) f = diff(f, 1);
  return f;
}

BoundaryField d1_pow(BoundaryField f, int k) {
  for (int n = 0; n < k; ++n) f = diff(f);
  return f;
}

// ||grad^2 u||_m^2 with both mixed derivatives counted
double hessian_sq(const VectorField& u, int m) {
  double s = 0.0;
  for (int c = 0; c < 2; ++c)
    s += sobolev_sq(diff(u[c], 2, 0), m) + 2.0 * sobolev_sq(diff(u[c], 1, 1), m) + sobolev_sq(diff(u[c], 0, 2), m);
  return s;
}

struct Gradients {
  TensorField eta, v, dtv, dt2v, dt3v;
  explicit Gradients(const DerivativeSet& d)
      : eta(gradient(d.eta)), v(gradient(d.v)), dtv(gradient(d.dtv)), dt2v(gradient(d.dt2v)), dt3v(gradient(d.dt3v)) {}
};

void add(EnergyReport& r, std::string name, double value) {
  r.components.emplace_back(std::move(name), value);
  r.E_total += value;
}

const VectorField& time_level(const DerivativeSet& d, int j) {
  switch (j) {
    case 0: return d.eta;
    case 1: return d.v;
    case 2: return d.dtv;
    case 3: return d.dt2v;
    default: return d.dt3v;
  }
}

}  // namespace

double sobolev_norm(const ScalarField& f, int m) { return m == 0 ? l2_norm(f) : std::sqrt(sobolev_sq(f, m)); }
double sobolev_norm(const VectorField& f, int m) { return m == 0 ? l2_norm(f) : std::sqrt(sobolev_sq(f, m)); }
double sobolev_norm(const TensorField& f, int m) { return m == 0 ? l2_norm(f) : std::sqrt(sobolev_sq(f, m)); }

void HistoryRing::push(HistoryEntry e) {
  if (!ring_.empty()) {
    const double last = ring_.back().t;
    if (!(e.t > last)) throw std::invalid_argument("history times must increase");
    if (ring_.size() >= 2) {
      const double h = last - ring_[ring_.size() - 2].t;
      if (std::abs((e.t - last) - h) > 1e-12 * std::abs(h)) ring_.erase(ring_.begin(), ring_.end() - 1);
    }
  }
  ring_.push_back(std::move(e));
  while (ring_.size() > cap_) ring_.pop_front();
}

const HistoryEntry& HistoryRing::back(std::size_t k) const {
  if (k >= ring_.size()) throw std::logic_error("history too short");
  return ring_[ring_.size() - 1 - k];
}

double HistoryRing::dt() const {
  if (ring_.size() < 2) throw std::logic_error("history too short");
  return back(0).t - back(1).t;
}

VectorField backward_difference(const VectorField& f0, const VectorField& f1, const VectorField& f2, double dt,
                                int order) {
  if (order == 1) return (1.0 / (2.0 * dt)) * (3.0 * f0 - 4.0 * f1 + f2);
  if (order == 2) return (1.0 / (dt * dt)) * (f0 - 2.0 * f1 + f2);
  throw std::invalid_argument("backward difference order must be 1 or 2");
}

VectorField time_derivatives(const HistoryRing& h, int k) {
  if (k < 1 || k > 3) throw std::invalid_argument("time derivative order must be in 1..3");
  if (k == 1) return h.back().accel;
  if (h.size() < 3) throw std::logic_error("history too short for dt^" + std::to_string(k) + " v");
  return backward_difference(h.back(0).accel, h.back(1).accel, h.back(2).accel, h.dt(), k - 1);
}

DerivativeSet derivatives_from_history(const HistoryRing& h) {
  DerivativeSet d;
  d.eta = h.back().eta;
  d.v = h.back().v;
  d.dtv = time_derivatives(h, 1);
  d.dt2v = time_derivatives(h, 2);
  d.dt3v = time_derivatives(h, 3);
  return d;
}

double EnergyReport::component(const std::string& name) const {
  for (const auto& [k, v] : components)
    if (k == name) return v;
  for (const auto& [k, v] : boundary_A2)
    if (k == name) return v;
  throw std::out_of_range("no energy component " + name);
}

nlohmann::json EnergyReport::to_json() const {
  nlohmann::json j;
  j["t"] = t;
  j["E_total"] = E_total;
  nlohmann::json c = nlohmann::json::object(), b = nlohmann::json::object();
  for (const auto& [k, v] : components) c[k] = v;
  for (const auto& [k, v] : boundary_A2) b[k] = v;
  j["components"] = c;
  j["boundary_A2"] = b;
  j["note"] = note;
  return j;
}

double boundary_term(const DerivativeSet& d, int j, bool normal_A2) {
  const VectorField& u = time_level(d, j);
  const Grid& g = u.grid();
  double s = 0.0;
  for (Wall w : kWalls) {
    const BoundaryVector t = wall_tangent(d.eta, w);
    const Array len = (t[0].square() + t[1].square()).sqrt();
    // A_.2 = d1 eta_perp; n carries the outward orientation
    const double sign = normal_A2 ? 1.0 : normal_sign(w);
    const Array n1 = -sign * t[1] / len, n2 = sign * t[0] / len;
    const Array a = d1_pow(trace(u[0], w), 4 - j).v, b = d1_pow(trace(u[1], w), 4 - j).v;
    s += g.h1 * (a * n1 + b * n2).square().sum();
  }
  return s;
}

EnergyReport energy_E(const DerivativeSet& d, double t) {
  EnergyReport r;
  r.t = t;
  r.note = kAccuracyNote;
  const Gradients G(d);
  const TensorField* gs[4] = {&G.eta, &G.v, &G.dtv, &G.dt2v};
  const VectorField* vs[4] = {&d.v, &d.dtv, &d.dt2v, &d.dt3v};
  for (int j = 0; j <= 3; ++j) {
    const std::string J = std::to_string(j), m = std::to_string(3 - j), p = std::to_string(4 - j);
    add(r, "dt" + J + "_grad_eta_H" + m, sobolev_sq(*gs[j], 3 - j));
    add(r, "dt" + J + "_v_H" + m, sobolev_sq(*vs[j], 3 - j));
    add(r, "wall_dt" + J + "_d1^" + p + "_eta_n", boundary_term(d, j));
    r.boundary_A2.emplace_back("wall_dt" + J + "_d1^" + p + "_eta_A2", boundary_term(d, j, true));
  }
  return r;
}

EnergyReport energy_E(const HistoryRing& h) { return energy_E(derivatives_from_history(h), h.back().t); }

EpsIntegrands eps_integrands(const DerivativeSet& d, double eps) {
  const Gradients G(d);
  EpsIntegrands g;
  g.grad_eta_X3 = xm_norm_sq<TensorField>({&G.eta, &G.v, &G.dtv, &G.dt2v}, 3);
  if (eps != 0.0) {
    g.eps_grad_v_X3 = eps * eps * xm_norm_sq<TensorField>({&G.v, &G.dtv, &G.dt2v, &G.dt3v}, 3);
    g.eps_dbar2_d1_grad_v =
        eps * (sq(l2_norm(d1_pow(G.v, 3))) + sq(l2_norm(d1_pow(G.dtv, 2))) + sq(l2_norm(d1_pow(G.dt2v, 1))));
  }
  g.dt3v_sq = sq(l2_norm(d.dt3v));
  g.dt3_grad_eta_sq = sq(l2_norm(G.dt2v));
  g.d1_dt3eta_n_sq = boundary_term(d, 3);
  g.d1_dt3eta_A2_sq = boundary_term(d, 3, true);
  g.dt3_grad_v_sq = sq(l2_norm(G.dt3v));
  return g;
}

void RunningIntegrals::accumulate(const EpsIntegrands& g, double dt) {
  grad_eta_X3 += dt * g.grad_eta_X3;
  eps_grad_v_X3 += dt * g.eps_grad_v_X3;
  eps_dbar2_d1_grad_v += dt * g.eps_dbar2_d1_grad_v;
  quartic_dt3v += dt * sq(g.dt3v_sq);
  quartic_dt3_grad_eta += dt * sq(g.dt3_grad_eta_sq);
  quartic_d1_dt3eta_n += dt * sq(g.d1_dt3eta_n_sq);
  quartic_d1_dt3eta_A2 += dt * sq(g.d1_dt3eta_A2_sq);
  quartic_eps2_inner += dt * eps * eps * sq(inner);
  inner += dt * g.dt3_grad_v_sq;
}

EnergyReport energy_E_eps(const DerivativeSet& d, double eps, const RunningIntegrals& I, double t) {
  EnergyReport r;
  r.t = t;
  r.note = kAccuracyNote;
  add(r, "int_grad_eta_X3", I.grad_eta_X3);
  add(r, "int_eps_grad_v_X3", I.eps_grad_v_X3);
  add(r, "int_eps_dbar2_d1_grad_v", I.eps_dbar2_d1_grad_v);

  const VectorField e3 = d1_pow(d.eta, 3), v2 = d1_pow(d.v, 2), a1 = d1_pow(d.dtv, 1);
  const double x1 = sobolev_sq(e3, 1) + sq(l2_norm(d1_pow(d.v, 3))) + sobolev_sq(v2, 1) + sq(l2_norm(d1_pow(d.dtv, 2))) + sobolev_sq(a1, 1) +
                    sq(l2_norm(d1_pow(d.dt2v, 1)));
  add(r, "dbar2_d1_eta_X1", x1);
  add(r, "wall_d1^2_dbar2_eta_n", boundary_term(d, 0) + boundary_term(d, 1) + boundary_term(d, 2));
  r.boundary_A2.emplace_back("wall_d1^2_dbar2_eta_A2",
                             boundary_term(d, 0, true) + boundary_term(d, 1, true) + boundary_term(d, 2, true));
  add(r, "eta_X3", xm_norm_sq<VectorField>({&d.eta, &d.v, &d.dtv, &d.dt2v}, 3));
  add(r, "eps_grad2_eta_X2",
      eps != 0.0 ? eps * (hessian_sq(d.eta, 2) + hessian_sq(d.v, 1) + hessian_sq(d.dtv, 0)) : 0.0);

  add(r, "int_dt3v_0^4", I.quartic_dt3v);
  add(r, "int_dt3_grad_eta_0^4", I.quartic_dt3_grad_eta);
  add(r, "int_wall_d1_dt3_eta_n^4", I.quartic_d1_dt3eta_n);
  r.boundary_A2.emplace_back("int_wall_d1_dt3_eta_A2^4", I.quartic_d1_dt3eta_A2);
  add(r, "int_eps2_inner_dt3_grad_v^2", I.quartic_eps2_inner);
  return r;
}

EnergyReport energy_E_eps(const HistoryRing& h, double eps, const RunningIntegrals& I) {
  return energy_E_eps(derivatives_from_history(h), eps, I, h.back().t);
}

BasicEnergy basic_energy(const VectorField& eta, const VectorField& v, const KinematicBundle& k) {
  BasicEnergy e;
  e.kinetic = 0.5 * sq(l2_norm(v));
  e.elastic = 0.5 * sq(l2_norm(k.F));
  const Grid& g = eta.grid();
  for (Wall w : kWalls) {
    const BoundaryVector t = wall_tangent(eta, w);
    e.surface += g.h1 * (t[0].square() + t[1].square()).sqrt().sum();
  }
  return e;
}

double dissipation_rate(const VectorField& v, const KinematicBundle& k, double eps) {
  if (eps == 0.0) return 0.0;
  const TensorField S = strain_eta(v, k);
  ScalarField s(v.grid());
  for (const auto& c : S.c) s.values() += c.values().square();
  s.values() *= k.J.values();
  return 2.0 * eps * integrate(s);
}

}  // namespace elastica
