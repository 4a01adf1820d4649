#include "elastica/harness.hpp"

#include "elastica/errors.hpp"
#include "elastica/kinematics.hpp"
#include "elastica/pressure_solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

namespace elastica {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_tensor(const std::string& path, const TensorField& T) {
  std::ofstream os(path);
  write_snapshot(os, T.c[0].grid(), {&T.c[0], &T.c[1], &T.c[2], &T.c[3]});
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
}

VectorField read_vector(const std::string& path, const Grid* g, bool deformation) {
  std::vector<ScalarField> c;
  try {
    c = read_snapshot(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  if (c.size() != 2) throw ConfigError(path + ": expected 2 components");
  if (g && (c[0].grid().n1 != g->n1 || c[0].grid().n2 != g->n2)) throw ConfigError(path + ": grid size mismatch");
  if (deformation) c[0].set_seam_jump(2 * kPi);
  return VectorField(c[0], c[1]);
}

}  // namespace

// ---- configuration

nlohmann::json to_json(const ExperimentConfig& c) {
  const SimConfig& s = c.sim;
  json init = {{"type", c.initial.type},
               {"amplitude", c.initial.amplitude},
               {"velocity", c.initial.velocity},
               {"eta_file", c.initial.eta_file},
               {"v_file", c.initial.v_file},
               {"preparation", c.initial.preparation},
               {"data_epsilon", c.initial.data_epsilon}};
  init["kappa"] = c.initial.kappa ? json(*c.initial.kappa) : json(nullptr);
  return {{"schema_version", c.schema_version},
          {"kind", c.kind},
          {"grid", {{"n1", c.n1}, {"n2", c.n2}}},
          {"sim",
           {{"epsilon", s.epsilon},
            {"sigma", s.sigma},
            {"dt", s.dt},
            {"t_end", s.t_end},
            {"cfl_elastic", s.cfl_elastic},
            {"cfl_visc", s.cfl_visc},
            {"cfl_st", s.cfl_st},
            {"reproject_every", s.reproject_every},
            {"reproject_tol", s.reproject_tol},
            {"solver_tol", s.solver_tol},
            {"forcing", s.forcing},
            {"arclen_floor", s.arclen_floor}}},
          {"initial", init},
          {"output",
           {{"dir", c.output.dir},
            {"log_every", c.output.log_every},
            {"snapshot_every", c.output.snapshot_every},
            {"energy_every", c.output.energy_every},
            {"high_order_energy", c.output.high_order_energy}}},
          {"sweep",
           {{"epsilon_list", c.sweep.epsilon_list},
            {"reference", c.sweep.reference},
            {"sample_every", c.sweep.sample_every}}},
          {"mms", {{"grids", c.mms.grids}, {"amplitude", c.mms.amplitude}}},
          {"seed", c.seed}};
}

std::string config_hash(const nlohmann::json& canonical) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const json& j, const std::string& kind) {
  ExperimentConfig c;
  only_keys(j, {"schema_version", "kind", "grid", "sim", "initial", "output", "sweep", "mms", "seed"}, "config");
  require(j.contains("schema_version"), "config: missing schema_version");
  read(j, "schema_version", c.schema_version, "config");
  require(c.schema_version == kSchemaVersion,
          "config: unsupported schema_version " + std::to_string(c.schema_version));
  c.kind = kind;
  if (j.contains("kind")) {
    std::string k;
    read(j, "kind", k, "config");
    require(k == kind, "config: kind '" + k + "' does not match subcommand '" + kind + "'");
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    only_keys(g, {"n1", "n2"}, "grid");
    read(g, "n1", c.n1, "grid");
    read(g, "n2", c.n2, "grid");
  }
  require(c.n1 >= 8 && c.n1 % 2 == 0, "grid.n1 must be even and >= 8");
  require(c.n2 >= 5, "grid.n2 must be >= 5");

  SimConfig& s = c.sim;
  if (j.contains("sim")) {
    const json& m = j["sim"];
    only_keys(m, {"epsilon", "sigma", "dt", "t_end", "cfl_elastic", "cfl_visc", "cfl_st", "reproject_every",
                  "reproject_tol", "solver_tol", "forcing", "arclen_floor"},
              "sim");
    read(m, "epsilon", s.epsilon, "sim");
    read(m, "sigma", s.sigma, "sim");
    read(m, "dt", s.dt, "sim");
    read(m, "t_end", s.t_end, "sim");
    read(m, "cfl_elastic", s.cfl_elastic, "sim");
    read(m, "cfl_visc", s.cfl_visc, "sim");
    read(m, "cfl_st", s.cfl_st, "sim");
    read(m, "reproject_every", s.reproject_every, "sim");
    read(m, "reproject_tol", s.reproject_tol, "sim");
    read(m, "solver_tol", s.solver_tol, "sim");
    read(m, "forcing", s.forcing, "sim");
    read(m, "arclen_floor", s.arclen_floor, "sim");
  }
  require(std::isfinite(s.epsilon) && s.epsilon >= 0, "sim.epsilon must be >= 0");
  require(s.sigma == 1.0, "sim.sigma: only 1 is supported");
  require(std::isfinite(s.dt) && s.dt >= 0, "sim.dt must be >= 0 (0 selects the stability limit)");
  require(std::isfinite(s.t_end) && s.t_end > 0, "sim.t_end must be > 0");
  require(s.cfl_elastic > 0 && s.cfl_visc > 0 && s.cfl_st > 0, "sim: CFL factors must be > 0");
  require(s.reproject_every >= 0, "sim.reproject_every must be >= 0");
  require(s.reproject_tol > 0 && s.solver_tol > 0, "sim: tolerances must be > 0");
  require(s.arclen_floor > 0 && s.arclen_floor < 1, "sim.arclen_floor must lie in (0, 1)");

  InitialSpec& in = c.initial;
  if (j.contains("initial")) {
    const json& m = j["initial"];
    only_keys(m, {"type", "amplitude", "velocity", "eta_file", "v_file", "preparation", "kappa", "data_epsilon"},
              "initial");
    read(m, "type", in.type, "initial");
    read(m, "amplitude", in.amplitude, "initial");
    read(m, "velocity", in.velocity, "initial");
    read(m, "eta_file", in.eta_file, "initial");
    read(m, "v_file", in.v_file, "initial");
    read(m, "preparation", in.preparation, "initial");
    read(m, "data_epsilon", in.data_epsilon, "initial");
    if (m.contains("kappa") && !m["kappa"].is_null()) {
      double k = 0.0;
      read(m, "kappa", k, "initial");
      in.kappa = k;
    }
  }
  require(in.type == "equilibrium" || in.type == "perturbed" || in.type == "files",
          "initial.type must be equilibrium, perturbed or files");
  require(in.preparation == "raw" || in.preparation == "smooth_eta" || in.preparation == "smooth_init",
          "initial.preparation must be raw, smooth_eta or smooth_init");
  if (in.type == "files") require(!in.eta_file.empty() && !in.v_file.empty(), "initial: eta_file and v_file needed");
  require(std::abs(in.amplitude) < 0.5, "initial.amplitude must be below 0.5 in magnitude");
  require(!in.kappa || (*in.kappa > 0 && *in.kappa < 1), "initial.kappa must lie in (0, 1)");
  require(in.data_epsilon > 0 && in.data_epsilon < 1, "initial.data_epsilon must lie in (0, 1)");
  require(!s.forcing || in.preparation == "smooth_init", "sim.forcing needs initial.preparation = smooth_init");

  OutputSpec& o = c.output;
  if (j.contains("output")) {
    const json& m = j["output"];
    only_keys(m, {"dir", "log_every", "snapshot_every", "energy_every", "high_order_energy"}, "output");
    read(m, "dir", o.dir, "output");
    read(m, "log_every", o.log_every, "output");
    read(m, "snapshot_every", o.snapshot_every, "output");
    read(m, "energy_every", o.energy_every, "output");
    read(m, "high_order_energy", o.high_order_energy, "output");
  }
  require(!o.dir.empty(), "output.dir must not be empty");
  require(o.log_every >= 1 && o.snapshot_every >= 0 && o.energy_every >= 0, "output: cadences must be >= 0");

  SweepSpec& w = c.sweep;
  if (j.contains("sweep")) {
    const json& m = j["sweep"];
    only_keys(m, {"epsilon_list", "reference", "sample_every"}, "sweep");
    read(m, "epsilon_list", w.epsilon_list, "sweep");
    read(m, "reference", w.reference, "sweep");
    read(m, "sample_every", w.sample_every, "sweep");
  }
  require(w.reference == "smallest" || w.reference == "inviscid", "sweep.reference must be smallest or inviscid");
  require(w.sample_every >= 1, "sweep.sample_every must be >= 1");
  for (std::size_t k = 0; k < w.epsilon_list.size(); ++k) {
    require(w.epsilon_list[k] > 0, "sweep.epsilon_list entries must be positive");
    if (k) require(w.epsilon_list[k] < w.epsilon_list[k - 1], "sweep.epsilon_list must be strictly decreasing");
  }
  if (kind == "sweep") require(!w.epsilon_list.empty(), "sweep.epsilon_list is empty");

  MmsSpec& mm = c.mms;
  if (j.contains("mms")) {
    const json& m = j["mms"];
    only_keys(m, {"grids", "amplitude"}, "mms");
    read(m, "grids", mm.grids, "mms");
    read(m, "amplitude", mm.amplitude, "mms");
  }
  if (kind == "mms") require(mm.grids.size() >= 3, "mms.grids needs at least 3 grids");
  for (std::size_t k = 0; k < mm.grids.size(); ++k) {
    require(mm.grids[k] >= 8 && mm.grids[k] % 2 == 0, "mms.grids entries must be even and >= 8");
    if (k) require(mm.grids[k] > mm.grids[k - 1], "mms.grids must be increasing");
  }
  require(std::abs(mm.amplitude) < 0.5, "mms.amplitude must be below 0.5 in magnitude");

  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned() || (j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0),
            "seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.hash = config_hash(to_json(c));
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::string& kind) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j, kind);
}

int worker_count() {
  if (const char* s = std::getenv("ELASTICA_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(s, &end, 10);
    if (end == s || *end != '\0' || n < 1 || n > 4096) throw ConfigError("ELASTICA_WORKERS must be a positive integer");
    return static_cast<int>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---- initial data

PreparedData prepare_initial(const Grid& g, const InitialSpec& s) {
  VectorField eta, v;
  if (s.type == "equilibrium") {
    eta = identity_map(g);
    v = VectorField(g);
  } else if (s.type == "perturbed") {
    RawData d = perturbed_data(g, s.amplitude, s.velocity);
    eta = std::move(d.eta);
    v = std::move(d.v);
  } else {
    eta = read_vector(s.eta_file, &g, true);
    v = read_vector(s.v_file, &g, false);
  }
  PreparedData p;
  p.manifest = {{"preparation", s.preparation}};
  if (s.preparation == "smooth_init") {
    SmoothInitResult r = smooth_init(eta, v, s.data_epsilon, s.kappa);
    p.eta0 = std::move(r.bundle.eta0);
    p.v0 = std::move(r.bundle.v0);
    p.J0 = std::move(r.bundle.J0);
    p.forcing = std::move(r.forcing);
    p.manifest["smooth_init"] = r.manifest;
    return p;
  }
  if (s.preparation == "smooth_eta") {
    const double kappa = s.kappa ? *s.kappa : kappa_from_epsilon(s.data_epsilon);
    eta = smooth_eta0(eta, kappa);
    p.manifest["kappa"] = kappa;
  }
  p.J0 = build_kinematics(eta).J;
  if (p.J0.values().minCoeff() <= 0) throw DegenerateMap("initial map has det <= 0");
  p.eta0 = std::move(eta);
  p.v0 = std::move(v);
  p.manifest["zcomp"] = zcomp_residual(p.eta0);
  return p;
}

// ---- single runs

std::string log_header() {
  return "t,dt,E_basic,dissipation_integral,J_drift_max,div_residual_max,ghost_residual_max,q_minmax";
}

std::string log_row(const StepRecord& r) {
  return fmt(r.t) + "," + fmt(r.dt) + "," + fmt(r.E_basic) + "," + fmt(r.dissipation_integral) + "," +
         fmt(r.J_drift_max) + "," + fmt(r.div_residual_max) + "," + fmt(r.ghost_residual_max) + "," + fmt(r.q_min) +
         ":" + fmt(r.q_max);
}

namespace {

struct Diagnostics {
  double E_basic, rate, J_drift, div, ghost;
};

Diagnostics diagnose(const Simulator& sim, const State& s) {
  const WallClosure c = sim.ghost_closure(s.eta, s.v, s.t);
  const KinematicBundle k = build_kinematics(s.eta, &c.d2eta);
  Diagnostics d;
  d.E_basic = basic_energy(s.eta, s.v, k).total();
  d.rate = dissipation_rate(s.v, k, sim.config().epsilon);
  d.J_drift = ((k.J.values() - s.J0.values()) / s.J0.values()).abs().maxCoeff();
  d.div = sim.divergence(s.eta, s.v, s.t).max_abs();
  d.ghost = zcomp_residual(s.eta);
  return d;
}

void snapshot_state(const std::string& dir, const std::string& tag, const State& s) {
  write_snapshot(dir + "/eta_" + tag + ".csv", s.eta);
  write_snapshot(dir + "/v_" + tag + ".csv", s.v);
  write_snapshot(dir + "/q_" + tag + ".csv", s.q);
}

}  // namespace

RunResult run_trajectory(const Grid& g, const SimConfig& cfg, const PreparedData& data, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  Simulator sim(g, cfg, data.J0, cfg.forcing ? data.forcing : std::nullopt);
  State s{0.0, data.eta0, data.v0, ScalarField(g), data.J0};
  r.dt = cfg.dt > 0 ? cfg.dt : sim.auto_dt(s);
  const int n_steps = std::max(1, static_cast<int>(std::ceil(cfg.t_end / r.dt - 1e-9)));
  r.dt = cfg.t_end / n_steps;

  std::ofstream energy_log;
  if (!opt.dir.empty() && opt.energy_every > 0) {
    energy_log.open(opt.dir + "/energy_reports.jsonl");
  }
  const Diagnostics d0 = diagnose(sim, s);
  r.E0 = d0.E_basic;
  StepRecord rec{0.0, r.dt, d0.E_basic, 0.0, d0.J_drift, d0.div, d0.ghost, 0.0, 0.0};
  double rate = d0.rate;
  r.max_J_drift = d0.J_drift;
  r.max_div = d0.div;
  r.max_ghost = d0.ghost;
  r.max_v = s.v.max_abs();
  r.records.push_back(rec);
  if (opt.sample_every > 0) {
    r.sample_t.push_back(0.0);
    r.samples.push_back(s.eta);
  }

  HistoryRing hist;
  RunningIntegrals I;
  I.eps = cfg.epsilon;
  auto report = [&](double t) {
    if (hist.size() < 3) return;
    const DerivativeSet ds = derivatives_from_history(hist);
    r.last_report = opt.high_order ? energy_E_eps(ds, cfg.epsilon, I, t) : energy_E(ds, t);
    r.sup_E = std::max(r.sup_E, r.last_report.E_total);
    if (energy_log.is_open()) {
      json j = r.last_report.to_json();
      j["config_hash"] = opt.hash;
      energy_log << j.dump() << "\n";
    }
  };

  for (int n = 0; n < n_steps; ++n) {
    const State old = s;
    try {
      const Evaluation ev = sim.step(s, r.dt);
      if (cfg.reproject_every > 0 && (n + 1) % cfg.reproject_every == 0) sim.reproject(s);
      // the record at the start of the step gets that step's pressure
      r.records.back().q_min = ev.q.values().minCoeff();
      r.records.back().q_max = ev.q.values().maxCoeff();
      hist.push({old.t, old.eta, old.v, ev.accel});
      if (hist.size() >= 3 && opt.high_order) I.accumulate(eps_integrands(derivatives_from_history(hist), cfg.epsilon), r.dt);
      if (opt.energy_every > 0 && n % opt.energy_every == 0) report(old.t);

      s.q = ev.q;
      const Diagnostics d = diagnose(sim, s);
      rec.t = s.t;
      rec.E_basic = d.E_basic;
      rec.dissipation_integral += 0.5 * r.dt * (rate + d.rate);
      rate = d.rate;
      rec.J_drift_max = d.J_drift;
      rec.div_residual_max = d.div;
      rec.ghost_residual_max = d.ghost;
      r.records.push_back(rec);
      if (!std::isfinite(d.E_basic)) throw NumericalError("non-finite energy at t = " + std::to_string(s.t));
    } catch (const NumericalError& e) {
      r.ok = false;
      r.failure = e.what();
      r.final = old;
      if (!opt.dir.empty()) snapshot_state(opt.dir, "failure", old);
      break;
    }
    r.steps = n + 1;
    r.max_energy_drift =
        std::max(r.max_energy_drift, std::abs(rec.E_basic + rec.dissipation_integral - r.E0) / r.E0);
    r.max_J_drift = std::max(r.max_J_drift, rec.J_drift_max);
    r.max_div = std::max(r.max_div, rec.div_residual_max);
    r.max_ghost = std::max(r.max_ghost, rec.ghost_residual_max);
    r.max_v = std::max(r.max_v, s.v.max_abs());
    if (opt.sample_every > 0 && (r.steps % opt.sample_every == 0 || r.steps == n_steps)) {
      r.sample_t.push_back(s.t);
      r.samples.push_back(s.eta);
    }
    if (!opt.dir.empty() && opt.snapshot_every > 0 && r.steps % opt.snapshot_every == 0)
      snapshot_state(opt.dir, std::to_string(r.steps), s);
  }
  if (r.ok) {
    r.final = s;
    // closing evaluation so the last state enters the history
    try {
      const Evaluation ev = sim.evaluate(s.eta, s.v, s.t);
      hist.push({s.t, s.eta, s.v, ev.accel});
      r.records.back().q_min = ev.q.values().minCoeff();
      r.records.back().q_max = ev.q.values().maxCoeff();
      report(s.t);
    } catch (const NumericalError& e) {
      r.ok = false;
      r.failure = e.what();
    }
  }
  r.t = r.final.t;
  r.runtime_s = seconds_since(t0);
  return r;
}

int run_simulate(const ExperimentConfig& c) {
  const Grid g = make_grid(c.n1, c.n2);
  make_dir(c.output.dir);
  PreparedData data = prepare_initial(g, c.initial);
  RunOptions opt;
  opt.high_order = c.output.high_order_energy;
  opt.energy_every = c.output.energy_every;
  opt.log_every = c.output.log_every;
  opt.snapshot_every = c.output.snapshot_every;
  opt.dir = c.output.dir;
  opt.hash = c.hash;
  const RunResult r = run_trajectory(g, c.sim, data, opt);

  std::ofstream log(c.output.dir + "/log.csv");
  log << "# config_hash=" << c.hash << "\n" << log_header() << "\n";
  for (std::size_t k = 0; k < r.records.size(); ++k)
    if (k % c.output.log_every == 0 || k + 1 == r.records.size()) log << log_row(r.records[k]) << "\n";
  if (r.ok) snapshot_state(c.output.dir, "final", r.final);

  json rep = r.last_report.to_json();
  rep["config_hash"] = c.hash;
  write_json(c.output.dir + "/energy_final.json", rep);
  json sum = {{"config_hash", c.hash},
              {"ok", r.ok},
              {"failure", r.failure},
              {"steps", r.steps},
              {"t", r.t},
              {"dt", r.dt},
              {"E0", r.E0},
              {"max_energy_drift", r.max_energy_drift},
              {"max_J_drift", r.max_J_drift},
              {"max_div_residual", r.max_div},
              {"max_ghost_residual", r.max_ghost},
              {"max_v", r.max_v},
              {"sup_E", r.sup_E},
              {"runtime_s", r.runtime_s},
              {"initial", data.manifest}};
  write_json(c.output.dir + "/summary.json", sum);
  if (!r.ok) {
    std::fprintf(stderr, "simulate: %s\n", r.failure.c_str());
    return 1;
  }
  return 0;
}

// ---- sweeps

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::log(x[k]) - mx;
    sxy += a * (std::log(y[k]) - my);
    sxx += a * a;
  }
  return sxy / sxx;
}

SweepReport sweep(const Grid& g, const SimConfig& base, const PreparedData& data, const SweepSpec& s, int workers) {
  SweepReport rep;
  SimConfig cfg = base;
  if (cfg.dt <= 0) {
    SimConfig probe = base;
    probe.epsilon = s.epsilon_list.front();
    const Simulator sim(g, probe, data.J0, base.forcing ? data.forcing : std::nullopt);
    const State st{0.0, data.eta0, data.v0, ScalarField(g), data.J0};
    cfg.dt = sim.auto_dt(st);
  }
  const int n = std::max(1, static_cast<int>(std::ceil(cfg.t_end / cfg.dt - 1e-9)));
  cfg.dt = cfg.t_end / n;
  rep.dt = cfg.dt;

  std::vector<double> eps = s.epsilon_list;
  const bool inviscid = s.reference == "inviscid";
  if (inviscid) eps.push_back(0.0);
  rep.members.resize(eps.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < eps.size(); k = next++) {
      SimConfig mc = cfg;
      mc.epsilon = eps[k];
      if (eps[k] == 0.0) mc.forcing = false;
      RunOptions opt;
      opt.high_order = true;
      opt.energy_every = 10;
      opt.sample_every = s.sample_every;
      rep.members[k].epsilon = eps[k];
      rep.members[k].run = run_trajectory(g, mc, data, opt);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min<int>(workers, eps.size()); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  const SweepMember& ref = rep.members.back();
  rep.reference_epsilon = ref.epsilon;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::vector<double> xe, yd;
  for (SweepMember& m : rep.members) {
    if (!m.run.ok) rep.ok = false;
    if (m.epsilon > 0 || !inviscid) {
      lo = std::min(lo, m.run.sup_E);
      hi = std::max(hi, m.run.sup_E);
    }
    if (&m == &ref || !m.run.ok || !ref.run.ok) continue;
    const std::size_t ns = std::min(m.run.samples.size(), ref.run.samples.size());
    for (std::size_t k = 0; k < ns; ++k) m.linf_diff = std::max(m.linf_diff, l2_norm(m.run.samples[k] - ref.run.samples[k]));
    m.final_diff = l2_norm(m.run.final.eta - ref.run.final.eta);
    xe.push_back(m.epsilon);
    yd.push_back(m.linf_diff);
  }
  rep.spread_ratio = hi > 0 ? hi / lo : 1.0;
  rep.monotone = rep.ok;
  for (std::size_t k = 1; k < yd.size(); ++k)
    if (!(yd[k] < yd[k - 1])) rep.monotone = false;
  rep.slope = loglog_slope(xe, yd);
  // samples are only needed for the differences
  for (SweepMember& m : rep.members) {
    m.run.samples.clear();
    m.run.records.clear();
  }
  return rep;
}

nlohmann::json SweepReport::to_json(const std::string& hash) const {
  json mem = json::array();
  for (const SweepMember& m : members) {
    json c;
    for (const auto& [name, value] : m.run.last_report.components) c[name] = value;
    mem.push_back({{"epsilon", m.epsilon},
                   {"ok", m.run.ok},
                   {"failure", m.run.failure},
                   {"sup_E", m.run.sup_E},
                   {"final_eta_diff_l2", m.final_diff},
                   {"linf_t_eta_diff_l2", m.linf_diff},
                   {"runtime_s", m.run.runtime_s},
                   {"steps", m.run.steps},
                   {"final_components", c}});
  }
  return {{"config_hash", hash},
          {"schema_version", kSchemaVersion},
          {"ok", ok},
          {"dt", dt},
          {"reference_epsilon", reference_epsilon},
          {"members", mem},
          {"spread_ratio", spread_ratio},
          {"monotone_decreasing", monotone},
          {"convergence_slope", slope},
          {"note", members.empty() ? "" : members.front().run.last_report.note}};
}

int run_sweep(const ExperimentConfig& c) {
  const int workers = worker_count();
  const Grid g = make_grid(c.n1, c.n2);
  make_dir(c.output.dir);
  const PreparedData data = prepare_initial(g, c.initial);
  SweepReport rep = sweep(g, c.sim, data, c.sweep, workers);
  json j = rep.to_json(c.hash);
  j["t_end"] = c.sim.t_end;
  j["grid"] = {{"n1", c.n1}, {"n2", c.n2}};
  j["initial"] = data.manifest;
  write_json(c.output.dir + "/sweep.json", j);
  std::ofstream csv(c.output.dir + "/sweep.csv");
  csv << "# config_hash=" << c.hash << "\n";
  csv << "epsilon,sup_E,final_eta_diff_l2,linf_t_eta_diff_l2,runtime_s,ok\n";
  for (const SweepMember& m : rep.members)
    csv << fmt(m.epsilon) << "," << fmt(m.run.sup_E) << "," << fmt(m.final_diff) << "," << fmt(m.linf_diff) << ","
        << fmt(m.run.runtime_s) << "," << (m.run.ok ? 1 : 0) << "\n";
  if (!rep.ok) {
    for (const SweepMember& m : rep.members)
      if (!m.run.ok) std::fprintf(stderr, "sweep: epsilon %g failed: %s\n", m.epsilon, m.run.failure.c_str());
    return 1;
  }
  return 0;
}

// ---- manufactured solutions

double pressure_mms_error(int n, double a) {
  const Grid g = make_grid(n, n / 2 + 1);
  VectorField eta = identity_map(g);
  eta[1] += ScalarField::from_function(g, [=](double x1, double) { return a * std::sin(x1); });
  const KinematicBundle k = build_kinematics(eta);
  // -Div(E grad q) for q = x2 (1 - x2) cos x1
  const ScalarField src = ScalarField::from_function(g, [=](double x1, double x2) {
    const double c = a * std::cos(x1), cp = -a * std::sin(x1);
    const double q11 = -x2 * (1 - x2) * std::cos(x1), q2 = (1 - 2 * x2) * std::cos(x1);
    const double q12 = -(1 - 2 * x2) * std::sin(x1), q22 = -2 * std::cos(x1);
    return -(q11 - cp * q2 - 2 * c * q12 + (1 + c * c) * q22);
  });
  OnWalls<BoundaryField> zero{{Wall::bottom, Array::Zero(g.n1), 0.0}, {Wall::top, Array::Zero(g.n1), 0.0}};
  const ScalarField q = solve_pressure(make_bvp(k.E, src, zero));
  return l2_norm(q - ScalarField::from_function(g, [](double x1, double x2) { return x2 * (1 - x2) * std::cos(x1); }));
}

std::vector<MmsRow> mms_table(const std::vector<int>& grids, double amplitude) {
  auto f = [](double x1, double x2) { return std::sin(2 * x1) * std::exp(x2); };
  struct Problem {
    std::string name;
    std::function<double(int)> error;
    std::string norm = "max";
  };
  // p1, p2 derivative counts; second = compact second difference
  auto op_error = [&](int p1, int p2, bool second) {
    return [=](int n) {
      const Grid g = make_grid(n, n / 2 + 1);
      const ScalarField u = ScalarField::from_function(g, f);
      const ScalarField d = second ? second_diff(u, p1 ? 1 : 2) : diff(u, p1, p2);
      const ScalarField exact = ScalarField::from_function(g, [=](double x1, double x2) {
        const double s = p1 == 0 ? std::sin(2 * x1) : p1 == 1 ? 2 * std::cos(2 * x1) : -4 * std::sin(2 * x1);
        return s * std::exp(x2);
      });
      return (d - exact).max_abs();
    };
  };
  std::vector<Problem> problems{
      {"pressure_constant", [](int n) { return pressure_mms_error(n, 0.0); }, "l2"},
      {"pressure_variable", [=](int n) { return pressure_mms_error(n, amplitude); }, "l2"},
      {"d1", op_error(1, 0, false)},
      {"d2", op_error(0, 1, false)},
      {"d12", op_error(1, 1, false)},
      {"d11_compact", op_error(2, 0, true)},
      {"d22_compact", op_error(0, 2, true)},
  };
  std::vector<MmsRow> rows;
  for (const Problem& p : problems) {
    double prev = 0.0;
    for (std::size_t k = 0; k < grids.size(); ++k) {
      MmsRow r{p.name, p.norm, grids[k], p.error(grids[k]), 0.0};
      if (k) r.order = std::log(prev / r.error) / std::log(static_cast<double>(grids[k]) / grids[k - 1]);
      prev = r.error;
      rows.push_back(r);
    }
  }
  return rows;
}

int run_mms(const ExperimentConfig& c) {
  make_dir(c.output.dir);
  const std::vector<MmsRow> rows = mms_table(c.mms.grids, c.mms.amplitude);
  std::ofstream csv(c.output.dir + "/mms.csv");
  csv << "# config_hash=" << c.hash << "\n" << "problem,norm,n,error,order\n";
  bool ok = true;
  for (const MmsRow& r : rows) {
    csv << r.problem << "," << r.norm << "," << r.n << "," << fmt(r.error) << "," << fmt(r.order) << "\n";
    if (r.order != 0.0 && (r.order < 1.8 || r.order > 2.2)) {
      ok = false;
      std::fprintf(stderr, "mms: %s order %.3f at n = %d\n", r.problem.c_str(), r.order, r.n);
    }
  }
  return ok ? 0 : 1;
}

// ---- identity audit

VectorField random_map(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-0.05, 0.05);
  const double a = U(rng), b = U(rng), c = U(rng), d = U(rng), e = U(rng);
  VectorField eta = identity_map(g);
  eta[0] += ScalarField::from_function(g, [=](double x1, double x2) {
    return a * std::sin(x1 + 2 * x2) + b * std::cos(2 * x1) * x2 * x2;
  });
  eta[1] += ScalarField::from_function(g, [=](double x1, double x2) {
    return c * std::cos(x1) * std::sin(3 * x2) + d * std::sin(3 * x1) + e * x2 * x2 * x2;
  });
  return eta;
}

VectorField random_velocity(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-0.1, 0.1);
  const double a = U(rng), b = U(rng), c = U(rng);
  VectorField v(g);
  v[0] = ScalarField::from_function(g, [=](double x1, double x2) { return a * std::cos(x1) * x2 + c; });
  v[1] = ScalarField::from_function(g, [=](double x1, double x2) { return b * std::sin(2 * x1) * (1 + x2); });
  return v;
}

double cofactor_identity_residual(const TensorField& A, const TensorField& F, const ScalarField& J) {
  double r = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      Array s = A(i, 0).values() * F(k, 0).values() + A(i, 1).values() * F(k, 1).values();
      if (i == k) s -= J.values();
      r = std::max(r, s.abs().maxCoeff());
    }
  return r;
}

bool AuditReport::pass(double tol) const {
  return piola_max_interior <= tol && cofactor_max <= tol && column2_max <= tol && antisym_max <= tol &&
         traction_max <= tol;
}

nlohmann::json AuditReport::to_json() const {
  return {{"maps", maps},
          {"piola_max_interior", piola_max_interior},
          {"piola_max_wall", piola_max_wall},
          {"cofactor_max", cofactor_max},
          {"column2_max", column2_max},
          {"antisym_max", antisym_max},
          {"traction_identity_max", traction_max},
          {"compat", {{"zcomp_max", zcomp_max}, {"comp1_max", comp1_max}}},
          {"pass", pass()}};
}

AuditReport audit_fields(const VectorField& eta, const VectorField& v) {
  const Grid& g = eta.grid();
  AuditReport a;
  a.maps = 1;
  const IdentityAudit ia = audit_identities(eta);
  const KinematicBundle k = build_kinematics(eta);
  a.cofactor_max = cofactor_identity_residual(k.A, k.F, k.J);
  a.column2_max = ia.column2;
  a.antisym_max = ia.antisymmetry;
  a.piola_max_interior = ia.piola_interior;
  a.piola_max_wall = ia.piola_wall;
  // the closure makes the wall data compatible with the traction identity
  SimConfig cfg;
  cfg.epsilon = 0.01;
  const Simulator sim(g, cfg, k.J);
  const WallClosure c = sim.ghost_closure(eta, v, 0.0);
  const KinematicBundle kc = sim.closed_bundle(eta, c);
  const OnWalls<BoundaryVector> tr = traction_identity_residual(eta, v, kc, nullptr, cfg.epsilon);
  for (Wall w : kWalls) a.traction_max = std::max(a.traction_max, tr[w].max_abs());
  const CompatReport cr = check_compatibility(smooth_eta0(eta, 0.2), v);
  a.zcomp_max = cr.zcomp_residual;
  a.comp1_max = cr.comp1_residual;
  return a;
}

AuditReport audit(std::uint64_t seed, int maps, int n1, int n2) {
  const Grid g = make_grid(n1, n2);
  std::mt19937_64 rng(seed);
  AuditReport total;
  for (int m = 0; m < maps; ++m) {
    const VectorField eta = random_map(g, rng);
    const VectorField v = random_velocity(g, rng);
    const AuditReport a = audit_fields(eta, v);
    total.piola_max_interior = std::max(total.piola_max_interior, a.piola_max_interior);
    total.piola_max_wall = std::max(total.piola_max_wall, a.piola_max_wall);
    total.cofactor_max = std::max(total.cofactor_max, a.cofactor_max);
    total.column2_max = std::max(total.column2_max, a.column2_max);
    total.antisym_max = std::max(total.antisym_max, a.antisym_max);
    total.traction_max = std::max(total.traction_max, a.traction_max);
    total.zcomp_max = std::max(total.zcomp_max, a.zcomp_max);
    total.comp1_max = std::max(total.comp1_max, a.comp1_max);
    ++total.maps;
  }
  return total;
}

int run_audit(std::uint64_t seed, const std::string& out_dir) {
  const AuditReport a = audit(seed);
  json j = a.to_json();
  j["seed"] = seed;
  j["schema_version"] = kSchemaVersion;
  j["config_hash"] = config_hash({{"kind", "audit"}, {"seed", seed}});
  if (!out_dir.empty()) {
    make_dir(out_dir);
    write_json(out_dir + "/audit.json", j);
  }
  std::printf("%s\n", j.dump(2).c_str());
  return a.pass() ? 0 : 1;
}

// ---- initial data tools

int run_smooth_init(const ExperimentConfig& c) {
  const Grid g = make_grid(c.n1, c.n2);
  make_dir(c.output.dir);
  InitialSpec s = c.initial;
  s.preparation = "raw";
  const PreparedData raw = prepare_initial(g, s);
  SmoothInitResult r = smooth_init(raw.eta0, raw.v0, c.initial.data_epsilon, c.initial.kappa);
  const std::string& d = c.output.dir;
  const InitialDataBundle& b = r.bundle;
  write_snapshot(d + "/eta0.csv", b.eta0);
  write_snapshot(d + "/v0.csv", b.v0);
  write_snapshot(d + "/q0.csv", b.q0);
  write_snapshot(d + "/J0.csv", b.J0);
  write_snapshot(d + "/dtv0.csv", b.dtv0);
  write_snapshot(d + "/dt2v0.csv", b.dt2v0);
  write_snapshot(d + "/dt3v0.csv", b.dt3v0);
  write_snapshot(d + "/phi.csv", r.forcing.phi);
  write_tensor(d + "/psi0.csv", r.forcing.psi0);
  write_tensor(d + "/psi1.csv", r.forcing.psi1);
  write_tensor(d + "/psi2.csv", r.forcing.psi2);
  r.manifest["config_hash"] = c.hash;
  write_json(d + "/manifest.json", r.manifest);
  return 0;
}

int run_check_compat(const std::string& eta_file, const std::string& v_file, std::ostream& out) {
  const VectorField eta = read_vector(eta_file, nullptr, true);
  const VectorField v = read_vector(v_file, &eta.grid(), false);
  const CompatReport r = check_compatibility(eta, v);
  json j = {{"zcomp_residual", r.zcomp_residual},
            {"comp1_residual", r.comp1_residual},
            {"comp2_residual", r.comp2_residual},
            {"config_hash", config_hash({{"kind", "check-compat"}, {"eta", eta_file}, {"v", v_file}})}};
  out << j.dump(2) << "\n";
  return 0;
}

}  // namespace elastica
