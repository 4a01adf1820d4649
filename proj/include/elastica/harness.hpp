#pragma once

#include "elastica/dynamics.hpp"
#include "elastica/energy_monitor.hpp"
#include "elastica/forcing.hpp"
#include "elastica/grid_fields.hpp"
#include "elastica/initial_data.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace elastica {

inline constexpr int kSchemaVersion = 1;

struct InitialSpec {
  std::string type = "equilibrium";  // equilibrium | perturbed | files
  double amplitude = 0.05;
  double velocity = 0.0;
  std::string eta_file, v_file;
  std::string preparation = "raw";  // raw | smooth_eta | smooth_init
  std::optional<double> kappa;
  double data_epsilon = 1e-4;  // epsilon handed to smooth_init
};

struct OutputSpec {
  std::string dir = "out";
  int log_every = 1;
  int snapshot_every = 0;  // 0: final snapshot only
  int energy_every = 0;    // EnergyReport cadence in steps, 0: final only
  bool high_order_energy = false;
};

struct SweepSpec {
  std::vector<double> epsilon_list;
  std::string reference = "smallest";  // smallest | inviscid
  int sample_every = 5;
};

struct MmsSpec {
  std::vector<int> grids{32, 64, 128};
  double amplitude = 0.1;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string kind;
  int n1 = 64, n2 = 33;
  SimConfig sim;
  InitialSpec initial;
  OutputSpec output;
  SweepSpec sweep;
  MmsSpec mms;
  std::uint64_t seed = 0;
  std::string hash;  // FNV-1a of the canonical dump, hex
};

// Throws ConfigError on a wrong schema version, unknown keys, bad values or a
// kind that does not match the requested one (when present).
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& kind);
ExperimentConfig load_config(const std::string& path, const std::string& kind);
nlohmann::json to_json(const ExperimentConfig& c);
std::string config_hash(const nlohmann::json& canonical);

// From ELASTICA_WORKERS, default the hardware concurrency.
int worker_count();

struct PreparedData {
  VectorField eta0, v0;
  ScalarField J0;
  std::optional<ForcingData> forcing;
  nlohmann::json manifest;
};

PreparedData prepare_initial(const Grid& g, const InitialSpec& s);

// Per-step diagnostics, the columns of the run log.
struct StepRecord {
  double t = 0.0, dt = 0.0;
  double E_basic = 0.0;
  double dissipation_integral = 0.0;
  double J_drift_max = 0.0;
  double div_residual_max = 0.0;
  double ghost_residual_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
};

std::string log_header();
std::string log_row(const StepRecord& r);

struct RunOptions {
  bool high_order = false;
  int energy_every = 0;
  int sample_every = 0;  // eta samples for sweep comparisons, 0: none
  int log_every = 1;
  int snapshot_every = 0;
  std::string dir;   // empty: no files
  std::string hash;
};

struct RunResult {
  bool ok = true;
  std::string failure;
  int steps = 0;
  double t = 0.0, dt = 0.0;
  double E0 = 0.0;
  double max_energy_drift = 0.0;  // |E_basic + dissipation - E0| / E0
  double max_J_drift = 0.0;
  double max_div = 0.0;
  double max_ghost = 0.0;
  double max_v = 0.0;  // max over steps of |v|_inf
  double sup_E = 0.0;  // sup of the high-order functional over evaluations
  EnergyReport last_report;
  std::vector<StepRecord> records;  // every step
  std::vector<double> sample_t;
  std::vector<VectorField> samples;
  State final;
  double runtime_s = 0.0;
};

// Runs to cfg.t_end with dt = cfg.dt, or auto_dt when cfg.dt is 0.
// Numerical failures are caught and reported in the result.
RunResult run_trajectory(const Grid& g, const SimConfig& cfg, const PreparedData& data, const RunOptions& opt);

// The CLI operations; each returns the process exit code.
int run_simulate(const ExperimentConfig& c);
int run_sweep(const ExperimentConfig& c);
int run_mms(const ExperimentConfig& c);
int run_audit(std::uint64_t seed, const std::string& out_dir);
int run_smooth_init(const ExperimentConfig& c);
int run_check_compat(const std::string& eta_file, const std::string& v_file, std::ostream& out);

struct SweepMember {
  double epsilon = 0.0;
  RunResult run;
  double final_diff = 0.0;  // ||eta - eta_ref||_L2 at T
  double linf_diff = 0.0;   // max over samples
};

struct SweepReport {
  double reference_epsilon = 0.0;
  double dt = 0.0;
  std::vector<SweepMember> members;
  double spread_ratio = 0.0;
  bool monotone = false;
  double slope = 0.0;
  bool ok = true;
  nlohmann::json to_json(const std::string& hash) const;
};

SweepReport sweep(const Grid& g, const SimConfig& base, const PreparedData& data, const SweepSpec& s,
                  int workers);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Random smooth maps and velocities for the identity audit.
VectorField random_map(const Grid& g, std::mt19937_64& rng);
VectorField random_velocity(const Grid& g, std::mt19937_64& rng);

// max |A_ij F_kj - J delta_ik|
double cofactor_identity_residual(const TensorField& A, const TensorField& F, const ScalarField& J);

struct AuditReport {
  double piola_max_interior = 0.0;
  double piola_max_wall = 0.0;
  double cofactor_max = 0.0;
  double column2_max = 0.0;
  double antisym_max = 0.0;
  double traction_max = 0.0;
  double zcomp_max = 0.0;  // smoothed maps
  double comp1_max = 0.0;
  int maps = 0;
  bool pass(double tol = 1e-10) const;
  nlohmann::json to_json() const;
};

AuditReport audit(std::uint64_t seed, int maps = 20, int n1 = 32, int n2 = 17);
AuditReport audit_fields(const VectorField& eta, const VectorField& v);

// Pressure MMS: q = x2 (1 - x2) cos x1 on eta = (x1, x2 + a sin x1).
double pressure_mms_error(int n, double a);

struct MmsRow {
  std::string problem;
  std::string norm;  // l2 or max
  int n = 0;
  double error = 0.0;
  double order = 0.0;  // against the previous grid, 0 on the first
};

std::vector<MmsRow> mms_table(const std::vector<int>& grids, double amplitude);

}  // namespace elastica
