#include "elastica/errors.hpp"
#include "elastica/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace elastica;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("elastica_test_" + name);
  fs::remove_all(p);
  return p;
}

json minimal() { return {{"schema_version", 1}}; }

}  // namespace

TEST(Config, DefaultsParse) {
  const ExperimentConfig c = parse_config(minimal(), "simulate");
  EXPECT_EQ(c.n1, 64);
  EXPECT_EQ(c.sim.reproject_every, 10);
  EXPECT_EQ(c.hash.size(), 16u);
}

TEST(Config, RejectsUnknownKeysAtEveryLevel) {
  json j = minimal();
  j["tolerance"] = 1e-3;
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
  j = minimal();
  j["sim"] = {{"epsilon", 0.1}, {"solver_tolerance", 1e-8}};
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
  j = minimal();
  j["output"] = {{"directory", "x"}};
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
}

TEST(Config, SchemaVersionIsRequired) {
  EXPECT_THROW(parse_config(json::object(), "simulate"), ConfigError);
  EXPECT_THROW(parse_config({{"schema_version", 2}}, "simulate"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  json j = minimal();
  j["sim"] = {{"dt", -1e-3}};
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
  j = minimal();
  j["sim"] = {{"epsilon", "small"}};
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
  j = minimal();
  j["kind"] = "sweep";
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
  j = minimal();
  j["sweep"] = {{"epsilon_list", {1e-2, 1e-1}}};
  EXPECT_THROW(parse_config(j, "sweep"), ConfigError);
  j = minimal();
  j["sim"] = {{"forcing", true}};
  EXPECT_THROW(parse_config(j, "simulate"), ConfigError);
  EXPECT_THROW(parse_config(minimal(), "sweep"), ConfigError);
}

TEST(Config, HashFollowsContent) {
  json a = minimal();
  a["sim"] = {{"epsilon", 0.01}};
  json b = minimal();
  b["sim"] = {{"epsilon", 0.02}};
  const ExperimentConfig ca = parse_config(a, "simulate");
  EXPECT_EQ(ca.hash, parse_config(a, "simulate").hash);
  EXPECT_NE(ca.hash, parse_config(b, "simulate").hash);
  // the canonical dump parses back to the same config
  EXPECT_EQ(parse_config(to_json(ca), "simulate").hash, ca.hash);
}

TEST(Config, InvalidFileLeavesNoOutput) {
  const fs::path dir = scratch_dir("invalid");
  const fs::path cfg = fs::temp_directory_path() / "elastica_invalid.json";
  json j = minimal();
  j["sim"] = {{"dt", -0.1}};
  j["output"] = {{"dir", dir.string()}};
  std::ofstream(cfg) << j.dump();
  EXPECT_THROW(load_config(cfg.string(), "simulate"), ConfigError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Workers, FromEnvironment) {
  setenv("ELASTICA_WORKERS", "3", 1);
  EXPECT_EQ(worker_count(), 3);
  setenv("ELASTICA_WORKERS", "three", 1);
  EXPECT_THROW(worker_count(), ConfigError);
  unsetenv("ELASTICA_WORKERS");
  EXPECT_GE(worker_count(), 1);
}

TEST(RunLog, Columns) {
  EXPECT_EQ(log_header(),
            "t,dt,E_basic,dissipation_integral,J_drift_max,div_residual_max,ghost_residual_max,q_minmax");
  StepRecord r;
  r.q_min = -0.5;
  r.q_max = 0.25;
  const std::string row = log_row(r);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7);
  EXPECT_NE(row.find(",-0.5:0.25"), std::string::npos);
}

TEST(Simulate, EquilibriumKeepsEnergy) {
  const Grid g = make_grid(32, 17);
  const PreparedData d = prepare_initial(g, InitialSpec{});
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_end = 0.2;
  const RunResult r = run_trajectory(g, cfg, d, RunOptions{});
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.steps, 200);
  for (const StepRecord& s : r.records) EXPECT_NEAR(s.E_basic, r.E0, 1e-10);
}

TEST(Simulate, WritesLogWithHash) {
  const fs::path dir = scratch_dir("simulate");
  json j = minimal();
  j["grid"] = {{"n1", 16}, {"n2", 9}};
  j["sim"] = {{"dt", 1e-3}, {"t_end", 0.01}};
  j["initial"] = {{"type", "perturbed"}, {"preparation", "smooth_eta"}, {"kappa", 0.3}};
  j["output"] = {{"dir", dir.string()}, {"log_every", 5}};
  const ExperimentConfig c = parse_config(j, "simulate");
  EXPECT_EQ(run_simulate(c), 0);
  std::ifstream is(dir / "log.csv");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# config_hash=" + c.hash);
  std::getline(is, line);
  EXPECT_EQ(line, log_header());
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);  // steps 0, 5, 10
  EXPECT_TRUE(fs::exists(dir / "eta_final.csv"));
  std::ifstream ss(dir / "summary.json");
  EXPECT_EQ(json::parse(ss)["config_hash"], c.hash);
}

TEST(Simulate, FailureLeavesSnapshot) {
  const fs::path dir = scratch_dir("failure");
  fs::create_directories(dir);
  const Grid g = make_grid(16, 9);
  InitialSpec s;
  s.type = "perturbed";
  s.amplitude = 0.3;
  s.velocity = 2.0;
  const PreparedData d = prepare_initial(g, s);
  SimConfig cfg;
  cfg.dt = 0.5;
  cfg.t_end = 20.0;
  RunOptions opt;
  opt.dir = dir.string();
  const RunResult r = run_trajectory(g, cfg, d, opt);
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_TRUE(fs::exists(dir / "eta_failure.csv"));
}

TEST(Sweep, SlopeOfPowerLaw) {
  EXPECT_NEAR(loglog_slope({1e-1, 1e-2, 1e-3}, {3e-2, 3e-3 * std::sqrt(10.0), 3e-3}), 0.5, 1e-12);
}

TEST(Sweep, SingleEpsilonIsTrivial) {
  const Grid g = make_grid(16, 9);
  const PreparedData d = prepare_initial(g, InitialSpec{});
  SimConfig cfg;
  cfg.t_end = 0.01;
  SweepSpec s;
  s.epsilon_list = {0.01};
  const SweepReport r = sweep(g, cfg, d, s, 1);
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.spread_ratio, 1.0);
  EXPECT_EQ(r.members.size(), 1u);
  EXPECT_EQ(r.members[0].linf_diff, 0.0);
}

TEST(Sweep, ParallelRunsAreReproducible) {
  const Grid g = make_grid(16, 9);
  InitialSpec in;
  in.type = "perturbed";
  in.preparation = "smooth_eta";
  in.kappa = 0.3;
  const PreparedData d = prepare_initial(g, in);
  SimConfig cfg;
  cfg.t_end = 0.02;
  SweepSpec s;
  s.epsilon_list = {1e-1, 1e-2, 1e-3};
  s.sample_every = 2;
  const SweepReport a = sweep(g, cfg, d, s, 3), b = sweep(g, cfg, d, s, 1);
  ASSERT_TRUE(a.ok);
  for (std::size_t k = 0; k < a.members.size(); ++k) {
    EXPECT_EQ(a.members[k].run.sup_E, b.members[k].run.sup_E);
    EXPECT_EQ(a.members[k].linf_diff, b.members[k].linf_diff);
  }
  EXPECT_EQ(a.reference_epsilon, 1e-3);
  EXPECT_GT(a.members[0].linf_diff, 0.0);
  const json j = a.to_json("abc");
  EXPECT_EQ(j["members"].size(), 3u);
  EXPECT_EQ(j["config_hash"], "abc");
}

TEST(Audit, DefaultSeedIsExact) {
  const AuditReport a = audit(0);
  EXPECT_EQ(a.maps, 20);
  EXPECT_LE(a.cofactor_max, 1e-12);
  EXPECT_LE(a.column2_max, 1e-12);
  EXPECT_LE(a.antisym_max, 1e-12);
  EXPECT_LE(a.piola_max_interior, 1e-12);
  EXPECT_LE(a.traction_max, 1e-12);
  EXPECT_TRUE(a.pass());
}

TEST(Audit, EquilibriumIsZero) {
  const Grid g = make_grid(32, 17);
  const AuditReport a = audit_fields(identity_map(g), VectorField(g));
  EXPECT_EQ(a.cofactor_max, 0.0);
  EXPECT_EQ(a.column2_max, 0.0);
  EXPECT_EQ(a.antisym_max, 0.0);
  EXPECT_EQ(a.piola_max_interior, 0.0);
  EXPECT_LE(a.traction_max, 1e-15);
}

TEST(Audit, TransposedCofactorIsCaught) {
  const Grid g = make_grid(32, 17);
  std::mt19937_64 rng(7);
  const KinematicBundle k = build_kinematics(random_map(g, rng));
  EXPECT_LE(cofactor_identity_residual(k.A, k.F, k.J), 1e-12);
  EXPECT_GT(cofactor_identity_residual(transpose(k.A), k.F, k.J), 1e-3);
}

TEST(Mms, DerivativeOperatorsAreSecondOrder) {
  for (const MmsRow& r : mms_table({32, 64, 128}, 0.1)) {
    if (r.order == 0.0) continue;
    EXPECT_GE(r.order, 1.8) << r.problem << " " << r.n;
    EXPECT_LE(r.order, 2.2) << r.problem << " " << r.n;
  }
}

TEST(CheckCompat, EquilibriumSnapshots) {
  const fs::path dir = scratch_dir("compat");
  fs::create_directories(dir);
  const Grid g = make_grid(16, 9);
  write_snapshot((dir / "eta.csv").string(), identity_map(g));
  write_snapshot((dir / "v.csv").string(), VectorField(g));
  std::ostringstream out;
  EXPECT_EQ(run_check_compat((dir / "eta.csv").string(), (dir / "v.csv").string(), out), 0);
  const json j = json::parse(out.str());
  EXPECT_LE(j["zcomp_residual"].get<double>(), 1e-12);
  EXPECT_THROW(run_check_compat((dir / "missing.csv").string(), (dir / "v.csv").string(), out), ConfigError);
}

TEST(SmoothInitTool, WritesBundleAndManifest) {
  const fs::path dir = scratch_dir("smooth");
  json j = minimal();
  j["grid"] = {{"n1", 16}, {"n2", 9}};
  j["initial"] = {{"type", "perturbed"}, {"velocity", 0.1}, {"data_epsilon", 1e-2}};
  j["output"] = {{"dir", dir.string()}};
  const ExperimentConfig c = parse_config(j, "smooth-init");
  EXPECT_EQ(run_smooth_init(c), 0);
  for (const char* f : {"eta0.csv", "v0.csv", "phi.csv", "psi0.csv", "psi2.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream is(dir / "manifest.json");
  const json m = json::parse(is);
  EXPECT_EQ(m["config_hash"], c.hash);
  EXPECT_NEAR(m["kappa"].get<double>(), 1 / std::log(100.0), 1e-15);
  const std::vector<ScalarField> eta = read_snapshot((dir / "eta0.csv").string());
  EXPECT_EQ(eta.size(), 2u);
}
