#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdboot/bootstrap.hpp"
#include "sgdboot/config.hpp"
#include "sgdboot/linearization.hpp"
#include "sgdboot/model.hpp"
#include "sgdboot/schedule.hpp"
#include "sgdboot/table.hpp"

namespace sgdboot {

enum class Experiment {
  LowerBoundScan,
  SigmaScan,
  Coverage,
  CltSanity,
  RateFit,
  MomentCheck,
  ConcentrationCheck,
  IdentityCheck,
};

const char* to_string(Experiment e);

struct RunContext {
  std::uint64_t seed = 42;
  int threads = 0;  // <= 0: OpenMP default
  bool log = false; // one line per grid cell on stderr
};

struct ExperimentSummary {
  std::string experiment;
  bool pass = false;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json headline = nlohmann::json::object();
};

nlohmann::json to_json(const ExperimentSummary& s);

struct ExperimentResult {
  ResultTable table;
  ExperimentSummary summary;
};

struct ScheduleSetup {
  double c0 = 0.5;
  double k0 = 1.0;
  double gamma = 0.75;

  StepSchedule make() const { return StepSchedule(c0, k0, gamma); }

  template <class V>
  void visit(V& v) {
    v("schedule.c0", c0);
    v("schedule.k0", k0);
    v("schedule.gamma", gamma);
  }
};

// Vectors of length 1 broadcast to the problem dimension.
struct ProblemSetup {
  std::string kind = "quadratic";  // quadratic | scalar | logistic
  std::vector<double> a_diag{1.0, 0.5};
  std::vector<double> theta_star;  // empty: zero (quadratic only)
  std::vector<double> theta0_offset{1.0};
  double beta_radius = 1.0;
  std::string noise = "truncated";  // truncated | gaussian | zero | logistic
  std::vector<double> noise_var{1.0};
  double noise_l2 = 0.3;
  double noise_c2 = 1.0;
  long estimation_draws = 1L << 20;
  int logistic_dim = 2;
  long logistic_samples = 200;
  double logistic_ridge = 0.1;
  double logistic_scale = 1.0;

  template <class V>
  void visit(V& v) {
    v("problem.kind", kind);
    v("problem.a_diag", a_diag);
    v("problem.theta_star", theta_star);
    v("problem.theta0_offset", theta0_offset);
    v("problem.beta_radius", beta_radius);
    v("noise.kind", noise);
    v("noise.var", noise_var);
    v("noise.l2", noise_l2);
    v("noise.c2", noise_c2);
    v("noise.estimation_draws", estimation_draws);
    v("logistic.dim", logistic_dim);
    v("logistic.samples", logistic_samples);
    v("logistic.ridge", logistic_ridge);
    v("logistic.scale", logistic_scale);
  }
};

ProblemSetup scalar_gaussian_setup(double theta0_offset = 0.0);

struct BuiltProblem {
  ProblemSpec problem;
  NoiseOracle noise;
  VectorXd theta0;
};

// Estimation and design streams derive from `seed`.
BuiltProblem build_problem(const ProblemSetup& setup, std::uint64_t seed);

struct WeightSetup {
  double alpha = 0.5;
  double beta = 2.0;

  template <class V>
  void visit(V& v) {
    v("weights.alpha", alpha);
    v("weights.beta", beta);
  }
};

// ---- lower_bound_scan -------------------------------------------------------

struct LowerBoundConfig {
  std::vector<double> gamma_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  long n_min = 1L << 10;
  long n_max = 1L << 22;
  double c0 = 1.0;
  double k0 = 1.0;
  double rel_tol = 0.1;
  double gamma_max_checked = 0.8;

  template <class V>
  void visit(V& v) {
    v("run.gamma_grid", gamma_grid);
    v("run.n_min", n_min);
    v("run.n_max", n_max);
    v("schedule.c0", c0);
    v("schedule.k0", k0);
    v("check.rel_tol", rel_tol);
    v("check.gamma_max", gamma_max_checked);
  }
};

// Columns gamma, n, sigma2, statistic = n^{1-gamma} |sigma2 - 1|. Pass: statistic > 0 everywhere and, for
// gamma <= gamma_max_checked, relative change between the two largest n below rel_tol.
ExperimentResult lower_bound_scan(const LowerBoundConfig& cfg, const RunContext& ctx = {});

// ---- sigma_scan ---------------------------------------------------------------

struct SigmaScanConfig {
  ProblemSetup problem = scalar_gaussian_setup();
  std::vector<double> gamma_grid{0.6, 0.7, 0.8};
  long n_min = 1L << 8;
  long n_max = 1L << 16;
  double c0 = 0.5;
  double k0 = 1.0;

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    v("run.gamma_grid", gamma_grid);
    v("run.n_min", n_min);
    v("run.n_max", n_max);
    v("schedule.c0", c0);
    v("schedule.k0", k0);
  }
};

// Columns gamma, n, frob_norm, spectral_norm, scaled = spectral_norm n^{1-gamma}, bound = C'_infty,
// validated. Pass: scaled <= bound on every validated row.
ExperimentResult sigma_scan(const SigmaScanConfig& cfg, const RunContext& ctx = {});

// ---- coverage_study -----------------------------------------------------------

struct CoverageConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  WeightSetup weights;
  long n = 4096;
  long m = 400;
  long replications = 2000;
  std::vector<double> levels{0.9};
  double band = 0.03;

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    weights.visit(v);
    v("run.n", n);
    v("run.m", m);
    v("run.replications", replications);
    v("run.levels", levels);
    v("check.band", band);
  }
};

// Columns replication, level, ball_radius, ball_covered, box_covered, status (0 ok, 1 diverged).
// Pass: NormBall coverage within level +- band at every level, and coverage nondecreasing in level.
ExperimentResult coverage_study(const CoverageConfig& cfg, const RunContext& ctx = {});

// ---- clt_sanity ---------------------------------------------------------------

struct CltConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  std::vector<long> n_grid{4096};
  long replications = 5000;
  int directions = 50;
  double threshold = 0.03;

  CltConfig();

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    v("run.n_grid", n_grid);
    v("run.replications", replications);
    v("run.directions", directions);
    v("check.threshold", threshold);
  }
};

// Columns n, projected_ks, ball_ks, ks_axis0 for the samples sqrt(n) Sigma_n^{-1/2} (theta_bar - theta*).
// Pass: projected_ks <= threshold at the largest n.
ExperimentResult clt_sanity(const CltConfig& cfg, const RunContext& ctx = {});

// Whitened samples sqrt(n) Sigma_n^{-1/2} (theta_bar_n - theta*), one per replication.
std::vector<VectorXd> clt_samples(const BuiltProblem& bp, const StepSchedule& s, long n, long replications,
                                  const RunContext& ctx);

// ---- rate_fit -----------------------------------------------------------------

struct RateFitConfig {
  std::vector<double> gamma_grid{0.8, 0.9};
  std::vector<long> n_grid{1024, 2048, 4096, 8192, 16384, 32768, 65536};
  long replications = 10000;
  double c0 = 1.0;
  double k0 = 1.0;
  double theta0_offset = 0.0;
  double slope_gamma = 0.8;
  double slope_lo = -0.35;
  double slope_hi = -0.05;
  double order_gamma = 0.9;

  template <class V>
  void visit(V& v) {
    v("run.gamma_grid", gamma_grid);
    v("run.n_grid", n_grid);
    v("run.replications", replications);
    v("schedule.c0", c0);
    v("schedule.k0", k0);
    v("problem.theta0_offset", theta0_offset);
    v("check.slope_gamma", slope_gamma);
    v("check.slope_lo", slope_lo);
    v("check.slope_hi", slope_hi);
    v("check.order_gamma", order_gamma);
  }
};

// Columns gamma, n, sigma2, ks_sigma_n, ks_sigma_inf, usable_sigma_n, usable_sigma_inf.
// Each replication runs one trajectory of length max(n_grid) and reads every theta_bar_n as a prefix mean.
ExperimentResult rate_fit(const RateFitConfig& cfg, const RunContext& ctx = {});

// KS values below this are indistinguishable from Monte Carlo noise at R samples.
double ks_noise_floor(long replications);

// ---- moment_check -------------------------------------------------------------

struct MomentConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  long k_max = 4096;
  long replications = 2000;

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    v("run.k_max", k_max);
    v("run.replications", replications);
  }
};

// C_1 exp{-(mu c0 / 4)(k + k0)^{1-gamma}} (|theta0 - theta*|^2 + sigma2_sq) + C_2 sigma2_sq alpha_k
double moment_bound(const TheoreticalConstants& c, double mu, const StepSchedule& s, long k, double init_sq,
                    double sigma2_sq);

// Columns k, empirical, bound, pass for k in {0, 1, 2, 4, ..., k_max}.
ExperimentResult moment_check(const MomentConfig& cfg, const RunContext& ctx = {});

// ---- concentration_check ------------------------------------------------------

struct ConcentrationConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  long n = 1024;
  long replications = 500;

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    v("run.n", n);
    v("run.replications", replications);
  }
};

// (10 C_{Q,xi} / 3) sqrt(log(2 d n) / n)
double bernstein_threshold(double c_q_xi, int d, long n);

// Columns draw, deviation = |Sigma_n^b - Sigma_n|, threshold, violated.
// Pass: violation fraction <= 1/n + 3 sqrt((1/n)(1 - 1/n) / R).
ExperimentResult concentration_check(const ConcentrationConfig& cfg, const RunContext& ctx = {});

// ---- identity_check -----------------------------------------------------------

struct IdentityConfig {
  long instances = 100;
  int d_max = 5;
  long n_max = 500;
  double tolerance = 1e-10;
  double perturb = 0.0;  // added to the diagonal of G after the Q family is built

  template <class V>
  void visit(V& v) {
    v("run.instances", instances);
    v("run.d_max", d_max);
    v("run.n_max", n_max);
    v("check.tolerance", tolerance);
    v("check.perturb", perturb);
  }
};

// Columns instance, d, n, gamma, residual_sum, residual_single, lambda_max_q, c_q, lambda_min_q, c_q_min,
// lambda_min_sigma_n, sigma_floor, envelope_violations, pass.
ExperimentResult identity_check(const IdentityConfig& cfg, const RunContext& ctx = {});

// ---- single runs --------------------------------------------------------------

struct SgdRunConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  long n = 4096;
  long record_every = 64;

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    v("run.n", n);
    v("run.record_every", record_every);
  }
};

// Columns k, theta[0..d-1], alpha_k at k = 0, record_every, 2 record_every, ..., n - 1.
ExperimentResult sgd_run(const SgdRunConfig& cfg, const RunContext& ctx = {});

struct BootstrapCiConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  WeightSetup weights;
  long n = 4096;
  long m = 400;
  std::vector<double> levels{0.9};

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    weights.visit(v);
    v("run.n", n);
    v("run.m", m);
    v("run.levels", levels);
  }
};

// Columns shape (0 NormBall, 1 CoordinateBox), level, radius, center[j], halfwidth[j], contains_theta_star.
ExperimentResult bootstrap_ci(const BootstrapCiConfig& cfg, const RunContext& ctx = {});

struct ProblemRunConfig {
  ProblemSetup problem;
  ScheduleSetup schedule;
  WeightSetup weights;
  long n = 4096;

  template <class V>
  void visit(V& v) {
    problem.visit(v);
    schedule.visit(v);
    weights.visit(v);
    v("run.n", n);
  }
};

// One row of theoretical constants; the summary holds the JSON form.
ExperimentResult constants_report(const ProblemRunConfig& cfg, const RunContext& ctx = {});

// Columns check (index into the summary's check list), lhs, rhs, pass. Pass: every check holds.
ExperimentResult validate_report(const ProblemRunConfig& cfg, const RunContext& ctx = {});

}  // namespace sgdboot
