#include "sgdboot/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <stdexcept>

#include "sgdboot/distances.hpp"
#include "sgdboot/rng.hpp"
#include "sgdboot/sgd_core.hpp"

#ifndef SGDBOOT_VERSION
#define SGDBOOT_VERSION "0.0.0"
#endif

namespace sgdboot {

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::LowerBoundScan: return "LowerBoundScan";
    case Experiment::SigmaScan: return "SigmaScan";
    case Experiment::Coverage: return "Coverage";
    case Experiment::CltSanity: return "CltSanity";
    case Experiment::RateFit: return "RateFit";
    case Experiment::MomentCheck: return "MomentCheck";
    case Experiment::ConcentrationCheck: return "ConcentrationCheck";
    case Experiment::IdentityCheck: return "IdentityCheck";
  }
  return "?";
}

nlohmann::json to_json(const ExperimentSummary& s) {
  return {{"experiment", s.experiment},
          {"pass", s.pass},
          {"config_hash", s.config_hash},
          {"seed", s.seed},
          {"headline_metrics", s.headline}};
}

namespace {

using Clock = std::chrono::steady_clock;

int thread_count(const RunContext& ctx) { return ctx.threads > 0 ? ctx.threads : omp_get_max_threads(); }

template <class Cfg>
void finish(ExperimentResult& res, const std::string& name, const Cfg& cfg, const RunContext& ctx,
            Clock::time_point t0) {
  const auto hash = config_hash(cfg);
  res.summary.experiment = name;
  res.summary.config_hash = hash;
  res.summary.seed = ctx.seed;
  res.table.metadata.config_hash = hash;
  res.table.metadata.seed = ctx.seed;
  res.table.metadata.version = SGDBOOT_VERSION;
  res.table.metadata.runtime_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
}

void log_line(const RunContext& ctx, const std::string& msg) {
  if (!ctx.log) return;
#pragma omp critical(sgdboot_log)
  std::cerr << msg << '\n';
}

VectorXd broadcast(const std::vector<double>& v, int d, const char* what) {
  if (v.size() == 1) return VectorXd::Constant(d, v[0]);
  if (static_cast<int>(v.size()) != d)
    throw ConfigError(std::string(what) + ": expected 1 or " + std::to_string(d) + " values");
  return Eigen::Map<const VectorXd>(v.data(), d);
}

std::vector<long> dyadic_grid(long n_min, long n_max) {
  if (n_min < 2 || n_max < n_min) throw ConfigError("n grid: need 2 <= n_min <= n_max");
  if ((n_min & (n_min - 1)) != 0 || (n_max & (n_max - 1)) != 0) throw ConfigError("n grid: endpoints must be powers of 2");
  std::vector<long> g;
  for (long n = n_min; n <= n_max; n *= 2) g.push_back(n);
  return g;
}

void require_grid(const std::vector<double>& g, const char* what) {
  if (g.empty()) throw ConfigError(std::string(what) + ": grid must be nonempty");
}

MatrixXd inverse_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (!(es.eigenvalues()(0) > 0)) throw std::invalid_argument("inverse_sqrt: matrix not positive definite");
  return es.operatorInverseSqrt();
}

double binomial_se(double p, long r) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(r)); }

nlohmann::json report_json(const ValidationReport& rep) {
  auto arr = nlohmann::json::array();
  for (const auto& c : rep.checks)
    arr.push_back({{"name", c.name}, {"inequality", c.inequality}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}});
  nlohmann::json j = {{"pass", rep.pass()}, {"checks", arr}};
  if (rep.minimal_k0) j["minimal_k0"] = *rep.minimal_k0;
  return j;
}

}  // namespace

ProblemSetup scalar_gaussian_setup(double theta0_offset) {
  ProblemSetup s;
  s.kind = "scalar";
  s.a_diag = {1.0};
  s.theta0_offset = {theta0_offset};
  s.noise = "gaussian";
  s.noise_var = {1.0};
  s.noise_l2 = 0.0;
  return s;
}

BuiltProblem build_problem(const ProblemSetup& setup, std::uint64_t seed) {
  BuiltProblem bp;
  if (setup.kind == "scalar") {
    bp.problem = make_scalar_unit();
  } else if (setup.kind == "quadratic") {
    if (setup.a_diag.empty()) throw ConfigError("problem.a_diag must be nonempty");
    const int d = static_cast<int>(setup.a_diag.size());
    const VectorXd diag = Eigen::Map<const VectorXd>(setup.a_diag.data(), d);
    const VectorXd ts = setup.theta_star.empty() ? VectorXd::Zero(d) : broadcast(setup.theta_star, d, "problem.theta_star");
    bp.problem = make_quadratic(diag.asDiagonal().toDenseMatrix(), ts, setup.beta_radius);
  } else if (setup.kind == "logistic") {
    LogisticParams lp;
    lp.dim = setup.logistic_dim;
    lp.samples = static_cast<int>(setup.logistic_samples);
    lp.ridge = setup.logistic_ridge;
    lp.design_scale = setup.logistic_scale;
    lp.beta_radius = setup.beta_radius;
    lp.design_key = derive_key(seed, StreamTag::Design, 0);
    bp.problem = make_logistic_ridge(lp);
  } else {
    throw ConfigError("problem.kind must be quadratic, scalar or logistic");
  }
  const int d = bp.problem.dim;
  bp.theta0 = bp.problem.theta_star + broadcast(setup.theta0_offset, d, "problem.theta0_offset");

  if (setup.noise == "zero") {
    bp.noise = make_zero_noise(bp.problem);
  } else if (setup.noise == "gaussian") {
    const VectorXd v = broadcast(setup.noise_var, d, "noise.var");
    bp.noise = make_gaussian_additive_noise(bp.problem, v.asDiagonal().toDenseMatrix());
  } else if (setup.noise == "truncated") {
    NoiseParams np;
    np.covariance = broadcast(setup.noise_var, d, "noise.var").asDiagonal().toDenseMatrix();
    np.l2 = setup.noise_l2;
    np.c2 = setup.noise_c2;
    np.estimation_key = derive_key(seed, StreamTag::Estimation, 0);
    np.estimation_draws = setup.estimation_draws;
    bp.noise = make_truncated_gaussian_noise(bp.problem, np);
  } else if (setup.noise == "logistic") {
    if (bp.problem.kind != ProblemKind::LogisticRidge) throw ConfigError("noise.kind=logistic needs problem.kind=logistic");
    bp.noise = make_logistic_noise(bp.problem);
  } else {
    throw ConfigError("noise.kind must be zero, gaussian, truncated or logistic");
  }
  return bp;
}

// ---- lower_bound_scan -------------------------------------------------------

ExperimentResult lower_bound_scan(const LowerBoundConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  require_grid(cfg.gamma_grid, "run.gamma_grid");
  for (double g : cfg.gamma_grid)
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("run.gamma_grid: values must lie in (0, 1)");
  const auto ns = dyadic_grid(cfg.n_min, cfg.n_max);
  const long ng = static_cast<long>(cfg.gamma_grid.size()), nn = static_cast<long>(ns.size());
  std::vector<double> s2(ng * nn);
  // Largest n first so the expensive cells start early under dynamic scheduling.
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(ctx))
  for (long c = 0; c < ng * nn; ++c) {
    const long gi = c % ng, ni = nn - 1 - c / ng;
    s2[gi * nn + ni] = scalar_sigma2(ns[ni], cfg.gamma_grid[gi], cfg.c0, cfg.k0);
    log_line(ctx, "lower-bound gamma=" + format_double(cfg.gamma_grid[gi]) + " n=" + std::to_string(ns[ni]));
  }

  ExperimentResult res;
  res.table = ResultTable({"gamma", "n", "sigma2", "statistic"});
  bool positive = true, stable = true;
  auto rel = nlohmann::json::object();
  for (long gi = 0; gi < ng; ++gi) {
    const double g = cfg.gamma_grid[gi];
    std::vector<double> stat(nn);
    for (long ni = 0; ni < nn; ++ni) {
      const double n = static_cast<double>(ns[ni]);
      stat[ni] = std::pow(n, 1.0 - g) * std::abs(s2[gi * nn + ni] - 1.0);
      positive = positive && stat[ni] > 0.0;
      res.table.add_row({g, n, s2[gi * nn + ni], stat[ni]});
    }
    if (nn >= 2) {
      const double r = std::abs(stat[nn - 1] - stat[nn - 2]) / stat[nn - 2];
      rel[format_double(g)] = r;
      if (g <= cfg.gamma_max_checked + 1e-12 && !(r < cfg.rel_tol)) stable = false;
    }
  }
  res.table.sort_by({"gamma", "n"});
  res.summary.pass = positive && stable;
  res.summary.headline = {{"all_positive", positive}, {"relative_change_last_octave", rel}, {"stable", stable}};
  finish(res, "lower-bound", cfg, ctx, t0);
  return res;
}

// ---- sigma_scan ---------------------------------------------------------------

ExperimentResult sigma_scan(const SigmaScanConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  require_grid(cfg.gamma_grid, "run.gamma_grid");
  const auto ns = dyadic_grid(cfg.n_min, cfg.n_max);
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const MatrixXd g = hessian_at_min(bp.problem);
  const long ng = static_cast<long>(cfg.gamma_grid.size()), nn = static_cast<long>(ns.size());
  std::vector<std::vector<double>> rows(ng * nn);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(ctx))
  for (long c = 0; c < ng * nn; ++c) {
    const long gi = c % ng, ni = nn - 1 - c / ng;
    const StepSchedule s(cfg.c0, cfg.k0, cfg.gamma_grid[gi]);
    const long n = ns[ni];
    const QFamily qf = compute_q_family(g, s, n);
    const MatrixXd diff = sigma_n_matrix(qf, bp.noise.sigma_xi) - sigma_infty_matrix(g, bp.noise.sigma_xi);
    const double spec = opnorm(diff);
    const double scaled = spec * std::pow(static_cast<double>(n), 1.0 - s.gamma);
    const double bound = theoretical_constants(bp.problem, bp.noise, s, n).c_infty_prime;
    const bool validated = validate_basic(s, bp.problem).pass();
    rows[gi * nn + ni] = {s.gamma, static_cast<double>(n), diff.norm(), spec, scaled, bound, validated ? 1.0 : 0.0};
    log_line(ctx, "sigma-scan gamma=" + format_double(s.gamma) + " n=" + std::to_string(n));
  }

  ExperimentResult res;
  res.table = ResultTable({"gamma", "n", "frob_norm", "spectral_norm", "scaled", "bound", "validated"});
  bool pass = true, monotone = true;
  double worst_ratio = 0.0;
  long validated_rows = 0;
  for (long gi = 0; gi < ng; ++gi)
    for (long ni = 0; ni < nn; ++ni) {
      const auto& r = rows[gi * nn + ni];
      if (r[6] > 0) {
        ++validated_rows;
        worst_ratio = std::max(worst_ratio, r[4] / r[5]);
        if (!(r[4] <= r[5])) pass = false;
      }
      if (ni > 0 && !(r[3] < rows[gi * nn + ni - 1][3])) monotone = false;
      res.table.add_row(r);
    }
  res.table.sort_by({"gamma", "n"});
  res.summary.pass = pass;
  res.summary.headline = {{"max_scaled_over_bound", worst_ratio},
                          {"validated_rows", validated_rows},
                          {"spectral_norm_strictly_decreasing", monotone}};
  finish(res, "sigma-scan", cfg, ctx, t0);
  return res;
}

// ---- coverage_study -----------------------------------------------------------

ExperimentResult coverage_study(const CoverageConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  require_grid(cfg.levels, "run.levels");
  if (cfg.replications < 1 || cfg.m < 1) throw ConfigError("coverage: replications and m must be >= 1");
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const BoundedWeightLaw law = make_weight_law(cfg.weights.alpha, cfg.weights.beta);
  const auto vb = validate_basic(s, bp.problem);
  const auto vboot = validate_bootstrap(s, bp.problem, bp.noise, law.wmin, law.wmax);
  const long nl = static_cast<long>(cfg.levels.size());
  const long R = cfg.replications;

  struct Rep {
    std::vector<double> radius;
    std::vector<char> ball, box;
    bool diverged = false;
  };
  std::vector<Rep> reps(R);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(ctx))
  for (long r = 0; r < R; ++r) {
    Rep& out = reps[r];
    out.radius.assign(nl, std::numeric_limits<double>::quiet_NaN());
    out.ball.assign(nl, 0);
    out.box.assign(nl, 0);
    try {
      const auto tape = record_noise(bp.noise, derive_key(ctx.seed, StreamTag::Data, r), cfg.n);
      const SgdRun run = run_sgd_on_tape(bp.problem, s, tape, bp.theta0);
      const BootstrapEnsemble ens = build_ensemble_on_tape(bp.problem, s, tape, bp.theta0, run.theta_bar, law,
                                                           derive_key(ctx.seed, StreamTag::Weights, r), cfg.m, 1);
      for (long l = 0; l < nl; ++l) {
        const auto ball = confidence_region(ens, RegionShape::NormBall, cfg.levels[l]);
        const auto box = confidence_region(ens, RegionShape::CoordinateBox, cfg.levels[l]);
        out.radius[l] = ball.radius;
        out.ball[l] = ball.contains(bp.problem.theta_star);
        out.box[l] = box.contains(bp.problem.theta_star);
      }
    } catch (const DivergedError&) {
      out.diverged = true;
    }
    if (ctx.log && (r + 1) % 100 == 0) log_line(ctx, "coverage replication " + std::to_string(r + 1));
  }

  ExperimentResult res;
  res.table = ResultTable({"replication", "level", "ball_radius", "ball_covered", "box_covered", "status"});
  std::vector<long> ball_hits(nl, 0), box_hits(nl, 0);
  long diverged = 0;
  for (long r = 0; r < R; ++r) {
    diverged += reps[r].diverged;
    for (long l = 0; l < nl; ++l) {
      ball_hits[l] += reps[r].ball[l];
      box_hits[l] += reps[r].box[l];
      res.table.add_row({static_cast<double>(r + 1), cfg.levels[l], reps[r].radius[l], double(reps[r].ball[l]),
                         double(reps[r].box[l]), reps[r].diverged ? 1.0 : 0.0});
    }
  }
  res.table.sort_by({"replication", "level"});

  bool pass = diverged == 0;
  auto per_level = nlohmann::json::array();
  std::vector<std::pair<double, double>> by_level;
  for (long l = 0; l < nl; ++l) {
    const double cb = double(ball_hits[l]) / R, cx = double(box_hits[l]) / R;
    const bool in_band = std::abs(cb - cfg.levels[l]) <= cfg.band;
    pass = pass && in_band;
    per_level.push_back({{"level", cfg.levels[l]},
                         {"ball_coverage", cb},
                         {"ball_se", binomial_se(cb, R)},
                         {"box_coverage", cx},
                         {"box_se", binomial_se(cx, R)},
                         {"ball_in_band", in_band}});
    by_level.emplace_back(cfg.levels[l], cb);
  }
  std::sort(by_level.begin(), by_level.end());
  bool monotone = true;
  for (std::size_t i = 1; i < by_level.size(); ++i) monotone = monotone && by_level[i].second >= by_level[i - 1].second;
  res.summary.pass = pass && monotone;
  res.summary.headline = {{"levels", per_level},
                          {"diverged", diverged},
                          {"monotone_in_level", monotone},
                          {"validate_basic", report_json(vb)},
                          {"validate_bootstrap", report_json(vboot)}};
  finish(res, "coverage", cfg, ctx, t0);
  return res;
}

// ---- clt_sanity ---------------------------------------------------------------

CltConfig::CltConfig() {
  problem.a_diag = {1.0};
  problem.theta0_offset = {0.1};
  problem.noise = "gaussian";
  problem.noise_var = {1.0};
  problem.noise_l2 = 0.0;
}

std::vector<VectorXd> clt_samples(const BuiltProblem& bp, const StepSchedule& s, long n, long replications,
                                  const RunContext& ctx) {
  const MatrixXd g = hessian_at_min(bp.problem);
  const MatrixXd w = inverse_sqrt(sigma_n_matrix(compute_q_family(g, s, n), bp.noise.sigma_xi));
  const double sn = std::sqrt(static_cast<double>(n));
  std::vector<VectorXd> out(replications);
#pragma omp parallel for schedule(static) num_threads(thread_count(ctx))
  for (long r = 0; r < replications; ++r) {
    const SgdRun run = run_sgd(bp.problem, bp.noise, s, n, bp.theta0, derive_key(ctx.seed, StreamTag::Data, r));
    out[r] = sn * (w * (run.theta_bar - bp.problem.theta_star));
  }
  return out;
}

ExperimentResult clt_sanity(const CltConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  if (cfg.n_grid.empty()) throw ConfigError("run.n_grid must be nonempty");
  if (cfg.replications < 2) throw ConfigError("run.replications must be >= 2");
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const int d = bp.problem.dim;
  const MatrixXd eye = MatrixXd::Identity(d, d);

  ExperimentResult res;
  res.table = ResultTable({"n", "projected_ks", "ball_ks", "ks_axis0"});
  auto ns = cfg.n_grid;
  std::sort(ns.begin(), ns.end());
  double last = 0.0;
  for (long n : ns) {
    const auto z = clt_samples(bp, s, n, cfg.replications, ctx);
    const auto proj = projected_convex_proxy(z, eye, cfg.directions,
                                             derive_key(ctx.seed, StreamTag::Directions, static_cast<std::uint64_t>(n)));
    const auto ball = ball_class_proxy(z, eye);
    std::vector<double> axis(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) axis[r] = z[r](0);
    const double ks0 = empirical_ks_1d(std::move(axis), 1.0);
    res.table.add_row({static_cast<double>(n), proj.value, ball.value, ks0});
    last = proj.value;
    log_line(ctx, "clt-sanity n=" + std::to_string(n));
  }
  res.summary.pass = last <= cfg.threshold;
  res.summary.headline = {{"projected_ks_at_max_n", last},
                          {"threshold", cfg.threshold},
                          {"estimators", {"ProjectedKS", "BallClassKS", "KS1D"}},
                          {"lower_bound_proxy", true}};
  finish(res, "clt-sanity", cfg, ctx, t0);
  return res;
}

// ---- rate_fit -----------------------------------------------------------------

double ks_noise_floor(long replications) { return 0.8687 / std::sqrt(static_cast<double>(replications)); }

ExperimentResult rate_fit(const RateFitConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  require_grid(cfg.gamma_grid, "run.gamma_grid");
  if (cfg.n_grid.size() < 2) throw ConfigError("run.n_grid needs at least 2 horizons");
  if (cfg.replications < 2) throw ConfigError("run.replications must be >= 2");
  auto ns = cfg.n_grid;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.front() < 2) throw ConfigError("run.n_grid: horizons must be >= 2");
  const long n_max = ns.back(), R = cfg.replications, nn = static_cast<long>(ns.size());
  const ProblemSpec p = make_scalar_unit();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(1, 1));
  const VectorXd theta0 = VectorXd::Constant(1, cfg.theta0_offset);
  const double floor = ks_noise_floor(R);

  ExperimentResult res;
  res.table = ResultTable({"gamma", "n", "sigma2", "ks_sigma_n", "ks_sigma_inf", "usable_sigma_n", "usable_sigma_inf"});
  bool pass = true;
  auto fits = nlohmann::json::array();
  for (double gamma : cfg.gamma_grid) {
    const StepSchedule s(cfg.c0, cfg.k0, gamma);
    std::vector<std::vector<double>> z(nn, std::vector<double>(R));
#pragma omp parallel for schedule(static) num_threads(thread_count(ctx))
    for (long r = 0; r < R; ++r) {
      SgdOptions opts;
      opts.prefix_means = ns;
      const SgdRun run = run_sgd(p, o, s, n_max, theta0, derive_key(ctx.seed, StreamTag::Data, r), opts);
      for (long i = 0; i < nn; ++i) z[i][r] = std::sqrt(static_cast<double>(ns[i])) * run.prefix_means[i].second(0);
    }
    std::vector<double> nx, d_inf, d_n, nx_n;
    bool ordered = true;
    for (long i = 0; i < nn; ++i) {
      const double s2 = scalar_sigma2(ns[i], gamma, cfg.c0, cfg.k0);
      const double kn = empirical_ks_1d(z[i], s2);
      const double ki = empirical_ks_1d(z[i], 1.0);
      ordered = ordered && kn <= ki;
      nx.push_back(static_cast<double>(ns[i]));
      d_inf.push_back(ki);
      if (kn >= floor) {
        nx_n.push_back(static_cast<double>(ns[i]));
        d_n.push_back(kn);
      }
      res.table.add_row({gamma, static_cast<double>(ns[i]), s2, kn, ki, kn >= floor ? 1.0 : 0.0, ki >= floor ? 1.0 : 0.0});
      log_line(ctx, "rate-fit gamma=" + format_double(gamma) + " n=" + std::to_string(ns[i]));
    }
    const SlopeFit fi = loglog_slope(nx, d_inf);
    nlohmann::json f = {{"gamma", gamma},
                        {"slope_sigma_inf", fi.slope},
                        {"slope_sigma_inf_se", fi.stderr_slope},
                        {"sigma_n_below_sigma_inf_everywhere", ordered}};
    if (d_n.size() >= 2) {
      const SlopeFit fn = loglog_slope(nx_n, d_n);
      f["slope_sigma_n"] = fn.slope;
      f["slope_sigma_n_se"] = fn.stderr_slope;
    } else {
      f["slope_sigma_n"] = nullptr;
    }
    f["usable_rows_sigma_n"] = d_n.size();
    if (std::abs(gamma - cfg.slope_gamma) < 1e-12) {
      const bool ok = fi.slope >= cfg.slope_lo && fi.slope <= cfg.slope_hi;
      f["slope_in_window"] = ok;
      pass = pass && ok;
    }
    if (std::abs(gamma - cfg.order_gamma) < 1e-12) pass = pass && ordered;
    fits.push_back(f);
  }
  res.table.sort_by({"gamma", "n"});
  res.summary.pass = pass;
  res.summary.headline = {{"fits", fits}, {"noise_floor", floor}, {"slope_window", {cfg.slope_lo, cfg.slope_hi}}};
  finish(res, "rate-fit", cfg, ctx, t0);
  return res;
}

// ---- moment_check -------------------------------------------------------------

double moment_bound(const TheoreticalConstants& c, double mu, const StepSchedule& s, long k, double init_sq,
                    double sigma2_sq) {
  return c.c_1 * std::exp(-mu * s.c0 / 4.0 * std::pow(static_cast<double>(k) + s.k0, 1.0 - s.gamma)) *
             (init_sq + sigma2_sq) +
         c.c_2 * sigma2_sq * alpha(s, k);
}

ExperimentResult moment_check(const MomentConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  if (cfg.k_max < 1 || cfg.replications < 1) throw ConfigError("moment-check: k_max and replications must be >= 1");
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  std::vector<long> ks{0};
  for (long k = 1; k <= cfg.k_max; k *= 2) ks.push_back(k);
  if (ks.back() != cfg.k_max) ks.push_back(cfg.k_max);
  const long nk = static_cast<long>(ks.size()), R = cfg.replications;

  std::vector<std::vector<double>> sq(R, std::vector<double>(nk));
#pragma omp parallel for schedule(static) num_threads(thread_count(ctx))
  for (long r = 0; r < R; ++r) {
    SgdOptions opts;
    opts.checkpoints = ks;
    const SgdRun run = run_sgd(bp.problem, bp.noise, s, cfg.k_max + 1, bp.theta0,
                               derive_key(ctx.seed, StreamTag::Data, r), opts);
    for (long i = 0; i < nk; ++i) sq[r][i] = (run.checkpoints[i].second - bp.problem.theta_star).squaredNorm();
  }

  const auto c = theoretical_constants(bp.problem, bp.noise, s, cfg.k_max + 1, bp.theta0);
  const double init_sq = (bp.theta0 - bp.problem.theta_star).squaredNorm();
  const double sig2 = std::pow(bp.noise.sigma_p(2.0), 2);
  ExperimentResult res;
  res.table = ResultTable({"k", "empirical", "bound", "pass"});
  bool pass = true;
  double worst = 0.0;
  for (long i = 0; i < nk; ++i) {
    double acc = 0.0;
    for (long r = 0; r < R; ++r) acc += sq[r][i];
    const double emp = acc / R;
    const double b = moment_bound(c, bp.problem.mu, s, ks[i], init_sq, sig2);
    const bool ok = emp <= b;
    pass = pass && ok;
    worst = std::max(worst, emp / b);
    res.table.add_row({static_cast<double>(ks[i]), emp, b, ok ? 1.0 : 0.0});
  }
  res.table.sort_by({"k"});
  res.summary.pass = pass;
  res.summary.headline = {{"max_empirical_over_bound", worst},
                          {"C_1", c.c_1},
                          {"C_2", c.c_2},
                          {"L2_effective", c.l2_effective},
                          {"sigma_2_squared", sig2}};
  finish(res, "moment-check", cfg, ctx, t0);
  return res;
}

// ---- concentration_check ------------------------------------------------------

double bernstein_threshold(double c_q_xi, int d, long n) {
  return 10.0 * c_q_xi / 3.0 * std::sqrt(std::log(2.0 * d * static_cast<double>(n)) / static_cast<double>(n));
}

ExperimentResult concentration_check(const ConcentrationConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  if (cfg.n < 2 || cfg.replications < 1) throw ConfigError("concentration-check: need n >= 2, replications >= 1");
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const QFamily qf = compute_q_family(hessian_at_min(bp.problem), s, cfg.n);
  const MatrixXd sn = sigma_n_matrix(qf, bp.noise.sigma_xi);
  const auto c = theoretical_constants(bp.problem, bp.noise, s, cfg.n);
  const double thr = bernstein_threshold(c.c_q_xi, bp.problem.dim, cfg.n);
  const long R = cfg.replications;
  std::vector<double> dev(R);
#pragma omp parallel for schedule(static) num_threads(thread_count(ctx))
  for (long r = 0; r < R; ++r)
    dev[r] = opnorm(sigma_n_boot(qf, bp.noise, derive_key(ctx.seed, StreamTag::Data, r)) - sn);

  ExperimentResult res;
  res.table = ResultTable({"draw", "deviation", "threshold", "violated"});
  long viol = 0;
  for (long r = 0; r < R; ++r) {
    const bool v = dev[r] > thr;
    viol += v;
    res.table.add_row({static_cast<double>(r + 1), dev[r], thr, v ? 1.0 : 0.0});
  }
  res.table.sort_by({"draw"});
  const double p0 = 1.0 / static_cast<double>(cfg.n);
  const double allowed = p0 + 3.0 * binomial_se(p0, R);
  const double frac = double(viol) / R;
  res.summary.pass = frac <= allowed;
  res.summary.headline = {{"violation_fraction", frac},
                          {"allowed_fraction", allowed},
                          {"threshold", thr},
                          {"max_deviation", *std::max_element(dev.begin(), dev.end())},
                          {"C_Q_xi", c.c_q_xi},
                          {"sigma_n_norm", opnorm(sn)}};
  finish(res, "concentration-check", cfg, ctx, t0);
  return res;
}

// ---- identity_check -----------------------------------------------------------

ExperimentResult identity_check(const IdentityConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  if (cfg.instances < 1 || cfg.d_max < 1 || cfg.n_max < 2) throw ConfigError("identity-check: bad instance sizes");
  const long R = cfg.instances;
  std::vector<std::vector<double>> rows(R);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(ctx))
  for (long i = 0; i < R; ++i) {
    SplitMix64 eng(derive_key(ctx.seed, StreamTag::Instances, static_cast<std::uint64_t>(i)));
    auto unif = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); };
    auto gauss = [&] { return std::normal_distribution<double>()(eng); };
    const int d = static_cast<int>(std::uniform_int_distribution<long>(1, cfg.d_max)(eng));
    const long n = std::uniform_int_distribution<long>(2, cfg.n_max)(eng);
    VectorXd lam(d);
    for (int j = 0; j < d; ++j) lam(j) = unif(0.1, 3.0);
    MatrixXd z(d, d), a(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) z(r, c) = gauss();
    const MatrixXd u = Eigen::HouseholderQR<MatrixXd>(z).householderQ();
    MatrixXd g = u * lam.asDiagonal() * u.transpose();
    g = 0.5 * (g + g.transpose());
    const double gamma = unif(0.55, 0.95);
    const double k0 = unif(1.0, 20.0);
    const double c0 = unif(0.05, 1.0) / (2.0 * lam.maxCoeff());
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) a(r, c) = gauss();
    const MatrixXd sx = a * a.transpose() + 0.1 * MatrixXd::Identity(d, d);
    const StepSchedule s(c0, k0, gamma);

    QFamily qf = compute_q_family(g, s, n);
    const ProblemSpec p = make_quadratic(g, VectorXd::Zero(d));
    const NoiseOracle o = make_gaussian_additive_noise(p, sx);
    const auto c = theoretical_constants(p, o, s, n);
    double lmax = -std::numeric_limits<double>::infinity(), lmin = std::numeric_limits<double>::infinity();
    for (const auto& q : qf.q) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(q, Eigen::EigenvaluesOnly);
      lmax = std::max(lmax, es.eigenvalues()(d - 1));
      lmin = std::min(lmin, es.eigenvalues()(0));
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es_sn(sigma_n_matrix(qf, sx), Eigen::EigenvaluesOnly);
    const double lsn = es_sn.eigenvalues()(0);
    const double floor = 1.0 / (c.c_sigma * c.c_sigma);
    const int viol = (lmax > c.c_q) + (lmin < c.c_q_min * (1.0 - 1e-12)) + (lsn < floor);

    if (cfg.perturb != 0.0) qf.g += cfg.perturb * MatrixXd::Identity(d, d);
    const double rs = identity_sum(qf);
    const double r1 = identity_single_max(qf);
    const bool ok = rs <= cfg.tolerance && r1 <= cfg.tolerance && viol == 0;
    rows[i] = {double(i + 1), double(d), double(n), gamma, rs, r1, lmax, c.c_q, lmin, c.c_q_min, lsn, floor,
               double(viol), ok ? 1.0 : 0.0};
  }

  ExperimentResult res;
  res.table = ResultTable({"instance", "d", "n", "gamma", "residual_sum", "residual_single", "lambda_max_q", "c_q",
                           "lambda_min_q", "c_q_min", "lambda_min_sigma_n", "sigma_floor", "envelope_violations",
                           "pass"});
  double max_sum = 0.0, max_single = 0.0;
  long violations = 0, failed = 0;
  for (auto& r : rows) {
    max_sum = std::max(max_sum, r[4]);
    max_single = std::max(max_single, r[5]);
    violations += static_cast<long>(r[12]);
    failed += r[13] == 0.0;
    res.table.add_row(std::move(r));
  }
  res.table.sort_by({"instance"});
  res.summary.pass = failed == 0;
  res.summary.headline = {{"max_residual_sum", max_sum},
                          {"max_residual_single", max_single},
                          {"envelope_violations", violations},
                          {"failed_instances", failed},
                          {"tolerance", cfg.tolerance}};
  finish(res, "identity-check", cfg, ctx, t0);
  return res;
}

// ---- single runs --------------------------------------------------------------

ExperimentResult sgd_run(const SgdRunConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  if (cfg.record_every < 1) throw ConfigError("run.record_every must be >= 1");
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const auto vb = validate_basic(s, bp.problem);
  if (!vb.pass() && ctx.log)
    for (const auto& f : vb.failures()) log_line(ctx, "warning: validate_basic fails " + f);
  SgdOptions opts;
  for (long k = 0; k < cfg.n; k += cfg.record_every) opts.checkpoints.push_back(k);
  if (opts.checkpoints.back() != cfg.n - 1) opts.checkpoints.push_back(cfg.n - 1);
  const SgdRun run = run_sgd(bp.problem, bp.noise, s, cfg.n, bp.theta0, derive_key(ctx.seed, StreamTag::Data, 0), opts);
  const int d = bp.problem.dim;
  std::vector<std::string> cols{"k"};
  for (int j = 0; j < d; ++j) cols.push_back("theta[" + std::to_string(j) + "]");
  cols.push_back("alpha_k");
  ExperimentResult res;
  res.table = ResultTable(cols);
  for (const auto& [k, th] : run.checkpoints) {
    std::vector<double> row{static_cast<double>(k)};
    for (int j = 0; j < d; ++j) row.push_back(th(j));
    row.push_back(alpha(s, k));
    res.table.add_row(std::move(row));
  }
  res.summary.pass = true;
  res.summary.headline = {{"theta_bar", std::vector<double>(run.theta_bar.data(), run.theta_bar.data() + d)},
                          {"error_norm", (run.theta_bar - bp.problem.theta_star).norm()},
                          {"validate_basic", report_json(vb)}};
  finish(res, "sgd-run", cfg, ctx, t0);
  return res;
}

ExperimentResult bootstrap_ci(const BootstrapCiConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  require_grid(cfg.levels, "run.levels");
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const BoundedWeightLaw law = make_weight_law(cfg.weights.alpha, cfg.weights.beta);
  const auto vboot = validate_bootstrap(s, bp.problem, bp.noise, law.wmin, law.wmax);
  const auto ens = build_ensemble(bp.problem, bp.noise, s, cfg.n, bp.theta0, derive_key(ctx.seed, StreamTag::Data, 0),
                                  law, derive_key(ctx.seed, StreamTag::Weights, 0), cfg.m, thread_count(ctx));
  const int d = bp.problem.dim;
  std::vector<std::string> cols{"shape", "level", "radius"};
  for (int j = 0; j < d; ++j) cols.push_back("center[" + std::to_string(j) + "]");
  for (int j = 0; j < d; ++j) cols.push_back("halfwidth[" + std::to_string(j) + "]");
  cols.push_back("contains_theta_star");
  ExperimentResult res;
  res.table = ResultTable(cols);
  auto regions = nlohmann::json::array();
  for (double level : cfg.levels)
    for (RegionShape shape : {RegionShape::NormBall, RegionShape::CoordinateBox}) {
      const auto reg = confidence_region(ens, shape, level);
      const bool ball = shape == RegionShape::NormBall;
      std::vector<double> row{ball ? 0.0 : 1.0, level, ball ? reg.radius : reg.halfwidths.maxCoeff()};
      for (int j = 0; j < d; ++j) row.push_back(reg.center(j));
      for (int j = 0; j < d; ++j) row.push_back(ball ? reg.radius : reg.halfwidths(j));
      row.push_back(reg.contains(bp.problem.theta_star) ? 1.0 : 0.0);
      res.table.add_row(std::move(row));
      regions.push_back(region_to_json(reg));
    }
  res.table.sort_by({"shape", "level"});
  res.summary.pass = true;
  res.summary.headline = {{"regions", regions}, {"validate_bootstrap", report_json(vboot)}};
  finish(res, "bootstrap-ci", cfg, ctx, t0);
  return res;
}

ExperimentResult constants_report(const ProblemRunConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const auto c = theoretical_constants(bp.problem, bp.noise, s, cfg.n, bp.theta0);
  ExperimentResult res;
  res.table = ResultTable({"C_Q", "C_Q_min", "C_Q_min_half", "C_Q_min_floor", "C_Sigma", "C_S", "C_infty_prime",
                           "C_infty", "C_Q_xi", "C_1", "C_2", "L2_effective", "L_H", "K_2", "nominal_only"});
  res.table.add_row({c.c_q, c.c_q_min, c.c_q_min_half, c.c_q_min_floor, c.c_sigma, c.c_s, c.c_infty_prime, c.c_infty,
                     c.c_q_xi, c.c_1, c.c_2, c.l2_effective, c.l_h, c.k_2, c.nominal_only ? 1.0 : 0.0});
  res.summary.pass = true;
  res.summary.headline = constants_to_json(c);
  finish(res, "constants", cfg, ctx, t0);
  return res;
}

ExperimentResult validate_report(const ProblemRunConfig& cfg, const RunContext& ctx) {
  const auto t0 = Clock::now();
  const BuiltProblem bp = build_problem(cfg.problem, ctx.seed);
  const StepSchedule s = cfg.schedule.make();
  const BoundedWeightLaw law = make_weight_law(cfg.weights.alpha, cfg.weights.beta);
  const auto vb = validate_basic(s, bp.problem);
  const auto vboot = validate_bootstrap(s, bp.problem, bp.noise, law.wmin, law.wmax);
  ExperimentResult res;
  res.table = ResultTable({"check", "lhs", "rhs", "pass"});
  auto names = nlohmann::json::array();
  long idx = 0;
  for (const auto* rep : {&vb, &vboot})
    for (const auto& ch : rep->checks) {
      res.table.add_row({static_cast<double>(++idx), ch.lhs, ch.rhs, ch.pass ? 1.0 : 0.0});
      names.push_back({{"check", idx}, {"name", ch.name}, {"inequality", ch.inequality}, {"pass", ch.pass}});
    }
  res.summary.pass = vb.pass() && vboot.pass();
  res.summary.headline = {{"checks", names}, {"validate_basic", report_json(vb)}, {"validate_bootstrap", report_json(vboot)}};
  finish(res, "validate", cfg, ctx, t0);
  return res;
}

}  // namespace sgdboot
