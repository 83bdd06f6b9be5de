#include "sgdboot/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sgdboot {

namespace {

struct Command {
  std::string name;
  std::string description;
  std::string columns;
  std::function<ExperimentResult(const KeyValues&, const RunContext&)> run;
  std::function<KeyValues()> defaults;
};

template <class Cfg>
Command make_command(std::string name, std::string description, std::string columns,
                     ExperimentResult (*fn)(const Cfg&, const RunContext&)) {
  return {std::move(name), std::move(description), std::move(columns),
          [fn](const KeyValues& kv, const RunContext& ctx) { return fn(config_from<Cfg>(kv), ctx); },
          [] { return config_to_kv(Cfg{}); }};
}

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      make_command<SgdRunConfig>("sgd-run", "Run one SGD trajectory and record iterates.",
                                 "  k          step index\n"
                                 "  theta[j]   coordinate j of theta_k\n"
                                 "  alpha_k    step size at k\n",
                                 &sgd_run),
      make_command<BootstrapCiConfig>(
          "bootstrap-ci", "Multiplier-bootstrap confidence regions around the averaged iterate.",
          "  shape                 0 NormBall, 1 CoordinateBox\n"
          "  level                 nominal coverage level\n"
          "  radius                ball radius, or the largest box half-width\n"
          "  center[j]             coordinate j of theta_bar_n\n"
          "  halfwidth[j]          box half-width along j (ball: the radius)\n"
          "  contains_theta_star   1 if theta* lies in the region\n",
          &bootstrap_ci),
      make_command<LowerBoundConfig>("lower-bound", "Scalar lower-bound scan of sigma^2_{n,gamma}.",
                                     "  gamma       step-size exponent\n"
                                     "  n           horizon\n"
                                     "  sigma2      sigma^2_{n,gamma} = n^{-1} sum_j Q_j^2\n"
                                     "  statistic   n^{1-gamma} |sigma2 - 1|\n",
                                     &lower_bound_scan),
      make_command<SigmaScanConfig>("sigma-scan", "Distance between Sigma_n and Sigma_infty over a grid.",
                                    "  gamma           step-size exponent\n"
                                    "  n               horizon\n"
                                    "  frob_norm       |Sigma_n - Sigma_infty|_F\n"
                                    "  spectral_norm   |Sigma_n - Sigma_infty|\n"
                                    "  scaled          spectral_norm * n^{1-gamma}\n"
                                    "  bound           C'_infty\n"
                                    "  validated       1 if the step-size validator passes (bound asserted)\n",
                                    &sigma_scan),
      make_command<CoverageConfig>("coverage", "Empirical coverage of bootstrap regions over replications.",
                                   "  replication   replication index (1-based)\n"
                                   "  level         nominal level\n"
                                   "  ball_radius   NormBall radius\n"
                                   "  ball_covered  1 if theta* lies in the NormBall region\n"
                                   "  box_covered   1 if theta* lies in the CoordinateBox region\n"
                                   "  status        0 ok, 1 diverged\n",
                                   &coverage_study),
      make_command<CltConfig>("clt-sanity", "Normal approximation of the whitened averaged iterate.",
                              "  n              horizon\n"
                              "  projected_ks   max KS over projections (lower-bound proxy for d_Conv)\n"
                              "  ball_ks        KS of squared radii vs chi-square(d) (lower-bound proxy)\n"
                              "  ks_axis0       KS of the first coordinate vs N(0,1)\n",
                              &clt_sanity),
      make_command<RateFitConfig>("rate-fit", "Kolmogorov distance decay under Sigma_n and Sigma_infty scaling.",
                                  "  gamma              step-size exponent\n"
                                  "  n                  horizon\n"
                                  "  sigma2             sigma^2_{n,gamma}\n"
                                  "  ks_sigma_n         KS of sqrt(n) theta_bar_n / sqrt(sigma2) vs N(0,1)\n"
                                  "  ks_sigma_inf       KS of sqrt(n) theta_bar_n vs N(0,1)\n"
                                  "  usable_sigma_n     1 if ks_sigma_n is above the Monte Carlo noise floor\n"
                                  "  usable_sigma_inf   1 if ks_sigma_inf is above the Monte Carlo noise floor\n",
                                  &rate_fit),
      make_command<MomentConfig>("moment-check", "Second moment of the last iterate against its bound.",
                                 "  k           step index\n"
                                 "  empirical   mean of |theta_k - theta*|^2 over replications\n"
                                 "  bound       C_1 exp{-(mu c0/4)(k+k0)^{1-gamma}}(|theta_0-theta*|^2+sigma_2^2)"
                                 " + C_2 sigma_2^2 alpha_k\n"
                                 "  pass        1 if empirical <= bound\n",
                                 &moment_check),
      make_command<ConcentrationConfig>("concentration-check", "Matrix Bernstein concentration of Sigma_n^b.",
                                        "  draw        data draw (1-based)\n"
                                        "  deviation   |Sigma_n^b - Sigma_n|\n"
                                        "  threshold   (10 C_{Q,xi} / 3) sqrt(log(2 d n) / n)\n"
                                        "  violated    1 if deviation > threshold\n",
                                        &concentration_check),
      make_command<IdentityConfig>("identity-check", "Q-matrix identities and spectral envelopes.",
                                   "  instance              instance index (1-based)\n"
                                   "  d, n, gamma           instance dimension, horizon, exponent\n"
                                   "  residual_sum          relative residual of the summed identity\n"
                                   "  residual_single       largest relative residual of the single-index identity\n"
                                   "  lambda_max_q, c_q     largest eigenvalue of Q_i and C_Q\n"
                                   "  lambda_min_q, c_q_min smallest eigenvalue of Q_i and C_Q^min\n"
                                   "  lambda_min_sigma_n    smallest eigenvalue of Sigma_n\n"
                                   "  sigma_floor           1 / C_Sigma^2\n"
                                   "  envelope_violations   number of failed envelopes (0..3)\n"
                                   "  pass                  1 if residuals <= tolerance and no violations\n",
                                   &identity_check),
      make_command<ProblemRunConfig>("constants", "Theoretical constants for a configuration.",
                                     "  one column per constant: C_Q, C_Q_min, C_Q_min_half, C_Q_min_floor,\n"
                                     "  C_Sigma, C_S, C_infty_prime, C_infty, C_Q_xi, C_1, C_2, L2_effective,\n"
                                     "  L_H, K_2, nominal_only (1 if the noise is unbounded)\n",
                                     &constants_report),
      make_command<ProblemRunConfig>("validate", "Run the step-size and bootstrap validators.",
                                     "  check   check index (names in the JSON summary)\n"
                                     "  lhs     left-hand side of the inequality\n"
                                     "  rhs     right-hand side of the inequality\n"
                                     "  pass    1 if the inequality holds\n",
                                     &validate_report),
  };
  return cmds;
}

std::string keys_doc(const Command& c) {
  std::string s = "\nConfiguration keys (defaults):\n";
  for (const auto& [k, v] : c.defaults()) s += "  " + k + " = " + v + "\n";
  return s;
}

void write_output(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot open output " + path);
  f << text;
  if (!f) throw std::ios_base::failure("write failed for " + path);
}

}  // namespace

void emit(const ExperimentResult& res, const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  std::string text;
  if (cfg.format == OutputFormat::Csv) {
    text = to_csv(res.table);
  } else {
    auto j = to_json(res.table);
    j["summary"] = to_json(res.summary);
    text = j.dump(2) + "\n";
  }
  write_output(cfg.out, out, text);
  const auto summary = to_json(res.summary).dump();
  if (!cfg.summary_path.empty())
    write_output(cfg.summary_path, err, summary + "\n");
  else
    err << summary << '\n';
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sgdboot: SGD Polyak-Ruppert averaging, multiplier bootstrap and normal-approximation experiments",
               "sgdboot"};
  app.require_subcommand(1);
  CliConfig cfg;
  std::string format = "csv";
  std::string gamma_list;
  long n_max = 0;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands()) {
    auto* sub = app.add_subcommand(c.name, c.description);
    sub->footer("Output columns:\n" + c.columns + keys_doc(c));
    sub->add_option("--config", cfg.config_path, "key = value configuration document")->check(CLI::ExistingFile);
    sub->add_option("--set", cfg.overrides, "inline override key=value (repeatable, wins over --config)");
    sub->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
    sub->add_option("--threads", cfg.threads, "worker threads (0: machine parallelism)")->capture_default_str();
    sub->add_option("--out", cfg.out, "output path (default: standard output)");
    sub->add_option("--summary", cfg.summary_path, "JSON summary path (default: one line on standard error)");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    sub->add_flag("--log", cfg.log, "one progress line per grid cell on standard error");
    if (c.name == "lower-bound") {
      sub->add_option("--gamma", gamma_list, "comma-separated gamma grid (run.gamma_grid)");
      sub->add_option("--n-max", n_max, "largest horizon, a power of 2 (run.n_max)");
    }
    subs[c.name] = sub;
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitPass : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    std::ostringstream o, e2;
    app.exit(e, o, e2);
    out << o.str();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    app.exit(e, o, e2);
    err << e2.str() << o.str();
    return kExitUsage;
  }

  const Command* cmd = nullptr;
  for (const auto& c : commands())
    if (subs[c.name]->parsed()) cmd = &c;
  if (!cmd) {
    err << "sgdboot: missing subcommand\n";
    return kExitUsage;
  }
  cfg.subcommand = cmd->name;
  cfg.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;

  ExperimentResult res;
  try {
    KeyValues kv;
    if (!cfg.config_path.empty()) kv = read_config_file(cfg.config_path);
    for (const auto& o : cfg.overrides) apply_override(kv, o);
    if (!gamma_list.empty()) kv["run.gamma_grid"] = gamma_list;
    if (n_max > 0) kv["run.n_max"] = std::to_string(n_max);
    RunContext ctx;
    ctx.seed = cfg.seed;
    ctx.threads = cfg.threads;
    ctx.log = cfg.log;
    res = cmd->run(kv, ctx);
  } catch (const ConfigError& e) {
    err << "sgdboot " << cmd->name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "sgdboot " << cmd->name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "sgdboot " << cmd->name << ": " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    emit(res, cfg, out, err);
  } catch (const std::exception& e) {
    err << "sgdboot: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!res.summary.pass) {
    if (cmd->name == "validate") {
      for (const auto& ch : res.summary.headline["checks"])
        if (!ch["pass"].get<bool>())
          err << "violated: " << ch["name"].get<std::string>() << ": " << ch["inequality"].get<std::string>() << '\n';
    }
    return kExitAssertion;
  }
  return kExitPass;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace sgdboot
