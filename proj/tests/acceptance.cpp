#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sgdboot/cli.hpp"
#include "sgdboot/experiments.hpp"

using namespace sgdboot;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::string suite;
  std::function<Verdict(const RunContext&)> run;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Verdict lower_bound(const RunContext& ctx) {
  LowerBoundConfig cfg;
  cfg.n_max = 1L << 20;
  const auto r = lower_bound_scan(cfg, ctx);
  const double s2 = scalar_sigma2(2, 0.5, 1.0), s3 = scalar_sigma2(3, 0.5, 1.0);
  const bool spots = std::abs(s2 - 0.25) < 1e-15 && std::abs(s3 - 0.44846) < 1e-4;
  double worst = 0.0;
  for (const auto& [g, v] : r.summary.headline["relative_change_last_octave"].items())
    if (std::stod(g) <= 0.8 + 1e-12) worst = std::max(worst, v.get<double>());
  return {r.summary.pass && spots, "all_positive=" + std::string(r.summary.headline["all_positive"] ? "yes" : "no") +
                                       " max_rel_change(gamma<=0.8)=" + fmt(worst) + " sigma2(2)=" + fmt(s2) +
                                       " sigma2(3)=" + fmt(s3)};
}

Verdict identities(const RunContext& ctx) {
  const auto r = identity_check(IdentityConfig{}, ctx);
  const double a = r.summary.headline["max_residual_sum"], b = r.summary.headline["max_residual_single"];
  return {a <= 1e-10 && b <= 1e-10, "instances=100 max_residual_sum=" + fmt(a) + " max_residual_single=" + fmt(b)};
}

Verdict envelopes(const RunContext& ctx) {
  const auto r = identity_check(IdentityConfig{}, ctx);
  const long v = r.summary.headline["envelope_violations"];
  return {v == 0, "instances=100 envelope_violations=" + std::to_string(v)};
}

Verdict sigma_rate(const RunContext& ctx) {
  const auto r = sigma_scan(SigmaScanConfig{}, ctx);
  const long validated = r.summary.headline["validated_rows"];
  const bool all = validated == static_cast<long>(r.table.rows.size());
  return {r.summary.pass && all, "points=" + std::to_string(r.table.rows.size()) +
                                     " max_scaled_over_bound=" + fmt(r.summary.headline["max_scaled_over_bound"])};
}

Verdict moments(const RunContext& ctx) {
  const auto r = moment_check(MomentConfig{}, ctx);
  return {r.summary.pass, "R=2000 k_max=4096 max_empirical_over_bound=" +
                              fmt(r.summary.headline["max_empirical_over_bound"])};
}

Verdict concentration(const RunContext& ctx) {
  const auto r = concentration_check(ConcentrationConfig{}, ctx);
  const double f = r.summary.headline["violation_fraction"];
  return {f <= 0.01, "n=1024 R=500 violation_fraction=" + fmt(f) + " threshold=" + fmt(r.summary.headline["threshold"])};
}

Verdict clt(const RunContext& ctx) {
  const auto r = clt_sanity(CltConfig{}, ctx);
  const double ks = r.table.column("ks_axis0").back();
  return {ks <= 0.03, "n=4096 R=5000 ks=" + fmt(ks) + " projected=" + fmt(r.table.column("projected_ks").back())};
}

Verdict coverage(const RunContext& ctx) {
  const auto r = coverage_study(CoverageConfig{}, ctx);
  const auto& lv = r.summary.headline["levels"][0];
  const double c = lv["ball_coverage"];
  const bool validated = r.summary.headline["validate_bootstrap"]["pass"];
  return {c >= 0.87 && c <= 0.93 && r.summary.headline["diverged"] == 0,
          "level=0.9 n=4096 M=400 R=2000 ball_coverage=" + fmt(c) + " se=" + fmt(lv["ball_se"]) +
              " box_coverage=" + fmt(lv["box_coverage"]) + " validate_bootstrap=" + (validated ? "pass" : "fail")};
}

Verdict rates(const RunContext& ctx) {
  const auto r = rate_fit(RateFitConfig{}, ctx);
  std::string d;
  for (const auto& f : r.summary.headline["fits"]) {
    d += "gamma=" + fmt(f["gamma"]) + " slope_sigma_inf=" + fmt(f["slope_sigma_inf"]) +
         " sigma_n_below_everywhere=" + (f["sigma_n_below_sigma_inf_everywhere"] ? "yes" : "no") + " ";
  }
  return {r.summary.pass, d + "window=[-0.35,-0.05]"};
}

Verdict determinism(const RunContext&) {
  const std::vector<std::vector<std::string>> cmds{
      {"lower-bound", "--set", "run.n_max=65536"},
      {"sigma-scan", "--set", "run.n_max=4096"},
      {"coverage", "--set", "run.n=256", "--set", "run.m=40", "--set", "run.replications=40", "--set",
       "noise.estimation_draws=16384"},
      {"clt-sanity", "--set", "run.n_grid=256", "--set", "run.replications=500"},
      {"rate-fit", "--set", "run.n_grid=256,512", "--set", "run.replications=500"},
      {"moment-check", "--set", "run.k_max=256", "--set", "run.replications=200", "--set",
       "noise.estimation_draws=16384"},
      {"concentration-check", "--set", "run.n=256", "--set", "run.replications=50", "--set",
       "noise.estimation_draws=16384"},
      {"identity-check", "--set", "run.instances=20"},
      {"sgd-run", "--set", "run.n=512", "--set", "noise.estimation_draws=16384"},
      {"bootstrap-ci", "--set", "run.n=256", "--set", "run.m=40", "--set", "noise.estimation_draws=16384"},
      {"constants", "--set", "noise.estimation_draws=16384"},
      {"validate", "--set", "noise.estimation_draws=16384"},
  };
  std::vector<std::string> bad;
  for (const auto& c : cmds) {
    std::string outs[2];
    bool usage = false;
    for (int t = 0; t < 2; ++t) {
      auto args = c;
      args.insert(args.end(), {"--seed", "1234", "--threads", t == 0 ? "1" : "4"});
      std::ostringstream out, err;
      usage = usage || dispatch(args, out, err) == kExitUsage;
      outs[t] = out.str();
    }
    if (usage || outs[0].empty() || outs[0] != outs[1]) bad.push_back(c[0]);
  }
  std::string d = "subcommands=" + std::to_string(cmds.size()) + " mismatched=";
  for (const auto& b : bad) d += b + ";";
  if (bad.empty()) d += "none";
  return {bad.empty(), d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string suite = "fast";
  std::vector<int> only;
  int threads = 0;
  app.add_option("--suite", suite, "fast, extended or all")->check(CLI::IsMember({"fast", "extended", "all"}));
  app.add_option("--only", only, "criterion numbers to run");
  app.add_option("--threads", threads, "worker threads (0: machine parallelism)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "lower-bound reproduction", "fast", lower_bound},
      {2, "matrix identities", "fast", identities},
      {3, "spectral envelopes", "fast", envelopes},
      {4, "Sigma_n to Sigma_infty rate", "fast", sigma_rate},
      {5, "second-moment bound", "fast", moments},
      {6, "matrix-Bernstein concentration", "fast", concentration},
      {7, "CLT sanity", "fast", clt},
      {8, "bootstrap coverage", "fast", coverage},
      {9, "rate separation", "extended", rates},
      {10, "determinism gate", "fast", determinism},
  };
  RunContext ctx;
  ctx.threads = threads;
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    if (only.empty() && suite != "all" && c.suite != suite) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " " << c.title << ": " << v.detail << " ("
              << fmt(secs) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
