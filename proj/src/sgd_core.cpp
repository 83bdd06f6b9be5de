#include "sgdboot/sgd_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "sgdboot/table.hpp"

namespace sgdboot {

DivergedError::DivergedError(long step, const std::string& what) : std::runtime_error(what), step_(step) {}

NoiseSample replay_noise(const NoiseOracle& o, std::uint64_t data_key, long k) {
  if (k < 1) throw std::invalid_argument("replay_noise: k must be >= 1");
  SplitMix64 eng(substream(data_key, static_cast<std::uint64_t>(k)));
  return sample_noise(o, eng);
}

std::vector<NoiseSample> record_noise(const NoiseOracle& o, std::uint64_t data_key, long n) {
  std::vector<NoiseSample> tape;
  tape.reserve(n > 1 ? n - 1 : 0);
  for (long k = 1; k < n; ++k) tape.push_back(replay_noise(o, data_key, k));
  return tape;
}

namespace {

SgdRun run_impl(const ProblemSpec& p, const StepSchedule& s, long n, const VectorXd& theta0,
                const std::function<const NoiseSample&(long)>& noise, const SgdOptions& opts) {
  if (n < 2) throw std::invalid_argument("run_sgd: n must be >= 2");
  if (theta0.size() != p.dim) throw std::invalid_argument("run_sgd: theta0 dimension mismatch");
  SgdRun run;
  run.n = n;
  run.theta0 = theta0;
  const int d = p.dim;
  VectorXd theta = theta0, sum = theta0, grad(d);
  GradScratch ws(d);

  auto cps = opts.checkpoints;
  std::sort(cps.begin(), cps.end());
  auto pms = opts.prefix_means;
  std::sort(pms.begin(), pms.end());
  std::size_t ci = 0, pi = 0;
  auto record = [&](long k) {
    while (ci < cps.size() && cps[ci] == k) run.checkpoints.emplace_back(k, theta), ++ci;
    while (pi < pms.size() && pms[pi] == k + 1) run.prefix_means.emplace_back(k + 1, sum / double(k + 1)), ++pi;
  };
  if (opts.trace) {
    run.trace.reserve(n);
    run.trace.push_back({0, theta, VectorXd::Zero(d), VectorXd::Zero(d), alpha(s, 0)});
  }
  record(0);

  for (long k = 1; k < n; ++k) {
    const NoiseSample& xi = noise(k);
    const double a = alpha(s, k);
    if (opts.trace) {
      TraceRecord rec;
      rec.k = k;
      rec.eta = xi.eta;
      rec.g = xi.has_g() ? xi.g_at(theta) : VectorXd::Zero(d);
      rec.alpha = a;
      stochastic_gradient(p, xi, theta, grad, ws);
      theta -= a * grad;
      rec.theta = theta;
      run.trace.push_back(std::move(rec));
    } else {
      stochastic_gradient(p, xi, theta, grad, ws);
      theta -= a * grad;
    }
    const double nrm = theta.norm();
    if (!std::isfinite(nrm) || nrm > kDivergenceNorm)
      throw DivergedError(k, "SGD iterate diverged at step " + std::to_string(k));
    sum += theta;
    record(k);
  }
  run.theta_last = theta;
  run.theta_bar = sum / static_cast<double>(n);
  return run;
}

}  // namespace

SgdRun run_sgd(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n, const VectorXd& theta0,
               std::uint64_t data_key, const SgdOptions& opts) {
  NoiseSample current;
  SgdRun run = run_impl(
      p, s, n, theta0,
      [&](long k) -> const NoiseSample& {
        current = replay_noise(o, data_key, k);
        return current;
      },
      opts);
  run.data_key = data_key;
  return run;
}

SgdRun run_sgd_on_tape(const ProblemSpec& p, const StepSchedule& s, const std::vector<NoiseSample>& tape,
                       const VectorXd& theta0, const SgdOptions& opts) {
  const long n = static_cast<long>(tape.size()) + 1;
  return run_impl(
      p, s, n, theta0, [&](long k) -> const NoiseSample& { return tape[k - 1]; }, opts);
}

void write_trace_csv(std::ostream& os, const SgdRun& run) {
  if (run.trace.empty()) throw std::invalid_argument("write_trace_csv: run has no trace");
  std::vector<std::string> cols{"k"};
  const auto d = run.trace.front().theta.size();
  for (Eigen::Index j = 0; j < d; ++j) cols.push_back("theta[" + std::to_string(j) + "]");
  cols.push_back("alpha_k");
  ResultTable t(cols);
  for (const auto& r : run.trace) {
    std::vector<double> row{static_cast<double>(r.k)};
    for (Eigen::Index j = 0; j < d; ++j) row.push_back(r.theta(j));
    row.push_back(r.alpha);
    t.add_row(std::move(row));
  }
  write_csv(os, t);
}

}  // namespace sgdboot
