#include "sgdboot/bootstrap.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "sgdboot/table.hpp"

namespace sgdboot {

BoundedWeightLaw make_weight_law(double alpha_shape, double beta_shape) {
  if (!(alpha_shape > 0 && beta_shape > 0)) throw std::invalid_argument("weight law: shapes must be positive");
  const double s = alpha_shape + beta_shape;
  if (!(s + 1.0 < beta_shape / alpha_shape))
    throw std::invalid_argument("weight law: positivity condition alpha+beta+1 < beta/alpha fails");
  const double ex = alpha_shape / s;
  const double vx = alpha_shape * beta_shape / (s * s * (s + 1.0));
  BoundedWeightLaw law;
  law.alpha_shape = alpha_shape;
  law.beta_shape = beta_shape;
  law.b = 1.0 / std::sqrt(vx);
  law.a = 1.0 - ex / std::sqrt(vx);
  law.wmin = law.a;
  law.wmax = law.a + law.b;
  return law;
}

BoundedWeightLaw unit_weight_law() {
  BoundedWeightLaw law;
  law.a = 1.0;
  law.b = 0.0;
  law.wmin = law.wmax = 1.0;
  law.degenerate = true;
  return law;
}

namespace {

bool small_half_integer(double shape) { return shape <= 8.0 && std::floor(2.0 * shape) == 2.0 * shape; }

}  // namespace

WeightSampler::WeightSampler(const BoundedWeightLaw& law)
    : law_(law),
      ga_(law.degenerate ? 1.0 : law.alpha_shape),
      gb_(law.degenerate ? 1.0 : law.beta_shape),
      exact_a_(small_half_integer(law.alpha_shape)),
      exact_b_(small_half_integer(law.beta_shape)) {}

// Ga(k/2) = -log(U_1 ... U_{floor(k/2)}) plus Z^2/2 when k is odd.
double WeightSampler::half_integer_gamma(double shape, SplitMix64& eng) {
  double prod = 1.0;
  for (int i = 0; i < static_cast<int>(shape); ++i) prod *= 1.0 - std::uniform_real_distribution<double>()(eng);
  double x = -std::log(prod);
  if (2.0 * shape != 2.0 * std::floor(shape)) {
    const double z = std::normal_distribution<double>()(eng);
    x += 0.5 * z * z;
  }
  return x;
}

double WeightSampler::operator()(SplitMix64& eng) {
  if (law_.degenerate) return 1.0;
  const double x = exact_a_ ? half_integer_gamma(law_.alpha_shape, eng) : ga_(eng);
  const double y = exact_b_ ? half_integer_gamma(law_.beta_shape, eng) : gb_(eng);
  return law_.a + law_.b * (x / (x + y));
}

ReplicateDivergedError::ReplicateDivergedError(long replicate, long step)
    : DivergedError(step, "bootstrap replicate " + std::to_string(replicate) + " diverged at step " +
                              std::to_string(step)),
      replicate_(replicate) {}

namespace {

VectorXd replicate_root(const ProblemSpec& p, const std::vector<NoiseSample>& tape, const std::vector<double>& alphas,
                        const VectorXd& theta0, const VectorXd& theta_bar, const BoundedWeightLaw& law,
                        std::uint64_t weight_key) {
  const long n = static_cast<long>(tape.size()) + 1;
  const int d = p.dim;
  VectorXd theta = theta0, sum = theta0, grad(d);
  GradScratch ws(d);
  SplitMix64 eng(weight_key);
  WeightSampler w(law);
  for (long k = 1; k < n; ++k) {
    const double wk = w(eng);
    stochastic_gradient(p, tape[k - 1], theta, grad, ws);
    theta -= (alphas[k] * wk) * grad;
    const double nrm = theta.norm();
    if (!std::isfinite(nrm) || nrm > kDivergenceNorm) throw DivergedError(k, "bootstrap trajectory diverged");
    sum += theta;
  }
  return std::sqrt(static_cast<double>(n)) * (sum / static_cast<double>(n) - theta_bar);
}

std::vector<double> alphas_for(const StepSchedule& s, long n) {
  std::vector<double> a(n);
  for (long k = 0; k < n; ++k) a[k] = alpha(s, k);
  return a;
}

}  // namespace

VectorXd run_bootstrap_replicate_on_tape(const ProblemSpec& p, const StepSchedule& s,
                                         const std::vector<NoiseSample>& tape, const VectorXd& theta0,
                                         const VectorXd& theta_bar, const BoundedWeightLaw& law,
                                         std::uint64_t weight_key) {
  return replicate_root(p, tape, alphas_for(s, static_cast<long>(tape.size()) + 1), theta0, theta_bar, law,
                        weight_key);
}

VectorXd run_bootstrap_replicate(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                 const VectorXd& theta0, std::uint64_t data_key, const BoundedWeightLaw& law,
                                 std::uint64_t weight_key) {
  const auto tape = record_noise(o, data_key, n);
  const SgdRun run = run_sgd_on_tape(p, s, tape, theta0);
  return run_bootstrap_replicate_on_tape(p, s, tape, theta0, run.theta_bar, law, weight_key);
}

BootstrapEnsemble build_ensemble_on_tape(const ProblemSpec& p, const StepSchedule& s,
                                         const std::vector<NoiseSample>& tape, const VectorXd& theta0,
                                         const VectorXd& theta_bar, const BoundedWeightLaw& law,
                                         std::uint64_t master_key, long m, int threads) {
  if (m < 2) throw std::invalid_argument("build_ensemble: m must be >= 2");
  const long n = static_cast<long>(tape.size()) + 1;
  BootstrapEnsemble e;
  e.m = m;
  e.n = n;
  e.center = theta_bar;
  e.master_key = master_key;
  e.roots.resize(m);
  e.weight_keys.resize(m);
  for (long j = 0; j < m; ++j) e.weight_keys[j] = substream(master_key, static_cast<std::uint64_t>(j + 1));
  const auto alphas = alphas_for(s, n);
  std::vector<std::optional<long>> failed(m);

  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (long j = 0; j < m; ++j) {
    try {
      e.roots[j] = replicate_root(p, tape, alphas, theta0, theta_bar, law, e.weight_keys[j]);
    } catch (const DivergedError& err) {
      failed[j] = err.step();
    }
  }
  for (long j = 0; j < m; ++j)
    if (failed[j]) throw ReplicateDivergedError(j + 1, *failed[j]);
  return e;
}

BootstrapEnsemble build_ensemble(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                 const VectorXd& theta0, std::uint64_t data_key, const BoundedWeightLaw& law,
                                 std::uint64_t master_key, long m, int threads) {
  const auto tape = record_noise(o, data_key, n);
  const SgdRun run = run_sgd_on_tape(p, s, tape, theta0);
  BootstrapEnsemble e = build_ensemble_on_tape(p, s, tape, theta0, run.theta_bar, law, master_key, m, threads);
  e.data_key = data_key;
  return e;
}

BootstrapEnsemble build_ensemble_serial(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                        const VectorXd& theta0, std::uint64_t data_key,
                                        const BoundedWeightLaw& law, std::uint64_t master_key, long m) {
  if (m < 2) throw std::invalid_argument("build_ensemble: m must be >= 2");
  const SgdRun run = run_sgd(p, o, s, n, theta0, data_key);
  BootstrapEnsemble e;
  e.m = m;
  e.n = n;
  e.center = run.theta_bar;
  e.data_key = data_key;
  e.master_key = master_key;
  for (long j = 1; j <= m; ++j) {
    const std::uint64_t wk = substream(master_key, static_cast<std::uint64_t>(j));
    e.weight_keys.push_back(wk);
    try {
      e.roots.push_back(run_bootstrap_replicate(p, o, s, n, theta0, data_key, law, wk));
    } catch (const DivergedError& err) {
      throw ReplicateDivergedError(j, err.step());
    }
  }
  return e;
}

const char* to_string(RegionShape s) {
  return s == RegionShape::NormBall ? "norm_ball" : "coordinate_box";
}

bool ConfidenceRegion::contains(const VectorXd& x) const {
  const VectorXd diff = x - center;
  if (shape == RegionShape::NormBall) return diff.norm() <= radius;
  for (Eigen::Index i = 0; i < diff.size(); ++i)
    if (std::abs(diff(i)) > halfwidths(i)) return false;
  return true;
}

namespace {

double order_statistic(std::vector<double> v, double level) {
  const long m = static_cast<long>(v.size());
  long idx = static_cast<long>(std::ceil(level * m - 1e-9));
  idx = std::clamp(idx, 1L, m);
  std::nth_element(v.begin(), v.begin() + (idx - 1), v.end());
  return v[idx - 1];
}

}  // namespace

ConfidenceRegion confidence_region(const BootstrapEnsemble& e, RegionShape shape, double level) {
  if (e.roots.empty()) throw std::invalid_argument("confidence_region: empty ensemble");
  if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("confidence_region: level must lie in (0, 1]");
  const double sn = std::sqrt(static_cast<double>(e.n));
  ConfidenceRegion r;
  r.shape = shape;
  r.level = level;
  r.center = e.center;
  const auto d = e.roots.front().size();
  if (shape == RegionShape::NormBall) {
    std::vector<double> norms;
    norms.reserve(e.roots.size());
    for (const auto& z : e.roots) norms.push_back(z.norm());
    r.radius = order_statistic(std::move(norms), level) / sn;
  } else {
    r.halfwidths.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      std::vector<double> v;
      v.reserve(e.roots.size());
      for (const auto& z : e.roots) v.push_back(std::abs(z(i)));
      r.halfwidths(i) = order_statistic(std::move(v), level) / sn;
    }
  }
  return r;
}

MatrixXd sigma_n_boot(const QFamily& qf, const std::vector<VectorXd>& etas) {
  if (static_cast<long>(etas.size()) != qf.n - 1) throw std::invalid_argument("sigma_n_boot: need n-1 eta draws");
  const auto d = qf.g.rows();
  MatrixXd acc = MatrixXd::Zero(d, d);
  VectorXd v(d);
  for (long i = 1; i < qf.n; ++i) {
    if (etas[i - 1].size() != d) throw std::invalid_argument("sigma_n_boot: dimension mismatch");
    v.noalias() = qf.q[i] * etas[i - 1];
    acc.noalias() += v * v.transpose();
  }
  return acc / static_cast<double>(qf.n);
}

MatrixXd sigma_n_boot(const QFamily& qf, const NoiseOracle& o, std::uint64_t data_key) {
  std::vector<VectorXd> etas;
  etas.reserve(qf.n - 1);
  for (long k = 1; k < qf.n; ++k) etas.push_back(replay_noise(o, data_key, k).eta);
  return sigma_n_boot(qf, etas);
}

void write_ensemble_csv(std::ostream& os, const BootstrapEnsemble& e) {
  std::vector<std::string> cols{"replicate"};
  const auto d = e.roots.empty() ? e.center.size() : e.roots.front().size();
  for (Eigen::Index j = 0; j < d; ++j) cols.push_back("root[" + std::to_string(j) + "]");
  ResultTable t(cols);
  for (std::size_t r = 0; r < e.roots.size(); ++r) {
    std::vector<double> row{static_cast<double>(r + 1)};
    for (Eigen::Index j = 0; j < d; ++j) row.push_back(e.roots[r](j));
    t.add_row(std::move(row));
  }
  write_csv(os, t);
}

nlohmann::json region_to_json(const ConfidenceRegion& r) {
  std::vector<double> center(r.center.data(), r.center.data() + r.center.size());
  nlohmann::json extent;
  if (r.shape == RegionShape::NormBall)
    extent = r.radius;
  else
    extent = std::vector<double>(r.halfwidths.data(), r.halfwidths.data() + r.halfwidths.size());
  return {{"shape", to_string(r.shape)}, {"level", r.level}, {"center", center}, {"radius_or_halfwidths", extent}};
}

}  // namespace sgdboot
