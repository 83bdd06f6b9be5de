#include "sgdboot/distances.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "sgdboot/rng.hpp"

namespace sgdboot {

const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::KS1D: return "KS1D";
    case Estimator::ProjectedKS: return "ProjectedKS";
    case Estimator::BallClassKS: return "BallClassKS";
    case Estimator::TVComparisonBound: return "TVComparisonBound";
  }
  return "?";
}

nlohmann::json to_json(const DistanceReport& r) {
  return {{"estimator", to_string(r.estimator)}, {"value", r.value}, {"detail", r.detail}};
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double ks_two_gaussians_1d(double var1, double var2) {
  if (!(var1 > 0 && var2 > 0)) throw std::invalid_argument("ks_two_gaussians_1d: variances must be positive");
  if (var1 == var2) return 0.0;
  const double x = std::sqrt(var1 * var2 * std::log(var1 / var2) / (var1 - var2));
  return std::abs(normal_cdf(x / std::sqrt(var1)) - normal_cdf(x / std::sqrt(var2)));
}

namespace {

template <class Cdf>
double ks_sorted(std::vector<double>& v, Cdf cdf) {
  std::sort(v.begin(), v.end());
  const double m = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = cdf(v[i]);
    d = std::max(d, std::max((i + 1) / m - f, f - i / m));
  }
  return d;
}

void check_sigma(const MatrixXd& sigma, Eigen::Index d) {
  if (sigma.rows() != d || sigma.cols() != d) throw std::invalid_argument("distance: sigma dimension mismatch");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()(0) > 1e-300) || (sigma - sigma.transpose()).norm() > 1e-10 * sigma.norm())
    throw std::invalid_argument("distance: sigma must be symmetric positive definite");
}

}  // namespace

double empirical_ks_1d(std::vector<double> samples, double var) {
  if (samples.size() < 2) throw std::invalid_argument("empirical_ks_1d: need at least 2 samples");
  if (!(var > 0)) throw std::invalid_argument("empirical_ks_1d: variance must be positive");
  for (double x : samples)
    if (!std::isfinite(x)) throw std::invalid_argument("empirical_ks_1d: non-finite sample");
  const double sd = std::sqrt(var);
  return ks_sorted(samples, [sd](double x) { return normal_cdf(x / sd); });
}

DistanceReport projected_convex_proxy(const std::vector<VectorXd>& samples, const MatrixXd& sigma,
                                      const std::vector<VectorXd>& directions) {
  if (samples.empty()) throw std::invalid_argument("projected_convex_proxy: no samples");
  const auto d = samples.front().size();
  check_sigma(sigma, d);
  if (directions.empty()) throw std::invalid_argument("projected_convex_proxy: no directions");
  std::vector<double> vals(directions.size());
  const long nd = static_cast<long>(directions.size());
#pragma omp parallel for schedule(static)
  for (long j = 0; j < nd; ++j) {
    const VectorXd u = directions[j].normalized();
    std::vector<double> proj(samples.size());
    for (std::size_t r = 0; r < samples.size(); ++r) proj[r] = u.dot(samples[r]);
    vals[j] = empirical_ks_1d(std::move(proj), u.dot(sigma * u));
  }
  const auto it = std::max_element(vals.begin(), vals.end());
  DistanceReport rep;
  rep.estimator = Estimator::ProjectedKS;
  rep.value = *it;
  const VectorXd best = directions[it - vals.begin()].normalized();
  rep.detail = {{"directions", directions.size()},
                {"argmax_direction", std::vector<double>(best.data(), best.data() + best.size())},
                {"lower_bound_proxy", true}};
  return rep;
}

DistanceReport projected_convex_proxy(const std::vector<VectorXd>& samples, const MatrixXd& sigma, int n_directions,
                                      std::uint64_t direction_key) {
  if (n_directions < 1) throw std::invalid_argument("projected_convex_proxy: n_directions must be >= 1");
  if (samples.empty()) throw std::invalid_argument("projected_convex_proxy: no samples");
  const auto d = samples.front().size();
  std::vector<VectorXd> dirs;
  for (Eigen::Index i = 0; i < d; ++i) dirs.push_back(VectorXd::Unit(d, i));
  SplitMix64 eng(direction_key);
  for (int j = 0; j < n_directions; ++j) {
    VectorXd u(d);
    do {
      std::normal_distribution<double> nd;
      for (Eigen::Index i = 0; i < d; ++i) u(i) = nd(eng);
    } while (u.norm() == 0.0);
    dirs.push_back(u.normalized());
  }
  return projected_convex_proxy(samples, sigma, dirs);
}

DistanceReport ball_class_proxy(const std::vector<VectorXd>& samples, const MatrixXd& sigma) {
  if (samples.size() < 2) throw std::invalid_argument("ball_class_proxy: need at least 2 samples");
  const auto d = samples.front().size();
  check_sigma(sigma, d);
  Eigen::LLT<MatrixXd> llt(sigma);
  std::vector<double> r2(samples.size());
  for (std::size_t r = 0; r < samples.size(); ++r) r2[r] = llt.matrixL().solve(samples[r]).squaredNorm();
  const double half = 0.5 * static_cast<double>(d);
  DistanceReport rep;
  rep.estimator = Estimator::BallClassKS;
  rep.value = ks_sorted(r2, [half](double x) { return x <= 0 ? 0.0 : boost::math::gamma_p(half, 0.5 * x); });
  rep.detail = {{"degrees_of_freedom", d}, {"lower_bound_proxy", true}};
  return rep;
}

double tv_comparison_bound(const MatrixXd& sigma1, const MatrixXd& sigma2) {
  check_sigma(sigma1, sigma1.rows());
  check_sigma(sigma2, sigma1.rows());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma2);
  const MatrixXd isq = es.operatorInverseSqrt();
  const MatrixXd m = isq * sigma1 * isq - MatrixXd::Identity(sigma1.rows(), sigma1.cols());
  return 1.5 * m.norm();
}

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
  const int n = static_cast<int>(x.size());
  double mx = 0, my = 0;
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("loglog_slope: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (int i = 0; i < n; ++i) {
      const double e = ly[i] - f.intercept - f.slope * lx[i];
      rss += e * e;
    }
    f.stderr_slope = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

}  // namespace sgdboot
