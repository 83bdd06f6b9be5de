#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sgdboot/distances.hpp"

using namespace sgdboot;

namespace {

double ks_grid(double v1, double v2) {
  double best = 0.0;
  for (double x = 0.0; x <= 10.0; x += 1e-5)
    best = std::max(best, std::abs(normal_cdf(x / std::sqrt(v1)) - normal_cdf(x / std::sqrt(v2))));
  return best;
}

std::vector<VectorXd> gaussian_samples(const MatrixXd& sigma, long count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const MatrixXd l = sigma.llt().matrixL();
  std::vector<VectorXd> out;
  for (long i = 0; i < count; ++i) {
    VectorXd v(sigma.rows());
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = z(rng);
    out.push_back(l * v);
  }
  return out;
}

MatrixXd sigma3() {
  MatrixXd s(3, 3);
  s << 2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.7;
  return s;
}

}  // namespace

TEST_CASE("two-Gaussian Kolmogorov distance") {
  CHECK(ks_two_gaussians_1d(2.0, 2.0) == 0.0);
  CHECK(ks_two_gaussians_1d(4.0, 1.0) == doctest::Approx(0.161337284416).epsilon(1e-9));
  CHECK(ks_two_gaussians_1d(4.0, 1.0) == ks_two_gaussians_1d(1.0, 4.0));
  const double xs = std::sqrt(8.0 * std::log(2.0) / 3.0);
  CHECK(std::abs(normal_cdf(xs / 2.0) - normal_cdf(xs)) == doctest::Approx(ks_two_gaussians_1d(4.0, 1.0)));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng);
    CHECK(std::abs(ks_two_gaussians_1d(a, b) - ks_grid(a, b)) <= 1e-4);
    CHECK(ks_two_gaussians_1d(a, b) <= tv_comparison_bound(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b)));
  }
  CHECK_THROWS_AS(ks_two_gaussians_1d(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("empirical one-dimensional KS") {
  CHECK(empirical_ks_1d({0.0, 0.0}, 1.0) == doctest::Approx(0.5));
  std::vector<double> s{-1.2, 0.3, 0.9, 2.5, -0.1};
  std::vector<double> s2;
  for (double x : s) s2.push_back(2.0 * x);
  CHECK(empirical_ks_1d(s, 1.3) == doctest::Approx(empirical_ks_1d(s2, 5.2)).epsilon(1e-14));
  CHECK_THROWS_AS(empirical_ks_1d({1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(empirical_ks_1d({1.0, 2.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(empirical_ks_1d({1.0, NAN}, 1.0), std::invalid_argument);

  int ok = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.5);
    std::vector<double> v(10000);
    for (auto& x : v) x = z(rng);
    ok += empirical_ks_1d(v, 2.25) <= 1.63 / 100.0 * 1.5;
  }
  CHECK(ok >= 99);
}

TEST_CASE("projected proxy") {
  const MatrixXd sig = sigma3();
  auto samples = gaussian_samples(sig, 10000, 7);
  const DistanceReport r = projected_convex_proxy(samples, sig, 50, 11);
  CHECK(r.value <= 0.03);
  CHECK(r.estimator == Estimator::ProjectedKS);
  CHECK(r.detail["lower_bound_proxy"] == true);
  CHECK(r.value == projected_convex_proxy(samples, sig, 50, 11).value);

  std::vector<double> first;
  for (const auto& v : samples) first.push_back(v(0));
  const VectorXd e1 = VectorXd::Unit(3, 0);
  CHECK(projected_convex_proxy(samples, sig, {e1}).value ==
        doctest::Approx(empirical_ks_1d(first, sig(0, 0))).epsilon(1e-14));

  for (auto& v : samples) v(0) += 10.0 * std::sqrt(sig(0, 0)) * 2.0;
  CHECK(projected_convex_proxy(samples, sig, 50, 11).value >= 0.9);
  CHECK_THROWS_AS(projected_convex_proxy(samples, MatrixXd::Identity(2, 2), 5, 1), std::invalid_argument);
}

TEST_CASE("ball-class proxy") {
  const MatrixXd sig = sigma3();
  auto samples = gaussian_samples(sig, 10000, 9);
  const DistanceReport r = ball_class_proxy(samples, sig);
  CHECK(r.value <= 0.03);
  CHECK(r.estimator == Estimator::BallClassKS);
  std::vector<VectorXd> scaled;
  for (const auto& v : samples) scaled.push_back(3.0 * v);
  CHECK(ball_class_proxy(scaled, 9.0 * sig).value == doctest::Approx(r.value).epsilon(1e-10));
  const std::vector<VectorXd> origin(20, VectorXd::Zero(3));
  CHECK(ball_class_proxy(origin, sig).value == doctest::Approx(1.0));
  CHECK(to_json(r)["estimator"] == to_string(Estimator::BallClassKS));
}

TEST_CASE("TV comparison bound") {
  const MatrixXd s = sigma3();
  CHECK(tv_comparison_bound(s, s) <= 1e-14);
  CHECK(tv_comparison_bound(1.1 * MatrixXd::Identity(4, 4), MatrixXd::Identity(4, 4)) ==
        doctest::Approx(0.3).epsilon(1e-12));
  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(0, 0) = -1;
  CHECK_THROWS_AS(tv_comparison_bound(bad, MatrixXd::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("log-log slope") {
  std::vector<double> x, y;
  for (int e = 4; e <= 12; ++e) {
    x.push_back(std::pow(2.0, e));
    y.push_back(3.0 * std::pow(2.0, -0.5 * e));
  }
  const SlopeFit f = loglog_slope(x, y);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.stderr_slope <= 1e-10);
  CHECK(f.points == 9);
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), std::invalid_argument);
}
