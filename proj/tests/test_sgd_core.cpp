#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgdboot/linearization.hpp"
#include "sgdboot/sgd_core.hpp"

using namespace sgdboot;

TEST_CASE("noiseless contraction and fixed point") {
  const ProblemSpec p = make_quadratic(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  const NoiseOracle z = make_zero_noise(p);
  const StepSchedule s(0.5, 1.0, 0.75);
  SgdOptions opts;
  opts.trace = true;
  const SgdRun r = run_sgd(p, z, s, 50, VectorXd::Ones(1), 1, opts);
  CHECK(r.trace[1].theta(0) == doctest::Approx(1.0 - alpha(s, 1)).epsilon(1e-15));
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    CHECK(r.trace[k].theta(0) == doctest::Approx((1.0 - alpha(s, k)) * r.trace[k - 1].theta(0)).epsilon(1e-15));
    CHECK(r.trace[k].theta(0) < r.trace[k - 1].theta(0));
    CHECK(r.trace[k].theta(0) > 0.0);
  }
  const SgdRun fixed = run_sgd(p, z, s, 100, p.theta_star, 2);
  CHECK(fixed.theta_bar == p.theta_star);
  CHECK_THROWS_AS(run_sgd(p, z, s, 1, p.theta_star, 2), std::invalid_argument);
  CHECK_THROWS_AS(run_sgd(p, z, s, 4, VectorXd::Zero(2), 2), std::invalid_argument);
}

TEST_CASE("averaged iterate equals the linear statistic on a scalar problem") {
  const ProblemSpec p = make_scalar_unit();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(1, 1));
  const StepSchedule s(0.5, 1.0, 0.75);
  const std::uint64_t key = derive_key(5, StreamTag::Data, 0);
  const SgdRun r = run_sgd(p, o, s, 4, p.theta_star, key);
  double a[4];
  for (int k = 0; k < 4; ++k) a[k] = 0.5 * std::pow(1.0 + k, -0.75);
  double expect = 0.0;
  for (int j = 1; j < 4; ++j) {
    double q = 0.0, prod = 1.0;
    for (int k = j; k < 4; ++k) {
      if (k > j) prod *= 1.0 - a[k];
      q += prod;
    }
    expect += a[j] * q * replay_noise(o, key, j).eta(0);
  }
  expect *= -0.25;
  CHECK(r.theta_bar(0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("replay contract") {
  const ProblemSpec p = make_quadratic(Eigen::Vector2d(1.0, 0.5).asDiagonal().toDenseMatrix(), VectorXd::Zero(2));
  NoiseParams np;
  np.covariance = MatrixXd::Identity(2, 2);
  np.l2 = 0.3;
  np.estimation_draws = 1L << 14;
  const NoiseOracle o = make_truncated_gaussian_noise(p, np);
  const StepSchedule s(0.5, 1.0, 0.75);
  const NoiseSample a = replay_noise(o, 99, 5), b = replay_noise(o, 99, 5);
  CHECK(a.eta == b.eta);
  CHECK(a.b == b.b);
  CHECK_THROWS_AS(replay_noise(o, 99, 0), std::invalid_argument);

  SgdOptions opts;
  opts.trace = true;
  const VectorXd th0 = Eigen::Vector2d(1.0, -1.0);
  const SgdRun r = run_sgd(p, o, s, 11, th0, 99, opts);
  for (long k = 1; k <= 10; ++k) {
    const NoiseSample x = replay_noise(o, 99, k);
    CHECK(x.eta == r.trace[k].eta);
    CHECK((x.g_at(r.trace[k - 1].theta) - r.trace[k].g).norm() == 0.0);
  }

  int same = 0;
  for (long k = 1; k <= 100; ++k) same += replay_noise(o, 1, k).eta == replay_noise(o, 2, k).eta;
  CHECK(same == 0);

  const SgdRun tape = run_sgd_on_tape(p, s, record_noise(o, 99, 11), th0, opts);
  CHECK(tape.theta_bar == r.theta_bar);
  CHECK(tape.theta_last == r.theta_last);
}

TEST_CASE("averaging identity, checkpoints, prefix means") {
  const ProblemSpec p = make_quadratic(Eigen::Vector2d(1.0, 0.5).asDiagonal().toDenseMatrix(), Eigen::Vector2d(1, 2));
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(2, 2));
  const StepSchedule s(0.5, 1.0, 0.75);
  SgdOptions opts;
  opts.trace = true;
  opts.checkpoints = {500, 0, 10};
  opts.prefix_means = {2, 1000};
  const SgdRun r = run_sgd(p, o, s, 1000, VectorXd::Zero(2), 3, opts);
  VectorXd sum = VectorXd::Zero(2);
  for (const auto& t : r.trace) sum += t.theta;
  CHECK((sum / 1000.0 - r.theta_bar).norm() <= 1e-12);
  CHECK(r.trace.back().theta == r.theta_last);
  REQUIRE(r.checkpoints.size() == 3);
  CHECK(r.checkpoints[0].first == 0);
  CHECK(r.checkpoints[2].second == r.trace[500].theta);
  REQUIRE(r.prefix_means.size() == 2);
  CHECK((r.prefix_means[0].second - 0.5 * (r.trace[0].theta + r.trace[1].theta)).norm() <= 1e-15);
  CHECK((r.prefix_means[1].second - r.theta_bar).norm() <= 1e-15);
}

TEST_CASE("divergence is reported with the step index") {
  const ProblemSpec p = make_quadratic(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  const StepSchedule s(50.0, 1.0, 0.6);
  try {
    run_sgd(p, make_zero_noise(p), s, 200, VectorXd::Ones(1), 1);
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    CHECK(e.step() > 1);
    CHECK(e.step() < 200);
  }
}

TEST_CASE("trace CSV") {
  const ProblemSpec p = make_scalar_unit();
  SgdOptions opts;
  opts.trace = true;
  const SgdRun r = run_sgd(p, make_zero_noise(p), StepSchedule(0.5, 1.0, 0.75), 3, VectorXd::Ones(1), 1, opts);
  std::ostringstream os;
  write_trace_csv(os, r);
  const std::string out = os.str();
  CHECK(out.rfind("k,theta[0],alpha_k\r\n", 0) == 0);
  CHECK(std::count(out.begin(), out.end(), '\n') == 4);
  CHECK_THROWS_AS(write_trace_csv(os, run_sgd(p, make_zero_noise(p), StepSchedule(0.5, 1.0, 0.75), 3,
                                              VectorXd::Ones(1), 1)),
                  std::invalid_argument);
}

TEST_CASE("high-probability last-iterate bound") {
  const ProblemSpec p = make_quadratic(Eigen::Vector2d(1.0, 0.5).asDiagonal().toDenseMatrix(), VectorXd::Zero(2));
  NoiseParams np;
  np.covariance = MatrixXd::Identity(2, 2);
  np.l2 = 0.3;
  np.estimation_draws = 1L << 16;
  const NoiseOracle o = make_truncated_gaussian_noise(p, np);
  const StepSchedule s(0.5, 1.0, 0.75);
  const long n = 512, reps = 400;
  const VectorXd th0 = VectorXd::Ones(2);
  const auto c = theoretical_constants(p, o, s, n, th0);
  const std::vector<long> ks{1, 16, 128, 511};
  SgdOptions opts;
  opts.checkpoints = ks;
  std::vector<std::vector<double>> vals(ks.size());
  for (long r = 0; r < reps; ++r) {
    const SgdRun run = run_sgd(p, o, s, n, th0, derive_key(8, StreamTag::Data, r), opts);
    for (std::size_t i = 0; i < ks.size(); ++i)
      vals[i].push_back(run.checkpoints[i].second.squaredNorm() / alpha(s, ks[i]));
  }
  const double bound = c.k_2 * std::log(std::exp(1.0) * n / 0.05);
  for (auto& v : vals) {
    std::sort(v.begin(), v.end());
    CHECK(v[static_cast<std::size_t>(std::ceil(0.95 * reps)) - 1] <= bound);
  }
}
