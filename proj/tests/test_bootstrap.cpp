#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sgdboot/bootstrap.hpp"

using namespace sgdboot;

namespace {

ProblemSpec diag_problem() {
  return make_quadratic(Eigen::Vector2d(1.0, 0.5).asDiagonal().toDenseMatrix(), VectorXd::Zero(2));
}

BootstrapEnsemble ensemble_of(const std::vector<double>& values, long n) {
  BootstrapEnsemble e;
  e.m = static_cast<long>(values.size());
  e.n = n;
  e.center = VectorXd::Zero(1);
  for (double v : values) e.roots.push_back(VectorXd::Constant(1, v));
  return e;
}

}  // namespace

TEST_CASE("weight law") {
  const BoundedWeightLaw law = make_weight_law(0.5, 2.0);
  CHECK(law.a == doctest::Approx(0.064585653306514654).epsilon(1e-14));
  CHECK(law.b == doctest::Approx(4.6770717334674267).epsilon(1e-14));
  CHECK(law.wmax == doctest::Approx(4.7416573867739414).epsilon(1e-14));
  CHECK(law.wmin == law.a);
  CHECK_THROWS_WITH_AS(make_weight_law(1.0, 1.0), doctest::Contains("alpha+beta+1 < beta/alpha"),
                       std::invalid_argument);
  CHECK_THROWS_AS(make_weight_law(0.0, 2.0), std::invalid_argument);

  WeightSampler w(law);
  SplitMix64 eng(123);
  const long draws = 1000000;
  double s = 0, s2 = 0, lo = 1e9, hi = -1e9;
  for (long i = 0; i < draws; ++i) {
    const double x = w(eng);
    s += x;
    s2 += x * x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double mean = s / draws, var = s2 / draws - mean * mean;
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
  CHECK(lo >= law.wmin);
  CHECK(hi <= law.wmax);

  const BoundedWeightLaw other = make_weight_law(0.3, 2.7);
  WeightSampler wo(other);
  s = s2 = 0;
  for (long i = 0; i < draws; ++i) {
    const double x = wo(eng);
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / draws - 1.0) < 0.01);
  CHECK(std::abs(s2 / draws - std::pow(s / draws, 2) - 1.0) < 0.02);
}

TEST_CASE("degenerate weights and fixed points give zero roots") {
  const ProblemSpec p = diag_problem();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(2, 2));
  const StepSchedule s(0.5, 1.0, 0.75);
  const VectorXd th0 = VectorXd::Ones(2);
  CHECK(run_bootstrap_replicate(p, o, s, 300, th0, 4, unit_weight_law(), 9).norm() == 0.0);
  CHECK(run_bootstrap_replicate(p, make_zero_noise(p), s, 300, p.theta_star, 4, make_weight_law(0.5, 2), 9)
            .norm() == 0.0);
}

TEST_CASE("hand-enrolled three-step replicate") {
  const ProblemSpec p = make_scalar_unit();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(1, 1));
  const StepSchedule s(0.5, 1.0, 0.75);
  const BoundedWeightLaw law = make_weight_law(0.5, 2.0);
  const std::uint64_t dk = 17, wk = 23;
  const double x1 = replay_noise(o, dk, 1).eta(0), x2 = replay_noise(o, dk, 2).eta(0);
  SplitMix64 eng(wk);
  WeightSampler ws(law);
  const double w1 = ws(eng), w2 = ws(eng);
  const double a1 = alpha(s, 1), a2 = alpha(s, 2), t0 = 0.7;
  const double t1 = t0 - a1 * (t0 + x1), t2 = t1 - a2 * (t1 + x2);
  const double b1 = t0 - a1 * w1 * (t0 + x1), b2 = b1 - a2 * w2 * (b1 + x2);
  const double expect = std::sqrt(3.0) * ((t0 + b1 + b2) / 3.0 - (t0 + t1 + t2) / 3.0);
  const VectorXd root = run_bootstrap_replicate(p, o, s, 3, VectorXd::Constant(1, t0), dk, law, wk);
  CHECK(root(0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ensemble determinism across thread counts") {
  const ProblemSpec p = diag_problem();
  NoiseParams np;
  np.covariance = MatrixXd::Identity(2, 2);
  np.l2 = 0.3;
  np.estimation_draws = 1L << 14;
  const NoiseOracle o = make_truncated_gaussian_noise(p, np);
  const StepSchedule s(0.5, 1.0, 0.75);
  const BoundedWeightLaw law = make_weight_law(0.5, 2.0);
  const VectorXd th0 = VectorXd::Ones(2);
  const auto e1 = build_ensemble(p, o, s, 200, th0, 3, law, 77, 4, 1);
  const auto e2 = build_ensemble(p, o, s, 200, th0, 3, law, 77, 4, 4);
  const auto e3 = build_ensemble_serial(p, o, s, 200, th0, 3, law, 77, 4);
  const auto e4 = build_ensemble(p, o, s, 200, th0, 3, law, 77, 4, 1);
  REQUIRE(e1.roots.size() == 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(e1.roots[j] == e2.roots[j]);
    CHECK(e1.roots[j] == e3.roots[j]);
    CHECK(e1.roots[j] == e4.roots[j]);
    CHECK(e1.weight_keys[j] == substream(77, j + 1));
    CHECK(e1.roots[j] == run_bootstrap_replicate(p, o, s, 200, th0, 3, law, substream(77, j + 1)));
  }
  CHECK(e1.roots[0] != e1.roots[1]);
  CHECK(e1.data_key == 3);
  CHECK_THROWS_AS(build_ensemble(p, o, s, 200, th0, 3, law, 77, 1, 1), std::invalid_argument);
}

TEST_CASE("replicate divergence carries the replicate index") {
  const ProblemSpec p = make_scalar_unit();
  const BoundedWeightLaw law = make_weight_law(0.5, 2.0);
  const auto tape = record_noise(make_zero_noise(p), 1, 400);
  const StepSchedule s(1.9 * std::pow(1e6, 0.55), 1e6, 0.55);
  const VectorXd th0 = VectorXd::Constant(1, 1e11);
  CHECK_NOTHROW(run_sgd_on_tape(p, s, tape, th0));
  try {
    build_ensemble_on_tape(p, s, tape, th0, VectorXd::Zero(1), law, 5, 8, 2);
    FAIL("expected divergence");
  } catch (const ReplicateDivergedError& e) {
    CHECK(e.replicate() >= 1);
    CHECK(e.replicate() <= 8);
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("confidence regions") {
  const long n = 64;
  BootstrapEnsemble same;
  same.m = 10;
  same.n = n;
  same.center = Eigen::Vector2d(1, 1);
  for (int j = 0; j < 10; ++j) same.roots.push_back(Eigen::Vector2d(3, 4));
  const auto ball = confidence_region(same, RegionShape::NormBall, 0.9);
  CHECK(ball.radius == doctest::Approx(5.0 / 8.0));
  CHECK(ball.contains(same.center));
  const auto box = confidence_region(same, RegionShape::CoordinateBox, 0.9);
  CHECK(box.halfwidths(0) == doctest::Approx(3.0 / 8.0));
  CHECK(box.halfwidths(1) == doctest::Approx(4.0 / 8.0));
  CHECK(box.contains(same.center));

  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const auto e = ensemble_of(v, n);
  CHECK(confidence_region(e, RegionShape::NormBall, 0.9).radius == doctest::Approx(90.0 / 8.0));
  CHECK(confidence_region(e, RegionShape::NormBall, 1.0).radius == doctest::Approx(100.0 / 8.0));
  CHECK(confidence_region(e, RegionShape::NormBall, 1e-9).radius == doctest::Approx(1.0 / 8.0));
  CHECK(confidence_region(e, RegionShape::NormBall, 0.95).radius >=
        confidence_region(e, RegionShape::NormBall, 0.9).radius);
  CHECK(confidence_region(e, RegionShape::CoordinateBox, 0.9).halfwidths(0) == doctest::Approx(90.0 / 8.0));

  BootstrapEnsemble empty;
  empty.n = n;
  empty.center = VectorXd::Zero(1);
  CHECK_THROWS_AS(confidence_region(empty, RegionShape::NormBall, 0.9), std::invalid_argument);

  const nlohmann::json j = region_to_json(ball);
  CHECK(j["shape"] == "norm_ball");
  CHECK(j["level"] == 0.9);
  CHECK(j["center"].size() == 2);
  CHECK(j.contains("radius_or_halfwidths"));
}

TEST_CASE("sigma_n_boot") {
  const StepSchedule s(0.5, 1.0, 0.75);
  const QFamily q2 = compute_q_family(MatrixXd::Identity(2, 2), s, 20);
  CHECK(sigma_n_boot(q2, std::vector<VectorXd>(19, VectorXd::Zero(2))).norm() == 0.0);

  const QFamily q1 = compute_q_family(MatrixXd::Constant(1, 1, 0.8), s, 3);
  const double e1 = 0.4, e2 = -1.3;
  const double q_1 = q1.q[1](0, 0), q_2 = q1.q[2](0, 0);
  const MatrixXd got = sigma_n_boot(q1, {VectorXd::Constant(1, e1), VectorXd::Constant(1, e2)});
  CHECK(got(0, 0) == doctest::Approx((q_1 * q_1 * e1 * e1 + q_2 * q_2 * e2 * e2) / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(sigma_n_boot(q1, {VectorXd::Constant(1, e1)}), std::invalid_argument);
  CHECK_THROWS_AS(sigma_n_boot(q1, {VectorXd::Zero(2), VectorXd::Zero(2)}), std::invalid_argument);

  const ProblemSpec p = diag_problem();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(2, 2));
  const QFamily qp = compute_q_family(p.a, s, 50);
  const MatrixXd sb = sigma_n_boot(qp, o, 8);
  CHECK((sb - sb.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sb);
  CHECK(es.eigenvalues().minCoeff() >= -1e-14);
}

TEST_CASE("replicates share the data stream") {
  const ProblemSpec p = make_scalar_unit();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(1, 1));
  const StepSchedule s(0.5, 1.0, 0.75);
  const BoundedWeightLaw law = make_weight_law(0.5, 2.0);
  const auto tape = record_noise(o, 31, 100);
  const VectorXd th0 = VectorXd::Zero(1);
  const SgdRun run = run_sgd_on_tape(p, s, tape, th0);
  const auto e = build_ensemble_on_tape(p, s, tape, th0, run.theta_bar, law, 6, 2);
  for (int j = 0; j < 2; ++j)
    CHECK(e.roots[j] == run_bootstrap_replicate(p, o, s, 100, th0, 31, law, substream(6, j + 1)));
}

TEST_CASE("bootstrap roots are centered at rate M^{-1/2}") {
  const ProblemSpec p = diag_problem();
  const NoiseOracle o = make_gaussian_additive_noise(p, MatrixXd::Identity(2, 2));
  const StepSchedule s(0.5, 1.0, 0.75);
  const BoundedWeightLaw law = make_weight_law(0.5, 2.0);
  double small = 0, large = 0;
  const int seeds = 20;
  for (int t = 0; t < seeds; ++t) {
    const std::uint64_t dk = derive_key(3, StreamTag::Data, t);
    const auto a = build_ensemble(p, o, s, 256, VectorXd::Zero(2), dk, law, derive_key(3, StreamTag::Weights, t), 200);
    const auto b = build_ensemble(p, o, s, 256, VectorXd::Zero(2), dk, law, derive_key(4, StreamTag::Weights, t), 400);
    VectorXd ma = VectorXd::Zero(2), mb = VectorXd::Zero(2);
    for (const auto& r : a.roots) ma += r;
    for (const auto& r : b.roots) mb += r;
    small += (ma / 200.0).norm();
    large += (mb / 400.0).norm();
  }
  const double ratio = small / large;
  CHECK(ratio >= std::sqrt(2.0) / 2.0);
  CHECK(ratio <= 2.0 * std::sqrt(2.0));
  CHECK(small / seeds < 0.2);
}

TEST_CASE("ensemble CSV") {
  std::vector<double> v{1.0, 2.0};
  std::ostringstream os;
  write_ensemble_csv(os, ensemble_of(v, 4));
  CHECK(os.str() == "replicate,root[0]\r\n1,1\r\n2,2\r\n");
  CHECK(std::string(to_string(RegionShape::CoordinateBox)) == "coordinate_box");
}
