#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sgdboot/model.hpp"
#include "sgdboot/schedule.hpp"

using namespace sgdboot;

TEST_CASE("alpha values") {
  const StepSchedule a(1.0, 1.0, 0.75);
  CHECK(alpha(a, 0) == doctest::Approx(1.0));
  StepSchedule h;
  h.c0 = 1.0;
  h.k0 = 1.0;
  h.gamma = 0.5;
  CHECK(alpha(h, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(alpha(h, 1) == doctest::Approx(0.70710678118654752).epsilon(1e-14));
  CHECK(alpha(StepSchedule(0.5, 8.0, 0.75), 8) == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK_THROWS_AS(alpha(a, -1), std::invalid_argument);
}

TEST_CASE("schedule constructor rejects invalid parameters") {
  CHECK_THROWS_AS(StepSchedule(0.0, 1.0, 0.75), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule(0.5, 0.5, 0.75), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule(0.5, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule(0.5, 1.0, 1.0), std::invalid_argument);
  CHECK_NOTHROW(StepSchedule(0.5, 2.5, 0.51));
}

TEST_CASE("alpha strictly decreasing") {
  const StepSchedule s(0.3, 2.5, 0.6);
  for (long k = 0; k < 10000; ++k) REQUIRE(alpha(s, k + 1) < alpha(s, k));
}

TEST_CASE("partial sum and power sum bounds") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const double g = std::uniform_real_distribution<double>(0.55, 0.95)(rng);
    const double k0 = std::uniform_real_distribution<double>(1.0, 10.0)(rng);
    const double c0 = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
    const StepSchedule s(c0, k0, g);
    const long m = std::uniform_int_distribution<long>(0, 500)(rng);
    const long k = m + std::uniform_int_distribution<long>(0, 2000)(rng);
    double sum = 0.0;
    for (long i = m + 1; i <= k; ++i) sum += alpha(s, i);
    const double lower = c0 / (2.0 * (1.0 - g)) * (std::pow(k + k0, 1.0 - g) - std::pow(m + k0, 1.0 - g));
    CHECK(sum >= lower);
    for (int p = 2; p <= 4; ++p) {
      if (p * g <= 1.0) continue;
      double ps = 0.0;
      for (long i = 1; i <= k; ++i) ps += std::pow(alpha(s, i), p);
      CHECK(ps <= std::pow(c0, p) / (p * g - 1.0));
    }
  }
}

TEST_CASE("validate_basic") {
  const ProblemSpec p = make_scalar_unit();
  CHECK(validate_basic(StepSchedule(0.5, 1.0, 0.75), p).pass());
  const auto bad = validate_basic(StepSchedule(1.0, 1.0, 0.75), p);
  CHECK_FALSE(bad.pass());
  REQUIRE(bad.failures().size() == 1);
  CHECK(bad.failures()[0].find("2*c0*L1 <= 1") != std::string::npos);
  StepSchedule edge;
  edge.c0 = 0.5;
  edge.gamma = 0.5;
  const auto r = validate_basic(edge, p);
  CHECK_FALSE(r.pass());
  CHECK(r.failures()[0].find("gamma") != std::string::npos);
}

TEST_CASE("validate_bootstrap") {
  ProblemSpec p = make_scalar_unit();
  NoiseOracle o;
  o.dim = 1;
  o.l2 = 1.0;
  StepSchedule s(1.0 / 6.0, 1.0, 0.75);
  auto r = validate_bootstrap(s, p, o, 1.0, 1.0);
  CHECK(r.checks[0].pass);
  CHECK(r.checks[0].lhs == doctest::Approx(1.0));
  REQUIRE(r.minimal_k0.has_value());
  CHECK(*r.minimal_k0 == doctest::Approx(6561.0).epsilon(1e-12));
  CHECK_FALSE(r.pass());
  s.k0 = 6561.0;
  CHECK(validate_bootstrap(s, p, o, 1.0, 1.0).pass());
  s.c0 = 0.2;
  CHECK_FALSE(validate_bootstrap(s, p, o, 1.0, 1.0).checks[0].pass);
  CHECK_THROWS_AS(validate_bootstrap(s, p, o, 0.0, 1.0), std::invalid_argument);
}
