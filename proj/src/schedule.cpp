#include "sgdboot/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sgdboot/model.hpp"

namespace sgdboot {

StepSchedule::StepSchedule(double c0_, double k0_, double gamma_) : c0(c0_), k0(k0_), gamma(gamma_) {
  if (!(c0 > 0.0)) throw std::invalid_argument("schedule: c0 must be positive");
  if (!(k0 >= 1.0)) throw std::invalid_argument("schedule: k0 must be >= 1");
  if (!(gamma > 0.5 && gamma < 1.0)) throw std::invalid_argument("schedule: gamma must lie in (1/2, 1)");
}

double alpha(const StepSchedule& s, long k) {
  if (k < 0) throw std::invalid_argument("alpha: k must be nonnegative");
  return s.c0 * std::pow(s.k0 + static_cast<double>(k), -s.gamma);
}

bool ValidationReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.pass; });
}

std::vector<std::string> ValidationReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (c.pass) continue;
    std::ostringstream os;
    os.precision(6);
    os << c.name << ": " << c.inequality << " violated (lhs=" << c.lhs << ", rhs=" << c.rhs << ")";
    out.push_back(os.str());
  }
  return out;
}

namespace {

ValidationCheck gamma_check(double gamma) {
  return {"gamma_range", "1/2 < gamma < 1", gamma, 0.0, gamma > 0.5 && gamma < 1.0};
}

}  // namespace

ValidationReport validate_basic(const StepSchedule& s, const ProblemSpec& p) {
  ValidationReport r;
  const double lhs = 2.0 * s.c0 * p.l1;
  r.checks.push_back({"step_size_smoothness", "2*c0*L1 <= 1", lhs, 1.0, lhs <= 1.0});
  r.checks.push_back(gamma_check(s.gamma));
  return r;
}

ValidationReport validate_bootstrap(const StepSchedule& s, const ProblemSpec& p, const NoiseOracle& o,
                                    double wmin, double wmax) {
  if (!(wmin > 0.0 && wmin <= wmax)) throw std::invalid_argument("validate_bootstrap: need 0 < wmin <= wmax");
  ValidationReport r;
  const double lhs = 3.0 * s.c0 * wmax * wmax * (p.l1 * p.l1 + o.l2 * o.l2);
  r.checks.push_back({"bootstrap_step_size", "3*c0*Wmax^2*(L1^2+L2^2) <= 1", lhs, 1.0, lhs <= 1.0});
  r.checks.push_back(gamma_check(s.gamma));
  const double g = s.gamma;
  double k0_min = std::numeric_limits<double>::infinity();
  if (g > 0.5 && g < 1.0) {
    const double t1 = std::pow(2.0 * g / (p.mu * s.c0 * wmin), 1.0 / (1.0 - g));
    const double t2 = std::pow(1.0 / (p.mu * wmin), 1.0 / g);
    k0_min = std::max(t1, t2);
  }
  r.minimal_k0 = k0_min;
  r.checks.push_back({"bootstrap_k0",
                      "k0 >= max((2*gamma/(mu*c0*Wmin))^(1/(1-gamma)), (1/(mu*Wmin))^(1/gamma))", s.k0,
                      k0_min, s.k0 >= k0_min});
  return r;
}

}  // namespace sgdboot
