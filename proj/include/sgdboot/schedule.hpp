#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sgdboot {

struct ProblemSpec;
struct NoiseOracle;

// alpha_k = c0 / (k0 + k)^gamma with gamma in (1/2, 1), c0 > 0, k0 >= 1.
struct StepSchedule {
  double c0 = 0.5;
  double k0 = 1.0;
  double gamma = 0.75;

  StepSchedule() = default;
  StepSchedule(double c0_, double k0_, double gamma_);
};

double alpha(const StepSchedule& s, long k);

struct ValidationCheck {
  std::string name;
  std::string inequality;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  std::optional<double> minimal_k0;

  bool pass() const;
  std::vector<std::string> failures() const;
};

// 2 c0 L1 <= 1 and gamma in (1/2, 1).
ValidationReport validate_basic(const StepSchedule& s, const ProblemSpec& p);

// 3 c0 Wmax^2 (L1^2 + L2^2) <= 1 and
// k0 >= max((2 gamma / (mu c0 Wmin))^(1/(1-gamma)), (1/(mu Wmin))^(1/gamma)).
ValidationReport validate_bootstrap(const StepSchedule& s, const ProblemSpec& p, const NoiseOracle& o,
                                    double wmin, double wmax);

}  // namespace sgdboot
