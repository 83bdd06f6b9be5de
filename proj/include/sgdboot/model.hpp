#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>

#include "sgdboot/rng.hpp"

namespace sgdboot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ProblemKind { Quadratic, LogisticRidge, ScalarUnit };

const char* to_string(ProblemKind k);

// Finite logistic design: f(theta) = mean_i log(1 + exp(-y_i x_i' theta)) + ridge/2 |theta|^2.
struct LogisticData {
  MatrixXd x;  // samples x dim
  VectorXd y;  // entries in {-1, +1}
  double ridge = 0.1;
};

struct ProblemSpec {
  int dim = 0;
  VectorXd theta_star;
  double mu = 0.0;
  double l1 = 0.0;
  double l3 = 0.0;
  double beta_radius = 1.0;
  ProblemKind kind = ProblemKind::Quadratic;
  MatrixXd a;  // Quadratic and ScalarUnit
  std::shared_ptr<const LogisticData> logistic;
};

ProblemSpec make_quadratic(const MatrixXd& a, const VectorXd& theta_star, double beta_radius = 1.0);
ProblemSpec make_scalar_unit();

struct LogisticParams {
  int dim = 2;
  int samples = 200;
  double ridge = 0.1;
  double design_scale = 1.0;
  VectorXd theta_true;  // empty: 0.5 in every coordinate
  double beta_radius = 1.0;
  std::uint64_t design_key = 0x5eedULL;
};

// mu = ridge and L1 = ridge + lambda_max(X'X/N)/4 are global envelopes; L3 uses
// sup|s''| = 1/(6 sqrt 3) for the logistic link.
ProblemSpec make_logistic_ridge(const LogisticParams& params);

double objective(const ProblemSpec& p, const VectorXd& theta);
VectorXd gradient(const ProblemSpec& p, const VectorXd& theta);
MatrixXd hessian(const ProblemSpec& p, const VectorXd& theta);
MatrixXd hessian_at_min(const ProblemSpec& p);
VectorXd remainder_h(const ProblemSpec& p, const VectorXd& theta);
// L_H = max(L3, 2 L1 / beta).
double remainder_constant(const ProblemSpec& p);

enum class NoiseKind { Zero, TruncatedGaussian, GaussianAdditive, LogisticSampling };

const char* to_string(NoiseKind k);

struct NoiseContext {
  NoiseKind kind = NoiseKind::Zero;
  VectorXd theta_star;
  double clip = std::numeric_limits<double>::infinity();
  std::shared_ptr<const LogisticData> logistic;
};

struct NoiseSample {
  VectorXd eta;
  MatrixXd b;    // multiplicative matrix, empty when g is identically zero
  int row = -1;  // design row for LogisticSampling
  std::shared_ptr<const NoiseContext> ctx;

  VectorXd g_at(const VectorXd& theta) const;
  // out += g(theta, xi); scratch vectors must have the problem dimension.
  void add_g(const VectorXd& theta, VectorXd& out, VectorXd& s1, VectorXd& s2) const;
  bool has_g() const;
};

struct NoiseOracle {
  NoiseKind kind = NoiseKind::Zero;
  int dim = 0;
  MatrixXd sigma_xi;
  double c1_xi = 0.0;
  double c2_xi = 0.0;
  double l2 = 0.0;
  bool unbounded = false;
  MatrixXd raw_chol;
  std::shared_ptr<const NoiseContext> ctx;

  // Bound on E^{1/p} |eta|^p.
  double sigma_p(double p) const;
};

struct NoiseParams {
  MatrixXd covariance;  // covariance of the Gaussian before truncation
  double l2 = 0.0;      // Lipschitz constant of g; 0 disables g
  double c2 = 1.0;      // clip radius for g
  std::uint64_t estimation_key = 0xC0FFEEULL;
  long estimation_draws = 1L << 20;
};

NoiseOracle make_zero_noise(const ProblemSpec& p);
// eta ~ N(0, covariance) conditioned on |eta| <= 6 sqrt(tr covariance);
// g(theta) = clip(B (theta - theta*)) with B = l2 * U, U_ij ~ Unif[-1, 1] / d.
NoiseOracle make_truncated_gaussian_noise(const ProblemSpec& p, const NoiseParams& params);
NoiseOracle make_gaussian_additive_noise(const ProblemSpec& p, const MatrixXd& covariance);
NoiseOracle make_logistic_noise(const ProblemSpec& p);

NoiseSample sample_noise(const NoiseOracle& o, SplitMix64& stream);

struct GradScratch {
  VectorXd s1, s2, s3;
  explicit GradScratch(int d) : s1(d), s2(d), s3(d) {}
};

// out = grad f(theta) + eta + g(theta, xi), without heap allocation for Quadratic problems.
void stochastic_gradient(const ProblemSpec& p, const NoiseSample& xi, const VectorXd& theta, VectorXd& out,
                         GradScratch& ws);

}  // namespace sgdboot
