#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace sgdboot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Estimator { KS1D, ProjectedKS, BallClassKS, TVComparisonBound };

const char* to_string(Estimator e);

// Projected and ball-class values are lower bounds on the convex distance, not the distance itself.
struct DistanceReport {
  Estimator estimator = Estimator::KS1D;
  double value = 0.0;
  nlohmann::json detail = nlohmann::json::object();
};

nlohmann::json to_json(const DistanceReport& r);

double normal_cdf(double x);

// sup_x |Phi(x / sqrt(var1)) - Phi(x / sqrt(var2))|, attained at x^2 = v1 v2 log(v1/v2) / (v1 - v2).
double ks_two_gaussians_1d(double var1, double var2);

// Two-sided KS statistic of the samples against N(0, var).
double empirical_ks_1d(std::vector<double> samples, double var);

// Max of empirical_ks_1d over the d canonical axes plus n_directions uniform random unit directions.
DistanceReport projected_convex_proxy(const std::vector<VectorXd>& samples, const MatrixXd& sigma, int n_directions,
                                      std::uint64_t direction_key);

DistanceReport projected_convex_proxy(const std::vector<VectorXd>& samples, const MatrixXd& sigma,
                                      const std::vector<VectorXd>& directions);

// KS statistic of |Sigma^{-1/2} x|^2 against chi-square(d).
DistanceReport ball_class_proxy(const std::vector<VectorXd>& samples, const MatrixXd& sigma);

// (3/2) |Sigma2^{-1/2} Sigma1 Sigma2^{-1/2} - I|_F
double tv_comparison_bound(const MatrixXd& sigma1, const MatrixXd& sigma2);

// Least-squares slope of log(y) on log(x) with its standard error.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};

SlopeFit loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sgdboot
