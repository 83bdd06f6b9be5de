#pragma once

#include <Eigen/Dense>

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdboot/model.hpp"
#include "sgdboot/schedule.hpp"

namespace sgdboot {

struct SgdRun;

// Q_i = alpha_i sum_{j=i}^{n-1} prod_{k=i+1}^{j} (I - alpha_k G), i = 0..n-1.
struct QFamily {
  long n = 0;
  MatrixXd g;
  StepSchedule schedule;
  std::vector<double> alphas;  // alpha_0 .. alpha_{n-1}
  std::vector<MatrixXd> q;     // Q_0 .. Q_{n-1}
};

// Backward recursion P_{n-1} = I, P_i = I + (I - alpha_{i+1} G) P_{i+1}, Q_i = alpha_i P_i.
QFamily compute_q_family(const MatrixXd& g, const StepSchedule& s, long n);
// Arbitrary step sequence alpha_0 .. alpha_{n-1}; the schedule field is left at its default.
QFamily compute_q_family(const MatrixXd& g, const std::vector<double>& alphas);

// Operator norm (largest singular value).
double opnorm(const MatrixXd& m);

// |sum_{i=1}^{n-1} (Q_i - G^{-1}) + G^{-1} sum_{j=1}^{n-1} G_{1:j}| / |G^{-1}|, G_{i:j} = prod_{k=i}^{j} (I - alpha_k G).
double identity_sum(const QFamily& qf);

// S_i = sum_{j=i+1}^{n-1} (alpha_i - alpha_j) G_{i+1:j-1}.
MatrixXd s_matrix(const QFamily& qf, long i);

// |Q_i - G^{-1} - S_i + G^{-1} G_{i:n-1}| / |G^{-1}|, 1 <= i <= n-1.
double identity_single(const QFamily& qf, long i);

// Largest identity_single residual over i = 1..n-1, O(n^2 d^3).
double identity_single_max(const QFamily& qf);

struct TheoreticalConstants {
  double c_q = 0.0;
  double c_q_min = 0.0;        // min over i = 0..n-1 of (1/L1)(1 - (1 - alpha_i L1)^{n-i})
  double c_q_min_half = 0.0;   // same minimum over i <= n/2
  double c_q_min_floor = 0.0;  // (1/L1)(1 - exp{-mu c0 L1 / (2 (k0 + 1))}), the value behind C_Sigma
  double c_sigma = 0.0;
  double c_s = 0.0;
  double c_infty_prime = 0.0;
  double c_infty = 0.0;
  double c_q_xi = 0.0;
  double c_1 = 0.0;
  double c_2 = 0.0;
  double l2_effective = 0.0;  // L2 used inside C_1
  double l_h = 0.0;
  double k_2 = 0.0;
  bool nominal_only = false;
  std::vector<std::string> notes;
};

TheoreticalConstants theoretical_constants(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                           const VectorXd& theta0 = VectorXd());

// n^{-1} sum_{k=1}^{n-1} Q_k Sigma_xi Q_k'.
MatrixXd sigma_n_matrix(const QFamily& qf, const MatrixXd& sigma_xi);

// G^{-1} Sigma_xi G^{-T} by two solves.
MatrixXd sigma_infty_matrix(const MatrixXd& g, const MatrixXd& sigma_xi);

struct CovarianceSet {
  MatrixXd sigma_n;
  MatrixXd sigma_infty;
  TheoreticalConstants constants;
};

CovarianceSet compute_covariances(const QFamily& qf, const MatrixXd& sigma_xi, const ProblemSpec& p,
                                  const NoiseOracle& o);

struct WDSplit {
  VectorXd w_part;  // -(1/sqrt n) sum Q_i eta_i
  VectorXd d_part;  // (d1 + d2 + d3) / sqrt n
  VectorXd d1;      // Q_0 (theta_0 - theta*) / alpha_0
  VectorXd d2;      // -sum Q_i H(theta_{i-1})
  VectorXd d3;      // -sum Q_i g(theta_{i-1}, xi_i)
  VectorXd target;  // sqrt n (theta_bar - theta*)
  double residual = 0.0;
};

WDSplit split_w_d(const SgdRun& run, const QFamily& qf, const ProblemSpec& p);

// (1/n) sum_{j=1}^{n-1} Q_j^2 for f = theta^2/2 with alpha_j = c0 / (k0 + j)^gamma; O(n) time, O(1) memory.
// warning is set when alpha_1 >= 1.
double scalar_sigma2(long n, double gamma, double c0, double k0 = 1.0, bool* warning = nullptr);

// Row-major with a header line "d".
void write_matrix_csv(std::ostream& os, const MatrixXd& m);
nlohmann::json constants_to_json(const TheoreticalConstants& c);

}  // namespace sgdboot
