#include "sgdboot/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgdboot/sgd_core.hpp"
#include "sgdboot/table.hpp"

namespace sgdboot {

namespace {

MatrixXd inverse_by_solve(const MatrixXd& g) {
  Eigen::LDLT<MatrixXd> ldlt(g);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
    throw std::runtime_error("matrix is singular or not positive definite");
  return ldlt.solve(MatrixXd::Identity(g.rows(), g.cols()));
}

double lambda_min(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double lambda_max(const MatrixXd& m) {
  const auto ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
  return ev(ev.size() - 1);
}

}  // namespace

double opnorm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0);
}

QFamily compute_q_family(const MatrixXd& g, const std::vector<double>& alphas) {
  const long n = static_cast<long>(alphas.size());
  if (n < 2) throw std::invalid_argument("compute_q_family: n must be >= 2");
  if (g.rows() != g.cols()) throw std::invalid_argument("compute_q_family: G must be square");
  if ((g - g.transpose()).norm() > 1e-12 * std::max(1.0, g.norm()))
    throw std::invalid_argument("compute_q_family: G must be symmetric");
  QFamily qf;
  qf.n = n;
  qf.g = g;
  qf.alphas = alphas;
  const auto d = g.rows();
  const MatrixXd eye = MatrixXd::Identity(d, d);
  qf.q.resize(n);
  MatrixXd p = eye;
  for (long i = n - 1; i >= 0; --i) {
    if (i < n - 1) p = eye + (eye - qf.alphas[i + 1] * g) * p;
    qf.q[i] = qf.alphas[i] * p;
  }
  return qf;
}

QFamily compute_q_family(const MatrixXd& g, const StepSchedule& s, long n) {
  if (n < 2) throw std::invalid_argument("compute_q_family: n must be >= 2");
  std::vector<double> a(n);
  for (long i = 0; i < n; ++i) a[i] = alpha(s, i);
  QFamily qf = compute_q_family(g, a);
  qf.schedule = s;
  return qf;
}

double identity_sum(const QFamily& qf) {
  const MatrixXd ginv = inverse_by_solve(qf.g);
  const auto d = qf.g.rows();
  const MatrixXd eye = MatrixXd::Identity(d, d);
  MatrixXd lhs = MatrixXd::Zero(d, d), prods = MatrixXd::Zero(d, d), prod = eye;
  for (long i = 1; i < qf.n; ++i) {
    lhs += qf.q[i] - ginv;
    prod = prod * (eye - qf.alphas[i] * qf.g);
    prods += prod;
  }
  return opnorm(lhs + ginv * prods) / opnorm(ginv);
}

MatrixXd s_matrix(const QFamily& qf, long i) {
  if (i < 0 || i >= qf.n) throw std::out_of_range("s_matrix: index out of range");
  const auto d = qf.g.rows();
  const MatrixXd eye = MatrixXd::Identity(d, d);
  MatrixXd s = MatrixXd::Zero(d, d), prod = eye;
  for (long j = i + 1; j < qf.n; ++j) {
    s += (qf.alphas[i] - qf.alphas[j]) * prod;
    prod = prod * (eye - qf.alphas[j] * qf.g);
  }
  return s;
}

namespace {

double identity_single_with(const QFamily& qf, long i, const MatrixXd& ginv) {
  const auto d = qf.g.rows();
  const MatrixXd eye = MatrixXd::Identity(d, d);
  MatrixXd tail = eye;
  for (long k = i; k < qf.n; ++k) tail = tail * (eye - qf.alphas[k] * qf.g);
  const MatrixXd r = qf.q[i] - ginv - s_matrix(qf, i) + ginv * tail;
  return opnorm(r) / opnorm(ginv);
}

}  // namespace

double identity_single(const QFamily& qf, long i) {
  if (i < 1 || i > qf.n - 1) throw std::out_of_range("identity_single: need 1 <= i <= n-1");
  return identity_single_with(qf, i, inverse_by_solve(qf.g));
}

double identity_single_max(const QFamily& qf) {
  const MatrixXd ginv = inverse_by_solve(qf.g);
  double worst = 0.0;
  for (long i = 1; i < qf.n; ++i) worst = std::max(worst, identity_single_with(qf, i, ginv));
  return worst;
}

TheoreticalConstants theoretical_constants(const ProblemSpec& p, const NoiseOracle& o, const StepSchedule& s, long n,
                                           const VectorXd& theta0) {
  const double g = s.gamma, c0 = s.c0, k0 = s.k0, mu = p.mu, l1 = p.l1;
  if (!(g > 0.5 && g < 1.0)) throw std::invalid_argument("theoretical_constants: gamma must lie in (1/2, 1)");
  if (n < 2) throw std::invalid_argument("theoretical_constants: n must be >= 2");
  TheoreticalConstants c;
  const double r = 1.0 / (1.0 - g);
  const double muc0 = mu * c0;

  const double cq_a = std::exp(r) * std::pow(2.0 * (1.0 - g) / muc0, r) * r * std::tgamma(r);
  c.c_q = (1.0 + std::max(cq_a, 2.0 / (muc0 * (1.0 - g)))) * c0;

  c.c_q_min = std::numeric_limits<double>::infinity();
  c.c_q_min_half = std::numeric_limits<double>::infinity();
  for (long i = 0; i < n; ++i) {
    const double ai = alpha(s, i);
    const double v = (1.0 - std::pow(1.0 - ai * l1, static_cast<double>(n - i))) / l1;
    c.c_q_min = std::min(c.c_q_min, v);
    if (2 * i <= n) c.c_q_min_half = std::min(c.c_q_min_half, v);
  }
  const double expo = 1.0 - std::exp(-muc0 * l1 / (2.0 * (k0 + 1.0)));
  c.c_q_min_floor = expo / l1;

  const double lmin_xi = o.sigma_xi.size() ? lambda_min(o.sigma_xi) : 0.0;
  const double lmax_xi = o.sigma_xi.size() ? lambda_max(o.sigma_xi) : 0.0;
  c.c_sigma = std::sqrt(2.0) * l1 / (expo * std::sqrt(lmin_xi));

  c.c_s = 2.0 * c0 * std::exp(muc0 / std::pow(k0, g)) *
          (std::pow(2.0, g / (1.0 - g)) / muc0 + std::pow(1.0 / muc0, r) * std::tgamma(r));

  const MatrixXd gm = hessian_at_min(p);
  double sinf = 0.0;
  if (lmin_xi > 0) sinf = opnorm(sigma_infty_matrix(gm, o.sigma_xi));
  const double sxi = o.sigma_xi.size() ? opnorm(o.sigma_xi) : 0.0;
  const double k0g = std::pow(k0, g);
  c.c_infty_prime = (k0g / (c0 * mu) + 2.0 * c.c_q * k0g / c0 + 1.0) * sinf +
                    (c.c_s * c.c_s / (2.0 * g - 1.0) + c.c_s * std::pow(k0, 2.0 * g - 1.0) / (mu * mu * c0)) * sxi;
  c.c_infty = 1.5 * std::sqrt(static_cast<double>(p.dim)) * c.c_sigma * c.c_sigma * c.c_infty_prime;

  c.c_q_xi = c.c_q * c.c_q * (o.c1_xi * o.c1_xi + lmax_xi);

  // C_1 holds for any L2' >= L2; (1 + 1/x) exp{kappa x} with x = L2'^2 is minimised at
  // x* = (-kappa + sqrt(kappa^2 + 4 kappa)) / (2 kappa).
  const double kappa = 6.0 * c0 * c0 / (2.0 * g - 1.0);
  const double xstar = (-kappa + std::sqrt(kappa * kappa + 4.0 * kappa)) / (2.0 * kappa);
  const double x = std::max(o.l2 * o.l2, xstar);
  c.l2_effective = std::sqrt(x);
  c.c_1 = std::exp(3.0 * muc0 / (4.0 * (1.0 - g)) * std::pow(k0, 1.0 - g)) *
          ((1.0 + 1.0 / x) * std::exp(kappa * x) + 2.0 * c0 * c0 / (2.0 * g - 1.0));
  c.c_2 = std::pow(2.0, 1.0 + g) / mu;
  if (o.l2 * o.l2 < xstar) c.notes.push_back("C_1 evaluated with L2' = " + format_double(c.l2_effective) + " >= L2");

  c.l_h = remainder_constant(p);

  const double init = theta0.size() == p.dim ? (theta0 - p.theta_star).squaredNorm() : 0.0;
  c.k_2 = std::max(12.0 * std::pow(o.c1_xi + o.c2_xi, 2) / mu, k0g * init / alpha(s, 0));

  const bool valid = validate_basic(s, p).pass();
  if (!valid) {
    c.nominal_only = true;
    c.notes.push_back("step-size assumptions fail; constants are nominal only");
  }
  if (!(lmin_xi > 0) || o.unbounded) {
    c.nominal_only = true;
    c.notes.push_back("noise is degenerate or unbounded; C_Sigma, C_Q_xi and K_2 are not finite bounds");
  }
  if (c.c_q_min_half < c.c_q_min_floor)
    c.notes.push_back("min over i <= n/2 of C_Q^min is below the closed-form floor used in C_Sigma");
  return c;
}

MatrixXd sigma_n_matrix(const QFamily& qf, const MatrixXd& sigma_xi) {
  const auto d = qf.g.rows();
  if (sigma_xi.rows() != d || sigma_xi.cols() != d) throw std::invalid_argument("sigma_n: dimension mismatch");
  MatrixXd acc = MatrixXd::Zero(d, d);
  for (long k = 1; k < qf.n; ++k) acc.noalias() += qf.q[k] * sigma_xi * qf.q[k].transpose();
  return acc / static_cast<double>(qf.n);
}

MatrixXd sigma_infty_matrix(const MatrixXd& g, const MatrixXd& sigma_xi) {
  if (g.rows() != sigma_xi.rows() || sigma_xi.rows() != sigma_xi.cols())
    throw std::invalid_argument("sigma_infty: dimension mismatch");
  Eigen::PartialPivLU<MatrixXd> lu(g);
  const MatrixXd x = lu.solve(sigma_xi);                  // G^{-1} Sigma_xi
  return lu.solve(x.transpose()).transpose();             // (G^{-1} (G^{-1} Sigma_xi)')'
}

CovarianceSet compute_covariances(const QFamily& qf, const MatrixXd& sigma_xi, const ProblemSpec& p,
                                  const NoiseOracle& o) {
  if (sigma_xi.rows() != sigma_xi.cols() || sigma_xi.rows() != qf.g.rows())
    throw std::invalid_argument("compute_covariances: dimension mismatch");
  if ((sigma_xi - sigma_xi.transpose()).norm() > 1e-12 * std::max(1.0, sigma_xi.norm()) || !(lambda_min(sigma_xi) > 0))
    throw std::invalid_argument("compute_covariances: Sigma_xi must be symmetric positive definite");
  CovarianceSet cs;
  cs.sigma_n = sigma_n_matrix(qf, sigma_xi);
  cs.sigma_infty = sigma_infty_matrix(qf.g, sigma_xi);
  cs.constants = theoretical_constants(p, o, qf.schedule, qf.n);
  return cs;
}

WDSplit split_w_d(const SgdRun& run, const QFamily& qf, const ProblemSpec& p) {
  if (run.trace.empty()) throw std::invalid_argument("split_w_d: run has no trace");
  if (run.n != qf.n) throw std::invalid_argument("split_w_d: horizon mismatch");
  const long n = run.n;
  const double sn = std::sqrt(static_cast<double>(n));
  WDSplit out;
  VectorXd w = VectorXd::Zero(p.dim);
  out.d2 = VectorXd::Zero(p.dim);
  out.d3 = VectorXd::Zero(p.dim);
  for (long i = 1; i < n; ++i) {
    const auto& rec = run.trace[i];
    w -= qf.q[i] * rec.eta;
    out.d3 -= qf.q[i] * rec.g;
    out.d2 -= qf.q[i] * remainder_h(p, run.trace[i - 1].theta);
  }
  out.d1 = qf.q[0] * (run.theta0 - p.theta_star) / qf.alphas[0];
  out.w_part = w / sn;
  out.d_part = (out.d1 + out.d2 + out.d3) / sn;
  out.target = sn * (run.theta_bar - p.theta_star);
  out.residual = (out.w_part + out.d_part - out.target).norm();
  return out;
}

double scalar_sigma2(long n, double gamma, double c0, double k0, bool* warning) {
  if (n < 2) throw std::invalid_argument("scalar_sigma2: n must be >= 2");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("scalar_sigma2: gamma must lie in (0, 1)");
  if (!(c0 > 0.0)) throw std::invalid_argument("scalar_sigma2: c0 must be positive");
  auto a = [&](long j) { return c0 * std::pow(k0 + static_cast<double>(j), -gamma); };
  if (warning) *warning = a(1) >= 1.0;
  long double acc = 0.0L;
  double p = 1.0;
  for (long j = n - 1; j >= 1; --j) {
    if (j < n - 1) p = 1.0 + (1.0 - a(j + 1)) * p;
    const double q = a(j) * p;
    acc += static_cast<long double>(q) * q;
  }
  return static_cast<double>(acc / n);
}

void write_matrix_csv(std::ostream& os, const MatrixXd& m) {
  os << m.cols() << "\r\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << "\r\n";
  }
}

nlohmann::json constants_to_json(const TheoreticalConstants& c) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return format_double(v);
  };
  return {{"C_Q", num(c.c_q)},
          {"C_Q_min", num(c.c_q_min)},
          {"C_Q_min_half", num(c.c_q_min_half)},
          {"C_Q_min_floor", num(c.c_q_min_floor)},
          {"C_Sigma", num(c.c_sigma)},
          {"C_S", num(c.c_s)},
          {"C_infty_prime", num(c.c_infty_prime)},
          {"C_infty", num(c.c_infty)},
          {"C_Q_xi", num(c.c_q_xi)},
          {"C_1", num(c.c_1)},
          {"C_2", num(c.c_2)},
          {"L2_effective", num(c.l2_effective)},
          {"L_H", num(c.l_h)},
          {"K_2", num(c.k_2)},
          {"nominal_only", c.nominal_only},
          {"notes", c.notes}};
}

}  // namespace sgdboot
