#include "sgdboot/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sgdboot {

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Quadratic: return "quadratic";
    case ProblemKind::LogisticRidge: return "logistic";
    case ProblemKind::ScalarUnit: return "scalar";
  }
  return "?";
}

const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Zero: return "zero";
    case NoiseKind::TruncatedGaussian: return "truncated_gaussian";
    case NoiseKind::GaussianAdditive: return "gaussian";
    case NoiseKind::LogisticSampling: return "logistic_sampling";
  }
  return "?";
}

namespace {

void check_dim(const ProblemSpec& p, const VectorXd& theta) {
  if (theta.size() != p.dim) throw std::invalid_argument("dimension mismatch: expected " + std::to_string(p.dim));
}

double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

double log1pexp(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Gradient of log(1 + exp(-y x'theta)) for one row.
void row_grad(const LogisticData& d, int i, const VectorXd& theta, VectorXd& out) {
  const double m = d.y(i) * d.x.row(i).dot(theta);
  out = (-d.y(i) * sigmoid(-m)) * d.x.row(i).transpose();
}

VectorXd data_grad(const LogisticData& d, const VectorXd& theta) {
  const VectorXd m = (d.x * theta).cwiseProduct(d.y);
  VectorXd w(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) w(i) = -d.y(i) * sigmoid(-m(i));
  return d.x.transpose() * w / static_cast<double>(d.x.rows());
}

MatrixXd data_hessian(const LogisticData& d, const VectorXd& theta) {
  const VectorXd m = (d.x * theta).cwiseProduct(d.y);
  VectorXd w(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double s = sigmoid(m(i));
    w(i) = s * (1.0 - s);
  }
  return d.x.transpose() * w.asDiagonal() * d.x / static_cast<double>(d.x.rows());
}

bool is_symmetric(const MatrixXd& a) {
  return a.rows() == a.cols() && (a - a.transpose()).norm() <= 1e-12 * std::max(1.0, a.norm());
}

}  // namespace

ProblemSpec make_quadratic(const MatrixXd& a, const VectorXd& theta_star, double beta_radius) {
  if (!is_symmetric(a)) throw std::invalid_argument("quadratic: A must be symmetric");
  if (theta_star.size() != a.rows()) throw std::invalid_argument("quadratic: dimension mismatch");
  if (!(beta_radius > 0)) throw std::invalid_argument("quadratic: beta radius must be positive");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()(0) > 0)) throw std::invalid_argument("quadratic: A must be positive definite");
  ProblemSpec p;
  p.kind = ProblemKind::Quadratic;
  p.dim = static_cast<int>(a.rows());
  p.a = a;
  p.theta_star = theta_star;
  p.mu = es.eigenvalues()(0);
  p.l1 = es.eigenvalues()(p.dim - 1);
  p.l3 = 0.0;
  p.beta_radius = beta_radius;
  return p;
}

ProblemSpec make_scalar_unit() {
  ProblemSpec p = make_quadratic(MatrixXd::Ones(1, 1), VectorXd::Zero(1), 1.0);
  p.kind = ProblemKind::ScalarUnit;
  return p;
}

ProblemSpec make_logistic_ridge(const LogisticParams& params) {
  const int d = params.dim;
  const int n = params.samples;
  if (d < 1 || n < 1) throw std::invalid_argument("logistic: dim and samples must be positive");
  if (!(params.ridge > 0)) throw std::invalid_argument("logistic: ridge must be positive");
  VectorXd theta_true = params.theta_true.size() ? params.theta_true : VectorXd::Constant(d, 0.5);
  if (theta_true.size() != d) throw std::invalid_argument("logistic: theta_true dimension mismatch");

  auto data = std::make_shared<LogisticData>();
  data->ridge = params.ridge;
  data->x.resize(n, d);
  data->y.resize(n);
  SplitMix64 eng(params.design_key);
  std::normal_distribution<double> nd(0.0, params.design_scale);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) data->x(i, j) = nd(eng);
    const double pr = sigmoid(data->x.row(i).dot(theta_true));
    data->y(i) = ud(eng) < pr ? 1.0 : -1.0;
  }

  ProblemSpec p;
  p.kind = ProblemKind::LogisticRidge;
  p.dim = d;
  p.logistic = data;
  p.beta_radius = params.beta_radius;

  VectorXd theta = VectorXd::Zero(d);
  for (int it = 0; it < 100; ++it) {
    const VectorXd g = data_grad(*data, theta) + data->ridge * theta;
    if (g.lpNorm<Eigen::Infinity>() < 1e-15) break;
    const MatrixXd h = data_hessian(*data, theta) + data->ridge * MatrixXd::Identity(d, d);
    theta -= h.llt().solve(g);
  }
  p.theta_star = theta;

  const MatrixXd gram = data->x.transpose() * data->x / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  p.mu = data->ridge;
  p.l1 = data->ridge + es.eigenvalues()(d - 1) / 4.0;
  double cube = 0.0;
  for (int i = 0; i < n; ++i) cube += std::pow(data->x.row(i).norm(), 3);
  p.l3 = cube / n / (6.0 * std::sqrt(3.0));
  return p;
}

double objective(const ProblemSpec& p, const VectorXd& theta) {
  check_dim(p, theta);
  if (p.kind == ProblemKind::LogisticRidge) {
    const auto& d = *p.logistic;
    const VectorXd m = (d.x * theta).cwiseProduct(d.y);
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) s += log1pexp(-m(i));
    return s / static_cast<double>(m.size()) + 0.5 * d.ridge * theta.squaredNorm();
  }
  const VectorXd diff = theta - p.theta_star;
  return 0.5 * diff.dot(p.a * diff);
}

VectorXd gradient(const ProblemSpec& p, const VectorXd& theta) {
  check_dim(p, theta);
  if (p.kind == ProblemKind::LogisticRidge) return data_grad(*p.logistic, theta) + p.logistic->ridge * theta;
  return p.a * (theta - p.theta_star);
}

MatrixXd hessian(const ProblemSpec& p, const VectorXd& theta) {
  check_dim(p, theta);
  if (p.kind == ProblemKind::LogisticRidge)
    return data_hessian(*p.logistic, theta) + p.logistic->ridge * MatrixXd::Identity(p.dim, p.dim);
  return p.a;
}

MatrixXd hessian_at_min(const ProblemSpec& p) {
  return hessian(p, p.theta_star);
}

VectorXd remainder_h(const ProblemSpec& p, const VectorXd& theta) {
  check_dim(p, theta);
  if (p.kind != ProblemKind::LogisticRidge) return VectorXd::Zero(p.dim);
  return gradient(p, theta) - hessian_at_min(p) * (theta - p.theta_star);
}

double remainder_constant(const ProblemSpec& p) {
  return std::max(p.l3, 2.0 * p.l1 / p.beta_radius);
}

bool NoiseSample::has_g() const {
  return b.size() > 0 || row >= 0;
}

void NoiseSample::add_g(const VectorXd& theta, VectorXd& out, VectorXd& s1, VectorXd& s2) const {
  if (row >= 0) {
    const auto& d = *ctx->logistic;
    row_grad(d, row, theta, s1);
    out += s1;
    row_grad(d, row, ctx->theta_star, s1);
    out -= s1;
    out -= data_grad(d, theta) - data_grad(d, ctx->theta_star);
    return;
  }
  if (b.size() == 0) return;
  s1 = theta - ctx->theta_star;
  s2.noalias() = b * s1;
  const double nrm = s2.norm();
  if (nrm > ctx->clip) s2 *= ctx->clip / nrm;
  out += s2;
}

VectorXd NoiseSample::g_at(const VectorXd& theta) const {
  const Eigen::Index d = eta.size();
  if (theta.size() != d) throw std::invalid_argument("g_at: dimension mismatch");
  VectorXd out = VectorXd::Zero(d), s1(d), s2(d);
  add_g(theta, out, s1, s2);
  return out;
}

double NoiseOracle::sigma_p(double p) const {
  if (p == 2.0) return std::sqrt(sigma_xi.trace());
  return c1_xi;
}

namespace {

std::shared_ptr<NoiseContext> context_for(const ProblemSpec& p, NoiseKind kind) {
  auto ctx = std::make_shared<NoiseContext>();
  ctx->kind = kind;
  ctx->theta_star = p.theta_star;
  ctx->logistic = p.logistic;
  return ctx;
}

void check_covariance(const MatrixXd& c, int d) {
  if (c.rows() != d || c.cols() != d) throw std::invalid_argument("noise: covariance dimension mismatch");
  if (!is_symmetric(c)) throw std::invalid_argument("noise: covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()(0) > 0)) throw std::invalid_argument("noise: covariance must be positive definite");
}

VectorXd gaussian_draw(const MatrixXd& chol, SplitMix64& eng) {
  const Eigen::Index d = chol.rows();
  VectorXd z(d);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < d; ++i) z(i) = nd(eng);
  return chol * z;
}

}  // namespace

NoiseOracle make_zero_noise(const ProblemSpec& p) {
  NoiseOracle o;
  o.kind = NoiseKind::Zero;
  o.dim = p.dim;
  o.sigma_xi = MatrixXd::Zero(p.dim, p.dim);
  o.ctx = context_for(p, o.kind);
  return o;
}

NoiseOracle make_gaussian_additive_noise(const ProblemSpec& p, const MatrixXd& covariance) {
  check_covariance(covariance, p.dim);
  NoiseOracle o;
  o.kind = NoiseKind::GaussianAdditive;
  o.dim = p.dim;
  o.sigma_xi = covariance;
  o.raw_chol = covariance.llt().matrixL();
  o.c1_xi = std::numeric_limits<double>::infinity();
  o.unbounded = true;
  o.ctx = context_for(p, o.kind);
  return o;
}

NoiseOracle make_truncated_gaussian_noise(const ProblemSpec& p, const NoiseParams& params) {
  check_covariance(params.covariance, p.dim);
  if (params.l2 < 0 || !(params.c2 > 0)) throw std::invalid_argument("noise: need l2 >= 0 and c2 > 0");
  NoiseOracle o;
  o.kind = NoiseKind::TruncatedGaussian;
  o.dim = p.dim;
  o.raw_chol = params.covariance.llt().matrixL();
  o.c1_xi = 6.0 * std::sqrt(params.covariance.trace());
  o.l2 = params.l2;
  o.c2_xi = params.l2 > 0 ? params.c2 : 0.0;
  auto ctx = context_for(p, o.kind);
  ctx->clip = params.c2;
  o.ctx = ctx;

  // Truncated covariance = raw covariance + (accepted second moment - all-draw second moment),
  // both estimated on the same draws; exact when no draw is rejected.
  SplitMix64 eng(params.estimation_key);
  MatrixXd s_all = MatrixXd::Zero(p.dim, p.dim), s_in = MatrixXd::Zero(p.dim, p.dim);
  long n_in = 0;
  for (long i = 0; i < params.estimation_draws; ++i) {
    const VectorXd e = gaussian_draw(o.raw_chol, eng);
    const MatrixXd outer = e * e.transpose();
    s_all += outer;
    if (e.norm() <= o.c1_xi) {
      s_in += outer;
      ++n_in;
    }
  }
  o.sigma_xi = params.covariance;
  if (n_in < params.estimation_draws)
    o.sigma_xi += s_in / static_cast<double>(n_in) - s_all / static_cast<double>(params.estimation_draws);
  return o;
}

NoiseOracle make_logistic_noise(const ProblemSpec& p) {
  if (p.kind != ProblemKind::LogisticRidge) throw std::invalid_argument("logistic noise needs a logistic problem");
  const auto& d = *p.logistic;
  const int n = static_cast<int>(d.x.rows());
  NoiseOracle o;
  o.kind = NoiseKind::LogisticSampling;
  o.dim = p.dim;
  o.ctx = context_for(p, o.kind);
  MatrixXd cov = MatrixXd::Zero(p.dim, p.dim);
  VectorXd g(p.dim);
  double c1 = 0.0, xmax = 0.0;
  for (int i = 0; i < n; ++i) {
    row_grad(d, i, p.theta_star, g);
    g += d.ridge * p.theta_star;
    cov += g * g.transpose();
    c1 = std::max(c1, g.norm());
    xmax = std::max(xmax, d.x.row(i).norm());
  }
  o.sigma_xi = cov / n;
  o.c1_xi = c1;
  o.c2_xi = 4.0 * xmax;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(d.x.transpose() * d.x / static_cast<double>(n),
                                             Eigen::EigenvaluesOnly);
  o.l2 = xmax * xmax / 4.0 + es.eigenvalues()(p.dim - 1) / 4.0;
  return o;
}

NoiseSample sample_noise(const NoiseOracle& o, SplitMix64& stream) {
  NoiseSample s;
  s.ctx = o.ctx;
  switch (o.kind) {
    case NoiseKind::Zero:
      s.eta = VectorXd::Zero(o.dim);
      break;
    case NoiseKind::GaussianAdditive:
      s.eta = gaussian_draw(o.raw_chol, stream);
      break;
    case NoiseKind::TruncatedGaussian: {
      do {
        s.eta = gaussian_draw(o.raw_chol, stream);
      } while (s.eta.norm() > o.c1_xi);
      if (o.l2 > 0) {
        std::uniform_real_distribution<double> ud(-1.0, 1.0);
        s.b.resize(o.dim, o.dim);
        const double scale = o.l2 / o.dim;
        for (int j = 0; j < o.dim; ++j)
          for (int i = 0; i < o.dim; ++i) s.b(i, j) = scale * ud(stream);
      }
      break;
    }
    case NoiseKind::LogisticSampling: {
      const auto& d = *o.ctx->logistic;
      std::uniform_int_distribution<int> pick(0, static_cast<int>(d.x.rows()) - 1);
      s.row = pick(stream);
      row_grad(d, s.row, o.ctx->theta_star, s.eta);
      s.eta += d.ridge * o.ctx->theta_star;
      break;
    }
  }
  return s;
}

void stochastic_gradient(const ProblemSpec& p, const NoiseSample& xi, const VectorXd& theta, VectorXd& out,
                         GradScratch& ws) {
  if (p.kind == ProblemKind::LogisticRidge) {
    out = gradient(p, theta);
  } else {
    ws.s1 = theta - p.theta_star;
    out.noalias() = p.a * ws.s1;
  }
  out += xi.eta;
  if (xi.has_g()) xi.add_g(theta, out, ws.s2, ws.s3);
}

}  // namespace sgdboot
