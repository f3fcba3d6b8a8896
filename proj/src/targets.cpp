#include "zopmc/targets.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "zopmc/errors.hpp"
#include "zopmc/random.hpp"

namespace zopmc {

namespace {

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

VectorXd TargetModel::gradient(const VectorXd&) const {
  throw UnsupportedOperation("target '" + name() +
                             "' does not provide an analytic gradient");
}

double evaluate_potential(const TargetModel& target, const VectorXd& x) {
  if (x.size() != target.dimension()) {
    throw UsageError("evaluate_potential: expected dimension " +
                     std::to_string(target.dimension()) + ", got " +
                     std::to_string(x.size()));
  }
  if (!x.allFinite()) {
    throw DomainError("evaluate_potential: input has non-finite entries");
  }
  return target.potential(x);
}

SpinDelayTarget::SpinDelayTarget(const TargetModel& inner,
                                 std::chrono::nanoseconds spin)
    : inner_(inner), spin_(spin) {
  if (spin.count() < 0) throw UsageError("spin delay must be non-negative");
}

double SpinDelayTarget::potential(const VectorXd& x) const {
  const auto until = std::chrono::steady_clock::now() + spin_;
  while (std::chrono::steady_clock::now() < until) {
  }
  return inner_.potential(x);
}

VectorXd GradientOracle::gradient(const TargetModel& target,
                                  const VectorXd& x) {
  if (!target.provides_gradient()) {
    throw UnsupportedOperation("target '" + target.name() +
                               "' does not provide an analytic gradient");
  }
  if (x.size() != target.dimension()) {
    throw UsageError("analytic_gradient: dimension mismatch");
  }
  if (!x.allFinite()) {
    throw DomainError("analytic_gradient: input has non-finite entries");
  }
  return target.gradient(x);
}

// ---------------------------------------------------------------------------
// GaussianTarget

GaussianTarget::GaussianTarget(VectorXd mean, MatrixXd precision)
    : mean_(std::move(mean)), precision_(std::move(precision)) {
  const Index d = mean_.size();
  if (d < 1 || precision_.rows() != d || precision_.cols() != d) {
    throw UsageError("GaussianTarget: precision must be d x d with d >= 1");
  }
  if (!precision_.isApprox(precision_.transpose(), 1e-12)) {
    throw UsageError("GaussianTarget: precision matrix is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(precision_);
  if (llt.info() != Eigen::Success) {
    throw UsageError("GaussianTarget: precision is not positive definite");
  }
  covariance_ = llt.solve(MatrixXd::Identity(d, d));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(precision_,
                                               Eigen::EigenvaluesOnly);
  bounds_ = {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

GaussianTarget GaussianTarget::isotropic(Index d) {
  return GaussianTarget(VectorXd::Zero(d), MatrixXd::Identity(d, d));
}

GaussianTarget GaussianTarget::diagonal(const VectorXd& precision_diagonal) {
  return GaussianTarget(VectorXd::Zero(precision_diagonal.size()),
                        precision_diagonal.asDiagonal().toDenseMatrix());
}

double GaussianTarget::potential(const VectorXd& x) const {
  const VectorXd diff = x - mean_;
  return 0.5 * diff.dot(precision_ * diff);
}

VectorXd GaussianTarget::gradient(const VectorXd& x) const {
  return precision_ * (x - mean_);
}

// ---------------------------------------------------------------------------
// LogisticRegressionTarget

LogisticRegressionTarget::LogisticRegressionTarget(
    MatrixXd design, VectorXd responses, std::optional<double> prior_variance)
    : design_(std::move(design)), responses_(std::move(responses)) {
  if (design_.rows() < 1 || design_.cols() < 1) {
    throw UsageError("LogisticRegressionTarget: empty design matrix");
  }
  if (responses_.size() != design_.rows()) {
    throw UsageError("LogisticRegressionTarget: responses length != rows");
  }
  for (Index i = 0; i < responses_.size(); ++i) {
    if (responses_[i] != 0.0 && responses_[i] != 1.0) {
      throw UsageError("LogisticRegressionTarget: responses must be 0 or 1");
    }
  }
  prior_variance_ = prior_variance.value_or(
      25.0 / static_cast<double>(design_.cols()));
  if (!(prior_variance_ > 0.0)) {
    throw UsageError("LogisticRegressionTarget: prior variance must be > 0");
  }
  const MatrixXd gram = design_.transpose() * design_;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lambda = 1.0 / prior_variance_;
  bounds_ = {lambda, lambda + 0.25 * eig.eigenvalues().maxCoeff()};
}

double LogisticRegressionTarget::potential(const VectorXd& beta) const {
  double u = 0.0;
  for (Index i = 0; i < design_.rows(); ++i) {
    const double t = design_.row(i).dot(beta);
    u += softplus(t) - responses_[i] * t;
  }
  return u + beta.squaredNorm() / (2.0 * prior_variance_);
}

VectorXd LogisticRegressionTarget::gradient(const VectorXd& beta) const {
  VectorXd residual(design_.rows());
  for (Index i = 0; i < design_.rows(); ++i) {
    residual[i] = sigmoid(design_.row(i).dot(beta)) - responses_[i];
  }
  return design_.transpose() * residual + beta / prior_variance_;
}

// ---------------------------------------------------------------------------
// StochasticVolatilityTarget

StochasticVolatilityTarget::StochasticVolatilityTarget(VectorXd observations)
    : observations_(std::move(observations)) {
  if (observations_.size() < 1) {
    throw UsageError("StochasticVolatilityTarget: empty series");
  }
  squared_obs_ = observations_.array().square();
}

VectorXd sv_log_volatility(const VectorXd& x, Index n) {
  const double mu = x[0];
  const double rho = std::tanh(x[1]);
  const double sigma = std::exp(x[2]);
  // 1 / (1 - tanh^2) == cosh^2, which stays finite for much larger |phi|.
  const double ch = std::cosh(x[1]);
  VectorXd h(n);
  h[0] = mu + sigma * (ch * ch) * x[3];
  for (Index t = 1; t < n; ++t) {
    h[t] = rho * (h[t - 1] - mu) + sigma * x[3 + t];
  }
  return h;
}

double StochasticVolatilityTarget::potential(const VectorXd& x) const {
  const Index n = observations_.size();
  const double mu = x[0];
  const double rho = std::tanh(x[1]);
  const double sigma = std::exp(x[2]);
  const double ch = std::cosh(x[1]);

  double u = 0.0;
  double h = mu + sigma * (ch * ch) * x[3];
  u += 0.5 * h + 0.5 * squared_obs_[0] * std::exp(-h);
  for (Index t = 1; t < n; ++t) {
    h = rho * (h - mu) + sigma * x[3 + t];
    u += 0.5 * h + 0.5 * squared_obs_[t] * std::exp(-h);
  }
  u += mu * mu / (2.0 * kMuPriorVariance) + 0.5 * x[1] * x[1] +
       0.5 * x[2] * x[2];
  u += 0.5 * x.tail(n).squaredNorm();
  return u;
}

VectorXd StochasticVolatilityTarget::gradient(const VectorXd& x) const {
  const Index n = observations_.size();
  const double mu = x[0];
  const double rho = std::tanh(x[1]);
  const double sigma = std::exp(x[2]);
  const double ch = std::cosh(x[1]);
  const double c = ch * ch;
  const VectorXd h = sv_log_volatility(x, n);

  // Adjoint of the recursion: b_t = dU/dh_t including downstream effects.
  VectorXd b(n);
  b[n - 1] = 0.5 - 0.5 * squared_obs_[n - 1] * std::exp(-h[n - 1]);
  for (Index t = n - 2; t >= 0; --t) {
    b[t] = 0.5 - 0.5 * squared_obs_[t] * std::exp(-h[t]) + rho * b[t + 1];
  }

  VectorXd g(n + 3);
  double d_mu = b[0];
  double d_rho = b[0] * sigma * x[3] * 2.0 * rho * c * c;
  double d_logsigma = b[0] * sigma * c * x[3];
  for (Index t = 1; t < n; ++t) {
    d_mu -= rho * b[t];
    d_rho += b[t] * (h[t - 1] - mu);
    d_logsigma += b[t] * sigma * x[3 + t];
  }
  g[0] = d_mu + mu / kMuPriorVariance;
  g[1] = d_rho / c + x[1];
  g[2] = d_logsigma + x[2];
  g[3] = b[0] * sigma * c + x[3];
  for (Index t = 1; t < n; ++t) g[3 + t] = b[t] * sigma + x[3 + t];
  return g;
}

// ---------------------------------------------------------------------------
// Data generation

LogisticDataset generate_logistic_data(std::uint64_t seed, Index n, Index d) {
  if (n < 1 || d < 1) {
    throw UsageError("generate_logistic_data: n and d must be >= 1");
  }
  Rng rng(seed);
  LogisticDataset data;
  data.seed = seed;
  data.true_beta = standard_normal_vector(rng, d) * std::sqrt(1.0 / 8.0);
  data.design.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    data.design.row(i) = standard_normal_vector(rng, d).transpose();
  }
  data.responses.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double p = sigmoid(data.design.row(i).dot(data.true_beta));
    data.responses[i] = uniform01(rng) < p ? 1.0 : 0.0;
  }
  return data;
}

VectorXd StochVolDataset::true_parameters() const {
  VectorXd x(eta0.size() + 3);
  x << mu0, phi0_raw, log_sigma0, eta0;
  return x;
}

StochVolDataset generate_sv_data(std::uint64_t seed, Index n, double mu0,
                                 double phi0_raw, double log_sigma0) {
  if (n < 2) throw UsageError("generate_sv_data: n must be >= 2");
  if (!std::isfinite(mu0) || !std::isfinite(phi0_raw) ||
      !std::isfinite(log_sigma0)) {
    throw UsageError("generate_sv_data: parameters must be finite");
  }
  Rng rng(seed);
  StochVolDataset data;
  data.seed = seed;
  data.mu0 = mu0;
  data.phi0_raw = phi0_raw;
  data.log_sigma0 = log_sigma0;
  data.eta0 = standard_normal_vector(rng, n);
  const VectorXd h = sv_log_volatility(data.true_parameters(), n);
  const VectorXd noise = standard_normal_vector(rng, n);
  data.observations = (0.5 * h.array()).exp() * noise.array();
  return data;
}

}  // namespace zopmc
