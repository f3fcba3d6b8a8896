#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace zopmc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Strong-convexity and smoothness constants of a potential.
struct CurvatureBounds {
  double convexity;   // lambda
  double smoothness;  // L

  double condition_number() const { return smoothness / convexity; }
};

class GradientOracle;

/// A potential U with pi(x) proportional to exp(-U(x)), accessed through
/// zeroth-order evaluations only.
///
/// Implementations are immutable after construction and `potential` must be
/// safe to call concurrently from many threads.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual Index dimension() const = 0;
  virtual std::string name() const = 0;

  /// Unchecked hot-path evaluation. Returns whatever the arithmetic yields,
  /// including +inf or NaN far out in the tails; callers that need
  /// validation use evaluate_potential().
  virtual double potential(const VectorXd& x) const = 0;

  virtual std::optional<CurvatureBounds> curvature() const {
    return std::nullopt;
  }

 protected:
  friend class GradientOracle;

  virtual bool provides_gradient() const { return false; }
  virtual VectorXd gradient(const VectorXd& x) const;
};

/// Validated evaluation: throws UsageError on dimension mismatch and
/// DomainError on non-finite input.
double evaluate_potential(const TargetModel& target, const VectorXd& x);

/// First-order access, kept apart from TargetModel so that samplers cannot
/// reach analytic gradients through the ordinary target interface. Only
/// tests and verification diagnostics go through here.
class GradientOracle {
 public:
  static bool available(const TargetModel& target) {
    return target.provides_gradient();
  }
  /// Throws UnsupportedOperation when the target has no gradient.
  static VectorXd gradient(const TargetModel& target, const VectorXd& x);
};

/// U(x) = 0.5 (x - mu)^T Lambda (x - mu).
class GaussianTarget final : public TargetModel {
 public:
  GaussianTarget(VectorXd mean, MatrixXd precision);

  static GaussianTarget isotropic(Index d);
  static GaussianTarget diagonal(const VectorXd& precision_diagonal);

  Index dimension() const override { return mean_.size(); }
  std::string name() const override { return "gaussian"; }
  double potential(const VectorXd& x) const override;
  std::optional<CurvatureBounds> curvature() const override {
    return bounds_;
  }

  const VectorXd& mean() const { return mean_; }
  const MatrixXd& precision() const { return precision_; }
  const MatrixXd& covariance() const { return covariance_; }

 protected:
  bool provides_gradient() const override { return true; }
  VectorXd gradient(const VectorXd& x) const override;

 private:
  VectorXd mean_;
  MatrixXd precision_;
  MatrixXd covariance_;
  CurvatureBounds bounds_{};
};

/// Bayesian logistic regression with N(0, prior_variance I) prior.
class LogisticRegressionTarget final : public TargetModel {
 public:
  /// Design rows z_i, responses y_i in {0,1}. prior_variance defaults to
  /// 25/d when not given.
  LogisticRegressionTarget(MatrixXd design, VectorXd responses,
                           std::optional<double> prior_variance = {});

  Index dimension() const override { return design_.cols(); }
  std::string name() const override { return "logistic"; }
  double potential(const VectorXd& beta) const override;
  /// lambda = 1/prior_variance, L = lambda + max eig(Z^T Z) / 4.
  std::optional<CurvatureBounds> curvature() const override {
    return bounds_;
  }

  double prior_variance() const { return prior_variance_; }
  const auto& design() const { return design_; }
  const VectorXd& responses() const { return responses_; }

 protected:
  bool provides_gradient() const override { return true; }
  VectorXd gradient(const VectorXd& beta) const override;

 private:
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      design_;
  VectorXd responses_;
  double prior_variance_;
  CurvatureBounds bounds_{};
};

/// Stochastic volatility model in unconstrained coordinates
/// (mu, phi_raw, log_sigma, eta_1..eta_n), dimension n + 3.
///
///   h_1 = mu + sigma / (1 - tanh(phi_raw)^2) * eta_1
///   h_t = tanh(phi_raw) (h_{t-1} - mu) + sigma * eta_t,   t >= 2
///   y_t ~ N(0, exp(h_t))
///
/// Priors: mu ~ N(0, 10), phi_raw ~ N(0, 1), log_sigma ~ N(0, 1),
/// eta_t ~ N(0, 1).
class StochasticVolatilityTarget final : public TargetModel {
 public:
  explicit StochasticVolatilityTarget(VectorXd observations);

  Index dimension() const override { return observations_.size() + 3; }
  std::string name() const override { return "stochvol"; }
  double potential(const VectorXd& x) const override;

  const VectorXd& observations() const { return observations_; }

  static constexpr double kMuPriorVariance = 10.0;

 protected:
  bool provides_gradient() const override { return true; }
  VectorXd gradient(const VectorXd& x) const override;

 private:
  VectorXd observations_;
  VectorXd squared_obs_;
};

/// Returns the log-volatility path h for parameters x.
VectorXd sv_log_volatility(const VectorXd& x, Index n);

/// Wraps another target and busy-waits for a fixed time on every
/// evaluation, to emulate an expensive likelihood when measuring round
/// parallelism. The wrapped target must outlive the wrapper.
class SpinDelayTarget final : public TargetModel {
 public:
  SpinDelayTarget(const TargetModel& inner, std::chrono::nanoseconds spin);
  Index dimension() const override { return inner_.dimension(); }
  std::string name() const override { return inner_.name() + "+spin"; }
  double potential(const VectorXd& x) const override;
  std::optional<CurvatureBounds> curvature() const override {
    return inner_.curvature();
  }

 protected:
  bool provides_gradient() const override {
    return GradientOracle::available(inner_);
  }
  VectorXd gradient(const VectorXd& x) const override {
    return GradientOracle::gradient(inner_, x);
  }

 private:
  const TargetModel& inner_;
  std::chrono::nanoseconds spin_;
};

// ---------------------------------------------------------------------------
// Synthetic data

struct LogisticDataset {
  std::uint64_t seed = 0;
  MatrixXd design;     // n x d
  VectorXd responses;  // n, entries 0/1
  VectorXd true_beta;  // d
};

/// beta0 ~ N_d(0, I/8), z_i ~ N_d(0, I), y_i ~ Bernoulli(sigmoid(z_i^T beta0)).
LogisticDataset generate_logistic_data(std::uint64_t seed, Index n, Index d);

struct StochVolDataset {
  std::uint64_t seed = 0;
  double mu0 = 1.0;
  double phi0_raw = 0.0;
  double log_sigma0 = 0.0;
  VectorXd eta0;
  VectorXd observations;

  /// (mu0, phi0_raw, log_sigma0, eta0) as a point in target coordinates.
  VectorXd true_parameters() const;
};

StochVolDataset generate_sv_data(std::uint64_t seed, Index n, double mu0,
                                 double phi0_raw, double log_sigma0);

}  // namespace zopmc
