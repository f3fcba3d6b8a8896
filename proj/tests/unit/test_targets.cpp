#include <cmath>
#include <filesystem>
#include <limits>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "zopmc/dataset_io.hpp"
#include "zopmc/errors.hpp"
#include "zopmc/targets.hpp"

namespace zopmc {
namespace {

TEST(GaussianTarget, PotentialAtMinimumIsZero) {
  const auto g = GaussianTarget::isotropic(2);
  EXPECT_EQ(evaluate_potential(g, VectorXd::Zero(2)), 0.0);
}

TEST(GaussianTarget, PotentialOfThreeFour) {
  const auto g = GaussianTarget::isotropic(2);
  EXPECT_DOUBLE_EQ(evaluate_potential(g, (VectorXd(2) << 3, 4).finished()), 12.5);
}

TEST(GaussianTarget, GradientOfThreeFour) {
  const auto g = GaussianTarget::isotropic(2);
  const VectorXd grad = GradientOracle::gradient(g, (VectorXd(2) << 3, 4).finished());
  EXPECT_DOUBLE_EQ(grad[0], 3.0);
  EXPECT_DOUBLE_EQ(grad[1], 4.0);
}

TEST(GaussianTarget, MatchesQuadraticFormAtRandomPoints) {
  Rng rng(7);
  const MatrixXd a = MatrixXd::Random(5, 5);
  const MatrixXd precision = a * a.transpose() + MatrixXd::Identity(5, 5);
  const VectorXd mean = standard_normal_vector(rng, 5);
  const GaussianTarget g(mean, precision);
  for (int i = 0; i < 50; ++i) {
    const VectorXd x = standard_normal_vector(rng, 5);
    const double expected = 0.5 * (x - mean).dot(precision * (x - mean));
    EXPECT_NEAR(g.potential(x), expected, 1e-12 * std::max(1.0, expected));
  }
}

TEST(GaussianTarget, CurvatureIsEigenvalueRange) {
  const auto g = GaussianTarget::diagonal((VectorXd(3) << 0.5, 2.0, 7.0).finished());
  ASSERT_TRUE(g.curvature());
  EXPECT_DOUBLE_EQ(g.curvature()->convexity, 0.5);
  EXPECT_DOUBLE_EQ(g.curvature()->smoothness, 7.0);
  EXPECT_GE(g.curvature()->condition_number(), 1.0);
}

TEST(GaussianTarget, RejectsNonPositiveDefinitePrecision) {
  MatrixXd p = MatrixXd::Identity(2, 2);
  p(1, 1) = -1.0;
  EXPECT_THROW(GaussianTarget(VectorXd::Zero(2), p), UsageError);
}

TEST(EvaluatePotential, DimensionMismatchIsUsageError) {
  const auto g = GaussianTarget::isotropic(2);
  EXPECT_THROW(evaluate_potential(g, VectorXd::Zero(3)), UsageError);
}

TEST(EvaluatePotential, NonFiniteInputIsDomainError) {
  const auto g = GaussianTarget::isotropic(2);
  VectorXd x = VectorXd::Zero(2);
  x[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(evaluate_potential(g, x), DomainError);
}

TEST(LogisticTarget, SingleObservationAtZero) {
  const LogisticRegressionTarget t(MatrixXd::Ones(1, 1), VectorXd::Ones(1), 25.0);
  EXPECT_NEAR(t.potential(VectorXd::Zero(1)), std::log(2.0), 1e-15);
  EXPECT_NEAR(GradientOracle::gradient(t, VectorXd::Zero(1))[0], -0.5, 1e-15);
}

TEST(LogisticTarget, DefaultPriorVarianceIs25OverD) {
  const LogisticDataset data = generate_logistic_data(3, 10, 5);
  const LogisticRegressionTarget t(data.design, data.responses);
  EXPECT_DOUBLE_EQ(t.prior_variance(), 5.0);
}

TEST(LogisticTarget, MatchesHandWrittenPotentialAndGradient) {
  const LogisticDataset data = generate_logistic_data(4, 30, 6);
  const LogisticRegressionTarget t(data.design, data.responses);
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const VectorXd b = standard_normal_vector(rng, 6);
    const double u = oracle::logistic_potential(data.design, data.responses,
                                                t.prior_variance(), b);
    EXPECT_NEAR(t.potential(b), u, 1e-11 * std::abs(u));
    const VectorXd g = oracle::logistic_gradient(data.design, data.responses,
                                                 t.prior_variance(), b);
    EXPECT_LT((GradientOracle::gradient(t, b) - g).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LogisticTarget, DataTermHessianIsPositiveSemidefinite) {
  const LogisticDataset data = generate_logistic_data(5, 40, 8);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const VectorXd b = 2.0 * standard_normal_vector(rng, 8);
    const MatrixXd h = oracle::logistic_data_hessian(data.design, b);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(LogisticTarget, CurvatureBoundsCoverHessian) {
  const LogisticDataset data = generate_logistic_data(6, 40, 8);
  const LogisticRegressionTarget t(data.design, data.responses);
  const auto bounds = t.curvature();
  ASSERT_TRUE(bounds);
  EXPECT_DOUBLE_EQ(bounds->convexity, 1.0 / t.prior_variance());
  Rng rng(10);
  for (int i = 0; i < 10; ++i) {
    const VectorXd b = standard_normal_vector(rng, 8);
    const MatrixXd h = oracle::logistic_data_hessian(data.design, b) +
                       MatrixXd::Identity(8, 8) / t.prior_variance();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
    EXPECT_GE(eig.eigenvalues().minCoeff(), bounds->convexity - 1e-12);
    EXPECT_LE(eig.eigenvalues().maxCoeff(), bounds->smoothness + 1e-12);
  }
}

TEST(LogisticData, ShapesAtDesk25AndDesk200) {
  const auto a = generate_logistic_data(1, 25, 25);
  EXPECT_EQ(a.design.rows(), 25);
  EXPECT_EQ(a.design.cols(), 25);
  EXPECT_EQ(a.responses.size(), 25);
  EXPECT_EQ(a.true_beta.size(), 25);
  const auto b = generate_logistic_data(1, 200, 200);
  EXPECT_EQ(b.design.rows(), 200);
  EXPECT_EQ(b.design.cols(), 200);
  EXPECT_EQ(b.responses.size(), 200);
  EXPECT_EQ(b.true_beta.size(), 200);
}

TEST(LogisticData, SameSeedIsBitIdentical) {
  const auto a = generate_logistic_data(11, 50, 7);
  const auto b = generate_logistic_data(11, 50, 7);
  EXPECT_EQ(a.design, b.design);
  EXPECT_EQ(a.responses, b.responses);
  EXPECT_EQ(a.true_beta, b.true_beta);
  for (Index i = 0; i < a.responses.size(); ++i) {
    EXPECT_TRUE(a.responses[i] == 0.0 || a.responses[i] == 1.0);
  }
}

TEST(LogisticData, TrueBetaHasVarianceOneEighth) {
  const auto a = generate_logistic_data(12, 1, 20000);
  const double var = a.true_beta.squaredNorm() / 20000.0;
  EXPECT_NEAR(var, 0.125, 0.125 * 0.05);
}

TEST(StochVolData, DimensionIs203ForSeries200) {
  const auto data = generate_sv_data(1, 200, 1.0, std::atanh(0.5), 0.0);
  EXPECT_EQ(data.observations.size(), 200);
  const StochasticVolatilityTarget t(data.observations);
  EXPECT_EQ(t.dimension(), 203);
  EXPECT_EQ(data.true_parameters().size(), 203);
  EXPECT_TRUE(std::isfinite(t.potential(data.true_parameters())));
}

TEST(StochVolData, MinimalSeriesOfTwo) {
  const auto data = generate_sv_data(2, 2, 1.0, 0.3, -0.5);
  EXPECT_EQ(data.observations.size(), 2);
  EXPECT_TRUE(data.observations.allFinite());
  EXPECT_THROW(generate_sv_data(2, 1, 1.0, 0.3, -0.5), UsageError);
}

TEST(StochVolData, SameSeedIsIdentical) {
  const auto a = generate_sv_data(5, 30, 1.0, 0.5, 0.0);
  const auto b = generate_sv_data(5, 30, 1.0, 0.5, 0.0);
  EXPECT_EQ(a.observations, b.observations);
}

TEST(StochVolTarget, LogVolatilityRecursion) {
  VectorXd x(6);
  x << 0.7, 0.4, -0.3, 0.2, -1.1, 0.5;
  const VectorXd h = sv_log_volatility(x, 3);
  const double rho = std::tanh(0.4), sigma = std::exp(-0.3);
  const double h1 = 0.7 + sigma / (1.0 - rho * rho) * 0.2;
  const double h2 = rho * (h1 - 0.7) + sigma * -1.1;
  const double h3 = rho * (h2 - 0.7) + sigma * 0.5;
  EXPECT_NEAR(h[0], h1, 1e-14);
  EXPECT_NEAR(h[1], h2, 1e-14);
  EXPECT_NEAR(h[2], h3, 1e-14);
}

TEST(StochVolTarget, GradientMatchesCentralDifferences) {
  const auto data = generate_sv_data(3, 20, 1.0, 0.5, 0.0);
  const StochasticVolatilityTarget t(data.observations);
  Rng rng(4);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd x = data.true_parameters() + 0.1 * standard_normal_vector(rng, 23);
    const VectorXd g = GradientOracle::gradient(t, x);
    for (Index j = 0; j < 23; ++j) {
      VectorXd a = x, b = x;
      a[j] += h;
      b[j] -= h;
      const double fd = (t.potential(a) - t.potential(b)) / (2 * h);
      EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(g[j])));
    }
  }
}

TEST(AllTargets, ForwardDifferenceWithinTenEpsLocalCurvature) {
  const double eps = 1e-5;
  const auto gauss = GaussianTarget::diagonal((VectorXd(4) << 1, 2, 3, 9).finished());
  const auto ldata = generate_logistic_data(7, 40, 6);
  const LogisticRegressionTarget logistic(ldata.design, ldata.responses);
  const auto sdata = generate_sv_data(8, 10, 1.0, 0.5, 0.0);
  const StochasticVolatilityTarget sv(sdata.observations);
  Rng rng(12);
  for (const TargetModel* t :
       std::initializer_list<const TargetModel*>{&gauss, &logistic, &sv}) {
    const Index d = t->dimension();
    for (int p = 0; p < 100; ++p) {
      VectorXd x = standard_normal_vector(rng, d);
      if (t == &sv) x = sdata.true_parameters() + 0.1 * x;
      const VectorXd g = GradientOracle::gradient(*t, x);
      for (int k = 0; k < 10; ++k) {
        const VectorXd v = standard_normal_vector(rng, d).normalized();
        const double fd = (t->potential(x + eps * v) - t->potential(x)) / eps;
        const double hh = 1e-4;
        const double curv = std::abs((GradientOracle::gradient(*t, x + hh * v) -
                                      GradientOracle::gradient(*t, x - hh * v))
                                         .dot(v) /
                                     (2 * hh));
        EXPECT_LE(std::abs(fd - g.dot(v)), 10 * eps * std::max(1.0, curv))
            << t->name();
      }
    }
  }
}

TEST(SpinDelayTarget, ForwardsPotentialAndTakesTime) {
  const auto g = GaussianTarget::isotropic(3);
  const SpinDelayTarget slow(g, std::chrono::microseconds(200));
  const VectorXd x = VectorXd::Ones(3);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(slow.potential(x), g.potential(x));
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::microseconds(200));
  EXPECT_EQ(GradientOracle::gradient(slow, x), GradientOracle::gradient(g, x));
}

TEST(GradientOracle, AbsentGradientIsUnsupported) {
  struct Flat final : TargetModel {
    Index dimension() const override { return 2; }
    std::string name() const override { return "flat"; }
    double potential(const VectorXd&) const override { return 1.0; }
  } flat;
  EXPECT_FALSE(GradientOracle::available(flat));
  EXPECT_THROW(GradientOracle::gradient(flat, VectorXd::Zero(2)),
               UnsupportedOperation);
}

TEST(DatasetIo, LogisticRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "zopmc_io_test";
  std::filesystem::create_directories(dir);
  const auto data = generate_logistic_data(21, 7, 3);
  write_logistic_dataset(data, dir / "logistic");
  const auto back = read_logistic_dataset(dir / "logistic");
  EXPECT_EQ(back.design, data.design);
  EXPECT_EQ(back.responses, data.responses);
  EXPECT_EQ(back.true_beta, data.true_beta);
  EXPECT_EQ(back.seed, 21u);
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, StochVolRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "zopmc_io_test_sv";
  std::filesystem::create_directories(dir);
  const auto data = generate_sv_data(22, 9, 1.0, 0.5, -0.2);
  write_sv_dataset(data, dir / "sv");
  const auto back = read_sv_dataset(dir / "sv");
  EXPECT_EQ(back.observations, data.observations);
  EXPECT_EQ(back.true_parameters(), data.true_parameters());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace zopmc
