#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "zopmc/errors.hpp"
#include "zopmc/samplers.hpp"

namespace zopmc {

LeapfrogEndpoint leapfrog_map(const VectorXd& s0, const VectorXd& k,
                              double gamma, int leapfrog_count,
                              std::optional<double> start_potential,
                              const SliceGradientFn& gradient) {
  if (leapfrog_count < 1) throw UsageError("leapfrog count must be >= 1");
  if (s0.size() != k.size()) {
    throw UsageError("leapfrog_map: position and momentum sizes differ");
  }
  const SliceDerivatives start = gradient(s0, start_potential);
  VectorXd momentum = k - 0.5 * gamma * start.values;
  VectorXd s = s0;
  for (int l = 1; l < leapfrog_count; ++l) {
    s += gamma * momentum;
    momentum -= gamma * gradient(s, std::nullopt).values;
  }
  s += gamma * momentum;
  const SliceDerivatives end = gradient(s, std::nullopt);
  momentum = -momentum + 0.5 * gamma * end.values;
  return {std::move(s), std::move(momentum), start.base_potential,
          end.base_potential};
}

InvolutionReport leapfrog_involution_check(
    const TargetModel& target, const VectorXd& x, const DirectionMatrix& v,
    const VectorXd& s0, const VectorXd& k, double gamma, int leapfrog_count,
    double epsilon, SliceGradientSource source, double jacobian_step) {
  const Index m = v.count();
  if (s0.size() != m || k.size() != m) {
    throw UsageError("leapfrog_involution_check: slice vectors must have m entries");
  }
  ZoEngine engine({epsilon, 1});
  RoundLedger scratch;
  SliceGradientFn gradient;
  if (source == SliceGradientSource::kFiniteDifference) {
    gradient = [&](const VectorXd& s, std::optional<double> known) {
      return engine.directional_derivatives(target, v.displace(x, s), known, v,
                                            scratch, NonFinitePolicy::kReturn);
    };
  } else {
    gradient = [&](const VectorXd& s, std::optional<double>) {
      const VectorXd point = v.displace(x, s);
      return SliceDerivatives{v.project(GradientOracle::gradient(target, point)),
                              target.potential(point)};
    };
  }

  const auto apply = [&](const VectorXd& z) {
    const LeapfrogEndpoint e = leapfrog_map(z.head(m), z.tail(m), gamma,
                                            leapfrog_count, std::nullopt,
                                            gradient);
    VectorXd out(2 * m);
    out << e.s, e.k;
    return out;
  };

  VectorXd z0(2 * m);
  z0 << s0, k;
  const VectorXd once = apply(z0);
  const VectorXd twice = apply(once);
  const double deviation = (twice - z0).cwiseAbs().maxCoeff();

  MatrixXd jacobian(2 * m, 2 * m);
  for (Index j = 0; j < 2 * m; ++j) {
    const double h = jacobian_step * std::max(1.0, std::abs(z0[j]));
    VectorXd plus = z0;
    VectorXd minus = z0;
    plus[j] += h;
    minus[j] -= h;
    jacobian.col(j) = (apply(plus) - apply(minus)) / (plus[j] - minus[j]);
  }
  const double det = Eigen::FullPivLU<MatrixXd>(jacobian).determinant();
  return {deviation, std::abs(std::log(std::abs(det)))};
}

}  // namespace zopmc
