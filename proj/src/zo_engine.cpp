#include "zopmc/zo_engine.hpp"

#include <cmath>

#include "zopmc/errors.hpp"

namespace zopmc {

ZoEngine::ZoEngine(FiniteDiffConfig config)
    : config_(config), executor_(config.workers) {
  if (!(config_.epsilon > 0.0)) {
    throw UsageError("finite-difference step must be positive");
  }
}

SliceDerivatives ZoEngine::directional_derivatives(
    const TargetModel& target, const VectorXd& x, std::optional<double> base,
    const DirectionMatrix& v, RoundLedger& ledger, NonFinitePolicy policy) {
  if (x.size() != target.dimension() || v.dimension() != target.dimension()) {
    throw UsageError("directional_derivatives: dimension mismatch");
  }
  const auto m = static_cast<std::size_t>(v.count());
  const double eps = config_.epsilon;
  // Slot m, when present, holds the base value U(x).
  std::vector<double> values(base ? m : m + 1);
  executor_.evaluate(
      target,
      [&](std::size_t i) -> VectorXd {
        VectorXd p = x;
        if (i < m) v.add_column(p, static_cast<Index>(i), eps);
        return p;
      },
      values, ledger);

  const double u0 = base ? *base : values[m];
  if (policy == NonFinitePolicy::kThrow && !std::isfinite(u0)) {
    throw NumericError("non-finite potential at the base point");
  }
  SliceDerivatives out{VectorXd(v.count()), u0};
  for (std::size_t i = 0; i < m; ++i) {
    if (policy == NonFinitePolicy::kThrow && !std::isfinite(values[i])) {
      throw NonFinitePotential(i, values[i]);
    }
    out.values[static_cast<Index>(i)] = (values[i] - u0) / eps;
  }
  return out;
}

ZoGradientEstimate ZoEngine::gradient_estimate(const TargetModel& target,
                                               const VectorXd& x,
                                               std::optional<double> base,
                                               DirectionLaw law, Index m,
                                               Rng& rng, RoundLedger& ledger) {
  const Index d = target.dimension();
  DirectionMatrix v = sample_directions(law, rng, d, m);
  SliceDerivatives g = directional_derivatives(target, x, base, v, ledger);
  VectorXd full = scaling_constant(d, m) * v.lift(g.values);
  return {std::move(v), std::move(g.values), std::move(full),
          g.base_potential};
}

ZoSgdResult zo_sgd_minimize(ZoEngine& engine, const TargetModel& target,
                            const VectorXd& x0, DirectionLaw law, Index m,
                            const LearningRate& rate, std::size_t steps,
                            Rng& rng) {
  if (x0.size() != target.dimension()) {
    throw UsageError("zo_sgd_minimize: dimension mismatch");
  }
  ZoSgdResult result{x0, {}, {}};
  result.potentials.reserve(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    const ZoGradientEstimate g = engine.gradient_estimate(
        target, result.x, std::nullopt, law, m, rng, result.ledger);
    result.potentials.push_back(g.base_potential);
    result.x -= rate(t) * g.full;
    const double norm = result.x.norm();
    if (!(norm <= kDivergenceRadius)) throw DivergenceError(t, norm);
  }
  return result;
}

}  // namespace zopmc
