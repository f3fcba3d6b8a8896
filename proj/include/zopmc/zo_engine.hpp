#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "zopmc/directions.hpp"
#include "zopmc/random.hpp"
#include "zopmc/round_executor.hpp"
#include "zopmc/targets.hpp"

namespace zopmc {

struct FiniteDiffConfig {
  double epsilon = 1e-5;
  std::size_t workers = 1;
};

/// What to do when a potential evaluation comes back non-finite.
enum class NonFinitePolicy {
  kThrow,   // raise NonFinitePotential naming the direction
  kReturn,  // hand back non-finite entries; the caller decides
};

/// Forward-difference derivatives of U along the columns of V.
struct SliceDerivatives {
  VectorXd values;        // m entries
  double base_potential;  // U(x)
};

/// Full-space zeroth-order gradient estimate c V g with c = d/m.
struct ZoGradientEstimate {
  DirectionMatrix directions;
  VectorXd slice;  // directional derivatives along V
  VectorXd full;   // (d/m) V slice, lies in span(V)
  double base_potential;
};

/// Owns the finite-difference step and the worker pool; one engine per
/// chain run so the pool is built once, not once per round.
class ZoEngine {
 public:
  explicit ZoEngine(FiniteDiffConfig config = {});

  const FiniteDiffConfig& config() const { return config_; }
  double epsilon() const { return config_.epsilon; }
  RoundExecutor& executor() { return executor_; }

  /// g_i = (U(x + eps v_i) - U(x)) / eps for every column of V, in a single
  /// parallel round. When `base` is empty, U(x) is evaluated inside the same
  /// round (m + 1 evaluations), otherwise m evaluations are charged.
  SliceDerivatives directional_derivatives(
      const TargetModel& target, const VectorXd& x,
      std::optional<double> base, const DirectionMatrix& v,
      RoundLedger& ledger, NonFinitePolicy policy = NonFinitePolicy::kThrow);

  /// Samples V from `law`, then estimates the gradient in one round.
  ZoGradientEstimate gradient_estimate(const TargetModel& target,
                                       const VectorXd& x,
                                       std::optional<double> base,
                                       DirectionLaw law, Index m, Rng& rng,
                                       RoundLedger& ledger);

 private:
  FiniteDiffConfig config_;
  RoundExecutor executor_;
};

/// Learning rate l_t as a function of the 1-based step index.
using LearningRate = std::function<double(std::size_t)>;

struct ZoSgdResult {
  VectorXd x;
  RoundLedger ledger;
  /// U(x_0), ..., U(x_{T-1}) as observed by each step's base evaluation.
  std::vector<double> potentials;
};

/// x_t = x_{t-1} - l_t * ghat(x_{t-1}) for T steps, one round each.
/// Throws DivergenceError once ||x_t|| exceeds 1e8.
ZoSgdResult zo_sgd_minimize(ZoEngine& engine, const TargetModel& target,
                            const VectorXd& x0, DirectionLaw law, Index m,
                            const LearningRate& rate, std::size_t steps,
                            Rng& rng);

inline constexpr double kDivergenceRadius = 1e8;

}  // namespace zopmc
