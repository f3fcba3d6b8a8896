#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

#include "zopmc/errors.hpp"
#include "zopmc/samplers.hpp"

namespace zopmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool metropolis_accept(Rng& rng, double log_ratio) {
  // NaN ratios compare false and reject.
  return std::log(uniform01(rng)) < log_ratio;
}

KernelOutcome finish(const ChainState& state, VectorXd proposal,
                     double proposal_potential, double log_ratio,
                     bool accepted, std::uint64_t rounds_before,
                     const RoundLedger& ledger) {
  KernelOutcome out;
  out.accepted = accepted;
  out.log_ratio = log_ratio;
  out.rounds = ledger.rounds - rounds_before;
  out.divergent = !std::isfinite(proposal_potential);
  if (accepted) {
    out.next = {std::move(proposal), proposal_potential, state.t + 1};
  } else {
    out.next = {state.x, state.potential, state.t + 1};
  }
  return out;
}

/// Evaluates U at `points` in one round, appending U(x) when it is not yet
/// cached. Returns U(x).
double evaluate_with_base(KernelContext& ctx, const ChainState& state,
                          const std::vector<VectorXd>& points,
                          std::vector<double>& values) {
  const std::size_t n = points.size();
  values.assign(state.potential ? n : n + 1, 0.0);
  ctx.engine.executor().evaluate(
      ctx.target,
      [&](std::size_t i) -> VectorXd { return i < n ? points[i] : state.x; },
      values, ctx.ledger);
  return state.potential ? *state.potential : values[n];
}

double log_sum_exp(const std::vector<double>& logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  if (top == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double l : logs) sum += std::exp(l - top);
  return top + std::log(sum);
}

void check_state(const KernelContext& ctx, const ChainState& state) {
  if (state.x.size() != ctx.target.dimension()) {
    throw UsageError("kernel step: state dimension does not match target");
  }
}

}  // namespace

KernelOutcome rwm_step(KernelContext& ctx, const ChainState& state,
                       double sigma) {
  check_state(ctx, state);
  const std::uint64_t before = ctx.ledger.rounds;
  const VectorXd z = standard_normal_vector(ctx.rng, state.x.size());
  std::vector<VectorXd> points{state.x + sigma * z};
  std::vector<double> values;
  const double ux = evaluate_with_base(ctx, state, points, values);
  const double uy = values[0];
  const double log_ratio = ux - uy;
  const bool accepted = metropolis_accept(ctx.rng, log_ratio);
  ChainState current{state.x, ux, state.t};
  return finish(current, std::move(points[0]), uy, log_ratio, accepted,
                before, ctx.ledger);
}

KernelOutcome zo_ula_step(KernelContext& ctx, const ChainState& state,
                          double gamma, Index m, DirectionLaw law) {
  check_state(ctx, state);
  const std::uint64_t before = ctx.ledger.rounds;
  const Index d = state.x.size();
  const DirectionMatrix v = sample_directions(law, ctx.rng, d, m);
  const VectorXd z = standard_normal_vector(ctx.rng, d);
  const SliceDerivatives g = ctx.engine.directional_derivatives(
      ctx.target, state.x, state.potential, v, ctx.ledger,
      NonFinitePolicy::kReturn);
  VectorXd next = state.x - gamma * scaling_constant(d, m) * v.lift(g.values) +
                  std::sqrt(2.0 * gamma) * z;
  const double norm = next.norm();
  if (!(norm <= kDivergenceRadius)) {
    throw DivergenceError(state.t + 1, norm);
  }
  KernelOutcome out;
  out.accepted = true;
  out.rounds = ctx.ledger.rounds - before;
  out.next = {std::move(next), std::nullopt, state.t + 1};
  return out;
}

NaiveProposal naive_zo_mala_proposal(KernelContext& ctx, const VectorXd& x,
                                     std::optional<double> base, double sigma,
                                     const DirectionMatrix& v) {
  const Index d = x.size();
  const SliceDerivatives gx = ctx.engine.directional_derivatives(
      ctx.target, x, base, v, ctx.ledger, NonFinitePolicy::kReturn);
  VectorXd drift = scaling_constant(d, v.count()) * v.lift(gx.values);
  const VectorXd z = standard_normal_vector(ctx.rng, d);
  VectorXd y = x - 0.5 * sigma * sigma * drift + sigma * z;
  return {std::move(y), std::move(drift), gx.base_potential};
}

KernelOutcome naive_zo_mala_step(KernelContext& ctx, const ChainState& state,
                                 double sigma, Index m, DirectionLaw law) {
  check_state(ctx, state);
  const std::uint64_t before = ctx.ledger.rounds;
  const Index d = state.x.size();
  const double c = scaling_constant(d, m);
  const double half_var = 0.5 * sigma * sigma;

  const DirectionMatrix v = sample_directions(law, ctx.rng, d, m);
  NaiveProposal forward =
      naive_zo_mala_proposal(ctx, state.x, state.potential, sigma, v);
  const VectorXd& drift_x = forward.drift;
  VectorXd& y = forward.y;

  // Reverse proposal density at y with the same V.
  const SliceDerivatives gy = ctx.engine.directional_derivatives(
      ctx.target, y, std::nullopt, v, ctx.ledger, NonFinitePolicy::kReturn);
  const VectorXd drift_y = c * v.lift(gy.values);

  const double ux = forward.base_potential;
  const double uy = gy.base_potential;
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  const double log_q_forward =
      -(y - state.x + half_var * drift_x).squaredNorm() * inv_two_var;
  const double log_q_reverse =
      -(state.x - y + half_var * drift_y).squaredNorm() * inv_two_var;
  double log_ratio = ux - uy + log_q_reverse - log_q_forward;
  if (!drift_y.allFinite()) log_ratio = kNegInf;

  const bool accepted = metropolis_accept(ctx.rng, log_ratio);
  ChainState current{state.x, ux, state.t};
  return finish(current, std::move(y), uy, log_ratio, accepted, before,
                ctx.ledger);
}

KernelOutcome rs_hmc_step(KernelContext& ctx, const ChainState& state,
                          double gamma, int leapfrog_count, Index m,
                          DirectionLaw law) {
  check_state(ctx, state);
  const std::uint64_t before = ctx.ledger.rounds;
  const Index d = state.x.size();
  const DirectionMatrix v = sample_directions(law, ctx.rng, d, m);
  const VectorXd k = standard_normal_vector(ctx.rng, m);

  const SliceGradientFn gradient = [&](const VectorXd& s,
                                       std::optional<double> known) {
    return ctx.engine.directional_derivatives(ctx.target, v.displace(state.x, s),
                                              known, v, ctx.ledger,
                                              NonFinitePolicy::kReturn);
  };
  const LeapfrogEndpoint end = leapfrog_map(VectorXd::Zero(m), k, gamma,
                                            leapfrog_count, state.potential,
                                            gradient);
  const double ux = end.start_potential;
  double log_ratio = ux - end.end_potential +
                     0.5 * (k.squaredNorm() - end.k.squaredNorm());
  const bool finite = std::isfinite(end.end_potential) && end.s.allFinite() &&
                      end.k.allFinite();
  if (!finite) log_ratio = kNegInf;

  const bool accepted = metropolis_accept(ctx.rng, log_ratio);
  ChainState current{state.x, ux, state.t};
  KernelOutcome out = finish(current, v.displace(state.x, end.s),
                             end.end_potential, log_ratio, accepted, before,
                             ctx.ledger);
  out.divergent = !finite;
  return out;
}

KernelOutcome mtm_step(KernelContext& ctx, const ChainState& state,
                       double sigma, Index m) {
  check_state(ctx, state);
  if (m < 1) throw UsageError("mtm_step: need at least one proposal");
  const std::uint64_t before = ctx.ledger.rounds;
  const Index d = state.x.size();
  const auto tries = static_cast<std::size_t>(m);

  std::vector<VectorXd> forward(tries);
  for (auto& y : forward) y = state.x + sigma * standard_normal_vector(ctx.rng, d);
  std::vector<double> u_forward;
  const double ux = evaluate_with_base(ctx, state, forward, u_forward);
  u_forward.resize(tries);

  std::vector<double> log_w(tries);
  for (std::size_t j = 0; j < tries; ++j) {
    const double lw = 0.5 * (ux - u_forward[j]);
    log_w[j] = std::isfinite(lw) ? lw : kNegInf;
  }
  const double lse_forward = log_sum_exp(log_w);
  if (lse_forward == kNegInf || !std::isfinite(lse_forward)) {
    uniform01(ctx.rng);  // keep the draw count fixed
    KernelOutcome out;
    out.accepted = false;
    out.log_ratio = kNegInf;
    out.rounds = ctx.ledger.rounds - before;
    out.divergent = true;
    out.next = {state.x, ux, state.t + 1};
    return out;
  }

  // Select a candidate with probability proportional to its weight.
  const double pick = uniform01(ctx.rng);
  // Fallback for a pick that lands past the rounded cumulative total.
  std::size_t chosen = 0;
  for (std::size_t j = 0; j < tries; ++j) {
    if (log_w[j] != kNegInf) chosen = j;
  }
  double cumulative = 0.0;
  for (std::size_t j = 0; j < tries; ++j) {
    cumulative += std::exp(log_w[j] - lse_forward);
    if (pick < cumulative) {
      chosen = j;
      break;
    }
  }
  const VectorXd& y = forward[chosen];
  const double uy = u_forward[chosen];

  // Reverse set: m - 1 fresh proposals around y, plus x itself.
  std::vector<VectorXd> reverse(tries - 1);
  for (auto& w : reverse) w = y + sigma * standard_normal_vector(ctx.rng, d);
  std::vector<double> u_reverse(reverse.size());
  if (!reverse.empty()) {
    ctx.engine.executor().evaluate(
        ctx.target, [&](std::size_t i) -> VectorXd { return reverse[i]; },
        u_reverse, ctx.ledger);
  }
  std::vector<double> log_w_reverse(tries);
  for (std::size_t j = 0; j + 1 < tries; ++j) {
    const double lw = 0.5 * (uy - u_reverse[j]);
    log_w_reverse[j] = std::isfinite(lw) ? lw : kNegInf;
  }
  log_w_reverse[tries - 1] = 0.5 * (uy - ux);

  const double log_ratio = lse_forward - log_sum_exp(log_w_reverse);
  const bool accepted = metropolis_accept(ctx.rng, log_ratio);
  ChainState current{state.x, ux, state.t};
  return finish(current, y, uy, log_ratio, accepted, before, ctx.ledger);
}

// ---------------------------------------------------------------------------
// Kernel objects

namespace {

class ConfiguredKernel final : public Kernel {
 public:
  explicit ConfiguredKernel(SamplerConfig config) : config_(std::move(config)) {
    config_.validate();
  }

  KernelOutcome step(KernelContext& ctx, const ChainState& state) override {
    switch (config_.kernel) {
      case KernelKind::kRwm:
        return rwm_step(ctx, state, config_.proposal_scale);
      case KernelKind::kZoUla:
        return zo_ula_step(ctx, state, config_.ula_step, config_.m,
                           config_.law);
      case KernelKind::kNaiveZoMala:
        return naive_zo_mala_step(ctx, state, config_.proposal_scale,
                                  config_.m, config_.law);
      case KernelKind::kRsHmc:
        return rs_hmc_step(ctx, state, config_.leapfrog_step,
                           config_.leapfrog_count, config_.m, config_.law);
      case KernelKind::kMtm:
        return mtm_step(ctx, state, config_.proposal_scale, config_.m);
    }
    throw UsageError("unknown kernel");
  }

  double scale() const override { return config_.tuned_scale(); }
  void set_scale(double value) override { config_.set_tuned_scale(value); }

 private:
  SamplerConfig config_;
};

/// U(A^-1 y) for a fixed invertible A. Diagonal A skips the dense product.
class PulledBackTarget final : public TargetModel {
 public:
  PulledBackTarget(const TargetModel& base, const MatrixXd& inverse,
                   const VectorXd* inverse_diagonal)
      : base_(base), inverse_(inverse), inverse_diagonal_(inverse_diagonal) {}

  Index dimension() const override { return base_.dimension(); }
  std::string name() const override { return base_.name() + "-pulled-back"; }
  double potential(const VectorXd& y) const override {
    if (inverse_diagonal_) {
      return base_.potential(inverse_diagonal_->cwiseProduct(y));
    }
    return base_.potential(inverse_ * y);
  }

 private:
  const TargetModel& base_;
  const MatrixXd& inverse_;
  const VectorXd* inverse_diagonal_;
};

bool is_diagonal(const MatrixXd& a) {
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      if (i != j && a(i, j) != 0.0) return false;
    }
  }
  return true;
}

class PreconditionedKernel final : public Kernel {
 public:
  PreconditionedKernel(std::unique_ptr<Kernel> inner, MatrixXd a,
                       MatrixXd inverse)
      : inner_(std::move(inner)), a_(std::move(a)), inverse_(std::move(inverse)) {
    if (is_diagonal(a_)) {
      diagonal_ = a_.diagonal();
      inverse_diagonal_ = inverse_.diagonal();
    }
  }

  KernelOutcome step(KernelContext& ctx, const ChainState& state) override {
    const bool diag = diagonal_.size() > 0;
    const PulledBackTarget pulled(ctx.target, inverse_,
                                  diag ? &inverse_diagonal_ : nullptr);
    KernelContext inner_ctx{pulled, ctx.engine, ctx.rng, ctx.ledger};
    const ChainState mapped{
        diag ? VectorXd(diagonal_.cwiseProduct(state.x)) : VectorXd(a_ * state.x),
        state.potential, state.t};
    KernelOutcome out = inner_->step(inner_ctx, mapped);
    if (out.accepted) {
      out.next.x = diag ? VectorXd(inverse_diagonal_.cwiseProduct(out.next.x))
                        : VectorXd(inverse_ * out.next.x);
    } else {
      out.next.x = state.x;
    }
    return out;
  }

  double scale() const override { return inner_->scale(); }
  void set_scale(double value) override { inner_->set_scale(value); }

 private:
  std::unique_ptr<Kernel> inner_;
  MatrixXd a_;
  MatrixXd inverse_;
  VectorXd diagonal_;
  VectorXd inverse_diagonal_;
};

}  // namespace

std::unique_ptr<Kernel> make_kernel(const SamplerConfig& config) {
  return std::make_unique<ConfiguredKernel>(config);
}

std::unique_ptr<Kernel> preconditioned(std::unique_ptr<Kernel> inner,
                                       const MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1) {
    throw ConfigError("preconditioner must be a non-empty square matrix");
  }
  Eigen::PartialPivLU<MatrixXd> lu(a);
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  if (!(pivots.minCoeff() > 1e-12 * std::max(1.0, pivots.maxCoeff()))) {
    throw ConfigError("preconditioner is singular (smallest LU pivot " +
                      std::to_string(pivots.minCoeff()) + ")");
  }
  MatrixXd inverse = lu.inverse();
  return std::make_unique<PreconditionedKernel>(std::move(inner), a,
                                                std::move(inverse));
}

double adapt_scale(bool accepted, double scale, double target_acceptance,
                   std::size_t t, double decay) {
  if (t < 1) throw UsageError("adapt_scale: t must be >= 1");
  const double gain = std::pow(static_cast<double>(t), -decay);
  return scale * std::exp(gain * ((accepted ? 1.0 : 0.0) - target_acceptance));
}

}  // namespace zopmc
