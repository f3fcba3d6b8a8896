#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "zopmc/directions.hpp"
#include "zopmc/random.hpp"
#include "zopmc/round_executor.hpp"
#include "zopmc/targets.hpp"
#include "zopmc/trajectory.hpp"
#include "zopmc/zo_engine.hpp"

namespace zopmc {

enum class KernelKind {
  kRwm,
  kZoUla,
  kNaiveZoMala,
  kRsHmc,  // leapfrog_count == 1 is RS-MALA
  kMtm,
};

std::string to_string(KernelKind kind);

/// Kernel selection parsed from a name. "rs-mala" maps to RS-HMC with a
/// single leapfrog step.
struct KernelSelection {
  KernelKind kind;
  std::optional<int> leapfrog_count;
};
KernelSelection parse_kernel(std::string_view name);

/// Display name: "rs-mala" for RS-HMC with L = 1.
std::string kernel_label(KernelKind kind, int leapfrog_count);

/// Covariance learned during burn-in and applied as a preconditioner.
enum class CovarianceAdaptation {
  kNone,
  /// Running per-coordinate variances; A = diag(g / sd_i), where g is the
  /// geometric mean of the sd_i, refreshed at t = 100, 200, 400, ...
  kDiagonal,
};

struct AdaptationSettings {
  bool enabled = true;
  CovarianceAdaptation covariance = CovarianceAdaptation::kNone;
  /// Overrides the kernel default (0.234 RWM/MTM, 0.574 MALA-type,
  /// 0.651 RS-HMC with L > 1).
  std::optional<double> target_acceptance;
  /// Robbins-Monro gain t^-decay.
  double decay = 0.6;
  /// Adaptation stops after this fraction of the run.
  double burn_in_fraction = 0.5;
};

struct SamplerConfig {
  KernelKind kernel = KernelKind::kRsHmc;
  Index m = 1;
  DirectionLaw law = DirectionLaw::kCanonicalSubset;
  double ula_step = 0.01;       // gamma, ZO-ULA
  double proposal_scale = 0.5;  // sigma, RWM / naive ZO-MALA / MTM
  double leapfrog_step = 0.5;   // gamma, RS-HMC
  int leapfrog_count = 1;       // L
  double epsilon = 1e-5;
  std::size_t workers = 1;
  AdaptationSettings adaptation;
  std::optional<MatrixXd> preconditioner;

  /// Throws ConfigError on non-positive scales, L < 1, m < 1.
  void validate() const;
  double target_acceptance() const;
  /// The scale adaptation acts on, per kernel.
  double tuned_scale() const;
  void set_tuned_scale(double value);
  bool adapts() const;
};

struct ChainState {
  VectorXd x;
  /// U(x) when known. Refreshed on every accepted move; ZO-ULA leaves it
  /// empty and the next round evaluates it.
  std::optional<double> potential;
  std::uint64_t t = 0;
};

struct KernelOutcome {
  ChainState next;
  bool accepted = false;
  double log_ratio = 0.0;
  std::uint64_t rounds = 0;
  bool divergent = false;
};

/// Everything a kernel step touches besides the state: the potential, the
/// round executor, the caller's random stream and the cost ledger.
struct KernelContext {
  const TargetModel& target;
  ZoEngine& engine;
  Rng& rng;
  RoundLedger& ledger;
};

// ---------------------------------------------------------------------------
// Single steps. Every step consumes the random stream in a fixed order that
// is documented at each function, so reference implementations can replay it.

/// Draws: z ~ N(0, I_d), then u. Proposes x + sigma z. One round.
KernelOutcome rwm_step(KernelContext& ctx, const ChainState& state,
                       double sigma);

/// Draws: V, then Z ~ N(0, I_d). Unadjusted move
/// x - gamma (d/m) V g + sqrt(2 gamma) Z. One round of m + 1 evaluations.
/// Throws DivergenceError when the iterate leaves the 1e8 ball.
KernelOutcome zo_ula_step(KernelContext& ctx, const ChainState& state,
                          double gamma, Index m, DirectionLaw law);

/// Forward proposal of naive ZO-MALA for a given V:
/// y = x - (sigma^2 / 2) (d/m) V g + sigma z, with z ~ N(0, I_d) drawn from
/// ctx.rng after the round that computes g.
struct NaiveProposal {
  VectorXd y;
  VectorXd drift;  // (d/m) V g at x
  double base_potential;
};
NaiveProposal naive_zo_mala_proposal(KernelContext& ctx, const VectorXd& x,
                                     std::optional<double> base, double sigma,
                                     const DirectionMatrix& v);

/// Draws: V, then z ~ N(0, I_d), then u. Full-space Gaussian proposal
/// around the zeroth-order drifted point; the reverse density reuses the same
/// V. Two rounds.
KernelOutcome naive_zo_mala_step(KernelContext& ctx, const ChainState& state,
                                 double sigma, Index m, DirectionLaw law);

/// Draws: V, then k ~ N(0, I_m), then u. Leapfrog on the m-dimensional
/// slice with finite-difference slice gradients; L + 1 rounds, always paid
/// in full. Non-finite potentials along the path reject the move.
KernelOutcome rs_hmc_step(KernelContext& ctx, const ChainState& state,
                          double gamma, int leapfrog_count, Index m,
                          DirectionLaw law);

/// Draws: m forward noises, selection uniform, m - 1 reverse noises, u.
/// Multiple-try Metropolis with locally balanced weights sqrt(pi(y)/pi(x)).
/// Two rounds (one when m == 1).
KernelOutcome mtm_step(KernelContext& ctx, const ChainState& state,
                       double sigma, Index m);

// ---------------------------------------------------------------------------
// Leapfrog map on the slice

/// Gradient of s -> U(x + V s) at s, together with U(x + V s). The optional
/// argument carries U(x + V s) when already known.
using SliceGradientFn =
    std::function<SliceDerivatives(const VectorXd&, std::optional<double>)>;

struct LeapfrogEndpoint {
  VectorXd s;
  VectorXd k;
  double start_potential;  // U(x + V s_0)
  double end_potential;    // U(x + V s_L)
};

/// The map (s_0, k) -> (s_L, k'_L): half momentum step, L position steps with
/// full momentum steps in between, final half step and momentum negation.
LeapfrogEndpoint leapfrog_map(const VectorXd& s0, const VectorXd& k,
                              double gamma, int leapfrog_count,
                              std::optional<double> start_potential,
                              const SliceGradientFn& gradient);

enum class SliceGradientSource { kFiniteDifference, kAnalyticOracle };

struct InvolutionReport {
  double max_deviation;          // ||T(T(s0, k)) - (s0, k)||_inf
  double log_abs_det_jacobian;   // |log |det J_T(s0, k)||
};

/// Applies the leapfrog map twice and measures how far it lands from the
/// start; also forms a central-difference Jacobian of the map and reports
/// |log|det||. The analytic source goes through GradientOracle.
InvolutionReport leapfrog_involution_check(
    const TargetModel& target, const VectorXd& x, const DirectionMatrix& v,
    const VectorXd& s0, const VectorXd& k, double gamma, int leapfrog_count,
    double epsilon, SliceGradientSource source,
    double jacobian_step = 1e-6);

// ---------------------------------------------------------------------------
// Kernels as objects

class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual KernelOutcome step(KernelContext& ctx, const ChainState& state) = 0;
  virtual double scale() const = 0;
  virtual void set_scale(double value) = 0;
};

/// The kernel named by config.kernel with its scale taken from the config.
std::unique_ptr<Kernel> make_kernel(const SamplerConfig& config);

/// Wraps a kernel to run in y = A x coordinates against the pulled-back
/// potential U(A^-1 y). Throws ConfigError when A is singular.
std::unique_ptr<Kernel> preconditioned(std::unique_ptr<Kernel> inner,
                                       const MatrixXd& a);

/// Robbins-Monro update on the log scale:
/// log s <- log s + t^-decay (accepted - target).
double adapt_scale(bool accepted, double scale, double target_acceptance,
                   std::size_t t, double decay = 0.6);

// ---------------------------------------------------------------------------
// Chains

struct ChainOptions {
  std::size_t thin = 1;
  bool keep_states = true;
};

struct ChainDiagnostics {
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  double acceptance_rate = 0.0;
  double post_burn_in_acceptance = 0.0;
  double initial_scale = 0.0;
  double final_scale = 0.0;
  /// Diagonal of the learned preconditioner, when covariance adaptation ran.
  std::optional<VectorXd> learned_preconditioner;
  std::size_t divergent = 0;
  std::vector<std::string> warnings;
};

struct ChainResult {
  Trajectory trajectory;
  RoundLedger ledger;
  ChainDiagnostics diagnostics;
};

class ChainError : public std::runtime_error {
 public:
  ChainError(std::size_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " +
                           what),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Runs T iterations from x0 with a stream seeded from `seed`. The output is
/// a function of (target, config, T, x0, seed) only; the worker count does
/// not change it.
ChainResult run_chain(const TargetModel& target, const SamplerConfig& config,
                      std::size_t iterations, const VectorXd& x0,
                      std::uint64_t seed, const ChainOptions& options = {});

}  // namespace zopmc
