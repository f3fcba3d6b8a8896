#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "zopmc/directions.hpp"
#include "zopmc/random.hpp"
#include "zopmc/round_executor.hpp"
#include "zopmc/samplers.hpp"
#include "zopmc/targets.hpp"
#include "zopmc/trajectory.hpp"

namespace zopmc {

// Expected squared jump distance over consecutive rows, starting at
// `first_row`. Rejections count as zero jumps.
double esjd(const StateMatrix& states, Index first_row = 0);
double esjd(const Trajectory& trajectory, Index first_row = 0);

// First row of the post-burn-in portion of a trajectory.
Index burn_in_row(const Trajectory& trajectory, double burn_in_fraction = 0.5);

// Parallel rounds per iteration relative to a machine with m0 workers:
// ceil(m / m0) * L. A batch smaller than m0 still occupies a whole round.
double cost_factor(Index m, Index m0, int leapfrog_count);

// esjd_alg / esjd_rwm / cost_factor(m, m0, L).
double relative_gain(double esjd_alg, double esjd_rwm, int leapfrog_count,
                     Index m, Index m0);

struct EfficiencyReport {
  std::string target;
  std::string kernel;
  Index d = 0;
  Index m = 0;
  Index m0 = 0;
  int leapfrog_count = 1;
  double esjd = 0.0;
  double esjd_per_round = 0.0;
  double esjd_rwm = 0.0;
  double gain_vs_rwm = 0.0;
  double eff = 0.0;  // esjd / cost_factor(m, m0, L)
  double acceptance_rate = 0.0;
  RoundLedger ledger;
};

// Builds a report from a finished chain. ESJD uses the post-burn-in part.
// Pass esjd_rwm <= 0 when no baseline is known; the gain is then left at 0.
EfficiencyReport make_efficiency_report(const std::string& target,
                                        const ChainResult& chain, Index m0,
                                        double esjd_rwm,
                                        double burn_in_fraction = 0.5);

struct ContractionOptions {
  double epsilon = 1e-5;
  SliceGradientSource source = SliceGradientSource::kFiniteDifference;
  // Starting points are drawn N(0, spread^2 I), independently per chain.
  double start_spread = 1.0;
};

struct ContractionReport {
  double factor = 0.0;          // (mean |X_T - Y_T|^2 / |x - y|^2)^(1/2T)
  double standard_error = 0.0;  // delta method over pairs
  double pair_mean_factor = 0.0;  // mean of pair_factors; biased low
  double bound = 0.0;           // sqrt(1 - gamma * lambda)
  double step_limit = 0.0;      // m / (L d)
  bool step_exceeds_limit = false;
  std::vector<double> pair_factors;  // per-pair (|X_T - Y_T| / |x - y|)^(1/T)
};

// Synchronous coupling of two ZO-ULA chains sharing V and Z at every step.
// Requires a target with known curvature bounds.
ContractionReport w2_contraction_estimate(const TargetModel& target,
                                          double gamma, Index m,
                                          DirectionLaw law,
                                          std::size_t n_pairs,
                                          std::size_t n_steps, Rng& rng,
                                          const ContractionOptions& options = {});

struct StationarityThresholds {
  // Absolute tolerance on each mean component; defaults to
  // 0.02 * sqrt(tr(Sigma) / d).
  std::optional<double> mean_tolerance;
  // Covariance entry (i, j) must lie within this fraction of
  // sqrt(Sigma_ii Sigma_jj) of the true value.
  double covariance_tolerance = 0.03;
  double burn_in_fraction = 0.5;
};

struct StationarityReport {
  VectorXd sample_mean;
  MatrixXd sample_covariance;
  double mean_error = 0.0;        // max |mean_i - mu_i|
  double mean_tolerance = 0.0;
  double covariance_error = 0.0;  // max relative entry error
  bool pass = false;
};

StationarityReport moment_stationarity_check(
    const StateMatrix& states, const GaussianTarget& target,
    const StationarityThresholds& thresholds = {});
StationarityReport moment_stationarity_check(
    const Trajectory& trajectory, const GaussianTarget& target,
    const StationarityThresholds& thresholds = {});

struct EffSweepRow {
  std::string kernel;
  Index d = 0;
  Index m = 0;
  Index m0 = 0;
  int leapfrog_count = 1;
  double esjd = 0.0;
  double gain = 0.0;
  double eff_ratio = 0.0;  // Eff(m) / Eff(m0)
  double acceptance_rate = 0.0;
  std::uint64_t rounds = 0;
  bool argmax = false;  // best m for this m0
};

// For every m0 in the grid, Eff(m) / Eff(m0) over all reports. Reports must
// share target, dimension and kernel, and one of them must have m == m0.
std::vector<EffSweepRow> eff_sweep(const std::vector<EfficiencyReport>& reports,
                                   const std::vector<Index>& m0_grid);

}  // namespace zopmc
