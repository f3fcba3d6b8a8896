#include "zopmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "zopmc/errors.hpp"

namespace zopmc {

double esjd(const StateMatrix& states, Index first_row) {
  const Index rows = states.rows() - first_row;
  if (first_row < 0 || rows < 2) {
    throw UsageError("esjd needs at least two states");
  }
  const Index d = states.cols();
  const auto block = states.middleRows(first_row, rows);
  const double total =
      (block.bottomRows(rows - 1) - block.topRows(rows - 1)).squaredNorm();
  return total / (static_cast<double>(d) * static_cast<double>(rows - 1));
}

double esjd(const Trajectory& trajectory, Index first_row) {
  return esjd(trajectory.states, first_row);
}

Index burn_in_row(const Trajectory& trajectory, double burn_in_fraction) {
  const auto row = static_cast<Index>(
      std::floor(burn_in_fraction * static_cast<double>(trajectory.kept())));
  return std::clamp<Index>(row, 0, std::max<Index>(trajectory.kept() - 2, 0));
}

double cost_factor(Index m, Index m0, int leapfrog_count) {
  if (m < 1 || m0 < 1 || leapfrog_count < 1) {
    throw UsageError("cost_factor: m, m0 and L must be positive");
  }
  const Index batches = (m + m0 - 1) / m0;
  return static_cast<double>(batches) * static_cast<double>(leapfrog_count);
}

double relative_gain(double esjd_alg, double esjd_rwm, int leapfrog_count,
                     Index m, Index m0) {
  if (!(esjd_rwm > 0.0)) {
    throw DomainError("relative gain undefined: baseline ESJD is not positive");
  }
  return esjd_alg / esjd_rwm / cost_factor(m, m0, leapfrog_count);
}

EfficiencyReport make_efficiency_report(const std::string& target,
                                        const ChainResult& chain, Index m0,
                                        double esjd_rwm,
                                        double burn_in_fraction) {
  const Trajectory& traj = chain.trajectory;
  EfficiencyReport r;
  r.target = target;
  r.kernel = traj.kernel;
  r.d = traj.dimension();
  r.m = traj.m;
  r.m0 = m0;
  r.leapfrog_count = traj.leapfrog_count;
  r.esjd = esjd(traj, burn_in_row(traj, burn_in_fraction));
  const double rounds_per_iteration =
      static_cast<double>(chain.ledger.rounds) /
      static_cast<double>(std::max<std::size_t>(chain.diagnostics.iterations, 1));
  r.esjd_per_round = rounds_per_iteration > 0 ? r.esjd / rounds_per_iteration : 0;
  r.esjd_rwm = esjd_rwm;
  if (esjd_rwm > 0.0) {
    r.gain_vs_rwm = relative_gain(r.esjd, esjd_rwm, r.leapfrog_count, r.m, m0);
  }
  r.eff = r.esjd / cost_factor(r.m, m0, r.leapfrog_count);
  r.acceptance_rate = chain.diagnostics.post_burn_in_acceptance;
  r.ledger = chain.ledger;
  return r;
}

ContractionReport w2_contraction_estimate(const TargetModel& target,
                                          double gamma, Index m,
                                          DirectionLaw law,
                                          std::size_t n_pairs,
                                          std::size_t n_steps, Rng& rng,
                                          const ContractionOptions& options) {
  const auto bounds = target.curvature();
  if (!bounds) {
    throw UsageError("contraction estimate needs known curvature bounds");
  }
  if (n_pairs < 2 || n_steps < 1) {
    throw UsageError("contraction estimate needs >= 2 pairs and >= 1 step");
  }
  if (!(gamma >= 0.0)) throw UsageError("step must be non-negative");
  const Index d = target.dimension();
  if (m < 1 || m > d) throw UsageError("contraction estimate: bad m");

  ContractionReport report;
  report.bound = std::sqrt(std::max(0.0, 1.0 - gamma * bounds->convexity));
  report.step_limit =
      static_cast<double>(m) / (bounds->smoothness * static_cast<double>(d));
  report.step_exceeds_limit = gamma > report.step_limit;

  ZoEngine engine({options.epsilon, 1});
  RoundLedger scratch;
  const double c = scaling_constant(d, m);
  const double noise = std::sqrt(2.0 * gamma);
  const auto slice = [&](const VectorXd& x, const DirectionMatrix& v) {
    if (options.source == SliceGradientSource::kAnalyticOracle) {
      return v.project(GradientOracle::gradient(target, x));
    }
    return engine.directional_derivatives(target, x, std::nullopt, v, scratch)
        .values;
  };

  // W2 under the coupling: the per-step factor is
  // (E|X_T - Y_T|^2 / E|x - y|^2)^(1/2T), estimated from squared ratios.
  std::vector<double> squared_ratios;
  squared_ratios.reserve(n_pairs);
  report.pair_factors.reserve(n_pairs);
  const auto root = 1.0 / (2.0 * static_cast<double>(n_steps));
  for (std::size_t p = 0; p < n_pairs; ++p) {
    VectorXd x = options.start_spread * standard_normal_vector(rng, d);
    VectorXd y = options.start_spread * standard_normal_vector(rng, d);
    const double initial = (x - y).squaredNorm();
    for (std::size_t t = 0; t < n_steps; ++t) {
      const DirectionMatrix v = sample_directions(law, rng, d, m);
      const VectorXd z = standard_normal_vector(rng, d);
      const VectorXd gx = slice(x, v);
      const VectorXd gy = slice(y, v);
      x += -gamma * c * v.lift(gx) + noise * z;
      y += -gamma * c * v.lift(gy) + noise * z;
      if (!(x.norm() <= kDivergenceRadius && y.norm() <= kDivergenceRadius)) {
        throw DivergenceError(t + 1, std::max(x.norm(), y.norm()));
      }
    }
    const double r = (x - y).squaredNorm() / initial;
    squared_ratios.push_back(r);
    report.pair_factors.push_back(std::pow(r, root));
  }

  const auto n = static_cast<double>(n_pairs);
  double sum = 0.0;
  for (double r : squared_ratios) sum += r;
  const double mean = sum / n;
  double ss = 0.0;
  for (double r : squared_ratios) ss += (r - mean) * (r - mean);
  const double se_mean = std::sqrt(ss / (n - 1.0) / n);
  report.factor = std::pow(mean, root);
  double pair_sum = 0.0;
  for (double f : report.pair_factors) pair_sum += f;
  report.pair_mean_factor = pair_sum / n;
  // delta method for mean^(1/2T)
  report.standard_error = mean > 0.0 ? report.factor * root * se_mean / mean : 0.0;
  return report;
}

StationarityReport moment_stationarity_check(
    const StateMatrix& states, const GaussianTarget& target,
    const StationarityThresholds& thresholds) {
  const Index d = target.dimension();
  if (states.cols() != d) {
    throw UsageError("stationarity check: dimension mismatch");
  }
  const auto first = static_cast<Index>(std::floor(
      thresholds.burn_in_fraction * static_cast<double>(states.rows())));
  const Index n = states.rows() - first;
  if (n < 2) throw UsageError("stationarity check needs at least two states");

  const auto block = states.middleRows(first, n);
  StationarityReport r;
  r.sample_mean = block.colwise().mean().transpose();
  const MatrixXd centered = block.rowwise() - r.sample_mean.transpose();
  r.sample_covariance =
      (centered.transpose() * centered) / static_cast<double>(n - 1);

  const MatrixXd& sigma = target.covariance();
  r.mean_tolerance = thresholds.mean_tolerance.value_or(
      0.02 * std::sqrt(sigma.trace() / static_cast<double>(d)));
  r.mean_error = (r.sample_mean - target.mean()).cwiseAbs().maxCoeff();
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double scale = std::sqrt(sigma(i, i) * sigma(j, j));
      const double err =
          std::abs(r.sample_covariance(i, j) - sigma(i, j)) / scale;
      r.covariance_error = std::max(r.covariance_error, err);
    }
  }
  r.pass = r.mean_error <= r.mean_tolerance &&
           r.covariance_error <= thresholds.covariance_tolerance;
  return r;
}

StationarityReport moment_stationarity_check(
    const Trajectory& trajectory, const GaussianTarget& target,
    const StationarityThresholds& thresholds) {
  return moment_stationarity_check(trajectory.states, target, thresholds);
}

std::vector<EffSweepRow> eff_sweep(const std::vector<EfficiencyReport>& reports,
                                   const std::vector<Index>& m0_grid) {
  if (reports.empty() || m0_grid.empty()) {
    throw UsageError("eff_sweep: empty report set or m0 grid");
  }
  const EfficiencyReport& head = reports.front();
  std::map<Index, const EfficiencyReport*> by_m;
  for (const auto& r : reports) {
    if (r.target != head.target || r.d != head.d || r.kernel != head.kernel) {
      throw UsageError("eff_sweep: reports mix targets or kernels (" +
                       r.target + "/" + r.kernel + " vs " + head.target + "/" +
                       head.kernel + ")");
    }
    if (!by_m.emplace(r.m, &r).second) {
      throw UsageError("eff_sweep: duplicate report for m = " +
                       std::to_string(r.m));
    }
  }

  std::vector<EffSweepRow> rows;
  for (Index m0 : m0_grid) {
    const auto base = by_m.find(m0);
    if (base == by_m.end()) {
      throw UsageError("eff_sweep: no report with m = m0 = " +
                       std::to_string(m0));
    }
    const double eff0 = base->second->esjd /
                        cost_factor(m0, m0, base->second->leapfrog_count);
    const std::size_t first = rows.size();
    for (const auto& [m, r] : by_m) {
      EffSweepRow row;
      row.kernel = r->kernel;
      row.d = r->d;
      row.m = m;
      row.m0 = m0;
      row.leapfrog_count = r->leapfrog_count;
      row.esjd = r->esjd;
      row.eff_ratio =
          r->esjd / cost_factor(m, m0, r->leapfrog_count) / eff0;
      if (r->esjd_rwm > 0.0) {
        row.gain = relative_gain(r->esjd, r->esjd_rwm, r->leapfrog_count, m, m0);
      }
      row.acceptance_rate = r->acceptance_rate;
      row.rounds = r->ledger.rounds;
      rows.push_back(row);
    }
    auto best = std::max_element(
        rows.begin() + static_cast<std::ptrdiff_t>(first), rows.end(),
        [](const EffSweepRow& a, const EffSweepRow& b) {
          return a.eff_ratio < b.eff_ratio;
        });
    best->argmax = true;
  }
  return rows;
}

}  // namespace zopmc
