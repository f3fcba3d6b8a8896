#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "zopmc/errors.hpp"
#include "zopmc/samplers.hpp"

namespace zopmc {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::kRwm: return "rwm";
    case KernelKind::kZoUla: return "zo-ula";
    case KernelKind::kNaiveZoMala: return "naive-mala";
    case KernelKind::kRsHmc: return "rs-hmc";
    case KernelKind::kMtm: return "mtm";
  }
  return "unknown";
}

KernelSelection parse_kernel(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
    return c == '_' ? '-' : static_cast<char>(std::tolower(c));
  });
  if (key == "rwm") return {KernelKind::kRwm, std::nullopt};
  if (key == "zo-ula" || key == "ula") return {KernelKind::kZoUla, std::nullopt};
  if (key == "naive-mala" || key == "naive-zo-mala") {
    return {KernelKind::kNaiveZoMala, std::nullopt};
  }
  if (key == "rs-hmc") return {KernelKind::kRsHmc, std::nullopt};
  if (key == "rs-mala") return {KernelKind::kRsHmc, 1};
  if (key == "mtm") return {KernelKind::kMtm, std::nullopt};
  throw UsageError("unknown kernel '" + std::string(name) + "'");
}

std::string kernel_label(KernelKind kind, int leapfrog_count) {
  if (kind == KernelKind::kRsHmc && leapfrog_count == 1) return "rs-mala";
  return to_string(kind);
}

void SamplerConfig::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  // A zero step is the degenerate no-motion chain and stays allowed.
  const auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (m < 1) throw ConfigError("m must be >= 1");
  if (leapfrog_count < 1) throw ConfigError("leapfrog count must be >= 1");
  if (!non_negative(ula_step)) throw ConfigError("ULA step must be >= 0");
  if (!positive(proposal_scale)) {
    throw ConfigError("proposal scale must be positive");
  }
  if (!non_negative(leapfrog_step)) {
    throw ConfigError("leapfrog step must be >= 0");
  }
  if (!positive(epsilon)) {
    throw ConfigError("finite-difference step must be positive");
  }
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  if (adaptation.target_acceptance) {
    const double a = *adaptation.target_acceptance;
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("target acceptance must lie in (0, 1)");
    }
  }
  if (!(adaptation.decay > 0.5 && adaptation.decay <= 1.0)) {
    throw ConfigError("adaptation decay must lie in (0.5, 1]");
  }
  if (!(adaptation.burn_in_fraction >= 0.0 &&
        adaptation.burn_in_fraction < 1.0)) {
    throw ConfigError("burn-in fraction must lie in [0, 1)");
  }
  if (preconditioner && (preconditioner->rows() != preconditioner->cols())) {
    throw ConfigError("preconditioner must be square");
  }
  if (preconditioner &&
      adaptation.covariance != CovarianceAdaptation::kNone) {
    throw ConfigError(
        "a fixed preconditioner and covariance adaptation are exclusive");
  }
}

double SamplerConfig::target_acceptance() const {
  if (adaptation.target_acceptance) return *adaptation.target_acceptance;
  switch (kernel) {
    case KernelKind::kRwm:
    case KernelKind::kMtm:
      return 0.234;
    case KernelKind::kNaiveZoMala:
      return 0.574;
    case KernelKind::kRsHmc:
      return leapfrog_count == 1 ? 0.574 : 0.651;
    case KernelKind::kZoUla:
      return 1.0;
  }
  return 0.234;
}

double SamplerConfig::tuned_scale() const {
  switch (kernel) {
    case KernelKind::kZoUla: return ula_step;
    case KernelKind::kRsHmc: return leapfrog_step;
    default: return proposal_scale;
  }
}

void SamplerConfig::set_tuned_scale(double value) {
  switch (kernel) {
    case KernelKind::kZoUla: ula_step = value; break;
    case KernelKind::kRsHmc: leapfrog_step = value; break;
    default: proposal_scale = value; break;
  }
}

// ZO-ULA accepts every move, so there is nothing to adapt on.
bool SamplerConfig::adapts() const {
  return adaptation.enabled && kernel != KernelKind::kZoUla;
}

namespace {

/// A = diag(g / sd_i) from running variances; coordinates that never moved
/// get sd_i = g.
VectorXd diagonal_preconditioner(const VectorXd& variance) {
  double log_sum = 0.0;
  Index positive = 0;
  for (Index i = 0; i < variance.size(); ++i) {
    if (variance[i] > 0.0 && std::isfinite(variance[i])) {
      log_sum += 0.5 * std::log(variance[i]);
      ++positive;
    }
  }
  if (positive == 0) return VectorXd::Ones(variance.size());
  const double g = std::exp(log_sum / static_cast<double>(positive));
  VectorXd a(variance.size());
  for (Index i = 0; i < variance.size(); ++i) {
    const bool ok = variance[i] > 0.0 && std::isfinite(variance[i]);
    a[i] = ok ? g / std::sqrt(variance[i]) : 1.0;
  }
  return a;
}

}  // namespace

ChainResult run_chain(const TargetModel& target, const SamplerConfig& config,
                      std::size_t iterations, const VectorXd& x0,
                      std::uint64_t seed, const ChainOptions& options) {
  config.validate();
  if (iterations < 1) throw UsageError("run_chain: T must be >= 1");
  if (options.thin < 1) throw UsageError("run_chain: thin must be >= 1");
  const Index d = target.dimension();
  if (x0.size() != d) throw UsageError("run_chain: x0 has the wrong dimension");
  if (!x0.allFinite()) throw DomainError("run_chain: x0 is not finite");
  if (config.kernel != KernelKind::kRwm && config.kernel != KernelKind::kMtm &&
      config.m > d) {
    throw ConfigError("m = " + std::to_string(config.m) +
                      " exceeds the dimension " + std::to_string(d));
  }

  Rng rng(seed);
  ZoEngine engine({config.epsilon, config.workers});
  std::unique_ptr<Kernel> kernel = make_kernel(config);
  if (config.preconditioner) {
    kernel = preconditioned(std::move(kernel), *config.preconditioner);
  }

  ChainResult result;
  ChainDiagnostics& diag = result.diagnostics;
  diag.iterations = iterations;
  diag.burn_in = static_cast<std::size_t>(
      std::floor(config.adaptation.burn_in_fraction *
                 static_cast<double>(iterations)));
  diag.initial_scale = kernel->scale();

  if (config.kernel == KernelKind::kZoUla) {
    if (const auto bounds = target.curvature()) {
      const double limit = static_cast<double>(config.m) /
                           (bounds->smoothness * static_cast<double>(d));
      if (config.ula_step > limit) {
        std::ostringstream msg;
        msg << "ULA step " << config.ula_step << " exceeds m/(L d) = " << limit;
        diag.warnings.push_back(msg.str());
      }
    }
  }

  Trajectory& traj = result.trajectory;
  traj.thin = options.thin;
  traj.kernel = kernel_label(config.kernel, config.leapfrog_count);
  traj.m = config.m;
  traj.leapfrog_count = config.leapfrog_count;
  traj.law = config.law;
  traj.accepted.reserve(iterations);
  const std::size_t rows =
      options.keep_states ? iterations / options.thin + 1 : 1;
  traj.states.resize(static_cast<Index>(rows), d);
  traj.states.row(0) = x0.transpose();
  Index row = 1;

  KernelContext ctx{target, engine, rng, result.ledger};
  ChainState state{x0, std::nullopt, 0};
  const double target_acc = config.target_acceptance();
  const bool learn_covariance =
      config.adapts() &&
      config.adaptation.covariance == CovarianceAdaptation::kDiagonal;
  VectorXd running_mean = VectorXd::Zero(d);
  VectorXd running_m2 = VectorXd::Zero(d);
  std::size_t next_refresh = 100;
  std::size_t accepted_total = 0;
  std::size_t accepted_post = 0;

  for (std::size_t t = 1; t <= iterations; ++t) {
    KernelOutcome out;
    try {
      out = kernel->step(ctx, state);
    } catch (const std::exception& e) {
      throw ChainError(t, e.what());
    }
    state = std::move(out.next);
    traj.accepted.push_back(out.accepted ? 1 : 0);
    if (out.accepted) {
      ++accepted_total;
      if (t > diag.burn_in) ++accepted_post;
    }
    if (out.divergent) ++diag.divergent;
    if (config.adapts() && t <= diag.burn_in) {
      kernel->set_scale(adapt_scale(out.accepted, kernel->scale(), target_acc,
                                    t, config.adaptation.decay));
    }
    if (learn_covariance && t <= diag.burn_in) {
      const VectorXd delta = state.x - running_mean;
      running_mean += delta / static_cast<double>(t);
      running_m2 += delta.cwiseProduct(state.x - running_mean);
      if (t == next_refresh) {
        next_refresh *= 2;
        const VectorXd a =
            diagonal_preconditioner(running_m2 / static_cast<double>(t - 1));
        SamplerConfig inner = config;
        inner.adaptation.covariance = CovarianceAdaptation::kNone;
        inner.set_tuned_scale(kernel->scale());
        kernel = preconditioned(make_kernel(inner), a.asDiagonal().toDenseMatrix());
        diag.learned_preconditioner = a;
      }
    }
    if (options.keep_states && t % options.thin == 0) {
      traj.states.row(row++) = state.x.transpose();
    }
  }
  if (!options.keep_states) traj.states.row(0) = state.x.transpose();

  diag.acceptance_rate =
      static_cast<double>(accepted_total) / static_cast<double>(iterations);
  const std::size_t post = iterations - diag.burn_in;
  diag.post_burn_in_acceptance =
      post > 0 ? static_cast<double>(accepted_post) / static_cast<double>(post)
               : 0.0;
  diag.final_scale = kernel->scale();
  return result;
}

}  // namespace zopmc
