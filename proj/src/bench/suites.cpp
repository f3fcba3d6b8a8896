#include <cmath>
#include <iomanip>
#include <sstream>

#include "internal.hpp"
#include "zopmc/errors.hpp"

namespace zopmc::bench {

namespace {

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

void print_table(const std::vector<Check>& checks, std::ostream& log) {
  std::size_t width = 8;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  for (const auto& c : checks) {
    log << (c.pass ? "PASS  " : "FAIL  ") << std::left
        << std::setw(static_cast<int>(width)) << c.name << "  " << c.detail
        << '\n';
  }
}

std::string describe(double value, const char* op, double bound) {
  std::ostringstream s;
  s << std::setprecision(4) << value << ' ' << op << ' ' << bound;
  return s.str();
}

LogisticRegressionTarget small_logistic(std::uint64_t seed, Index n, Index d) {
  const LogisticDataset data = generate_logistic_data(seed, n, d);
  return LogisticRegressionTarget(data.design, data.responses);
}

Check involution_check(double tolerance, SliceGradientSource source,
                       const std::string& name, bool with_jacobian) {
  const LogisticRegressionTarget target = small_logistic(11, 20, 6);
  Rng rng(derive_seed(5, 0));
  const VectorXd x = 0.3 * standard_normal_vector(rng, 6);
  const DirectionMatrix v = sample_uniform_stiefel(rng, 6, 2);
  const VectorXd s0 = 0.1 * standard_normal_vector(rng, 2);
  const VectorXd k = standard_normal_vector(rng, 2);
  const InvolutionReport r =
      leapfrog_involution_check(target, x, v, s0, k, 0.1, 3, 1e-5, source);
  bool pass = r.max_deviation <= tolerance;
  std::string detail = "deviation " + describe(r.max_deviation, "<=", tolerance);
  if (with_jacobian) {
    pass = pass && r.log_abs_det_jacobian <= 1e-6;
    detail += ", |log|det J|| " + describe(r.log_abs_det_jacobian, "<=", 1e-6);
  }
  return {name, pass, detail};
}

std::vector<Check> contraction_checks() {
  std::vector<Check> out;
  const GaussianTarget target = GaussianTarget::isotropic(20);
  Rng rng(derive_seed(3, 1));
  const ContractionReport r = w2_contraction_estimate(
      target, 0.25, 5, DirectionLaw::kCanonicalSubset, 2000, 5, rng);
  const double limit = r.bound + 3.0 * r.standard_error;
  out.push_back({"contraction (d=20, m=5, gamma=0.25)", r.factor <= limit,
                 "factor " + describe(r.factor, "<=", limit)});

  ContractionOptions exact;
  exact.source = SliceGradientSource::kAnalyticOracle;
  Rng rng2(derive_seed(3, 2));
  const ContractionReport full = w2_contraction_estimate(
      target, 0.25, 20, DirectionLaw::kUniformStiefel, 20, 10, rng2, exact);
  double worst = std::abs(full.factor - 0.75);
  for (double f : full.pair_factors) worst = std::max(worst, std::abs(f - 0.75));
  out.push_back({"contraction at m=d equals 1-gamma", worst <= 1e-12,
                 "max |factor - 0.75| " + describe(worst, "<=", 1e-12)});
  return out;
}

}  // namespace

bool run_gaussian_suite(const ExperimentSpec& spec, std::ostream& log) {
  std::vector<Check> checks;
  const auto target_ptr = build_target(spec.target);
  const auto* gaussian = dynamic_cast<const GaussianTarget*>(target_ptr.get());
  if (!gaussian) {
    log << "gaussian-verify needs a gaussian target\n";
    return false;
  }
  const Index d = gaussian->dimension();
  const VectorXd x0 = gaussian->mean();
  StationarityThresholds thresholds;
  thresholds.mean_tolerance = 0.02;
  thresholds.burn_in_fraction = spec.adaptation.burn_in_fraction;

  for (const auto& name : spec.kernels) {
    const KernelSelection sel = parse_kernel(name);
    Cell cell{name, std::min(spec.m.front(), d),
              sel.leapfrog_count.value_or(
                  sel.kind == KernelKind::kRsHmc ? spec.leapfrog.front() : 1),
              derive_seed(spec.seeds.front(), checks.size())};
    if (sel.kind == KernelKind::kRwm) cell.m = 1;
    try {
      const ChainResult chain = run_chain(*gaussian, cell_config(spec, cell),
                                          spec.iterations, x0, cell.seed);
      const StationarityReport r =
          moment_stationarity_check(chain.trajectory, *gaussian, thresholds);
      std::ostringstream detail;
      detail << "mean err " << std::setprecision(3) << r.mean_error << ", cov err "
             << r.covariance_error << ", acc "
             << chain.diagnostics.post_burn_in_acceptance;
      checks.push_back({"stationarity " + name, r.pass, detail.str()});
    } catch (const std::exception& e) {
      checks.push_back({"stationarity " + name, false, e.what()});
    }
  }
  for (auto& c : contraction_checks()) checks.push_back(std::move(c));
  checks.push_back(involution_check(1e-8, SliceGradientSource::kAnalyticOracle,
                                    "involution (analytic slice gradients)", true));
  checks.push_back(involution_check(1e-4, SliceGradientSource::kFiniteDifference,
                                    "involution (finite differences)", false));
  print_table(checks, log);
  return std::all_of(checks.begin(), checks.end(),
                     [](const Check& c) { return c.pass; });
}

int run_verify(std::size_t workers, std::ostream& log) {
  std::vector<Check> checks;
  const auto guarded = [&](const std::string& name, auto&& body) {
    try {
      checks.push_back(body());
    } catch (const std::exception& e) {
      checks.push_back({name, false, e.what()});
    }
  };

  for (DirectionLaw law :
       {DirectionLaw::kUniformStiefel, DirectionLaw::kCanonicalSubset}) {
    const std::string tag = to_string(law);
    guarded("orthonormality " + tag, [&] {
      Rng rng(derive_seed(21, static_cast<std::uint64_t>(law)));
      double worst = 0.0;
      for (int i = 0; i < 1000; ++i) {
        const MatrixXd v = sample_directions(law, rng, 50, 10).to_dense();
        worst = std::max(worst, (v.transpose() * v - MatrixXd::Identity(10, 10))
                                    .cwiseAbs()
                                    .maxCoeff());
      }
      return Check{"orthonormality " + tag, worst <= 1e-10,
                   "max |V^T V - I| " + describe(worst, "<=", 1e-10)};
    });

    guarded("assumption-2 identity " + tag, [&] {
      const Index d = 6, m = 2;
      const int draws = 100000;
      Rng rng(derive_seed(22, static_cast<std::uint64_t>(law)));
      const VectorXd a = standard_normal_vector(rng, d);
      const VectorXd b = standard_normal_vector(rng, d);
      MatrixXd projector = MatrixXd::Zero(d, d);
      double sum = 0.0, sum_sq = 0.0;
      for (int i = 0; i < draws; ++i) {
        const DirectionMatrix v = sample_directions(law, rng, d, m);
        const VectorXd vvb = v.lift(v.project(b));
        const double val = (a + vvb).squaredNorm();
        sum += val;
        sum_sq += val * val;
        const MatrixXd dense = v.to_dense();
        projector.noalias() += dense * dense.transpose();
      }
      const double c = scaling_constant(d, m);
      const double proj_err =
          (c * projector / draws - MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
      const double mean = sum / draws;
      const double se = std::sqrt((sum_sq / draws - mean * mean) / draws);
      const double expected = (static_cast<double>(d - m) / d) * a.squaredNorm() +
                              (static_cast<double>(m) / d) * (a + b).squaredNorm();
      const double z = std::abs(mean - expected) / se;
      return Check{"assumption-2 identity " + tag, proj_err <= 0.05 && z <= 3.0,
                   "projector err " + describe(proj_err, "<=", 0.05) +
                       ", norm identity |z| " + describe(z, "<=", 3.0)};
    });

    guarded("unbiasedness " + tag, [&] {
      const LogisticRegressionTarget target = small_logistic(23, 20, 6);
      Rng rng(derive_seed(24, static_cast<std::uint64_t>(law)));
      const VectorXd x = 0.5 * standard_normal_vector(rng, 6);
      const VectorXd exact = GradientOracle::gradient(target, x);
      ZoEngine engine;
      RoundLedger ledger;
      const double base = target.potential(x);
      const int draws = 100000;
      VectorXd sum = VectorXd::Zero(6), sum_sq = VectorXd::Zero(6);
      for (int i = 0; i < draws; ++i) {
        const VectorXd g =
            engine.gradient_estimate(target, x, base, law, 2, rng, ledger).full;
        sum += g;
        sum_sq += g.cwiseProduct(g);
      }
      const VectorXd mean = sum / draws;
      const VectorXd se =
          ((sum_sq / draws - mean.cwiseProduct(mean)) / draws).cwiseSqrt();
      double worst = 0.0;
      for (Index j = 0; j < 6; ++j) {
        worst = std::max(worst, std::abs(mean[j] - exact[j]) / (3.0 * se[j] + 1e-3));
      }
      return Check{"unbiasedness " + tag, worst <= 1.0,
                   "max |mean - grad| / (3 SE + 1e-3) " + describe(worst, "<=", 1.0)};
    });
  }

  guarded("finite-diff accuracy", [&] {
    Rng rng(derive_seed(25, 0));
    const double eps = 1e-5;
    const GaussianTarget gauss = GaussianTarget::diagonal(
        (VectorXd(5) << 1.0, 2.0, 3.0, 4.0, 5.0).finished());
    const LogisticRegressionTarget logistic = small_logistic(26, 30, 6);
    const StochVolDataset sv_data = generate_sv_data(27, 10, 1.0, 0.5493, 0.0);
    const StochasticVolatilityTarget sv(sv_data.observations);
    const VectorXd sv_center = sv_data.true_parameters();
    double worst = 0.0;
    for (const TargetModel* t :
         std::initializer_list<const TargetModel*>{&gauss, &logistic, &sv}) {
      const Index d = t->dimension();
      for (int p = 0; p < 100; ++p) {
        VectorXd x = standard_normal_vector(rng, d);
        if (t == &sv) x = sv_center + 0.1 * x;
        const VectorXd g = GradientOracle::gradient(*t, x);
        const double u = t->potential(x);
        for (int k = 0; k < 10; ++k) {
          const VectorXd v = standard_normal_vector(rng, d).normalized();
          const double fd = (t->potential(x + eps * v) - u) / eps;
          // local curvature along v from a central difference of the gradient
          const double h = 1e-4;
          const double curv = std::abs(
              (GradientOracle::gradient(*t, x + h * v) -
               GradientOracle::gradient(*t, x - h * v)).dot(v) / (2 * h));
          const double bound = 10.0 * eps * std::max(curv, 1.0);
          worst = std::max(worst, std::abs(fd - g.dot(v)) / bound);
        }
      }
    }
    return Check{"finite-diff accuracy", worst <= 1.0,
                 "max error / (10 eps L_local) " + describe(worst, "<=", 1.0)};
  });

  guarded("involution", [&] {
    return involution_check(1e-8, SliceGradientSource::kAnalyticOracle,
                            "involution", true);
  });
  guarded("involution (finite differences)", [&] {
    return involution_check(1e-4, SliceGradientSource::kFiniteDifference,
                            "involution (finite differences)", false);
  });

  guarded("esjd hand cases", [&] {
    StateMatrix constant = StateMatrix::Ones(5, 3);
    StateMatrix line(3, 1);
    line << 0, 1, 3;
    StateMatrix diag(2, 2);
    diag << 0, 0, 1, 1;
    const double a = esjd(constant), b = esjd(line), c = esjd(diag);
    const bool pass = a == 0.0 && b == 2.5 && c == 1.0;
    std::ostringstream s;
    s << "constant " << a << ", (0,1,3) " << b << ", ((0,0),(1,1)) " << c;
    return Check{"esjd hand cases", pass, s.str()};
  });

  guarded("worker-count determinism", [&] {
    const LogisticRegressionTarget target = small_logistic(28, 40, 12);
    const std::size_t many = std::max<std::size_t>(2, workers);
    SamplerConfig config;
    config.kernel = KernelKind::kRsHmc;
    config.m = 6;
    config.leapfrog_count = 3;
    config.leapfrog_step = 0.1;
    const VectorXd x0 = VectorXd::Zero(12);
    config.workers = 1;
    const ChainResult one = run_chain(target, config, 300, x0, 99);
    config.workers = many;
    const ChainResult other = run_chain(target, config, 300, x0, 99);
    const bool same = one.trajectory.states == other.trajectory.states &&
                      one.trajectory.accepted == other.trajectory.accepted &&
                      one.ledger.rounds == other.ledger.rounds;
    return Check{"worker-count determinism", same,
                 "workers 1 vs " + std::to_string(many) +
                     (same ? ": identical" : ": trajectories differ")};
  });

  print_table(checks, log);
  const bool ok = std::all_of(checks.begin(), checks.end(),
                              [](const Check& c) { return c.pass; });
  if (!ok) {
    log << "failed:";
    for (const auto& c : checks) {
      if (!c.pass) log << ' ' << '"' << c.name << '"';
    }
    log << '\n';
  }
  return ok ? 0 : 1;
}

}  // namespace zopmc::bench
