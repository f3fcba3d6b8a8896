#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zopmc/diagnostics.hpp"
#include "zopmc/samplers.hpp"
#include "zopmc/targets.hpp"

namespace zopmc::bench {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr std::size_t kDeskIterations = 10000;
inline constexpr std::size_t kFullScaleIterations = 50000;

/// Invalid experiment description; carries the offending field and, when
/// known, the line in the spec file.
class SpecError : public std::runtime_error {
 public:
  SpecError(std::string field, int line, const std::string& message);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

struct TargetSpec {
  std::string kind = "logistic";  // logistic | stochvol | gaussian
  Index n = 200;                  // observations (logistic, stochvol)
  Index d = 200;                  // dimension (logistic, gaussian)
  std::uint64_t data_seed = 1;
  // stochvol generating parameters
  double mu0 = 1.0;
  double phi0_raw = 0.5493061443340548;  // atanh(0.5)
  double log_sigma0 = 0.0;
  // gaussian precision diagonal; empty means identity
  std::vector<double> precision;
};

struct EffSpec {
  std::string kernel = "rs-mala";
  std::vector<Index> m0;
};

struct ExperimentSpec {
  std::string experiment = "custom";
  TargetSpec target;
  std::vector<std::string> kernels;
  std::vector<Index> m;
  std::vector<int> leapfrog;  // L grid for rs-hmc
  EffSpec eff;
  std::size_t iterations = kDeskIterations;
  bool paper_scale = false;
  std::vector<std::uint64_t> seeds{1};
  double epsilon = 1e-5;
  std::size_t workers = 1;
  std::string law = "canonical";
  double proposal_scale = 0.05;
  double leapfrog_step = 0.1;
  double ula_step = 0.01;
  AdaptationSettings adaptation;
  bool save_trajectories = false;
  std::size_t thin = 1;
  std::string out = "results";

  /// Throws SpecError naming the field.
  void validate() const;
};

/// Defaults for a built-in tag (logistic25, logistic200, stochvol203,
/// gaussian-verify, custom).
ExperimentSpec builtin_spec(const std::string& tag);
bool is_builtin(const std::string& tag);

/// Parses a YAML (or JSON) spec. A file holding a run manifest is accepted
/// and its embedded spec is used.
ExperimentSpec load_spec_file(const std::filesystem::path& path);
ExperimentSpec parse_spec(const std::string& text);

/// Command-line overrides; empty fields leave the spec untouched.
struct Overrides {
  std::optional<std::vector<std::string>> kernels;
  std::optional<std::vector<Index>> m;
  std::optional<std::vector<Index>> m0;
  std::optional<std::size_t> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  bool paper_scale = false;
  bool save_trajectories = false;
};
void apply_overrides(ExperimentSpec& spec, const Overrides& overrides);

/// Resolved spec as YAML text, every default spelled out.
std::string spec_to_yaml(const ExperimentSpec& spec);

std::unique_ptr<TargetModel> build_target(const TargetSpec& spec);
/// Chain starting point: true generating parameters, or the mean for the
/// Gaussian target.
VectorXd initial_point(const TargetSpec& spec);

struct Cell {
  std::string kernel;  // label, e.g. rs-mala
  Index m = 1;
  int leapfrog_count = 1;
  std::uint64_t seed = 0;

  std::string id() const;
};

/// Every (kernel, m, L, seed) chain the spec requires, including the RWM
/// baseline and the efficiency-sweep cells. Deterministic order, no
/// duplicates.
std::vector<Cell> plan_cells(const ExperimentSpec& spec);

SamplerConfig cell_config(const ExperimentSpec& spec, const Cell& cell);

struct CellResult {
  Cell cell;
  bool ok = false;
  std::string error;
  double esjd = 0.0;
  double acceptance_rate = 0.0;
  double final_scale = 0.0;
  std::size_t divergent = 0;
  RoundLedger ledger;
  double wall_seconds = 0.0;
  std::optional<ChainResult> chain;  // kept when trajectories are saved
};

/// Runs one cell. Errors are captured in the result, never thrown.
CellResult run_cell(const ExperimentSpec& spec, const TargetModel& target,
                    const VectorXd& x0, const Cell& cell, bool keep_chain);

/// Number of cells to run at once: cells * workers <= cores.
std::size_t concurrent_cells(std::size_t cores, std::size_t workers,
                             std::size_t cells);

/// Runs cells, concurrently when allowed; results follow the plan order.
std::vector<CellResult> run_cells(const ExperimentSpec& spec,
                                  const TargetModel& target,
                                  const VectorXd& x0,
                                  const std::vector<Cell>& cells,
                                  bool keep_chains = false);

/// One row per (kernel, m): seed-averaged ESJD against the seed-averaged
/// RWM baseline, normalized per parallel round (m0 = m). For rs-hmc the
/// best L is kept.
std::vector<EffSweepRow> gain_table(const ExperimentSpec& spec,
                                    const std::vector<CellResult>& results);

/// Eff(m)/Eff(m0) rows for the efficiency sweep, seed-averaged.
std::vector<EffSweepRow> efficiency_table(
    const ExperimentSpec& spec, const std::vector<CellResult>& results);

std::string sweep_csv(const std::vector<EffSweepRow>& rows);

struct RunOutcome {
  int exit_code = 0;
  std::vector<CellResult> results;
};

/// Executes the experiment and writes artifacts under spec.out. Exit code 0
/// on success, 1 when any cell failed (partial artifacts are kept).
RunOutcome run_experiment(const ExperimentSpec& spec, std::ostream& log);

/// Human-readable plan for --dry-run; touches nothing.
std::string describe_plan(const ExperimentSpec& spec);

/// Builds SVG figures from a results directory. Returns the exit code.
int plot_results(const std::filesystem::path& dir, std::ostream& log);

/// Gaussian property suite used by the gaussian-verify experiment.
/// Returns true when every check passes.
bool run_gaussian_suite(const ExperimentSpec& spec, std::ostream& log);

/// Fast property battery; prints a pass/fail table, returns the exit code.
int run_verify(std::size_t workers, std::ostream& log);

}  // namespace zopmc::bench
