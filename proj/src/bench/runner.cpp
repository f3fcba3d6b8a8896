#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "internal.hpp"
#include "zopmc/dataset_io.hpp"
#include "zopmc/errors.hpp"
#include "zopmc/random.hpp"

namespace zopmc::bench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  CsvTable table;
  std::string line;
  if (std::getline(in, line)) table.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) table.rows.push_back(split(line));
  }
  return table;
}

json report_to_json(const EfficiencyReport& r) {
  return {{"target", r.target},
          {"kernel", r.kernel},
          {"d", r.d},
          {"m", r.m},
          {"m0", r.m0},
          {"L", r.leapfrog_count},
          {"esjd", r.esjd},
          {"esjd_per_round", r.esjd_per_round},
          {"esjd_rwm", r.esjd_rwm},
          {"gain_vs_rwm", r.gain_vs_rwm},
          {"eff", r.eff},
          {"acceptance_rate", r.acceptance_rate},
          {"ledger", {{"rounds", r.ledger.rounds}, {"evals", r.ledger.evals}}}};
}

std::string Cell::id() const {
  std::ostringstream s;
  s << kernel << "_m" << m << "_L" << leapfrog_count << "_s" << seed;
  return s.str();
}

namespace {

Index target_dimension(const TargetSpec& t) {
  return t.kind == "stochvol" ? t.n + 3 : t.d;
}

std::uint64_t cell_seed(std::uint64_t seed, Index m, int leapfrog_count) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(m)),
                     static_cast<std::uint64_t>(leapfrog_count));
}

std::vector<Index> eff_grid(Index m0, Index d) {
  std::vector<Index> grid;
  for (Index m : {m0 / 2, m0, 2 * m0, 4 * m0}) {
    if (m >= 1 && m <= d && std::find(grid.begin(), grid.end(), m) == grid.end()) {
      grid.push_back(m);
    }
  }
  return grid;
}

int eff_leapfrog(const ExperimentSpec& spec) {
  if (spec.eff.kernel == "rs-hmc" && !spec.leapfrog.empty()) {
    return spec.leapfrog.front();
  }
  return 1;
}

struct SeedAverage {
  double esjd = 0.0;
  double acceptance = 0.0;
  double rounds = 0.0;
  std::size_t count = 0;
};

/// Seed-averaged statistics per (kernel, m, L) over successful cells.
std::map<std::tuple<std::string, Index, int>, SeedAverage> average_over_seeds(
    const std::vector<CellResult>& results) {
  std::map<std::tuple<std::string, Index, int>, SeedAverage> out;
  for (const auto& r : results) {
    if (!r.ok) continue;
    auto& a = out[{r.cell.kernel, r.cell.m, r.cell.leapfrog_count}];
    a.esjd += r.esjd;
    a.acceptance += r.acceptance_rate;
    a.rounds += static_cast<double>(r.ledger.rounds);
    ++a.count;
  }
  for (auto& [key, a] : out) {
    const auto n = static_cast<double>(a.count);
    a.esjd /= n;
    a.acceptance /= n;
    a.rounds /= n;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string cells_csv(const ExperimentSpec& spec,
                      const std::vector<CellResult>& results) {
  std::ostringstream out;
  out << "kernel,d,m,L,seed,status,esjd,acc_rate,final_scale,divergent,rounds,"
         "evals\n";
  const Index d = target_dimension(spec.target);
  for (const auto& r : results) {
    out << r.cell.kernel << ',' << d << ',' << r.cell.m << ','
        << r.cell.leapfrog_count << ',' << r.cell.seed << ','
        << (r.ok ? "ok" : "failed") << ',' << format_double(r.esjd) << ','
        << format_double(r.acceptance_rate) << ','
        << format_double(r.final_scale) << ',' << r.divergent << ','
        << r.ledger.rounds << ',' << r.ledger.evals << '\n';
  }
  return out.str();
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  for (Index j = 0; j < traj.dimension(); ++j) {
    out << (j ? "," : "") << "x_" << (j + 1);
  }
  out << '\n';
  for (Index i = 0; i < traj.kept(); ++i) {
    for (Index j = 0; j < traj.dimension(); ++j) {
      out << (j ? "," : "") << format_double(traj.states(i, j));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::vector<Cell> plan_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  std::set<std::string> seen;
  const auto add = [&](const std::string& kernel, Index m, int l,
                       std::uint64_t seed) {
    Cell c{kernel, m, l, cell_seed(seed, m, l)};
    if (seen.insert(kernel + "|" + std::to_string(m) + "|" + std::to_string(l) +
                    "|" + std::to_string(seed))
            .second) {
      cells.push_back(c);
    }
  };
  const Index d = target_dimension(spec.target);
  const bool baseline = spec.experiment != "gaussian-verify";
  for (std::uint64_t seed : spec.seeds) {
    if (baseline) add("rwm", 1, 1, seed);
    for (const auto& name : spec.kernels) {
      const KernelSelection sel = parse_kernel(name);
      for (Index m : spec.m) {
        const Index mm = sel.kind == KernelKind::kRwm ? 1 : m;
        if (sel.kind == KernelKind::kRsHmc && !sel.leapfrog_count) {
          for (int l : spec.leapfrog) add("rs-hmc", mm, l, seed);
        } else {
          const int l = sel.leapfrog_count.value_or(1);
          add(kernel_label(sel.kind, l), mm, l, seed);
        }
      }
    }
    const int l = eff_leapfrog(spec);
    for (Index m0 : spec.eff.m0) {
      for (Index m : eff_grid(m0, d)) {
        add(kernel_label(KernelKind::kRsHmc, l), m, l, seed);
      }
    }
  }
  return cells;
}

SamplerConfig cell_config(const ExperimentSpec& spec, const Cell& cell) {
  const KernelSelection sel = parse_kernel(cell.kernel);
  SamplerConfig c;
  c.kernel = sel.kind;
  c.m = cell.m;
  c.leapfrog_count = cell.leapfrog_count;
  c.law = parse_direction_law(spec.law);
  c.proposal_scale = spec.proposal_scale;
  c.leapfrog_step = spec.leapfrog_step;
  c.ula_step = spec.ula_step;
  c.epsilon = spec.epsilon;
  c.workers = spec.workers;
  c.adaptation = spec.adaptation;
  return c;
}

CellResult run_cell(const ExperimentSpec& spec, const TargetModel& target,
                    const VectorXd& x0, const Cell& cell, bool keep_chain) {
  CellResult r;
  r.cell = cell;
  const auto start = std::chrono::steady_clock::now();
  try {
    ChainOptions options;
    options.thin = spec.thin;
    ChainResult chain =
        run_chain(target, cell_config(spec, cell), spec.iterations, x0,
                  cell.seed, options);
    r.esjd = esjd(chain.trajectory,
                  burn_in_row(chain.trajectory,
                              spec.adaptation.burn_in_fraction));
    r.acceptance_rate = chain.diagnostics.post_burn_in_acceptance;
    r.final_scale = chain.diagnostics.final_scale;
    r.divergent = chain.diagnostics.divergent;
    r.ledger = chain.ledger;
    r.ok = true;
    if (keep_chain) r.chain = std::move(chain);
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return r;
}

std::size_t concurrent_cells(std::size_t cores, std::size_t workers,
                             std::size_t cells) {
  const std::size_t fit = std::max<std::size_t>(1, cores / std::max<std::size_t>(workers, 1));
  return std::max<std::size_t>(1, std::min(fit, cells));
}

std::vector<CellResult> run_cells(const ExperimentSpec& spec,
                                  const TargetModel& target,
                                  const VectorXd& x0,
                                  const std::vector<Cell>& cells,
                                  bool keep_chains) {
  std::vector<CellResult> results(cells.size());
  const std::size_t cores =
      std::max<unsigned>(1, std::thread::hardware_concurrency());
  const std::size_t lanes = concurrent_cells(cores, spec.workers, cells.size());
  std::atomic<std::size_t> next{0};
  const auto lane = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      results[i] = run_cell(spec, target, x0, cells[i], keep_chains);
    }
  };
  if (lanes == 1) {
    lane();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < lanes; ++t) threads.emplace_back(lane);
  }
  return results;
}

std::vector<EffSweepRow> gain_table(const ExperimentSpec& spec,
                                    const std::vector<CellResult>& results) {
  const auto avg = average_over_seeds(results);
  const auto baseline = avg.find({"rwm", 1, 1});
  std::vector<EffSweepRow> rows;
  if (baseline == avg.end() || !(baseline->second.esjd > 0.0)) return rows;
  const double esjd_rwm = baseline->second.esjd;
  const Index d = target_dimension(spec.target);

  for (const auto& name : spec.kernels) {
    const KernelSelection sel = parse_kernel(name);
    if (sel.kind == KernelKind::kRwm) continue;
    for (Index m : spec.m) {
      std::vector<int> grid;
      if (sel.kind == KernelKind::kRsHmc && !sel.leapfrog_count) {
        grid = spec.leapfrog;
      } else {
        grid = {sel.leapfrog_count.value_or(1)};
      }
      std::optional<EffSweepRow> best;
      const bool hmc_grid = sel.kind == KernelKind::kRsHmc && !sel.leapfrog_count;
      for (int l : grid) {
        const std::string label = hmc_grid ? "rs-hmc" : kernel_label(sel.kind, l);
        const auto it = avg.find({label, m, l});
        if (it == avg.end()) continue;
        EffSweepRow row;
        row.kernel = label;
        row.d = d;
        row.m = m;
        row.m0 = m;
        row.leapfrog_count = l;
        row.esjd = it->second.esjd;
        row.gain = relative_gain(row.esjd, esjd_rwm, l, m, m);
        row.eff_ratio = 1.0;
        row.acceptance_rate = it->second.acceptance;
        row.rounds = static_cast<std::uint64_t>(it->second.rounds);
        if (!best || row.gain > best->gain) best = row;
      }
      if (best) rows.push_back(*best);
    }
  }
  return rows;
}

std::vector<EffSweepRow> efficiency_table(
    const ExperimentSpec& spec, const std::vector<CellResult>& results) {
  const auto avg = average_over_seeds(results);
  const Index d = target_dimension(spec.target);
  const int l = eff_leapfrog(spec);
  const std::string label = kernel_label(KernelKind::kRsHmc, l);
  const auto baseline = avg.find({"rwm", 1, 1});
  const double esjd_rwm =
      baseline != avg.end() ? baseline->second.esjd : 0.0;
  const std::string target_name = spec.target.kind;

  std::vector<EffSweepRow> rows;
  for (Index m0 : spec.eff.m0) {
    std::vector<EfficiencyReport> reports;
    for (Index m : eff_grid(m0, d)) {
      const auto it = avg.find({label, m, l});
      if (it == avg.end()) continue;
      EfficiencyReport r;
      r.target = target_name;
      r.kernel = label;
      r.d = d;
      r.m = m;
      r.m0 = m0;
      r.leapfrog_count = l;
      r.esjd = it->second.esjd;
      r.esjd_rwm = esjd_rwm;
      r.acceptance_rate = it->second.acceptance;
      r.ledger.rounds = static_cast<std::uint64_t>(it->second.rounds);
      reports.push_back(r);
    }
    const bool has_base = std::any_of(reports.begin(), reports.end(),
                                      [&](const auto& r) { return r.m == m0; });
    if (!has_base) continue;
    const auto part = eff_sweep(reports, {m0});
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

std::string sweep_csv(const std::vector<EffSweepRow>& rows) {
  std::ostringstream out;
  out << "kernel,d,m,m0,L,esjd,gain,eff_ratio,acc_rate,rounds\n";
  for (const auto& r : rows) {
    out << r.kernel << ',' << r.d << ',' << r.m << ',' << r.m0 << ','
        << r.leapfrog_count << ',' << format_double(r.esjd) << ','
        << format_double(r.gain) << ',' << format_double(r.eff_ratio) << ','
        << format_double(r.acceptance_rate) << ',' << r.rounds << '\n';
  }
  return out.str();
}

std::string describe_plan(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "# resolved spec\n" << spec_to_yaml(spec);
  if (spec.experiment == "gaussian-verify") {
    out << "# plan: stationarity (" << spec.kernels.size()
        << " kernels), contraction and involution suites\n";
    return out.str();
  }
  const auto cells = plan_cells(spec);
  out << "# plan: " << cells.size() << " cells of " << spec.iterations
      << " iterations\n";
  for (const auto& c : cells) out << "  " << c.id() << '\n';
  out << "# outputs under " << spec.out << '\n';
  return out.str();
}

RunOutcome run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  using clock = std::chrono::steady_clock;
  const auto seconds_since = [](clock::time_point t) {
    return std::chrono::duration<double>(clock::now() - t).count();
  };
  const fs::path out(spec.out);
  fs::create_directories(out);
  json manifest = {{"version", kVersion}, {"spec", spec_to_json(spec)}};
  manifest["spec_yaml"] = spec_to_yaml(spec);

  RunOutcome outcome;
  if (spec.experiment == "gaussian-verify") {
    const auto start = clock::now();
    const bool ok = run_gaussian_suite(spec, log);
    manifest["phases"] = {{"suite_seconds", seconds_since(start)}};
    manifest["suite_passed"] = ok;
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    outcome.exit_code = ok ? 0 : 1;
    return outcome;
  }

  auto phase = clock::now();
  const auto target = build_target(spec.target);
  const VectorXd x0 = initial_point(spec.target);
  fs::create_directories(out / "data");
  if (spec.target.kind == "logistic") {
    write_logistic_dataset(
        generate_logistic_data(spec.target.data_seed, spec.target.n, spec.target.d),
        out / "data" / "logistic");
  } else if (spec.target.kind == "stochvol") {
    write_sv_dataset(generate_sv_data(spec.target.data_seed, spec.target.n,
                                      spec.target.mu0, spec.target.phi0_raw,
                                      spec.target.log_sigma0),
                     out / "data" / "stochvol");
  }
  const double data_seconds = seconds_since(phase);

  phase = clock::now();
  const auto cells = plan_cells(spec);
  log << "running " << cells.size() << " cells of " << spec.iterations
      << " iterations\n";
  outcome.results = run_cells(spec, *target, x0, cells, spec.save_trajectories);
  const double cell_seconds = seconds_since(phase);

  phase = clock::now();
  fs::create_directories(out / "reports");
  if (spec.save_trajectories) fs::create_directories(out / "trajectories");
  const auto avg = average_over_seeds(outcome.results);
  const auto base = avg.find({"rwm", 1, 1});
  const double esjd_rwm = base != avg.end() ? base->second.esjd : 0.0;
  RoundLedger total;
  json cell_list = json::array();
  for (auto& r : outcome.results) {
    const std::string id = r.cell.id();
    const fs::path marker = out / "reports" / (id + ".FAILED");
    json entry = {{"id", id},
                  {"kernel", r.cell.kernel},
                  {"m", r.cell.m},
                  {"L", r.cell.leapfrog_count},
                  {"seed", r.cell.seed},
                  {"status", r.ok ? "ok" : "failed"},
                  {"wall_seconds", r.wall_seconds}};
    if (!r.ok) {
      outcome.exit_code = 1;
      write_text(marker, r.error + "\n");
      entry["error"] = r.error;
      log << "cell " << id << " failed: " << r.error << '\n';
      cell_list.push_back(entry);
      continue;
    }
    fs::remove(marker);
    total += r.ledger;
    EfficiencyReport rep;
    rep.target = spec.target.kind;
    rep.kernel = r.cell.kernel;
    rep.d = target->dimension();
    rep.m = r.cell.m;
    rep.m0 = r.cell.m;
    rep.leapfrog_count = r.cell.leapfrog_count;
    rep.esjd = r.esjd;
    const double rpi = static_cast<double>(r.ledger.rounds) /
                       static_cast<double>(spec.iterations);
    rep.esjd_per_round = rpi > 0 ? r.esjd / rpi : 0.0;
    rep.esjd_rwm = esjd_rwm;
    if (esjd_rwm > 0.0) {
      rep.gain_vs_rwm =
          relative_gain(r.esjd, esjd_rwm, rep.leapfrog_count, rep.m, rep.m);
    }
    rep.eff = r.esjd / cost_factor(rep.m, rep.m, rep.leapfrog_count);
    rep.acceptance_rate = r.acceptance_rate;
    rep.ledger = r.ledger;
    json report = report_to_json(rep);
    report["seed"] = r.cell.seed;
    report["final_scale"] = r.final_scale;
    report["divergent"] = r.divergent;
    write_text(out / "reports" / (id + ".json"), report.dump(2) + "\n");
    entry["report"] = "reports/" + id + ".json";
    if (r.chain) {
      write_text(out / "trajectories" / (id + ".csv"),
                 trajectory_csv(r.chain->trajectory));
      entry["trajectory"] = "trajectories/" + id + ".csv";
      r.chain.reset();
    }
    cell_list.push_back(entry);
  }
  write_text(out / "cells.csv", cells_csv(spec, outcome.results));
  write_text(out / "gain_sweep.csv", sweep_csv(gain_table(spec, outcome.results)));
  if (!spec.eff.m0.empty()) {
    write_text(out / "eff_sweep.csv",
               sweep_csv(efficiency_table(spec, outcome.results)));
  }
  const double table_seconds = seconds_since(phase);

  manifest["phases"] = {{"data_seconds", data_seconds},
                        {"cells_seconds", cell_seconds},
                        {"tables_seconds", table_seconds}};
  manifest["ledger"] = {{"rounds", total.rounds}, {"evals", total.evals}};
  manifest["cells"] = cell_list;
  manifest["cores"] = std::max<unsigned>(1, std::thread::hardware_concurrency());
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << (out / "manifest.json").string() << '\n';
  return outcome;
}

}  // namespace zopmc::bench
