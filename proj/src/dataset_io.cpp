#include "zopmc/dataset_io.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "zopmc/errors.hpp"

namespace zopmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

std::vector<double> to_vector(const VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(17);
  return out;
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& path,
                                               std::size_t expected_cols) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != expected_cols) {
      throw UsageError(path.string() + ": row " +
                       std::to_string(rows.size() + 1) + " has " +
                       std::to_string(row.size()) + " columns, expected " +
                       std::to_string(expected_cols));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  return json::parse(in);
}

}  // namespace

void write_logistic_dataset(const LogisticDataset& data,
                            const fs::path& stem) {
  const Index n = data.design.rows();
  const Index d = data.design.cols();
  {
    auto out = open_out(with_ext(stem, ".csv"));
    for (Index j = 0; j < d; ++j) out << "z_" << (j + 1) << ',';
    out << "y\n";
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) out << data.design(i, j) << ',';
      out << data.responses[i] << '\n';
    }
  }
  json meta = {{"kind", "logistic"},
               {"seed", data.seed},
               {"n", n},
               {"d", d},
               {"true_beta", to_vector(data.true_beta)}};
  open_out(with_ext(stem, ".json")) << meta.dump(2) << '\n';
}

LogisticDataset read_logistic_dataset(const fs::path& stem) {
  const json meta = read_json(with_ext(stem, ".json"));
  if (meta.at("kind") != "logistic") {
    throw UsageError(stem.string() + ": not a logistic dataset");
  }
  const Index n = meta.at("n").get<Index>();
  const Index d = meta.at("d").get<Index>();
  const auto rows =
      read_csv_rows(with_ext(stem, ".csv"), static_cast<std::size_t>(d + 1));
  if (static_cast<Index>(rows.size()) != n) {
    throw UsageError(stem.string() + ": row count does not match sidecar");
  }
  LogisticDataset data;
  data.seed = meta.at("seed").get<std::uint64_t>();
  data.design.resize(n, d);
  data.responses.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) data.design(i, j) = rows[i][j];
    data.responses[i] = rows[i][d];
  }
  data.true_beta = from_vector(meta.at("true_beta").get<std::vector<double>>());
  return data;
}

void write_sv_dataset(const StochVolDataset& data, const fs::path& stem) {
  {
    auto out = open_out(with_ext(stem, ".csv"));
    out << "y\n";
    for (Index i = 0; i < data.observations.size(); ++i) {
      out << data.observations[i] << '\n';
    }
  }
  json meta = {{"kind", "stochvol"},
               {"seed", data.seed},
               {"n", data.observations.size()},
               {"mu0", data.mu0},
               {"phi0_raw", data.phi0_raw},
               {"log_sigma0", data.log_sigma0},
               {"eta0", to_vector(data.eta0)}};
  open_out(with_ext(stem, ".json")) << meta.dump(2) << '\n';
}

StochVolDataset read_sv_dataset(const fs::path& stem) {
  const json meta = read_json(with_ext(stem, ".json"));
  if (meta.at("kind") != "stochvol") {
    throw UsageError(stem.string() + ": not a stochastic-volatility dataset");
  }
  const auto rows = read_csv_rows(with_ext(stem, ".csv"), 1);
  StochVolDataset data;
  data.seed = meta.at("seed").get<std::uint64_t>();
  data.mu0 = meta.at("mu0").get<double>();
  data.phi0_raw = meta.at("phi0_raw").get<double>();
  data.log_sigma0 = meta.at("log_sigma0").get<double>();
  data.eta0 = from_vector(meta.at("eta0").get<std::vector<double>>());
  data.observations.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.observations[static_cast<Index>(i)] = rows[i][0];
  }
  if (data.observations.size() != meta.at("n").get<Index>()) {
    throw UsageError(stem.string() + ": row count does not match sidecar");
  }
  return data;
}

}  // namespace zopmc
