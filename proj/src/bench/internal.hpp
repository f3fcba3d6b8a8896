#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "zopmc/experiment.hpp"

namespace zopmc::bench {

nlohmann::json spec_to_json(const ExperimentSpec& spec);
nlohmann::json report_to_json(const EfficiencyReport& report);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// Minimal reader for the CSV files this tool writes (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace zopmc::bench
