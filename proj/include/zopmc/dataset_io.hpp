#pragma once

#include <filesystem>

#include "zopmc/targets.hpp"

namespace zopmc {

// Datasets are stored as <stem>.csv (header z_1..z_d,y for logistic data,
// y for stochastic-volatility data) next to a <stem>.json sidecar holding
// the seed and the true parameters. Values are written with 17 significant
// digits so a round trip is exact.

void write_logistic_dataset(const LogisticDataset& data,
                            const std::filesystem::path& stem);
LogisticDataset read_logistic_dataset(const std::filesystem::path& stem);

void write_sv_dataset(const StochVolDataset& data,
                      const std::filesystem::path& stem);
StochVolDataset read_sv_dataset(const std::filesystem::path& stem);

}  // namespace zopmc
