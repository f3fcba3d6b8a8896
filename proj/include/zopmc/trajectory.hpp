#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "zopmc/directions.hpp"

namespace zopmc {

using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Kept chain states, one row per state (X_0 first), plus the accept flag of
/// every transition.
struct Trajectory {
  StateMatrix states;
  std::vector<std::uint8_t> accepted;  // one entry per transition
  std::size_t thin = 1;

  std::string kernel;
  Index m = 0;
  int leapfrog_count = 1;
  DirectionLaw law = DirectionLaw::kCanonicalSubset;

  Index kept() const { return states.rows(); }
  Index dimension() const { return states.cols(); }
};

}  // namespace zopmc
