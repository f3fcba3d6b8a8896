#include "zopmc/directions.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/QR>

#include "zopmc/errors.hpp"

namespace zopmc {

std::string to_string(DirectionLaw law) {
  switch (law) {
    case DirectionLaw::kUniformStiefel:
      return "stiefel";
    case DirectionLaw::kCanonicalSubset:
      return "canonical";
  }
  return "unknown";
}

DirectionLaw parse_direction_law(std::string_view text) {
  if (text == "stiefel" || text == "uniform") {
    return DirectionLaw::kUniformStiefel;
  }
  if (text == "canonical" || text == "subset") {
    return DirectionLaw::kCanonicalSubset;
  }
  throw UsageError("unknown direction law '" + std::string(text) +
                   "' (expected stiefel or canonical)");
}

namespace {

void check_counts(Index d, Index m) {
  if (d < 1 || m < 1 || m > d) {
    throw UsageError("direction count must satisfy 1 <= m <= d (got d=" +
                     std::to_string(d) + ", m=" + std::to_string(m) + ")");
  }
}

}  // namespace

DirectionMatrix DirectionMatrix::dense(MatrixXd columns) {
  const Index d = columns.rows();
  const Index m = columns.cols();
  check_counts(d, m);
  const MatrixXd gram = columns.transpose() * columns;
  if ((gram - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-8) {
    throw UsageError("DirectionMatrix: columns are not orthonormal");
  }
  DirectionMatrix v(d, m, Kind::kDense);
  v.columns_ = std::move(columns);
  return v;
}

DirectionMatrix DirectionMatrix::canonical(Index d, std::vector<Index> indices) {
  const auto m = static_cast<Index>(indices.size());
  check_counts(d, m);
  std::vector<Index> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= d ||
      std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw UsageError(
        "DirectionMatrix: canonical indices must be distinct and in [0, d)");
  }
  DirectionMatrix v(d, m, Kind::kCanonicalSubset);
  v.indices_ = std::move(indices);
  return v;
}

MatrixXd DirectionMatrix::to_dense() const {
  if (kind_ == Kind::kDense) return columns_;
  MatrixXd out = MatrixXd::Zero(d_, m_);
  for (Index j = 0; j < m_; ++j) out(indices_[j], j) = 1.0;
  return out;
}

void DirectionMatrix::check_ambient(const VectorXd& x, const char* op) const {
  if (x.size() != d_) {
    throw UsageError(std::string(op) + ": expected ambient dimension " +
                     std::to_string(d_) + ", got " + std::to_string(x.size()));
  }
}

void DirectionMatrix::check_slice(const VectorXd& s, const char* op) const {
  if (s.size() != m_) {
    throw UsageError(std::string(op) + ": expected slice dimension " +
                     std::to_string(m_) + ", got " + std::to_string(s.size()));
  }
}

VectorXd DirectionMatrix::project(const VectorXd& x) const {
  check_ambient(x, "project");
  if (kind_ == Kind::kDense) return columns_.transpose() * x;
  VectorXd s(m_);
  for (Index j = 0; j < m_; ++j) s[j] = x[indices_[j]];
  return s;
}

VectorXd DirectionMatrix::lift(const VectorXd& s) const {
  check_slice(s, "lift");
  if (kind_ == Kind::kDense) return columns_ * s;
  VectorXd out = VectorXd::Zero(d_);
  for (Index j = 0; j < m_; ++j) out[indices_[j]] = s[j];
  return out;
}

VectorXd DirectionMatrix::displace(const VectorXd& x, const VectorXd& s) const {
  check_ambient(x, "displace");
  check_slice(s, "displace");
  if (kind_ == Kind::kDense) return x + columns_ * s;
  VectorXd out = x;
  for (Index j = 0; j < m_; ++j) out[indices_[j]] += s[j];
  return out;
}

void DirectionMatrix::add_column(VectorXd& x, Index i, double scale) const {
  if (kind_ == Kind::kDense) {
    x.noalias() += scale * columns_.col(i);
  } else {
    x[indices_[i]] += scale;
  }
}

VectorXd DirectionMatrix::slice_update(const VectorXd& x,
                                       const VectorXd& s_new) const {
  check_ambient(x, "slice_update");
  check_slice(s_new, "slice_update");
  if (kind_ == Kind::kDense) return x + columns_ * (s_new - columns_.transpose() * x);
  VectorXd out = x;
  for (Index j = 0; j < m_; ++j) out[indices_[j]] = s_new[j];
  return out;
}

DirectionMatrix sample_uniform_stiefel(Rng& rng, Index d, Index m) {
  check_counts(d, m);
  const VectorXd draws = standard_normal_vector(rng, d * m);
  const MatrixXd gaussian = Eigen::Map<const MatrixXd>(draws.data(), d, m);
  Eigen::HouseholderQR<MatrixXd> qr(gaussian);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(d, m);
  const auto r_diag = qr.matrixQR().diagonal();
  for (Index j = 0; j < m; ++j) {
    if (r_diag[j] < 0.0) q.col(j) *= -1.0;
  }
  DirectionMatrix v(d, m, DirectionMatrix::Kind::kDense);
  v.columns_ = std::move(q);
  return v;
}

DirectionMatrix sample_canonical_subset(Rng& rng, Index d, Index m) {
  check_counts(d, m);
  std::vector<Index> pool(static_cast<std::size_t>(d));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Index> pick(i, d - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(static_cast<std::size_t>(m));
  DirectionMatrix v(d, m, DirectionMatrix::Kind::kCanonicalSubset);
  v.indices_ = std::move(pool);
  return v;
}

DirectionMatrix sample_directions(DirectionLaw law, Rng& rng, Index d,
                                  Index m) {
  switch (law) {
    case DirectionLaw::kUniformStiefel:
      return sample_uniform_stiefel(rng, d, m);
    case DirectionLaw::kCanonicalSubset:
      return sample_canonical_subset(rng, d, m);
  }
  throw UsageError("unknown direction law");
}

}  // namespace zopmc
