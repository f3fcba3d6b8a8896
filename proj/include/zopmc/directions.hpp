#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "zopmc/random.hpp"

namespace zopmc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Law of the random direction matrix V on the Stiefel manifold V_m(R^d).
/// Both laws satisfy (d/m) E[V V^T] = I_d.
enum class DirectionLaw {
  kUniformStiefel,   // Haar-uniform
  kCanonicalSubset,  // m distinct canonical basis vectors
};

std::string to_string(DirectionLaw law);
/// Accepts "stiefel"/"uniform" and "canonical"/"subset".
DirectionLaw parse_direction_law(std::string_view text);

/// The unbiasedness constant c = d/m.
inline double scaling_constant(Index d, Index m) {
  return static_cast<double>(d) / static_cast<double>(m);
}

/// A d x m matrix with orthonormal columns. Canonical subsets are stored as
/// index lists so projections and lifts cost O(m) instead of O(dm).
/// Indices are 0-based.
class DirectionMatrix {
 public:
  enum class Kind { kDense, kCanonicalSubset };

  /// Validates V^T V = I to 1e-8; throws UsageError otherwise.
  static DirectionMatrix dense(MatrixXd columns);
  /// Validates that indices are distinct and lie in [0, d).
  static DirectionMatrix canonical(Index d, std::vector<Index> indices);

  Index dimension() const { return d_; }
  Index count() const { return m_; }
  Kind kind() const { return kind_; }
  bool is_canonical() const { return kind_ == Kind::kCanonicalSubset; }

  /// Dense columns; empty for canonical subsets.
  const MatrixXd& columns() const { return columns_; }
  /// Canonical indices; empty for dense matrices.
  const std::vector<Index>& indices() const { return indices_; }

  MatrixXd to_dense() const;

  /// s = V^T x.
  VectorXd project(const VectorXd& x) const;
  /// V s.
  VectorXd lift(const VectorXd& s) const;
  /// x + V s.
  VectorXd displace(const VectorXd& x, const VectorXd& s) const;
  /// x += scale * v_i, in place.
  void add_column(VectorXd& x, Index i, double scale) const;
  /// x' = x + V (s_new - V^T x): replaces the span(V) component of x with
  /// V s_new and keeps the orthogonal component.
  VectorXd slice_update(const VectorXd& x, const VectorXd& s_new) const;

 private:
  friend DirectionMatrix sample_uniform_stiefel(Rng&, Index, Index);
  friend DirectionMatrix sample_canonical_subset(Rng&, Index, Index);

  DirectionMatrix(Index d, Index m, Kind kind) : d_(d), m_(m), kind_(kind) {}

  void check_ambient(const VectorXd& x, const char* op) const;
  void check_slice(const VectorXd& s, const char* op) const;

  Index d_;
  Index m_;
  Kind kind_;
  MatrixXd columns_;
  std::vector<Index> indices_;
};

/// QR-factorizes a d x m standard Gaussian matrix and flips each column of Q
/// by the sign of the matching diagonal entry of R. The sign fix is what
/// makes the result Haar-distributed.
DirectionMatrix sample_uniform_stiefel(Rng& rng, Index d, Index m);

/// m indices drawn uniformly without replacement (partial Fisher-Yates).
DirectionMatrix sample_canonical_subset(Rng& rng, Index d, Index m);

DirectionMatrix sample_directions(DirectionLaw law, Rng& rng, Index d,
                                  Index m);

inline VectorXd project(const DirectionMatrix& v, const VectorXd& x) {
  return v.project(x);
}

inline VectorXd slice_update(const DirectionMatrix& v, const VectorXd& x,
                             const VectorXd& s_new) {
  return v.slice_update(x, s_new);
}

}  // namespace zopmc
