#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

namespace mcgp {

/// One location split into constrained (x_A) and free (x_{A^c}) coordinates.
struct Point {
  Eigen::VectorXd xa;
  Eigen::VectorXd xac;
};

/// Concatenated (x_A, x_{A^c}) location used as GP input.
inline Eigen::VectorXd concat(const Point& p) {
  Eigen::VectorXd out(p.xa.size() + p.xac.size());
  out << p.xa, p.xac;
  return out;
}

/// Column-major location matrix (dim x n) of a point list.
Eigen::MatrixXd locations(std::span<const Point> points);

/// Observations in (x_A, x_{A^c}) form plus the names of the source columns.
struct Dataset {
  std::vector<std::string> a_names;
  std::vector<std::string> ac_names;
  std::vector<Point> rows;

  [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }
  [[nodiscard]] int dim_a() const noexcept { return static_cast<int>(a_names.size()); }
  [[nodiscard]] int dim_ac() const noexcept { return static_cast<int>(ac_names.size()); }
};

/// Everything the phi and theta conditionals see: the observations and the
/// currently instantiated rejected proposals.
struct ConditionalData {
  std::span<const Point> observations;
  std::span<const Point> rejected;
  /// Set in unconstrained (A = empty) mode, where rejected proposals carry their
  /// own x_A and therefore also enter the p_A factor.
  bool rejected_in_marginal = false;
};

}  // namespace mcgp
