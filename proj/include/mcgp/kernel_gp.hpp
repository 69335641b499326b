#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "mcgp/random.hpp"

namespace mcgp {

/// Squared-exponential kernel hyperparameters.
struct KernelParams {
  double signal_variance = 1.0;
  double lengthscale = 1.0;
  /// Added to the Gram diagonal; duplicated locations are resolved by it.
  double jitter = 1e-8;
  /// Per-axis divisor applied to coordinates before distances. Empty means
  /// unit scale on every axis.
  Eigen::VectorXd axis_scale;

  void validate() const;
};

/// ||(x - y) / axis_scale||^2.
double scaled_sq_distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& params);

/// signal_variance * exp(-||x - y||^2 / (2 lengthscale^2)). Throws ConfigError on a
/// dimension mismatch.
double kernel_eval(const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& params);

/// Kernel matrix between column sets a (d x m) and b (d x k). No jitter.
Eigen::MatrixXd cross_gram(const Eigen::Ref<const Eigen::MatrixXd>& a,
                           const Eigen::Ref<const Eigen::MatrixXd>& b, const KernelParams& params);

/// Kernel matrix over the columns of points, optionally with jitter on the diagonal.
Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& points, const KernelParams& params,
                     bool with_jitter = true);

/// Lower Cholesky factor of a symmetric positive semi-definite matrix. Pivots that
/// vanish to round-off are kept as exact zeros (the corresponding coordinate is a
/// deterministic function of the earlier ones). Throws NumericError when the
/// matrix is materially indefinite.
Eigen::MatrixXd psd_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& a);

/// Moments of the GP at new locations given an instantiated realization.
struct GpConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // without jitter
};

/// A Gaussian-process realization instantiated at a finite set of points.
///
/// Holds the locations, the values there, and a lower Cholesky factor L of the
/// jittered Gram matrix together with the whitened values w = L^{-1}(values - mean).
/// Appending points extends L by a block row, so conditioning on k new points
/// costs O(m^2 k) rather than a full refactorization.
class GpRealization {
 public:
  GpRealization() = default;
  GpRealization(Eigen::Index dim, KernelParams kernel, double mean_const = 0.0);

  /// Realization with explicit values; factorizes the Gram matrix.
  static GpRealization from_values(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                   const Eigen::Ref<const Eigen::VectorXd>& values,
                                   KernelParams kernel, double mean_const = 0.0);

  Eigen::Index dim() const noexcept { return dim_; }
  Eigen::Index size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  auto points() const { return points_.leftCols(size_); }
  auto point(Eigen::Index i) const { return points_.col(i); }
  auto values() const { return values_.head(size_); }
  auto whitened() const { return whitened_.head(size_); }
  auto factor() const { return factor_.topLeftCorner(size_, size_); }

  const KernelParams& kernel() const noexcept { return kernel_; }
  double mean_const() const noexcept { return mean_; }

  /// True when some pivot of the factor is exactly zero (possible only with jitter 0).
  bool singular() const noexcept { return singular_; }

  /// Draws the GP at new_points conditionally on the current values, appends
  /// them, and returns the drawn values.
  Eigen::VectorXd extend(const Eigen::Ref<const Eigen::MatrixXd>& new_points, RandomStream& rng);

  /// Keeps only the listed indices (in the given order) and refactorizes.
  /// Throws std::out_of_range on a bad index.
  [[nodiscard]] GpRealization restrict(std::span<const Eigen::Index> keep) const;

  /// Replaces the values through their whitened representation: values = mean + L w.
  void set_whitened(const Eigen::Ref<const Eigen::VectorXd>& w);

  /// Replaces the values directly (whitened values are recomputed).
  void set_values(const Eigen::Ref<const Eigen::VectorXd>& values);

  /// Changes kernel hyperparameters and refactorizes over the same points.
  void set_kernel(const KernelParams& kernel);

  /// Log multivariate-normal density of the values. Throws NumericError if the
  /// Gram matrix is singular.
  double log_density() const;

  /// Kriging mean at the given locations.
  Eigen::VectorXd conditional_mean(const Eigen::Ref<const Eigen::MatrixXd>& at) const;

  /// Conditional mean and covariance at the given locations.
  GpConditional conditional(const Eigen::Ref<const Eigen::MatrixXd>& at) const;

 private:
  void reserve(Eigen::Index capacity);
  void refactor();
  // L^{-1} b, tolerating zero pivots.
  Eigen::MatrixXd solve_lower(const Eigen::Ref<const Eigen::MatrixXd>& b) const;

  Eigen::Index dim_ = 0;
  Eigen::Index size_ = 0;
  KernelParams kernel_;
  double mean_ = 0.0;
  bool singular_ = false;
  Eigen::MatrixXd points_;   // dim x capacity
  Eigen::VectorXd values_;   // capacity
  Eigen::VectorXd whitened_; // capacity
  Eigen::MatrixXd factor_;   // capacity x capacity, lower triangle used
};

/// Conditional draw at new_points; appends them to state and returns the values.
Eigen::VectorXd gp_extend(GpRealization& state, const Eigen::Ref<const Eigen::MatrixXd>& new_points,
                          RandomStream& rng);

/// Log density of the instantiated values.
double gp_logpdf(const GpRealization& state);

/// Realization restricted to the kept indices.
GpRealization gp_restrict(const GpRealization& state, std::span<const Eigen::Index> keep);

/// Value of the GP log density at fixed values together with its derivative with
/// respect to log(lengthscale). Throws NumericError when the Gram is not positive definite.
struct LogDensityGradient {
  double value = 0.0;
  double d_log_lengthscale = 0.0;
};
LogDensityGradient gp_logpdf_lengthscale_gradient(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                                  const Eigen::Ref<const Eigen::VectorXd>& values,
                                                  double mean_const, const KernelParams& kernel);

/// GP log density as a function of log(lengthscale) at fixed points and values.
/// Pairwise distances are computed once, so repeated evaluations along an HMC
/// trajectory cost one Cholesky each plus, for the exact derivative, an inverse.
class LengthscaleObjective {
 public:
  LengthscaleObjective(const Eigen::Ref<const Eigen::MatrixXd>& points,
                       const Eigen::Ref<const Eigen::VectorXd>& values, double mean_const,
                       const KernelParams& kernel);

  [[nodiscard]] Eigen::Index size() const noexcept { return r2_.rows(); }
  [[nodiscard]] double value(double log_l) const;
  /// Exact derivative.
  [[nodiscard]] LogDensityGradient gradient(double log_l) const;
  /// Derivative whose log-determinant term tr(K^{-1} dK) is replaced by the
  /// Hutchinson estimate over the columns of probes (m x s). With probes fixed
  /// the result is a smooth deterministic function of log_l.
  [[nodiscard]] LogDensityGradient gradient(double log_l, const Eigen::MatrixXd& probes) const;

 private:
  Eigen::MatrixXd gram_at(double log_l) const;

  Eigen::MatrixXd r2_;
  Eigen::VectorXd centered_;
  double signal_variance_ = 1.0;
  double jitter_ = 0.0;
};

/// Draw from N(mean, cov) for a covariance that may be numerically singular.
/// Jitter is escalated by factors of ten from base_jitter up to max_jitter.
Eigen::VectorXd sample_gaussian(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                const Eigen::Ref<const Eigen::MatrixXd>& cov, double base_jitter,
                                double max_jitter, RandomStream& rng);

}  // namespace mcgp
