#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "mcgp/model.hpp"
#include "mcgp/posterior.hpp"

namespace mcgp {

/// Tensor grid over (x_A, x_{A^c}) with trapezoidal weights. Axes follow the
/// model coordinate order: constrained axes first.
struct EvalGrid {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> counts;

  void validate() const;
  [[nodiscard]] Eigen::Index dim() const noexcept { return lower.size(); }
  [[nodiscard]] Eigen::VectorXd nodes(Eigen::Index axis) const;
  [[nodiscard]] Eigen::VectorXd weights(Eigen::Index axis) const;
  /// Number of nodes over axes [first, first + n).
  [[nodiscard]] Eigen::Index block_size(Eigen::Index first, Eigen::Index n) const;
  /// Coordinates (n x count) and product weights of the sub-grid over axes [first, first + n).
  [[nodiscard]] Eigen::MatrixXd block_nodes(Eigen::Index first, Eigen::Index n) const;
  [[nodiscard]] Eigen::VectorXd block_weights(Eigen::Index first, Eigen::Index n) const;
  /// Same bounds with every count doubled.
  [[nodiscard]] EvalGrid refined() const;
};

/// Range of x_A holding all but a negligible share of p_A(. | phi):
/// gaussian mean +- 4.5 sd, lognormal exp(mu +- 4.5 sd), exponential [0, 10 / r].
std::pair<double, double> constraint_range(const MarginalConstraint& c, const Phi& phi);

/// Bounding box of the points expanded by `expand` times its width on each
/// side; constrained axes are widened to cover constraint_range(phi) and
/// clipped at 0 for positive families.
EvalGrid evaluation_region(const Model& model, std::span<const Point> points, const Phi& phi,
                           double expand, std::vector<int> counts);

/// Density map evaluated on a grid, stored slice-major: node (a, c) sits at
/// a * n_ac + c where a indexes the x_A sub-grid and c the x_{A^c} sub-grid.
struct DensitySurface {
  EvalGrid grid;
  Eigen::Index dim_a = 1;
  Eigen::Index n_a = 0;
  Eigen::Index n_ac = 0;
  Eigen::VectorXd joint;        // f(x_A, x_{A^c})
  Eigen::VectorXd conditional;  // f(x_{A^c} | x_A)
  /// log of the per-slice normalizer; for the unconstrained model also the
  /// global one in log_total_normalizer.
  Eigen::VectorXd log_slice_normalizer;
  double log_total_normalizer = 0.0;
  std::vector<Eigen::Index> flagged_slices;

  /// Trapezoidal integral of the joint surface.
  [[nodiscard]] double integral() const;
  /// Trapezoidal marginal over x_{A^c} at every x_A node.
  [[nodiscard]] Eigen::VectorXd marginal_a() const;
  /// Trapezoidal integral of each conditional slice.
  [[nodiscard]] Eigen::VectorXd slice_integrals() const;
};

enum class LambdaMode { Draw, Mean };

struct EvalOptions {
  LambdaMode mode = LambdaMode::Draw;
  /// Jitter (relative to the signal variance) for conditional draws, escalated
  /// by factors of ten up to max_jitter when needed.
  double base_jitter = 1e-6;
  double max_jitter = 1e-2;
  /// Nodes per free axis used for per-point normalizers in held-out scoring.
  int slice_nodes = 64;
  /// Grid used for the global normalizer of the unconstrained model.
  int total_grid_nodes = 32;
};

/// Rebuilt GP of one posterior draw, with lambda at new locations either drawn
/// jointly (conditionally on the instantiated values) or set to the kriging mean.
class SampleLambda {
 public:
  SampleLambda(const Model& model, const PosteriorSample& sample, const EvalOptions& options);
  Eigen::VectorXd at(const Eigen::Ref<const Eigen::MatrixXd>& locs, RandomStream& rng) const;

 private:
  const Model* model_;
  const EvalOptions* options_;
  GpRealization gp_;
};

/// Density map for given lambda values at the grid nodes (slice-major order).
DensitySurface density_from_lambda(const Model& model, const Parameters& params,
                                   const EvalGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& lambda);

/// One posterior draw on a grid. In draw mode lambda is drawn slice by slice,
/// each slice jointly and conditionally on the instantiated values.
DensitySurface eval_density_sample(const Model& model, const PosteriorSample& sample,
                                   const EvalGrid& grid, const EvalOptions& options,
                                   RandomStream& rng);

/// Pointwise average of eval_density_sample over the samples.
DensitySurface posterior_mean_density(const Model& model, std::span<const PosteriorSample> samples,
                                      const EvalGrid& grid, const EvalOptions& options,
                                      RandomStream& rng);

struct HeldoutScore {
  /// Mean over samples of the summed log-probability (headline numbers).
  double joint = 0.0;
  double marginal = 0.0;
  /// Sum over points of the log of the sample-averaged probability.
  double joint_log_mean = 0.0;
  double marginal_log_mean = 0.0;
  std::vector<double> joint_per_sample;
  std::vector<double> marginal_per_sample;
  /// Per test point, averaged over samples.
  std::vector<double> joint_per_point;
  std::vector<double> marginal_per_point;
};

/// Held-out joint and marginal log-likelihood averaged over posterior draws.
/// Normalizers are trapezoidal over region's x_{A^c} bounds. Throws DataError
/// for test points outside the region.
HeldoutScore heldout_loglik(const Model& model, std::span<const PosteriorSample> samples,
                            std::span<const Point> test, const EvalGrid& region,
                            const EvalOptions& options, RandomStream& rng);

/// Bivariate normal on (log x_1, x_2) (or (x_1, x_2) with log_first unset).
struct ParametricFit {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  bool log_first = true;
};

/// Maximum-likelihood fit. Throws DataError for n < 3, non-positive x_1 under
/// the log transform, or a singular covariance.
ParametricFit fit_parametric(std::span<const Point> train, bool log_first = true);

struct LoglikPair {
  double joint = 0.0;
  double marginal = 0.0;
};

/// Test log-likelihood of a parametric fit, including the log-transform Jacobian.
LoglikPair score_parametric(const ParametricFit& fit, std::span<const Point> test);

LoglikPair fit_parametric_baseline(std::span<const Point> train, std::span<const Point> test,
                                   bool log_first = true);

/// The A = empty counterpart of a model: same centering and kernel, joint
/// density proportional to p_A pi_0 sigma(lambda) over the full space.
Model baseline_unconstrained_mode(Model model);

}  // namespace mcgp
