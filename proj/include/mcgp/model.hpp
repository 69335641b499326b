#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>

#include "mcgp/centering.hpp"
#include "mcgp/constraints.hpp"
#include "mcgp/data.hpp"
#include "mcgp/kernel_gp.hpp"

namespace mcgp {

/// Constrained: X_A ~ p_A(phi) exactly, X_{A^c} | X_A ∝ pi_0 sigma(lambda).
/// Unconstrained: the joint density ∝ p_A(x_A | phi) pi_0(x_{A^c} | x_A) sigma(lambda(x)),
/// i.e. the same machinery with an empty constrained set; the parametric part
/// only serves as a full-space centering.
enum class ModelMode { Constrained, Unconstrained };

/// Replaces the GP in tests: lambda(x) is computed by the hook and the GP is
/// never instantiated at proposals. +infinity pins sigma to 1, 0 pins it to 1/2.
using LambdaHook = std::function<double(const Eigen::VectorXd&)>;

struct Model {
  MarginalConstraint constraint;
  CenteringModel centering;
  KernelParams kernel;
  double gp_mean = 0.0;
  ModelMode mode = ModelMode::Constrained;
  int dim_ac = 1;
  /// Rejection rounds allowed before a sampler gives up with NumericError.
  std::size_t round_cap = 100000;
  LambdaHook lambda_hook;

  void validate() const;
  [[nodiscard]] int dim_a() const noexcept { return constraint.dim; }
  [[nodiscard]] int dim() const noexcept { return constraint.dim + dim_ac; }
  [[nodiscard]] bool constrained() const noexcept { return mode == ModelMode::Constrained; }
};

struct Parameters {
  CenteringParams theta;
  Phi phi;
};

/// 1 / (1 + exp(-x)), safe over the whole real line.
double sigmoid(double x) noexcept;
/// log sigmoid(x) without overflow or cancellation.
double log_sigmoid(double x) noexcept;

/// Draws (theta, phi) from their priors; in the shared-variance variant phi[1]
/// and theta.sigma2_sq are the same draw.
Parameters sample_parameters(const Model& model, RandomStream& rng);

/// log p_A(x_a | phi) + log pi_0(x_ac | x_a): the envelope density of a full proposal.
double envelope_logpdf(const Model& model, const Parameters& params, const Point& p);

}  // namespace mcgp
