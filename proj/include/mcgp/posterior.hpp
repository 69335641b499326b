#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcgp/centering.hpp"
#include "mcgp/kernel_gp.hpp"
#include "mcgp/model.hpp"
#include "mcgp/phi_update.hpp"

namespace mcgp {

/// Lognormal prior on the lengthscale: log l ~ N(log_location, log_scale^2).
struct LengthscalePrior {
  double log_location = 0.0;
  double log_scale = 1.0;
};

struct HmcSettings {
  double step_size = 0.25;
  int leapfrog_steps = 2;
  double target_accept = 0.8;
  /// Rademacher probes for the log-determinant term of the force; 0 uses the
  /// exact O(m^3) derivative. The probes are fixed along a trajectory and the
  /// accept step uses the exact energy, so either choice leaves the target intact.
  int trace_probes = 0;
};

struct SamplerSettings {
  LengthscalePrior lengthscale_prior;
  bool update_lengthscale = true;
  HmcSettings hmc;
  int ess_steps = 1;
  /// Test hooks.
  bool accept_all_theta = false;
  bool force_metropolis_phi = false;
};

struct SamplerAdaptation {
  PhiAdaptation phi;
  ThetaAdaptation theta;
  AdaptiveScale hmc_step{0.25, 0.8};
  /// Running sums over HMC steps (for tuning checks).
  std::size_t hmc_steps = 0;
  std::size_t hmc_accepted = 0;
  double hmc_abs_delta_h = 0.0;
};

/// Current state of the augmented chain. The GP holds the observations first
/// (in data order) followed by the rejected proposals in the order of
/// `rejected`.
struct ChainState {
  std::vector<Point> observations;
  std::vector<Point> rejected;
  std::vector<std::size_t> rejected_owner;
  GpRealization gp;
  Parameters params;
  SamplerAdaptation adaptation;
  std::size_t sweep = 0;

  [[nodiscard]] std::size_t n_obs() const noexcept { return observations.size(); }
  [[nodiscard]] double lengthscale() const noexcept { return gp.kernel().lengthscale; }
  [[nodiscard]] ConditionalData conditional_data(const Model& model) const;
  [[nodiscard]] std::vector<std::size_t> rejected_counts() const;
};

/// Median pairwise distance between observations in kernel coordinates.
double median_pairwise_distance(std::span<const Point> points, const KernelParams& kernel);

/// Starting state: phi by moment matching (or its fixed value), theta by
/// matching the sample moments of the data, lambda = gp_mean at the
/// observations, no rejected points. The lengthscale comes from model.kernel.
ChainState initialize_chain(const Model& model, std::vector<Point> observations,
                            const SamplerSettings& settings = {});

/// Redraws every Y^i by rerunning the thinning rounds at fixed x_A^i, then drops
/// the accepted proposals from the GP.
void resample_rejections(ChainState& state, const Model& model, RandomStream& rng);

/// sum_obs log sigma(lambda) + sum_rejected log(1 - sigma(lambda)).
double lambda_log_likelihood(const ChainState& state);

/// Elliptical slice sampling on the instantiated lambda values.
void update_lambda(ChainState& state, RandomStream& rng, int steps = 1);

struct HmcStepInfo {
  bool accepted = false;
  bool aborted = false;
  double abs_delta_h = 0.0;
  double acceptance_probability = 0.0;
};

/// Log of the lengthscale target on u = log l (prior in u plus the GP density).
double lengthscale_log_target(const ChainState& state, const LengthscalePrior& prior, double log_l);

/// One HMC transition on log l. Non-finite energies abort the step.
HmcStepInfo update_lengthscale(ChainState& state, const LengthscalePrior& prior,
                               const HmcSettings& hmc, AdaptiveScale& step, bool adapt,
                               RandomStream& rng);

/// rejections -> lambda -> phi -> theta -> lengthscale. Adaptation is active
/// while adapt is set. With a lambda hook the lambda and lengthscale updates are
/// skipped (the hook is the function).
void gibbs_sweep(ChainState& state, const Model& model, const SamplerSettings& settings, bool adapt,
                 RandomStream& rng);

/// Per-sweep randomness: rng.derive("sweep", index).
RandomStream sweep_stream(const RandomStream& root, std::size_t sweep);

struct ChainConfig {
  std::size_t iterations = 5000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  /// Every eval_thin-th retained sweep keeps a full sample for density evaluation.
  std::size_t eval_thin = 40;
  /// Locations where the kriging mean of lambda is recorded (dim x P).
  Eigen::MatrixXd probes;

  void validate() const;
};

/// Everything needed to evaluate the density map for one posterior draw.
struct PosteriorSample {
  std::size_t sweep = 0;
  Parameters params;
  KernelParams kernel;
  double gp_mean = 0.0;
  Eigen::MatrixXd points;
  Eigen::VectorXd values;
};

PosteriorSample snapshot(const ChainState& state, const Model& model);

struct Trace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  /// Kriging mean of lambda at the probes, one row per trace row.
  std::vector<Eigen::VectorXd> probe_values;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<double> column(const std::string& name) const;
};

/// Column names of a trace row for this model.
std::vector<std::string> trace_columns(const Model& model);
std::vector<double> trace_row(const ChainState& state, const Model& model);

struct ChainResult {
  Trace trace;
  std::vector<PosteriorSample> samples;
};

/// Runs sweeps from state.sweep up to config.iterations. Burn-in sweeps adapt
/// step sizes and are not recorded. The observer, when set, is called after
/// every sweep (used for checkpointing).
ChainResult run_chain(ChainState& state, const Model& model, const SamplerSettings& settings,
                      const ChainConfig& config, std::uint64_t seed,
                      const std::function<void(const ChainState&)>& observer = {});

}  // namespace mcgp
