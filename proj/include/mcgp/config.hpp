#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcgp/density_eval.hpp"
#include "mcgp/model.hpp"
#include "mcgp/posterior.hpp"

namespace mcgp {

inline constexpr int kConfigVersion = 1;

/// Flat run configuration. Every key is optional except `version`; unknown keys
/// are rejected so that a misspelt hyperparameter never silently falls back to
/// its default.
struct RunConfig {
  int version = kConfigVersion;

  // Data.
  std::string dataset;
  std::string test_dataset;
  std::vector<std::string> constrained_columns = {"x1"};
  std::vector<std::string> free_columns = {"x2"};
  /// When nonzero, dataset is split into train_size / test_size rows with the run seed.
  std::size_t train_size = 0;
  std::size_t test_size = 0;

  // Model.
  std::string mode = "constrained";  // constrained | unconstrained
  std::string constraint_family = "gaussian";  // gaussian | lognormal | exponential
  /// dirac: phi values; nix: mu0 k0 v0 sigma0_sq; gamma: shape rate;
  /// normal_given_variance: mu0 k0.
  std::string phi_prior = "dirac";
  std::vector<double> phi_prior_params = {0.0, 1.0};
  /// conditional_normal | shared_variance | standardized_moments | independent_normal
  std::string centering = "conditional_normal";
  /// mu0 k0 alpha0 beta0
  std::vector<double> theta_prior = {0.0, 0.001, 0.001, 0.001};
  /// rho mu2 sigma2_sq used by `simulate`; empty draws theta from its prior.
  std::vector<double> theta_init;
  /// phi used by `simulate` for non-Dirac priors; empty draws it from the prior.
  std::vector<double> phi_init;
  double gp_mean = 0.0;
  double signal_variance = 1.0;
  double jitter = 1e-8;
  /// Divide each axis by the training standard deviation inside the kernel.
  bool standardize_axes = true;
  /// 0 picks the median pairwise distance of the training points.
  double lengthscale_init = 0.0;
  /// log-location and log-scale; empty centres the prior on the initial lengthscale with scale 1.
  std::vector<double> lengthscale_prior;
  std::size_t round_cap = 100000;

  // Sampler.
  bool update_lengthscale = true;
  double hmc_step_size = 0.25;
  int hmc_leapfrog_steps = 2;
  int hmc_trace_probes = 0;
  int ess_steps = 1;
  std::size_t iterations = 5000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::size_t eval_thin = 40;
  std::uint64_t seed = 1;

  // Evaluation.
  /// Nodes per axis for the density surface.
  std::vector<int> grid_counts = {60, 59};
  /// lower..., upper... ; empty derives the region from the data.
  std::vector<double> grid_bounds;
  double grid_expand = 0.25;
  int slice_nodes = 64;
  int total_grid_nodes = 32;
  std::string lambda_mode = "draw";  // draw | mean
  /// Nodes per axis of the probe grid whose lambda traces feed ESS; empty disables.
  std::vector<int> probe_counts = {60, 59};
  bool parametric_baseline = false;

  // Simulation and output.
  std::size_t n_simulate = 100;
  std::string output_dir = "out";

  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
/// Reads and validates a config file. Errors name the file and the key.
RunConfig load_config(const std::filesystem::path& path);

Family parse_family(const std::string& name);
CenteringKind parse_centering(const std::string& name);
std::string centering_key(CenteringKind kind);

/// Constraint, centering and priors only (no data-dependent kernel settings).
Model build_model_skeleton(const RunConfig& c);

/// Full model for the given training points: axis scales from the training
/// standard deviations, lengthscale from the median pairwise distance unless set.
Model build_model(const RunConfig& c, std::span<const Point> train);

SamplerSettings build_sampler_settings(const RunConfig& c, const Model& model);
ChainConfig build_chain_config(const RunConfig& c);
EvalOptions build_eval_options(const RunConfig& c);

}  // namespace mcgp
