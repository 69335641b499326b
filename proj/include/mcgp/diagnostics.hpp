#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcgp/model.hpp"
#include "mcgp/posterior.hpp"

namespace mcgp {

/// Effective sample size by Geyer's initial monotone sequence estimator,
/// capped at the chain length. Throws ConfigError for fewer than 10 values and
/// NumericError("degenerate chain") for a zero-variance chain.
double ess(std::span<const double> chain);

/// ESS over a set of monitored scalars (typically lambda at probe points).
struct EssReport {
  std::vector<double> values;
  double min = 0.0;
  double max = 0.0;
  double midpoint = 0.0;
  std::size_t argmin = 0;
  std::size_t argmax = 0;
  std::size_t midpoint_index = 0;
  std::size_t iterations = 0;
};

/// chains holds one series per probe (all of equal length); midpoint_index
/// names the probe reported as "midpoint".
EssReport ess_report(const std::vector<std::vector<double>>& chains, std::size_t midpoint_index);

struct GewekeSettings {
  std::size_t n_samples = 100000;
  std::size_t n_obs = 3;
  /// Successive-conditional sweeps discarded (with adaptation on) before recording.
  std::size_t burn_in = 2000;
  /// Location where sigma(lambda) is monitored.
  Eigen::VectorXd probe;
};

struct GewekeStatistic {
  std::string name;
  double forward_mean = 0.0;
  double successive_mean = 0.0;
  double forward_var = 0.0;
  double successive_var = 0.0;
  double successive_ess = 0.0;
  double z = 0.0;
};

struct GewekeResult {
  std::vector<GewekeStatistic> statistics;
  [[nodiscard]] double max_abs_z() const;
};

/// Names of the monitored statistics, in order.
std::vector<std::string> geweke_statistic_names(const Model& model);

/// Compares the forward simulator (parameters from the prior, data by exact
/// rejection sampling) with the successive-conditional simulator (one Gibbs
/// sweep, then fresh data given the current parameters and lambda).
/// Deterministic given the seed.
GewekeResult geweke_test(const Model& model, const SamplerSettings& settings,
                         const GewekeSettings& geweke, std::uint64_t seed);

}  // namespace mcgp
