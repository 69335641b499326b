#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcgp/kernel_gp.hpp"
#include "mcgp/model.hpp"

namespace mcgp {

/// Outcome of running the thinning rounds for a batch of items until each has
/// one accepted proposal.
struct RoundsResult {
  std::vector<Point> accepted;               // one per item
  std::vector<Eigen::Index> accepted_index;  // position in the GP, -1 under a lambda hook
  std::vector<Point> rejected;
  std::vector<std::size_t> rejected_owner;
  std::vector<Eigen::Index> rejected_index;
  std::size_t rounds = 0;
};

/// Rejection rounds over the active set. Each round proposes from the envelope
/// for every active item, extends the GP jointly at the proposals conditionally
/// on everything instantiated so far, and accepts with probability sigma(lambda).
///
/// With fixed_xa non-empty (constrained mode) item i proposes x_{A^c} from
/// pi_0(. | fixed_xa[i]); otherwise every proposal is a full point drawn from
/// p_A pi_0. Randomness for item i in round r comes from rng.derive(i, r) so
/// results do not depend on batching. Throws NumericError past model.round_cap.
RoundsResult run_rejection_rounds(const Model& model, const Parameters& params,
                                  std::span<const Eigen::VectorXd> fixed_xa, std::size_t n_items,
                                  GpRealization& gp, RandomStream& rng);

struct SimulationResult {
  std::vector<Point> accepted;
  std::vector<Point> rejected;
  std::vector<std::size_t> rejected_owner;
  std::vector<std::size_t> rejected_counts;
  /// Positions of the accepted and rejected points in gp (-1 under a lambda hook).
  std::vector<Eigen::Index> accepted_index;
  std::vector<Eigen::Index> rejected_index;
  /// Every proposal (accepted or not) in proposal order, plus whatever the
  /// realization held before the call.
  GpRealization gp;
  Parameters params;
  std::size_t rounds = 0;
};

/// Exact draw of n observations at fixed parameters from a fresh GP.
SimulationResult simulate(const Model& model, const Parameters& params, std::size_t n,
                          RandomStream& rng);

/// Same, but lambda continues an existing realization.
SimulationResult simulate_given(const Model& model, const Parameters& params, std::size_t n,
                                GpRealization gp, RandomStream& rng);

/// Parameters drawn from their priors first, then data.
SimulationResult simulate_prior(const Model& model, std::size_t n, RandomStream& rng);

}  // namespace mcgp
