#include "mcgp/prior_sim.hpp"

#include <cassert>
#include <string>

#include "mcgp/errors.hpp"

namespace mcgp {

RoundsResult run_rejection_rounds(const Model& model, const Parameters& params,
                                  std::span<const Eigen::VectorXd> fixed_xa, std::size_t n_items,
                                  GpRealization& gp, RandomStream& rng) {
  const bool fixed = !fixed_xa.empty();
  if (fixed && fixed_xa.size() != n_items) {
    throw ConfigError("run_rejection_rounds: one x_A per item expected");
  }
  const LinearConditional law =
      centering_law(model.centering, model.constraint, params.theta, params.phi);
  const Eigen::Index dim = model.dim();
  const Eigen::Index da = model.dim_a();

  RoundsResult out;
  out.accepted.resize(n_items);
  out.accepted_index.assign(n_items, -1);

  std::vector<std::size_t> active(n_items);
  for (std::size_t i = 0; i < n_items; ++i) active[i] = i;

  RandomStream gp_rng = rng.derive("gp");
  std::vector<Point> proposals;
  std::vector<RandomStream> item_rngs;
  Eigen::MatrixXd locs;
  while (!active.empty()) {
    if (out.rounds >= model.round_cap) {
      throw NumericError("rejection sampling exceeded " + std::to_string(model.round_cap) +
                         " rounds");
    }
    const std::size_t r = out.rounds++;
    const auto k = static_cast<Eigen::Index>(active.size());
    proposals.assign(active.size(), Point{});
    item_rngs.clear();
    locs.resize(dim, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      const std::size_t i = active[static_cast<std::size_t>(a)];
      item_rngs.push_back(rng.derive(i, r));
      RandomStream& ir = item_rngs.back();
      Point& p = proposals[static_cast<std::size_t>(a)];
      if (fixed) {
        p.xa = fixed_xa[i];
      } else {
        p.xa = sample_marginal(model.constraint, params.phi, 1, ir).col(0);
      }
      p.xac = centering_sample(law, p.xa, model.dim_ac, ir);
      locs.col(a).head(da) = p.xa;
      locs.col(a).tail(model.dim_ac) = p.xac;
    }

    Eigen::VectorXd lambda(k);
    Eigen::Index first = -1;
    if (model.lambda_hook) {
      for (Eigen::Index a = 0; a < k; ++a) lambda[a] = model.lambda_hook(locs.col(a));
    } else {
      first = gp.size();
      RandomStream round_rng = gp_rng.derive(r);
      lambda = gp.extend(locs, round_rng);
    }

    std::vector<std::size_t> still;
    still.reserve(active.size());
    for (Eigen::Index a = 0; a < k; ++a) {
      const std::size_t i = active[static_cast<std::size_t>(a)];
      const double s = sigmoid(lambda[a]);
      assert(s <= 1.0);
      const Eigen::Index idx = first < 0 ? -1 : first + a;
      Point& p = proposals[static_cast<std::size_t>(a)];
      if (item_rngs[static_cast<std::size_t>(a)].uniform() < s) {
        out.accepted[i] = std::move(p);
        out.accepted_index[i] = idx;
      } else {
        out.rejected.push_back(std::move(p));
        out.rejected_owner.push_back(i);
        out.rejected_index.push_back(idx);
        still.push_back(i);
      }
    }
    active.swap(still);
  }
  return out;
}

SimulationResult simulate_given(const Model& model, const Parameters& params, std::size_t n,
                                GpRealization gp, RandomStream& rng) {
  if (n < 1) throw ConfigError("simulate: n must be at least 1");
  SimulationResult res;
  res.params = params;
  std::vector<Eigen::VectorXd> xa;
  if (model.constrained()) {
    RandomStream xa_rng = rng.derive("xa");
    const Eigen::MatrixXd draws =
        sample_marginal(model.constraint, params.phi, static_cast<Eigen::Index>(n), xa_rng);
    xa.reserve(n);
    for (Eigen::Index i = 0; i < draws.cols(); ++i) xa.emplace_back(draws.col(i));
  }
  RandomStream round_rng = rng.derive("rounds");
  RoundsResult rr = run_rejection_rounds(model, params, xa, n, gp, round_rng);
  res.accepted = std::move(rr.accepted);
  res.rejected = std::move(rr.rejected);
  res.rejected_owner = std::move(rr.rejected_owner);
  res.accepted_index = std::move(rr.accepted_index);
  res.rejected_index = std::move(rr.rejected_index);
  res.rejected_counts.assign(n, 0);
  for (std::size_t owner : res.rejected_owner) ++res.rejected_counts[owner];
  res.gp = std::move(gp);
  res.rounds = rr.rounds;
  return res;
}

SimulationResult simulate(const Model& model, const Parameters& params, std::size_t n,
                          RandomStream& rng) {
  return simulate_given(model, params, n, GpRealization(model.dim(), model.kernel, model.gp_mean),
                        rng);
}

SimulationResult simulate_prior(const Model& model, std::size_t n, RandomStream& rng) {
  RandomStream param_rng = rng.derive("parameters");
  const Parameters params = sample_parameters(model, param_rng);
  RandomStream data_rng = rng.derive("data");
  return simulate(model, params, n, data_rng);
}

}  // namespace mcgp
