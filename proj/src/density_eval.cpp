#include "mcgp/density_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "mcgp/errors.hpp"
#include "mcgp/parallel.hpp"

namespace mcgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogTiny = std::log(1e-300);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

void EvalGrid::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size() ||
      static_cast<Eigen::Index>(counts.size()) != lower.size()) {
    throw ConfigError("evaluation grid needs bounds and counts for every axis");
  }
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]) || !(lower[j] < upper[j])) {
      throw ConfigError("evaluation grid bounds must be finite and increasing");
    }
    if (counts[static_cast<std::size_t>(j)] < 16) {
      throw ConfigError("evaluation grid needs at least 16 nodes per axis");
    }
  }
}

Eigen::VectorXd EvalGrid::nodes(Eigen::Index axis) const {
  return Eigen::VectorXd::LinSpaced(counts[static_cast<std::size_t>(axis)], lower[axis], upper[axis]);
}

Eigen::VectorXd EvalGrid::weights(Eigen::Index axis) const {
  const int n = counts[static_cast<std::size_t>(axis)];
  const double h = (upper[axis] - lower[axis]) / (n - 1);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
  w[0] = w[n - 1] = 0.5 * h;
  return w;
}

Eigen::Index EvalGrid::block_size(Eigen::Index first, Eigen::Index n) const {
  Eigen::Index size = 1;
  for (Eigen::Index j = first; j < first + n; ++j) size *= counts[static_cast<std::size_t>(j)];
  return size;
}

Eigen::MatrixXd EvalGrid::block_nodes(Eigen::Index first, Eigen::Index n) const {
  const Eigen::Index size = block_size(first, n);
  Eigen::MatrixXd out(n, size);
  std::vector<Eigen::VectorXd> axes;
  for (Eigen::Index j = first; j < first + n; ++j) axes.push_back(nodes(j));
  for (Eigen::Index k = 0; k < size; ++k) {
    Eigen::Index rem = k;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      const Eigen::Index c = axes[static_cast<std::size_t>(j)].size();
      out(j, k) = axes[static_cast<std::size_t>(j)][rem % c];
      rem /= c;
    }
  }
  return out;
}

Eigen::VectorXd EvalGrid::block_weights(Eigen::Index first, Eigen::Index n) const {
  const Eigen::Index size = block_size(first, n);
  Eigen::VectorXd out = Eigen::VectorXd::Ones(size);
  std::vector<Eigen::VectorXd> axes;
  for (Eigen::Index j = first; j < first + n; ++j) axes.push_back(weights(j));
  for (Eigen::Index k = 0; k < size; ++k) {
    Eigen::Index rem = k;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      const Eigen::Index c = axes[static_cast<std::size_t>(j)].size();
      out[k] *= axes[static_cast<std::size_t>(j)][rem % c];
      rem /= c;
    }
  }
  return out;
}

EvalGrid EvalGrid::refined() const {
  EvalGrid g = *this;
  for (int& c : g.counts) c *= 2;
  return g;
}

std::pair<double, double> constraint_range(const MarginalConstraint& c, const Phi& phi) {
  switch (c.family) {
    case Family::Gaussian: {
      const double sd = std::sqrt(phi[1]);
      return {phi[0] - 4.5 * sd, phi[0] + 4.5 * sd};
    }
    case Family::Lognormal: {
      const double sd = std::sqrt(phi[1]);
      return {std::exp(phi[0] - 4.5 * sd), std::exp(phi[0] + 4.5 * sd)};
    }
    case Family::Exponential:
      return {0.0, 10.0 / phi[0]};
  }
  return {0.0, 1.0};
}

EvalGrid evaluation_region(const Model& model, std::span<const Point> points, const Phi& phi,
                           double expand, std::vector<int> counts) {
  if (points.empty()) throw DataError("evaluation region needs at least one point");
  if (!(expand >= 0.0)) throw ConfigError("grid_expand must be non-negative");
  const Eigen::MatrixXd locs = locations(points);
  EvalGrid g;
  g.lower = locs.rowwise().minCoeff();
  g.upper = locs.rowwise().maxCoeff();
  for (Eigen::Index j = 0; j < g.lower.size(); ++j) {
    double width = g.upper[j] - g.lower[j];
    if (!(width > 0.0)) width = std::max(1.0, std::abs(g.lower[j]));
    g.lower[j] -= expand * width;
    g.upper[j] += expand * width;
  }
  const bool positive = model.constraint.family != Family::Gaussian;
  if (phi_valid(model.constraint, phi)) {
    const auto [lo, hi] = constraint_range(model.constraint, phi);
    for (Eigen::Index j = 0; j < model.dim_a(); ++j) {
      g.lower[j] = std::min(g.lower[j], lo);
      g.upper[j] = std::max(g.upper[j], hi);
    }
  }
  if (positive) {
    for (Eigen::Index j = 0; j < model.dim_a(); ++j) g.lower[j] = std::max(g.lower[j], 0.0);
  }
  if (counts.size() == 1) counts.assign(static_cast<std::size_t>(g.lower.size()), counts[0]);
  g.counts = std::move(counts);
  g.validate();
  return g;
}

double DensitySurface::integral() const {
  return marginal_a().dot(grid.block_weights(0, dim_a));
}

Eigen::VectorXd DensitySurface::marginal_a() const {
  const Eigen::VectorXd wac = grid.block_weights(dim_a, grid.dim() - dim_a);
  Eigen::VectorXd out(n_a);
  for (Eigen::Index a = 0; a < n_a; ++a) out[a] = joint.segment(a * n_ac, n_ac).dot(wac);
  return out;
}

Eigen::VectorXd DensitySurface::slice_integrals() const {
  const Eigen::VectorXd wac = grid.block_weights(dim_a, grid.dim() - dim_a);
  Eigen::VectorXd out(n_a);
  for (Eigen::Index a = 0; a < n_a; ++a) out[a] = conditional.segment(a * n_ac, n_ac).dot(wac);
  return out;
}

SampleLambda::SampleLambda(const Model& model, const PosteriorSample& sample,
                           const EvalOptions& options)
    : model_(&model), options_(&options) {
  if (!model.lambda_hook) {
    gp_ = sample.points.cols() > 0
              ? GpRealization::from_values(sample.points, sample.values, sample.kernel, sample.gp_mean)
              : GpRealization(model.dim(), sample.kernel, sample.gp_mean);
  }
}

Eigen::VectorXd SampleLambda::at(const Eigen::Ref<const Eigen::MatrixXd>& locs,
                                 RandomStream& rng) const {
  Eigen::VectorXd out(locs.cols());
  if (model_->lambda_hook) {
    for (Eigen::Index j = 0; j < locs.cols(); ++j) out[j] = model_->lambda_hook(locs.col(j));
    return out;
  }
  if (options_->mode == LambdaMode::Mean) return gp_.conditional_mean(locs);
  const GpConditional cond = gp_.conditional(locs);
  const double sv = gp_.kernel().signal_variance;
  return sample_gaussian(cond.mean, cond.cov, options_->base_jitter * sv, options_->max_jitter * sv,
                         rng);
}

DensitySurface density_from_lambda(const Model& model, const Parameters& params,
                                   const EvalGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& lambda) {
  grid.validate();
  if (grid.dim() != model.dim()) throw ConfigError("grid dimension does not match the model");
  const Eigen::Index da = model.dim_a();
  const Eigen::Index dac = model.dim_ac;
  DensitySurface s;
  s.grid = grid;
  s.dim_a = da;
  s.n_a = grid.block_size(0, da);
  s.n_ac = grid.block_size(da, dac);
  if (lambda.size() != s.n_a * s.n_ac) throw ConfigError("lambda length does not match the grid");
  const Eigen::MatrixXd a_nodes = grid.block_nodes(0, da);
  const Eigen::MatrixXd ac_nodes = grid.block_nodes(da, dac);
  const Eigen::VectorXd wa = grid.block_weights(0, da);
  const Eigen::VectorXd log_wac = grid.block_weights(da, dac).array().log();
  const LinearConditional law = centering_law(model.centering, model.constraint, params.theta, params.phi);

  Eigen::VectorXd log_g(s.n_a * s.n_ac);
  Eigen::VectorXd log_pa(s.n_a);
  s.log_slice_normalizer.resize(s.n_a);
  Eigen::VectorXd tmp(s.n_ac);
  for (Eigen::Index a = 0; a < s.n_a; ++a) {
    log_pa[a] = marginal_logpdf(model.constraint, params.phi, a_nodes.col(a));
    for (Eigen::Index c = 0; c < s.n_ac; ++c) {
      const Eigen::Index k = a * s.n_ac + c;
      log_g[k] = centering_logpdf(law, a_nodes.col(a), ac_nodes.col(c)) + log_sigmoid(lambda[k]);
      tmp[c] = log_wac[c] + log_g[k];
    }
    s.log_slice_normalizer[a] = log_sum_exp(tmp);
    if (!(s.log_slice_normalizer[a] > kLogTiny)) s.flagged_slices.push_back(a);
  }

  double log_total = 0.0;
  if (!model.constrained()) {
    Eigen::VectorXd terms(s.n_a);
    for (Eigen::Index a = 0; a < s.n_a; ++a) {
      terms[a] = std::log(wa[a]) + log_pa[a] + s.log_slice_normalizer[a];
    }
    log_total = log_sum_exp(terms);
    if (!std::isfinite(log_total)) throw NumericError("density normalizer vanished on the grid");
  }
  s.log_total_normalizer = log_total;

  s.joint.resize(log_g.size());
  s.conditional.resize(log_g.size());
  for (Eigen::Index a = 0; a < s.n_a; ++a) {
    const bool flagged = !(s.log_slice_normalizer[a] > kLogTiny);
    for (Eigen::Index c = 0; c < s.n_ac; ++c) {
      const Eigen::Index k = a * s.n_ac + c;
      if (flagged) {
        s.joint[k] = s.conditional[k] = 0.0;
        continue;
      }
      const double log_cond = log_g[k] - s.log_slice_normalizer[a];
      s.conditional[k] = std::exp(log_cond);
      s.joint[k] = model.constrained() ? std::exp(log_pa[a] + log_cond)
                                       : std::exp(log_pa[a] + log_g[k] - log_total);
    }
  }
  return s;
}

namespace {

// lambda at every grid node, slice by slice.
Eigen::VectorXd grid_lambda(const Model& model, const SampleLambda& sl, const EvalGrid& grid,
                            const EvalOptions& options, RandomStream& rng) {
  const Eigen::Index da = model.dim_a();
  const Eigen::Index dac = model.dim_ac;
  const Eigen::Index n_a = grid.block_size(0, da);
  const Eigen::Index n_ac = grid.block_size(da, dac);
  const Eigen::MatrixXd a_nodes = grid.block_nodes(0, da);
  const Eigen::MatrixXd ac_nodes = grid.block_nodes(da, dac);
  Eigen::VectorXd lambda(n_a * n_ac);
  if (options.mode == LambdaMode::Mean || model.lambda_hook) {
    Eigen::MatrixXd all(da + dac, n_a * n_ac);
    for (Eigen::Index a = 0; a < n_a; ++a) {
      for (Eigen::Index c = 0; c < n_ac; ++c) {
        all.col(a * n_ac + c) << a_nodes.col(a), ac_nodes.col(c);
      }
    }
    return sl.at(all, rng);
  }
  Eigen::MatrixXd slice(da + dac, n_ac);
  for (Eigen::Index a = 0; a < n_a; ++a) {
    for (Eigen::Index c = 0; c < n_ac; ++c) slice.col(c) << a_nodes.col(a), ac_nodes.col(c);
    RandomStream slice_rng = rng.derive(static_cast<std::uint64_t>(a));
    lambda.segment(a * n_ac, n_ac) = sl.at(slice, slice_rng);
  }
  return lambda;
}

}  // namespace

DensitySurface eval_density_sample(const Model& model, const PosteriorSample& sample,
                                   const EvalGrid& grid, const EvalOptions& options,
                                   RandomStream& rng) {
  grid.validate();
  const SampleLambda sl(model, sample, options);
  const Eigen::VectorXd lambda = grid_lambda(model, sl, grid, options, rng);
  return density_from_lambda(model, sample.params, grid, lambda);
}

DensitySurface posterior_mean_density(const Model& model, std::span<const PosteriorSample> samples,
                                      const EvalGrid& grid, const EvalOptions& options,
                                      RandomStream& rng) {
  if (samples.empty()) throw ConfigError("posterior_mean_density needs at least one sample");
  std::vector<DensitySurface> surfaces(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    RandomStream srng = rng.derive(static_cast<std::uint64_t>(s));
    surfaces[s] = eval_density_sample(model, samples[s], grid, options, srng);
  });
  DensitySurface mean = std::move(surfaces[0]);
  for (std::size_t s = 1; s < samples.size(); ++s) {
    const DensitySurface& one = surfaces[s];
    mean.joint += one.joint;
    mean.conditional += one.conditional;
    mean.log_slice_normalizer += one.log_slice_normalizer;
    mean.log_total_normalizer += one.log_total_normalizer;
    for (Eigen::Index a : one.flagged_slices) {
      if (std::find(mean.flagged_slices.begin(), mean.flagged_slices.end(), a) ==
          mean.flagged_slices.end()) {
        mean.flagged_slices.push_back(a);
      }
    }
  }
  const double k = static_cast<double>(samples.size());
  if (samples.size() > 1) {
    mean.joint /= k;
    mean.conditional /= k;
    // Averaged log normalizers are reported for reference only.
    mean.log_slice_normalizer /= k;
    mean.log_total_normalizer /= k;
  }
  return mean;
}

HeldoutScore heldout_loglik(const Model& model, std::span<const PosteriorSample> samples,
                            std::span<const Point> test, const EvalGrid& region,
                            const EvalOptions& options, RandomStream& rng) {
  if (samples.empty()) throw ConfigError("heldout_loglik needs at least one sample");
  region.validate();
  const Eigen::Index da = model.dim_a();
  const Eigen::Index dac = model.dim_ac;
  if (region.dim() != da + dac) throw ConfigError("region dimension does not match the model");
  if (dac > 2) throw ConfigError("held-out scoring supports at most two free coordinates");
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Eigen::VectorXd x = concat(test[i]);
    if (x.size() != da + dac) throw DataError("test point " + std::to_string(i) + " has the wrong dimension");
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (x[j] < region.lower[j] || x[j] > region.upper[j]) {
        throw DataError("test point " + std::to_string(i) + " lies outside the evaluation region");
      }
    }
  }

  EvalGrid slice_grid = region;
  for (Eigen::Index j = da; j < da + dac; ++j) {
    slice_grid.counts[static_cast<std::size_t>(j)] = options.slice_nodes;
  }
  slice_grid.validate();
  const Eigen::MatrixXd ac_nodes = slice_grid.block_nodes(da, dac);
  const Eigen::VectorXd log_w = slice_grid.block_weights(da, dac).array().log();
  const Eigen::Index k = ac_nodes.cols();

  EvalGrid total_grid = region;
  for (int& c : total_grid.counts) c = options.total_grid_nodes;

  const std::size_t n_test = test.size();
  HeldoutScore out;
  out.joint_per_sample.assign(samples.size(), 0.0);
  out.marginal_per_sample.assign(samples.size(), 0.0);
  Eigen::MatrixXd joint_terms(static_cast<Eigen::Index>(n_test), static_cast<Eigen::Index>(samples.size()));
  Eigen::MatrixXd marginal_terms(joint_terms.rows(), joint_terms.cols());

  parallel_for(samples.size(), [&](std::size_t s) {
    Eigen::MatrixXd locs(da + dac, k + 1);
    Eigen::VectorXd terms(k);
    const PosteriorSample& sample = samples[s];
    RandomStream srng = rng.derive(static_cast<std::uint64_t>(s));
    const SampleLambda sl(model, sample, options);
    const LinearConditional law =
        centering_law(model.centering, model.constraint, sample.params.theta, sample.params.phi);
    double log_total = 0.0;
    if (!model.constrained()) {
      RandomStream grng = srng.derive("total");
      const Eigen::VectorXd lambda = grid_lambda(model, sl, total_grid, options, grng);
      log_total = density_from_lambda(model, sample.params, total_grid, lambda).log_total_normalizer;
    }
    double joint_sum = 0.0;
    double marginal_sum = 0.0;
    for (std::size_t i = 0; i < n_test; ++i) {
      const Point& p = test[i];
      for (Eigen::Index c = 0; c < k; ++c) locs.col(c) << p.xa, ac_nodes.col(c);
      locs.col(k) << p.xa, p.xac;
      RandomStream prng = srng.derive(static_cast<std::uint64_t>(i));
      const Eigen::VectorXd lambda = sl.at(locs, prng);
      for (Eigen::Index c = 0; c < k; ++c) {
        terms[c] = log_w[c] + centering_logpdf(law, p.xa, ac_nodes.col(c)) + log_sigmoid(lambda[c]);
      }
      const double log_z = log_sum_exp(terms);
      const double lpa = marginal_logpdf(model.constraint, sample.params.phi, p.xa);
      const double lpi = centering_logpdf(law, p.xa, p.xac) + log_sigmoid(lambda[k]);
      double joint = 0.0;
      double marginal = 0.0;
      if (model.constrained()) {
        joint = lpa + lpi - log_z;
        marginal = lpa;
      } else {
        joint = lpa + lpi - log_total;
        marginal = lpa + log_z - log_total;
      }
      const auto ii = static_cast<Eigen::Index>(i);
      const auto ss = static_cast<Eigen::Index>(s);
      joint_terms(ii, ss) = joint;
      marginal_terms(ii, ss) = marginal;
      joint_sum += joint;
      marginal_sum += marginal;
    }
    out.joint_per_sample[s] = joint_sum;
    out.marginal_per_sample[s] = marginal_sum;
  });

  const double ns = static_cast<double>(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    out.joint += out.joint_per_sample[s] / ns;
    out.marginal += out.marginal_per_sample[s] / ns;
  }
  out.joint_per_point.resize(n_test);
  out.marginal_per_point.resize(n_test);
  for (std::size_t i = 0; i < n_test; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.joint_per_point[i] = joint_terms.row(ii).mean();
    out.marginal_per_point[i] = marginal_terms.row(ii).mean();
    out.joint_log_mean += log_sum_exp(joint_terms.row(ii).transpose()) - std::log(ns);
    out.marginal_log_mean += log_sum_exp(marginal_terms.row(ii).transpose()) - std::log(ns);
  }
  return out;
}

ParametricFit fit_parametric(std::span<const Point> train, bool log_first) {
  if (train.size() < 3) throw DataError("parametric baseline needs at least 3 observations");
  const double n = static_cast<double>(train.size());
  Eigen::MatrixXd z(2, static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Point& p = train[i];
    if (p.xa.size() != 1 || p.xac.size() != 1) {
      throw DataError("parametric baseline expects two-dimensional data");
    }
    if (log_first && !(p.xa[0] > 0.0)) {
      throw DataError("parametric baseline: non-positive value under log transform at row " +
                      std::to_string(i));
    }
    z(0, static_cast<Eigen::Index>(i)) = log_first ? std::log(p.xa[0]) : p.xa[0];
    z(1, static_cast<Eigen::Index>(i)) = p.xac[0];
  }
  ParametricFit fit;
  fit.log_first = log_first;
  fit.mean = z.rowwise().mean();
  const Eigen::MatrixXd centered = z.colwise() - fit.mean;
  fit.cov = centered * centered.transpose() / n;
  const double det = fit.cov.determinant();
  if (!(det > 1e-12 * fit.cov(0, 0) * fit.cov(1, 1)) || !(fit.cov(0, 0) > 0.0)) {
    throw DataError("parametric baseline: singular covariance");
  }
  return fit;
}

LoglikPair score_parametric(const ParametricFit& fit, std::span<const Point> test) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::LLT<Eigen::Matrix2d> llt(fit.cov);
  const double log_det = 2.0 * std::log(llt.matrixL()(0, 0) * llt.matrixL()(1, 1));
  LoglikPair out;
  for (const Point& p : test) {
    if (fit.log_first && !(p.xa[0] > 0.0)) {
      out.joint = out.marginal = kNegInf;
      return out;
    }
    const double u = fit.log_first ? std::log(p.xa[0]) : p.xa[0];
    const double jac = fit.log_first ? -u : 0.0;
    const Eigen::Vector2d d(u - fit.mean[0], p.xac[0] - fit.mean[1]);
    const double quad = d.dot(llt.solve(d));
    out.joint += -log2pi - 0.5 * log_det - 0.5 * quad + jac;
    const double v = fit.cov(0, 0);
    out.marginal += -0.5 * (log2pi + std::log(v)) - 0.5 * d[0] * d[0] / v + jac;
  }
  return out;
}

LoglikPair fit_parametric_baseline(std::span<const Point> train, std::span<const Point> test,
                                   bool log_first) {
  return score_parametric(fit_parametric(train, log_first), test);
}

Model baseline_unconstrained_mode(Model model) {
  model.mode = ModelMode::Unconstrained;
  // A fixed marginal would leak the constraint into the baseline; give the
  // full-space parametric part vague priors instead.
  if (model.constraint.fixed()) {
    if (model.constraint.family == Family::Exponential) {
      model.constraint.prior = GammaPrior{0.1, 0.1};
    } else if (model.centering.kind == CenteringKind::SharedVariance) {
      model.constraint.prior = NormalGivenVariancePrior{0.0, 0.001};
    } else {
      model.constraint.prior = NormalInvChiSqPrior{0.0, 0.001, 0.001, 1.0};
    }
  }
  return model;
}

}  // namespace mcgp
