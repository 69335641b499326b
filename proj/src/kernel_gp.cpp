#include "mcgp/kernel_gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mcgp/errors.hpp"

namespace mcgp {

void KernelParams::validate() const {
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
    throw ConfigError("kernel signal_variance must be positive");
  }
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw ConfigError("kernel lengthscale must be positive");
  }
  if (!(jitter >= 0.0)) throw ConfigError("kernel jitter must be nonnegative");
  for (Eigen::Index i = 0; i < axis_scale.size(); ++i) {
    if (!(axis_scale[i] > 0.0)) throw ConfigError("kernel axis_scale entries must be positive");
  }
}

namespace {

inline double sq_dist_unchecked(const double* x, const double* y, Eigen::Index dim,
                                const KernelParams& p) {
  double s = 0.0;
  if (p.axis_scale.size() == 0) {
    for (Eigen::Index a = 0; a < dim; ++a) {
      const double d = x[a] - y[a];
      s += d * d;
    }
  } else {
    for (Eigen::Index a = 0; a < dim; ++a) {
      const double d = (x[a] - y[a]) / p.axis_scale[a];
      s += d * d;
    }
  }
  return s;
}

void check_scale(Eigen::Index dim, const KernelParams& p) {
  if (p.axis_scale.size() != 0 && p.axis_scale.size() != dim) {
    throw ConfigError("kernel axis_scale has " + std::to_string(p.axis_scale.size()) +
                      " entries for " + std::to_string(dim) + "-dimensional locations");
  }
}

}  // namespace

double scaled_sq_distance(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& params) {
  if (x.size() != y.size()) {
    throw ConfigError("kernel_eval: location dimensions differ (" + std::to_string(x.size()) +
                      " vs " + std::to_string(y.size()) + ")");
  }
  check_scale(x.size(), params);
  return sq_dist_unchecked(x.data(), y.data(), x.size(), params);
}

double kernel_eval(const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& params) {
  const double r2 = scaled_sq_distance(x, y, params);
  return params.signal_variance * std::exp(-r2 / (2.0 * params.lengthscale * params.lengthscale));
}

Eigen::MatrixXd cross_gram(const Eigen::Ref<const Eigen::MatrixXd>& a,
                           const Eigen::Ref<const Eigen::MatrixXd>& b, const KernelParams& params) {
  if (a.rows() != b.rows()) throw ConfigError("cross_gram: location dimensions differ");
  check_scale(a.rows(), params);
  const double inv2l2 = 1.0 / (2.0 * params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    const double* bj = b.col(j).data();
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      k(i, j) = params.signal_variance *
                std::exp(-sq_dist_unchecked(a.col(i).data(), bj, a.rows(), params) * inv2l2);
    }
  }
  return k;
}

Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& points, const KernelParams& params,
                     bool with_jitter) {
  check_scale(points.rows(), params);
  const Eigen::Index m = points.cols();
  const double inv2l2 = 1.0 / (2.0 * params.lengthscale * params.lengthscale);
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    k(j, j) = params.signal_variance + (with_jitter ? params.jitter : 0.0);
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double v =
          params.signal_variance *
          std::exp(-sq_dist_unchecked(points.col(i).data(), points.col(j).data(), points.rows(),
                                      params) *
                   inv2l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd psd_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  const Eigen::Index n = a.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd l = llt.matrixL();
    return l;
  }
  // Semi-definite fallback: exact zero pivots for round-off-level residuals.
  const double scale = std::max(a.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const double zero_tol = 1e-12 * scale;
  const double neg_tol = 1e-7 * scale;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d > zero_tol) {
      const double ljj = std::sqrt(d);
      l(j, j) = ljj;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
      }
    } else if (d < -neg_tol) {
      throw NumericError("covariance is not positive semi-definite (pivot " + std::to_string(d) +
                         ")");
    }
  }
  return l;
}

GpRealization::GpRealization(Eigen::Index dim, KernelParams kernel, double mean_const)
    : dim_(dim), kernel_(std::move(kernel)), mean_(mean_const) {
  kernel_.validate();
  check_scale(dim_, kernel_);
}

GpRealization GpRealization::from_values(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                         const Eigen::Ref<const Eigen::VectorXd>& values,
                                         KernelParams kernel, double mean_const) {
  if (points.cols() != values.size()) {
    throw ConfigError("GpRealization: point and value counts differ");
  }
  GpRealization gp(points.rows(), std::move(kernel), mean_const);
  gp.reserve(points.cols());
  gp.size_ = points.cols();
  gp.points_.leftCols(gp.size_) = points;
  gp.values_.head(gp.size_) = values;
  gp.refactor();
  return gp;
}

void GpRealization::reserve(Eigen::Index capacity) {
  if (capacity <= points_.cols()) return;
  const Eigen::Index cap = std::max<Eigen::Index>(capacity, 2 * points_.cols());
  Eigen::MatrixXd p(dim_, cap);
  Eigen::VectorXd v(cap);
  Eigen::VectorXd w(cap);
  Eigen::MatrixXd f(cap, cap);
  p.leftCols(size_) = points_.leftCols(size_);
  v.head(size_) = values_.head(size_);
  w.head(size_) = whitened_.head(size_);
  f.topLeftCorner(size_, size_) = factor_.topLeftCorner(size_, size_);
  points_.swap(p);
  values_.swap(v);
  whitened_.swap(w);
  factor_.swap(f);
}

Eigen::MatrixXd GpRealization::solve_lower(const Eigen::Ref<const Eigen::MatrixXd>& b) const {
  if (!singular_) {
    return factor().triangularView<Eigen::Lower>().solve(b);
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(size_, b.cols());
  const auto l = factor();
  for (Eigen::Index i = 0; i < size_; ++i) {
    const double lii = l(i, i);
    if (lii == 0.0) continue;
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      x(i, c) = (b(i, c) - l.row(i).head(i).dot(x.col(c).head(i))) / lii;
    }
  }
  return x;
}

void GpRealization::refactor() {
  Eigen::MatrixXd l = psd_cholesky(gram(points(), kernel_, true));
  factor_.topLeftCorner(size_, size_).setZero();
  factor_.topLeftCorner(size_, size_).triangularView<Eigen::Lower>() = l;
  singular_ = (l.diagonal().array() == 0.0).any();
  const Eigen::VectorXd centered = values().array() - mean_;
  whitened_.head(size_) = solve_lower(centered);
}

Eigen::VectorXd GpRealization::extend(const Eigen::Ref<const Eigen::MatrixXd>& new_points,
                                      RandomStream& rng) {
  const Eigen::Index k = new_points.cols();
  if (k == 0) return Eigen::VectorXd(0);
  if (new_points.rows() != dim_) {
    throw ConfigError("gp_extend: new points have dimension " + std::to_string(new_points.rows()) +
                      ", realization has " + std::to_string(dim_));
  }
  const Eigen::Index m = size_;
  Eigen::MatrixXd s = gram(new_points, kernel_, true);
  Eigen::MatrixXd v;
  Eigen::VectorXd cond_mean = Eigen::VectorXd::Constant(k, mean_);
  if (m > 0) {
    v = solve_lower(cross_gram(points(), new_points, kernel_));
    s.noalias() -= v.transpose() * v;
    cond_mean.noalias() += v.transpose() * whitened();
  }
  s = 0.5 * (s + s.transpose());
  Eigen::MatrixXd l22;
  try {
    l22 = psd_cholesky(s);
  } catch (const NumericError& e) {
    throw NumericError(std::string("gp_extend: conditional covariance not positive definite "
                                   "after jitter (duplicate points or too-small jitter): ") +
                       e.what());
  }
  Eigen::VectorXd z(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    z[j] = rng.normal();
    if (l22(j, j) == 0.0) {
      z[j] = 0.0;
      singular_ = true;
    }
  }
  Eigen::VectorXd drawn = cond_mean + l22.triangularView<Eigen::Lower>() * z;

  reserve(m + k);
  points_.middleCols(m, k) = new_points;
  values_.segment(m, k) = drawn;
  whitened_.segment(m, k) = z;
  if (m > 0) factor_.block(m, 0, k, m) = v.transpose();
  factor_.block(m, m, k, k) = l22;
  factor_.block(0, m, m, k).setZero();
  size_ = m + k;
  return drawn;
}

GpRealization GpRealization::restrict(std::span<const Eigen::Index> keep) const {
  GpRealization out(dim_, kernel_, mean_);
  const auto k = static_cast<Eigen::Index>(keep.size());
  bool prefix = true;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index idx = keep[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= size_) {
      throw std::out_of_range("gp_restrict: index " + std::to_string(idx) + " out of range (size " +
                              std::to_string(size_) + ")");
    }
    if (idx != i) prefix = false;
  }
  out.reserve(k);
  out.size_ = k;
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index idx = keep[static_cast<std::size_t>(i)];
    out.points_.col(i) = points_.col(idx);
    out.values_[i] = values_[idx];
  }
  if (prefix) {
    out.factor_.topLeftCorner(k, k) = factor_.topLeftCorner(k, k);
    out.whitened_.head(k) = whitened_.head(k);
    out.singular_ = (out.factor().diagonal().array() == 0.0).any();
  } else {
    out.refactor();
  }
  return out;
}

void GpRealization::set_whitened(const Eigen::Ref<const Eigen::VectorXd>& w) {
  if (w.size() != size_) throw ConfigError("set_whitened: size mismatch");
  whitened_.head(size_) = w;
  values_.head(size_) = factor().triangularView<Eigen::Lower>() * w;
  values_.head(size_).array() += mean_;
}

void GpRealization::set_values(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() != size_) throw ConfigError("set_values: size mismatch");
  values_.head(size_) = values;
  const Eigen::VectorXd centered = values.array() - mean_;
  whitened_.head(size_) = solve_lower(centered);
}

void GpRealization::set_kernel(const KernelParams& kernel) {
  kernel.validate();
  check_scale(dim_, kernel);
  kernel_ = kernel;
  refactor();
}

double GpRealization::log_density() const {
  if (size_ == 0) throw ConfigError("gp_logpdf: empty realization");
  if (singular_) throw NumericError("gp_logpdf: Gram matrix is singular (zero pivot)");
  const double log_det_half = factor().diagonal().array().log().sum();
  return -0.5 * whitened().squaredNorm() - log_det_half -
         0.5 * static_cast<double>(size_) * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd GpRealization::conditional_mean(const Eigen::Ref<const Eigen::MatrixXd>& at) const {
  Eigen::VectorXd mean = Eigen::VectorXd::Constant(at.cols(), mean_);
  if (size_ == 0 || at.cols() == 0) return mean;
  const Eigen::MatrixXd v = solve_lower(cross_gram(points(), at, kernel_));
  mean.noalias() += v.transpose() * whitened();
  return mean;
}

GpConditional GpRealization::conditional(const Eigen::Ref<const Eigen::MatrixXd>& at) const {
  GpConditional out;
  out.mean = Eigen::VectorXd::Constant(at.cols(), mean_);
  out.cov = gram(at, kernel_, false);
  if (size_ == 0 || at.cols() == 0) return out;
  const Eigen::MatrixXd v = solve_lower(cross_gram(points(), at, kernel_));
  out.mean.noalias() += v.transpose() * whitened();
  out.cov.noalias() -= v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

Eigen::VectorXd gp_extend(GpRealization& state, const Eigen::Ref<const Eigen::MatrixXd>& new_points,
                          RandomStream& rng) {
  return state.extend(new_points, rng);
}

double gp_logpdf(const GpRealization& state) { return state.log_density(); }

GpRealization gp_restrict(const GpRealization& state, std::span<const Eigen::Index> keep) {
  return state.restrict(keep);
}

LogDensityGradient gp_logpdf_lengthscale_gradient(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                                  const Eigen::Ref<const Eigen::VectorXd>& values,
                                                  double mean_const, const KernelParams& kernel) {
  return LengthscaleObjective(points, values, mean_const, kernel)
      .gradient(std::log(kernel.lengthscale));
}

LengthscaleObjective::LengthscaleObjective(const Eigen::Ref<const Eigen::MatrixXd>& points,
                                           const Eigen::Ref<const Eigen::VectorXd>& values,
                                           double mean_const, const KernelParams& kernel)
    : signal_variance_(kernel.signal_variance), jitter_(kernel.jitter) {
  const Eigen::Index m = points.cols();
  if (m == 0) throw ConfigError("gp_logpdf: empty realization");
  if (values.size() != m) throw ConfigError("gp_logpdf: point and value counts differ");
  check_scale(points.rows(), kernel);
  r2_.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    r2_(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      r2_(i, j) = r2_(j, i) =
          sq_dist_unchecked(points.col(i).data(), points.col(j).data(), points.rows(), kernel);
    }
  }
  centered_ = values.array() - mean_const;
}

Eigen::MatrixXd LengthscaleObjective::gram_at(double log_l) const {
  const double inv_l2 = std::exp(-2.0 * log_l);
  Eigen::MatrixXd k = signal_variance_ * (-0.5 * inv_l2 * r2_.array()).exp();
  k.diagonal().array() += jitter_;
  return k;
}

namespace {

struct Factored {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
  double value = 0.0;
};

Factored factor_and_value(const Eigen::MatrixXd& k, const Eigen::VectorXd& centered) {
  Factored f;
  f.llt.compute(k);
  if (f.llt.info() != Eigen::Success) {
    throw NumericError("gp_logpdf: Gram matrix not positive definite");
  }
  f.alpha = f.llt.solve(centered);
  const double log_det_half = f.llt.matrixLLT().diagonal().array().log().sum();
  f.value = -0.5 * centered.dot(f.alpha) - log_det_half -
            0.5 * static_cast<double>(k.rows()) * std::log(2.0 * std::numbers::pi);
  return f;
}

}  // namespace

double LengthscaleObjective::value(double log_l) const {
  return factor_and_value(gram_at(log_l), centered_).value;
}

LogDensityGradient LengthscaleObjective::gradient(double log_l) const {
  Eigen::MatrixXd k = gram_at(log_l);
  const Factored f = factor_and_value(k, centered_);
  // dK/dlog(l) = K_noiseless .* r^2 / l^2 (zero on the diagonal).
  const double inv_l2 = std::exp(-2.0 * log_l);
  k.diagonal().setZero();
  k.array() *= r2_.array() * inv_l2;
  // W = L^{-1}, built in column blocks so each triangular solve only touches the
  // trailing rows.
  const Eigen::Index m = size();
  const Eigen::MatrixXd& l = f.llt.matrixLLT();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  constexpr Eigen::Index kBlock = 64;
  for (Eigen::Index j = 0; j < m; j += kBlock) {
    const Eigen::Index nb = std::min(kBlock, m - j);
    const Eigen::Index t = m - j;
    w.block(j, j, t, nb).setIdentity();
    l.block(j, j, t, t).triangularView<Eigen::Lower>().solveInPlace(w.block(j, j, t, nb));
  }
  // tr(K^{-1} dK) over the lower block triangle of K^{-1} = W'W, using that rows
  // of W above a block's first column vanish. Off-diagonal blocks count twice.
  double trace = 0.0;
  Eigen::MatrixXd block;
  for (Eigen::Index i = 0; i < m; i += kBlock) {
    const Eigen::Index bi = std::min(kBlock, m - i);
    for (Eigen::Index j = 0; j <= i; j += kBlock) {
      const Eigen::Index bj = std::min(kBlock, m - j);
      block.noalias() = w.block(i, i, m - i, bi).transpose() * w.block(i, j, m - i, bj);
      const double s = (block.array() * k.block(i, j, bi, bj).array()).sum();
      trace += i == j ? s : 2.0 * s;
    }
  }
  LogDensityGradient out;
  out.value = f.value;
  out.d_log_lengthscale = 0.5 * f.alpha.dot(k * f.alpha) - 0.5 * trace;
  return out;
}

LogDensityGradient LengthscaleObjective::gradient(double log_l, const Eigen::MatrixXd& probes) const {
  if (probes.rows() != size() || probes.cols() == 0) {
    throw ConfigError("LengthscaleObjective: probe matrix has the wrong shape");
  }
  Eigen::MatrixXd k = gram_at(log_l);
  const Factored f = factor_and_value(k, centered_);
  const double inv_l2 = std::exp(-2.0 * log_l);
  k.diagonal().setZero();
  k.array() *= r2_.array() * inv_l2;
  // tr(K^{-1} dK) = tr(L^{-1} dK L^{-T}) ~ mean_j v_j' dK v_j with v_j = L^{-T} z_j.
  const Eigen::MatrixXd v = f.llt.matrixU().solve(probes);
  const double trace = (v.array() * (k * v).array()).sum() / static_cast<double>(probes.cols());
  LogDensityGradient out;
  out.value = f.value;
  out.d_log_lengthscale = 0.5 * f.alpha.dot(k * f.alpha) - 0.5 * trace;
  return out;
}

Eigen::VectorXd sample_gaussian(const Eigen::Ref<const Eigen::VectorXd>& mean,
                                const Eigen::Ref<const Eigen::MatrixXd>& cov, double base_jitter,
                                double max_jitter, RandomStream& rng) {
  const Eigen::Index n = mean.size();
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  if (n == 0) return z;
  double jitter = base_jitter;
  while (true) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      return mean + llt.matrixL() * z;
    }
    if (jitter >= max_jitter) break;
    jitter = std::min(max_jitter, std::max(jitter * 10.0, 1e-12));
  }
  throw NumericError("conditional covariance not positive definite up to jitter " +
                     std::to_string(max_jitter));
}

}  // namespace mcgp
