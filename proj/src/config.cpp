#include "mcgp/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "mcgp/errors.hpp"

namespace mcgp {

using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "version", "dataset", "test_dataset", "constrained_columns", "free_columns", "train_size",
      "test_size", "mode", "constraint_family", "phi_prior", "phi_prior_params", "centering",
      "theta_prior", "theta_init", "phi_init", "gp_mean", "signal_variance", "jitter",
      "standardize_axes", "lengthscale_init", "lengthscale_prior", "round_cap",
      "update_lengthscale", "hmc_step_size", "hmc_leapfrog_steps", "hmc_trace_probes",
      "ess_steps", "iterations", "burn_in", "thin", "eval_thin", "seed", "grid_counts",
      "grid_bounds", "grid_expand", "slice_nodes", "total_grid_nodes", "lambda_mode",
      "probe_counts", "parametric_baseline", "n_simulate", "output_dir"};
  return keys;
}

double sample_sd(std::span<const Point> pts, Eigen::Index axis, Eigen::Index dim_a) {
  double mean = 0.0;
  auto coord = [&](const Point& p) { return axis < dim_a ? p.xa[axis] : p.xac[axis - dim_a]; };
  for (const auto& p : pts) mean += coord(p);
  mean /= static_cast<double>(pts.size());
  double ss = 0.0;
  for (const auto& p : pts) ss += (coord(p) - mean) * (coord(p) - mean);
  return std::sqrt(ss / static_cast<double>(pts.size() - 1));
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "gaussian" || name == "normal") return Family::Gaussian;
  if (name == "lognormal") return Family::Lognormal;
  if (name == "exponential") return Family::Exponential;
  throw ConfigError("unknown constraint_family '" + name + "'");
}

CenteringKind parse_centering(const std::string& name) {
  if (name == "conditional_normal") return CenteringKind::ConditionalNormal;
  if (name == "shared_variance") return CenteringKind::SharedVariance;
  if (name == "standardized_moments") return CenteringKind::StandardizedMoments;
  if (name == "independent_normal") return CenteringKind::IndependentNormal;
  throw ConfigError("unknown centering '" + name + "'");
}

std::string centering_key(CenteringKind kind) {
  switch (kind) {
    case CenteringKind::ConditionalNormal: return "conditional_normal";
    case CenteringKind::SharedVariance: return "shared_variance";
    case CenteringKind::StandardizedMoments: return "standardized_moments";
    case CenteringKind::IndependentNormal: return "independent_normal";
  }
  return "conditional_normal";
}

void RunConfig::validate() const {
  if (version != kConfigVersion) {
    throw ConfigError("config version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  if (!(iterations > burn_in)) throw ConfigError("iterations must exceed burn_in");
  if (thin == 0 || eval_thin == 0) throw ConfigError("thin and eval_thin must be positive");
  if (constrained_columns.empty()) throw ConfigError("constrained_columns must be nonempty");
  if (free_columns.empty()) throw ConfigError("free_columns must be nonempty");
  if (mode != "constrained" && mode != "unconstrained") {
    throw ConfigError("mode must be 'constrained' or 'unconstrained'");
  }
  if (lambda_mode != "draw" && lambda_mode != "mean") {
    throw ConfigError("lambda_mode must be 'draw' or 'mean'");
  }
  if (theta_init.size() != 0 && theta_init.size() != 3) {
    throw ConfigError("theta_init needs three values (rho, mu2, sigma2_sq)");
  }
  if (!lengthscale_prior.empty() &&
      (lengthscale_prior.size() != 2 || !(lengthscale_prior[1] > 0.0))) {
    throw ConfigError("lengthscale_prior needs (log_location, log_scale > 0)");
  }
  if (lengthscale_init < 0.0) throw ConfigError("lengthscale_init must be nonnegative");
  if (hmc_leapfrog_steps < 1 || !(hmc_step_size > 0.0)) {
    throw ConfigError("hmc_leapfrog_steps and hmc_step_size must be positive");
  }
  if (hmc_trace_probes < 0) throw ConfigError("hmc_trace_probes must be nonnegative");
  if (ess_steps < 1) throw ConfigError("ess_steps must be positive");
  if (!(grid_expand >= 0.0)) throw ConfigError("grid_expand must be nonnegative");
  if (slice_nodes < 16 || total_grid_nodes < 16) {
    throw ConfigError("slice_nodes and total_grid_nodes must be at least 16");
  }
  const auto d = constrained_columns.size() + free_columns.size();
  if (grid_counts.size() != d) {
    throw ConfigError("grid_counts needs one entry per column (" + std::to_string(d) + ")");
  }
  if (!grid_bounds.empty() && grid_bounds.size() != 2 * d) {
    throw ConfigError("grid_bounds needs lower and upper values for every column");
  }
  if (!probe_counts.empty() && probe_counts.size() != d) {
    throw ConfigError("probe_counts needs one entry per column");
  }
  if ((train_size == 0) != (test_size == 0)) {
    throw ConfigError("train_size and test_size must be set together");
  }
  build_model_skeleton(*this).validate();
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  if (!j.contains("version")) throw ConfigError("config key 'version' is required");
  RunConfig c;
  read_key(j, "version", c.version);
  read_key(j, "dataset", c.dataset);
  read_key(j, "test_dataset", c.test_dataset);
  read_key(j, "constrained_columns", c.constrained_columns);
  read_key(j, "free_columns", c.free_columns);
  read_key(j, "train_size", c.train_size);
  read_key(j, "test_size", c.test_size);
  read_key(j, "mode", c.mode);
  read_key(j, "constraint_family", c.constraint_family);
  read_key(j, "phi_prior", c.phi_prior);
  read_key(j, "phi_prior_params", c.phi_prior_params);
  read_key(j, "centering", c.centering);
  read_key(j, "theta_prior", c.theta_prior);
  read_key(j, "theta_init", c.theta_init);
  read_key(j, "phi_init", c.phi_init);
  read_key(j, "gp_mean", c.gp_mean);
  read_key(j, "signal_variance", c.signal_variance);
  read_key(j, "jitter", c.jitter);
  read_key(j, "standardize_axes", c.standardize_axes);
  read_key(j, "lengthscale_init", c.lengthscale_init);
  read_key(j, "lengthscale_prior", c.lengthscale_prior);
  read_key(j, "round_cap", c.round_cap);
  read_key(j, "update_lengthscale", c.update_lengthscale);
  read_key(j, "hmc_step_size", c.hmc_step_size);
  read_key(j, "hmc_leapfrog_steps", c.hmc_leapfrog_steps);
  read_key(j, "hmc_trace_probes", c.hmc_trace_probes);
  read_key(j, "ess_steps", c.ess_steps);
  read_key(j, "iterations", c.iterations);
  read_key(j, "burn_in", c.burn_in);
  read_key(j, "thin", c.thin);
  read_key(j, "eval_thin", c.eval_thin);
  read_key(j, "seed", c.seed);
  read_key(j, "grid_counts", c.grid_counts);
  read_key(j, "grid_bounds", c.grid_bounds);
  read_key(j, "grid_expand", c.grid_expand);
  read_key(j, "slice_nodes", c.slice_nodes);
  read_key(j, "total_grid_nodes", c.total_grid_nodes);
  read_key(j, "lambda_mode", c.lambda_mode);
  read_key(j, "probe_counts", c.probe_counts);
  read_key(j, "parametric_baseline", c.parametric_baseline);
  read_key(j, "n_simulate", c.n_simulate);
  read_key(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  return json{{"version", c.version},
              {"dataset", c.dataset},
              {"test_dataset", c.test_dataset},
              {"constrained_columns", c.constrained_columns},
              {"free_columns", c.free_columns},
              {"train_size", c.train_size},
              {"test_size", c.test_size},
              {"mode", c.mode},
              {"constraint_family", c.constraint_family},
              {"phi_prior", c.phi_prior},
              {"phi_prior_params", c.phi_prior_params},
              {"centering", c.centering},
              {"theta_prior", c.theta_prior},
              {"theta_init", c.theta_init},
              {"phi_init", c.phi_init},
              {"gp_mean", c.gp_mean},
              {"signal_variance", c.signal_variance},
              {"jitter", c.jitter},
              {"standardize_axes", c.standardize_axes},
              {"lengthscale_init", c.lengthscale_init},
              {"lengthscale_prior", c.lengthscale_prior},
              {"round_cap", c.round_cap},
              {"update_lengthscale", c.update_lengthscale},
              {"hmc_step_size", c.hmc_step_size},
              {"hmc_leapfrog_steps", c.hmc_leapfrog_steps},
              {"hmc_trace_probes", c.hmc_trace_probes},
              {"ess_steps", c.ess_steps},
              {"iterations", c.iterations},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"eval_thin", c.eval_thin},
              {"seed", c.seed},
              {"grid_counts", c.grid_counts},
              {"grid_bounds", c.grid_bounds},
              {"grid_expand", c.grid_expand},
              {"slice_nodes", c.slice_nodes},
              {"total_grid_nodes", c.total_grid_nodes},
              {"lambda_mode", c.lambda_mode},
              {"probe_counts", c.probe_counts},
              {"parametric_baseline", c.parametric_baseline},
              {"n_simulate", c.n_simulate},
              {"output_dir", c.output_dir}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Model build_model_skeleton(const RunConfig& c) {
  Model m;
  m.constraint.family = parse_family(c.constraint_family);
  m.constraint.dim = static_cast<int>(c.constrained_columns.size());
  const auto& p = c.phi_prior_params;
  auto need = [&](std::size_t n) {
    if (p.size() != n) {
      throw ConfigError("phi_prior '" + c.phi_prior + "' needs " + std::to_string(n) +
                        " phi_prior_params, got " + std::to_string(p.size()));
    }
  };
  if (c.phi_prior == "dirac") {
    need(static_cast<std::size_t>(phi_size(m.constraint.family)));
    m.constraint.prior = DiracPrior{Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()))};
  } else if (c.phi_prior == "nix") {
    need(4);
    m.constraint.prior = NormalInvChiSqPrior{p[0], p[1], p[2], p[3]};
  } else if (c.phi_prior == "gamma") {
    need(2);
    m.constraint.prior = GammaPrior{p[0], p[1]};
  } else if (c.phi_prior == "normal_given_variance") {
    need(2);
    m.constraint.prior = NormalGivenVariancePrior{p[0], p[1]};
  } else {
    throw ConfigError("unknown phi_prior '" + c.phi_prior + "'");
  }
  m.centering.kind = parse_centering(c.centering);
  if (c.theta_prior.size() != 4) throw ConfigError("theta_prior needs (mu0, k0, alpha0, beta0)");
  m.centering.prior = ThetaPrior{c.theta_prior[0], c.theta_prior[1], c.theta_prior[2], c.theta_prior[3]};
  m.kernel.signal_variance = c.signal_variance;
  m.kernel.jitter = c.jitter;
  m.kernel.lengthscale = c.lengthscale_init > 0.0 ? c.lengthscale_init : 1.0;
  m.gp_mean = c.gp_mean;
  m.dim_ac = static_cast<int>(c.free_columns.size());
  m.round_cap = c.round_cap;
  if (c.mode == "unconstrained") m = baseline_unconstrained_mode(std::move(m));
  return m;
}

Model build_model(const RunConfig& c, std::span<const Point> train) {
  Model m = build_model_skeleton(c);
  if (train.size() < 2) throw DataError("need at least two training rows");
  const Eigen::Index dim = m.dim();
  if (c.standardize_axes) {
    m.kernel.axis_scale.resize(dim);
    for (Eigen::Index a = 0; a < dim; ++a) {
      const double sd = sample_sd(train, a, m.dim_a());
      m.kernel.axis_scale[a] = sd > 0.0 ? sd : 1.0;
    }
  }
  if (c.lengthscale_init > 0.0) {
    m.kernel.lengthscale = c.lengthscale_init;
  } else {
    const double med = median_pairwise_distance(train, m.kernel);
    if (!(med > 0.0)) throw DataError("training points coincide; cannot pick a lengthscale");
    m.kernel.lengthscale = med;
  }
  m.validate();
  return m;
}

SamplerSettings build_sampler_settings(const RunConfig& c, const Model& model) {
  SamplerSettings s;
  if (c.lengthscale_prior.empty()) {
    s.lengthscale_prior = LengthscalePrior{std::log(model.kernel.lengthscale), 1.0};
  } else {
    s.lengthscale_prior = LengthscalePrior{c.lengthscale_prior[0], c.lengthscale_prior[1]};
  }
  s.update_lengthscale = c.update_lengthscale;
  s.hmc.step_size = c.hmc_step_size;
  s.hmc.leapfrog_steps = c.hmc_leapfrog_steps;
  s.hmc.trace_probes = c.hmc_trace_probes;
  s.ess_steps = c.ess_steps;
  return s;
}

ChainConfig build_chain_config(const RunConfig& c) {
  ChainConfig cc;
  cc.iterations = c.iterations;
  cc.burn_in = c.burn_in;
  cc.thin = c.thin;
  cc.eval_thin = c.eval_thin;
  return cc;
}

EvalOptions build_eval_options(const RunConfig& c) {
  EvalOptions o;
  o.mode = c.lambda_mode == "mean" ? LambdaMode::Mean : LambdaMode::Draw;
  o.slice_nodes = c.slice_nodes;
  o.total_grid_nodes = c.total_grid_nodes;
  return o;
}

}  // namespace mcgp
