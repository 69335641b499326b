#include "mcgp/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>

#include "mcgp/errors.hpp"
#include "mcgp/io.hpp"
#include "mcgp/prior_sim.hpp"

namespace mcgp {

using nlohmann::json;
namespace fs = std::filesystem;

std::string library_version() { return "0.1.0"; }

namespace {

std::vector<Point> concat_points(std::span<const Point> a, std::span<const Point> b) {
  std::vector<Point> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<std::string> column_names(const RunConfig& c) {
  std::vector<std::string> names = c.constrained_columns;
  names.insert(names.end(), c.free_columns.begin(), c.free_columns.end());
  return names;
}

Phi reference_phi(const Model& model, std::span<const Point> train) {
  if (const auto* d = std::get_if<DiracPrior>(&model.constraint.prior)) return d->value;
  std::vector<Eigen::VectorXd> xa;
  xa.reserve(train.size());
  for (const auto& p : train) xa.push_back(p.xa);
  return moment_match_phi(model.constraint, xa);
}

// Index of the node in the middle of every axis (last axis fastest).
std::size_t midpoint_node(const std::vector<int>& counts) {
  std::size_t idx = 0;
  for (int c : counts) idx = idx * static_cast<std::size_t>(c) + static_cast<std::size_t>(c / 2);
  return idx;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

}  // namespace

PreparedData load_data(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("config key 'dataset' is required for this command");
  const Model skeleton = build_model_skeleton(c);
  Dataset all = ingest_csv(c.dataset, c.constrained_columns, c.free_columns, skeleton.constraint);
  PreparedData out;
  if (c.train_size > 0) {
    const std::uint64_t split_seed = RandomStream(c.seed).derive("split").key();
    auto [train, test] = split_dataset(all, c.train_size, c.test_size, split_seed);
    out.train = std::move(train);
    out.test = std::move(test);
  } else {
    out.train = std::move(all);
  }
  if (!c.test_dataset.empty()) {
    out.test = ingest_csv(c.test_dataset, c.constrained_columns, c.free_columns, skeleton.constraint);
  }
  return out;
}

EvalGrid region_for(const RunConfig& c, const Model& model, std::span<const Point> train,
                    std::span<const Point> test, const std::vector<int>& counts) {
  if (!c.grid_bounds.empty()) {
    const auto d = static_cast<Eigen::Index>(counts.size());
    EvalGrid g;
    g.lower = Eigen::Map<const Eigen::VectorXd>(c.grid_bounds.data(), d);
    g.upper = Eigen::Map<const Eigen::VectorXd>(c.grid_bounds.data() + d, d);
    g.counts = counts;
    g.validate();
    return g;
  }
  const std::vector<Point> all = concat_points(train, test);
  return evaluation_region(model, all, reference_phi(model, train), c.grid_expand, counts);
}

FitResult fit_model(const RunConfig& c, const Dataset& train, std::span<const Point> test) {
  c.validate();
  FitResult r;
  r.model = build_model(c, train.rows);
  r.settings = build_sampler_settings(c, r.model);
  r.chain_config = build_chain_config(c);
  r.region = region_for(c, r.model, train.rows, test, c.grid_counts);
  if (!c.probe_counts.empty()) {
    EvalGrid probe_grid = r.region;
    probe_grid.counts = c.probe_counts;
    probe_grid.validate();
    r.chain_config.probes = probe_grid.block_nodes(0, probe_grid.dim());
  }
  r.final_state = initialize_chain(r.model, train.rows, r.settings);
  r.chain = run_chain(r.final_state, r.model, r.settings, r.chain_config, c.seed);
  return r;
}

EvaluationResult evaluate_fit(const RunConfig& c, const FitResult& fit, std::span<const Point> train,
                              std::span<const Point> test, bool with_surface) {
  EvaluationResult out;
  const EvalOptions options = build_eval_options(c);
  const RandomStream eval_root = RandomStream(c.seed).derive("eval");
  if (with_surface) {
    RandomStream rng = eval_root.derive("surface");
    out.surface = posterior_mean_density(fit.model, fit.chain.samples, fit.region, options, rng);
  }
  if (!test.empty()) {
    RandomStream rng = eval_root.derive("heldout");
    out.heldout = heldout_loglik(fit.model, fit.chain.samples, test, fit.region, options, rng);
    if (c.parametric_baseline) {
      out.parametric =
          fit_parametric_baseline(train, test, fit.model.constraint.family == Family::Lognormal);
    }
  }
  return out;
}

void write_trace_csv(const fs::path& path, const Trace& trace) {
  write_csv(path, trace.columns, trace.rows);
}

json samples_to_json(std::span<const PosteriorSample> samples) {
  json arr = json::array();
  for (const auto& s : samples) {
    std::vector<double> pts(s.points.data(), s.points.data() + s.points.size());
    arr.push_back(json{{"sweep", s.sweep},
                       {"theta", {s.params.theta.rho, s.params.theta.mu2, s.params.theta.sigma2_sq}},
                       {"phi", vec_json(s.params.phi)},
                       {"signal_variance", s.kernel.signal_variance},
                       {"lengthscale", s.kernel.lengthscale},
                       {"jitter", s.kernel.jitter},
                       {"axis_scale", vec_json(s.kernel.axis_scale)},
                       {"gp_mean", s.gp_mean},
                       {"dim", s.points.rows()},
                       {"points", pts},
                       {"values", vec_json(s.values)}});
  }
  return arr;
}

std::vector<PosteriorSample> samples_from_json(const json& j) {
  std::vector<PosteriorSample> out;
  try {
    for (const auto& e : j) {
      PosteriorSample s;
      s.sweep = e.at("sweep").get<std::size_t>();
      const auto th = e.at("theta").get<std::vector<double>>();
      if (th.size() != 3) throw DataError("samples: theta needs three values");
      s.params.theta = CenteringParams{th[0], th[1], th[2]};
      s.params.phi = json_vec(e.at("phi"));
      s.kernel.signal_variance = e.at("signal_variance").get<double>();
      s.kernel.lengthscale = e.at("lengthscale").get<double>();
      s.kernel.jitter = e.at("jitter").get<double>();
      s.kernel.axis_scale = json_vec(e.at("axis_scale"));
      s.gp_mean = e.at("gp_mean").get<double>();
      const auto dim = e.at("dim").get<Eigen::Index>();
      const auto pts = e.at("points").get<std::vector<double>>();
      s.values = json_vec(e.at("values"));
      if (dim <= 0 || static_cast<Eigen::Index>(pts.size()) != dim * s.values.size()) {
        throw DataError("samples: points and values disagree in size");
      }
      s.points = Eigen::Map<const Eigen::MatrixXd>(pts.data(), dim, s.values.size());
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed samples file: ") + e.what());
  }
  return out;
}

void write_surface_csv(const fs::path& path, const DensitySurface& surface,
                       const std::vector<std::string>& names) {
  std::vector<std::string> header = names;
  header.emplace_back("density");
  header.emplace_back("conditional");
  const Eigen::MatrixXd nodes = surface.grid.block_nodes(0, surface.grid.dim());
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(nodes.cols()));
  for (Eigen::Index k = 0; k < nodes.cols(); ++k) {
    std::vector<double> r(nodes.col(k).data(), nodes.col(k).data() + nodes.rows());
    r.push_back(surface.joint[k]);
    r.push_back(surface.conditional[k]);
    rows.push_back(std::move(r));
  }
  write_csv(path, header, rows);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json ess_report_json(const EssReport& r) {
  return json{{"min", r.min},           {"max", r.max},
              {"midpoint", r.midpoint}, {"argmin", r.argmin},
              {"argmax", r.argmax},     {"midpoint_index", r.midpoint_index},
              {"iterations", r.iterations}, {"values", r.values}};
}

ProbeEss probe_ess(const std::vector<Eigen::VectorXd>& probe_rows, std::size_t midpoint) {
  if (probe_rows.empty()) throw ConfigError("probe_ess: no probe values recorded");
  const auto p = static_cast<std::size_t>(probe_rows.front().size());
  if (midpoint >= p) throw ConfigError("probe_ess: midpoint out of range");
  ProbeEss out;
  std::vector<std::vector<double>> chains;
  std::size_t mid_pos = 0;
  bool mid_kept = false;
  std::vector<double> series(probe_rows.size());
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t t = 0; t < probe_rows.size(); ++t) series[t] = probe_rows[t][static_cast<Eigen::Index>(j)];
    try {
      (void)ess(series);
    } catch (const NumericError&) {
      out.excluded.push_back(j);
      continue;
    }
    if (j == midpoint) {
      mid_pos = chains.size();
      mid_kept = true;
    }
    out.kept.push_back(j);
    chains.push_back(series);
  }
  if (chains.empty()) throw NumericError("probe_ess: every probe chain is constant");
  if (!mid_kept) throw NumericError("probe_ess: the midpoint chain is constant");
  EssReport rep = ess_report(chains, mid_pos);
  rep.argmin = out.kept[rep.argmin];
  rep.argmax = out.kept[rep.argmax];
  rep.midpoint_index = midpoint;
  out.report = std::move(rep);
  return out;
}

void command_simulate(const RunConfig& c) {
  c.validate();
  Model model = build_model_skeleton(c);
  model.validate();
  const fs::path dir = c.output_dir;
  ensure_dir(dir);
  RandomStream root = RandomStream(c.seed).derive("simulate");
  SimulationResult sim;
  if (c.theta_init.empty() && c.phi_init.empty()) {
    sim = simulate_prior(model, c.n_simulate, root);
  } else {
    RandomStream prng = root.derive("parameters");
    Parameters params = sample_parameters(model, prng);
    if (!c.theta_init.empty()) params.theta = CenteringParams{c.theta_init[0], c.theta_init[1], c.theta_init[2]};
    if (!c.phi_init.empty()) {
      params.phi = Eigen::Map<const Eigen::VectorXd>(c.phi_init.data(), static_cast<Eigen::Index>(c.phi_init.size()));
    }
    if (model.centering.kind == CenteringKind::SharedVariance) params.theta.sigma2_sq = params.phi[1];
    if (!phi_valid(model.constraint, params.phi)) throw ConfigError("phi_init is invalid for the family");
    RandomStream drng = root.derive("data");
    sim = simulate(model, params, c.n_simulate, drng);
  }
  Dataset d;
  d.a_names = c.constrained_columns;
  d.ac_names = c.free_columns;
  d.rows = sim.accepted;
  write_dataset(dir / "data.csv", d);
  std::vector<double> counts(sim.rejected_counts.begin(), sim.rejected_counts.end());
  write_json(dir / "simulation.json",
             json{{"seed", c.seed},
                  {"n", c.n_simulate},
                  {"theta", {sim.params.theta.rho, sim.params.theta.mu2, sim.params.theta.sigma2_sq}},
                  {"phi", vec_json(sim.params.phi)},
                  {"rejected_counts", counts},
                  {"total_rejected", sim.rejected.size()},
                  {"rounds", sim.rounds},
                  {"config", config_to_json(c)}});
}

void command_fit(const RunConfig& c) {
  c.validate();
  const PreparedData data = load_data(c);
  const fs::path dir = c.output_dir;
  ensure_dir(dir);
  const FitResult fit = fit_model(c, data.train, data.test.rows);
  write_trace_csv(dir / "trace.csv", fit.chain.trace);
  write_json(dir / "samples.json", samples_to_json(fit.chain.samples));
  json meta{{"version", library_version()},
            {"config_version", kConfigVersion},
            {"seed", c.seed},
            {"n_train", data.train.size()},
            {"n_test", data.test.size()},
            {"initial_lengthscale", fit.model.kernel.lengthscale},
            {"axis_scale", vec_json(fit.model.kernel.axis_scale)},
            {"hmc_steps", fit.final_state.adaptation.hmc_steps},
            {"hmc_accepted", fit.final_state.adaptation.hmc_accepted},
            {"n_samples", fit.chain.samples.size()},
            {"config", config_to_json(c)}};
  if (!fit.chain.trace.probe_values.empty()) {
    const std::size_t mid = midpoint_node(c.probe_counts);
    const ProbeEss pe = probe_ess(fit.chain.trace.probe_values, mid);
    json pj = ess_report_json(pe.report);
    pj["excluded"] = pe.excluded;
    pj["probe_counts"] = c.probe_counts;
    write_json(dir / "probe_ess.json", pj);
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < fit.chain.trace.rows.size(); ++t) {
      const Eigen::VectorXd& pv = fit.chain.trace.probe_values[t];
      rows.push_back({fit.chain.trace.rows[t][0], pv[static_cast<Eigen::Index>(mid)],
                      pv[static_cast<Eigen::Index>(pe.report.argmin)],
                      pv[static_cast<Eigen::Index>(pe.report.argmax)]});
    }
    write_csv(dir / "probes.csv", {"sweep", "lambda_midpoint", "lambda_min_ess", "lambda_max_ess"}, rows);
  }
  write_json(dir / "metadata.json", meta);
}

void command_evaluate(const RunConfig& c) {
  c.validate();
  const PreparedData data = load_data(c);
  const fs::path dir = c.output_dir;
  FitResult fit;
  fit.model = build_model(c, data.train.rows);
  fit.region = region_for(c, fit.model, data.train.rows, data.test.rows, c.grid_counts);
  fit.chain.samples = samples_from_json(read_json(dir / "samples.json"));
  if (fit.chain.samples.empty()) throw DataError("samples.json holds no samples");
  const EvaluationResult ev = evaluate_fit(c, fit, data.train.rows, data.test.rows, true);
  write_surface_csv(dir / "surface.csv", ev.surface, column_names(c));
  json ej{{"integral", ev.surface.integral()},
          {"flagged_slices", ev.surface.flagged_slices},
          {"n_samples", fit.chain.samples.size()},
          {"grid_lower", vec_json(fit.region.lower)},
          {"grid_upper", vec_json(fit.region.upper)},
          {"grid_counts", fit.region.counts}};
  std::vector<std::vector<double>> rows;
  if (ev.heldout) {
    const HeldoutScore& h = *ev.heldout;
    ej["heldout"] = json{{"joint", h.joint},
                         {"marginal", h.marginal},
                         {"joint_log_mean", h.joint_log_mean},
                         {"marginal_log_mean", h.marginal_log_mean},
                         {"joint_per_point", h.joint_per_point},
                         {"marginal_per_point", h.marginal_per_point}};
    rows.push_back({0.0, h.joint, h.marginal, h.joint_log_mean, h.marginal_log_mean});
    if (ev.parametric) {
      ej["parametric"] = json{{"joint", ev.parametric->joint}, {"marginal", ev.parametric->marginal}};
      rows.push_back({1.0, ev.parametric->joint, ev.parametric->marginal, ev.parametric->joint,
                      ev.parametric->marginal});
    }
    // model: 0 = fitted model, 1 = parametric baseline.
    write_csv(dir / "loglik.csv", {"model", "joint", "marginal", "joint_log_mean", "marginal_log_mean"},
              rows);
  }
  write_json(dir / "evaluation.json", ej);
}

void command_diagnose(const RunConfig& c) {
  const fs::path dir = c.output_dir;
  const CsvTable trace = read_csv(dir / "trace.csv");
  if (trace.rows.size() < 10) throw DataError("trace.csv needs at least 10 rows for diagnostics");
  json columns = json::object();
  auto traceplot = [&](const std::string& name, const std::vector<double>& values,
                       const std::vector<double>& sweeps) {
    std::vector<std::vector<double>> rows;
    rows.reserve(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) rows.push_back({sweeps[t], values[t]});
    write_csv(dir / ("traceplot_" + name + ".csv"), {"sweep", name}, rows);
    try {
      columns[name] = ess(values);
    } catch (const NumericError&) {
      columns[name] = nullptr;
    }
  };
  std::vector<double> sweeps;
  for (const auto& r : trace.rows) sweeps.push_back(r[0]);
  for (std::size_t j = 1; j < trace.header.size(); ++j) {
    std::vector<double> v;
    v.reserve(trace.rows.size());
    for (const auto& r : trace.rows) v.push_back(r[j]);
    traceplot(trace.header[j], v, sweeps);
  }
  json out{{"iterations", trace.rows.size()}, {"columns", columns}};
  if (fs::exists(dir / "probes.csv")) {
    const CsvTable probes = read_csv(dir / "probes.csv");
    std::vector<double> psweeps;
    for (const auto& r : probes.rows) psweeps.push_back(r[0]);
    for (std::size_t j = 1; j < probes.header.size(); ++j) {
      std::vector<double> v;
      for (const auto& r : probes.rows) v.push_back(r[j]);
      traceplot(probes.header[j], v, psweeps);
    }
    out["columns"] = columns;
  }
  if (fs::exists(dir / "probe_ess.json")) out["probes"] = read_json(dir / "probe_ess.json");
  write_json(dir / "ess.json", out);
}

void command_split(const RunConfig& c) {
  if (c.train_size == 0) throw ConfigError("split needs train_size and test_size");
  const PreparedData data = load_data(c);
  const fs::path dir = c.output_dir;
  ensure_dir(dir);
  write_dataset(dir / "train.csv", data.train);
  write_dataset(dir / "test.csv", data.test);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double RecipeResult::median(const std::string& model, std::size_t n, const std::string& metric) const {
  for (const auto& s : summary) {
    if (s.model == model && s.n == n && s.metric == metric) return s.median;
  }
  throw ConfigError("no summary for " + model + " at n=" + std::to_string(n));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double bvn_logpdf(const Eigen::Vector2d& x, const Eigen::Vector2d& m, const Eigen::Matrix2d& s) {
  const Eigen::LLT<Eigen::Matrix2d> llt(s);
  const Eigen::Vector2d z = llt.matrixL().solve(x - m);
  return -0.5 * z.squaredNorm() - std::log(llt.matrixL()(0, 0) * llt.matrixL()(1, 1)) - kLog2Pi;
}

double normal_logpdf(double x, double m, double var) {
  return -0.5 * (x - m) * (x - m) / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
}

const double kSyn1Cov = 3.0 * std::sqrt(5.0) / 5.0;

Dataset draw_bvn(std::size_t n, RandomStream& rng, const std::vector<Eigen::Vector2d>& means,
                 const Eigen::Matrix2d& cov) {
  const Eigen::LLT<Eigen::Matrix2d> llt(cov);
  const Eigen::Matrix2d l = llt.matrixL();
  Dataset d;
  d.a_names = {"x1"};
  d.ac_names = {"x2"};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = means.size() == 1 ? 0 : (rng.uniform() < 0.5 ? 0 : 1);
    Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d x = means[k] + l * z;
    Point p;
    p.xa = Eigen::VectorXd::Constant(1, x[0]);
    p.xac = Eigen::VectorXd::Constant(1, x[1]);
    d.rows.push_back(std::move(p));
  }
  return d;
}

Eigen::Matrix2d syn1_cov() {
  Eigen::Matrix2d s;
  s << 1.0, kSyn1Cov, kSyn1Cov, 20.0;
  return s;
}

Eigen::Matrix2d syn2_cov() {
  Eigen::Matrix2d s;
  s << 20.0, 6.0, 6.0, 20.0;
  return s;
}

RunConfig base_config(const RecipeOptions& o) {
  RunConfig c;
  c.iterations = o.iterations.value_or(5000);
  c.burn_in = o.burn_in.value_or(std::min<std::size_t>(1000, c.iterations / 5));
  c.probe_counts.clear();
  c.seed = o.seed;
  return c;
}

RunConfig synthetic1_config(const RecipeOptions& o, bool constrained) {
  RunConfig c = base_config(o);
  c.constraint_family = "gaussian";
  c.phi_prior = "dirac";
  c.phi_prior_params = {13.0, 1.0};
  c.centering = "conditional_normal";
  c.theta_prior = {0.0, 0.001, 0.001, 0.001};
  c.mode = constrained ? "constrained" : "unconstrained";
  return c;
}

void summarize(RecipeResult& r) {
  std::vector<std::pair<std::string, std::size_t>> groups;
  for (const auto& row : r.rows) {
    const auto key = std::make_pair(row.model, row.n);
    if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
  }
  for (const auto& [model, n] : groups) {
    for (const char* metric : {"joint", "marginal"}) {
      std::vector<double> v;
      for (const auto& row : r.rows) {
        if (row.model == model && row.n == n) v.push_back(std::string(metric) == "joint" ? row.joint : row.marginal);
      }
      r.summary.push_back({model, n, metric, quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)});
    }
  }
}

void write_recipe(const fs::path& dir, const RecipeResult& r, const RecipeOptions& o) {
  ensure_dir(dir);
  std::ofstream table(dir / "table.csv");
  table << "model,n,split,joint,marginal\n";
  for (const auto& row : r.rows) {
    table << row.model << ',' << row.n << ',' << row.split << ',' << format_double(row.joint) << ','
          << format_double(row.marginal) << '\n';
  }
  std::ofstream summary(dir / "summary.csv");
  summary << "model,n,metric,q25,median,q75\n";
  for (const auto& s : r.summary) {
    summary << s.model << ',' << s.n << ',' << s.metric << ',' << format_double(s.q25) << ','
            << format_double(s.median) << ',' << format_double(s.q75) << '\n';
  }
  json meta{{"recipe", o.name}, {"seed", o.seed}, {"version", library_version()}, {"extra", r.extra}};
  write_json(dir / "recipe.json", meta);
}

// Fits one model and scores it on the test rows.
RecipeRow fit_and_score(RunConfig c, const std::string& label, std::size_t split, const Dataset& train,
                        const Dataset& test, const RecipeOptions& o, const fs::path& run_dir) {
  const FitResult fit = fit_model(c, train, test.rows);
  const EvaluationResult ev = evaluate_fit(c, fit, train.rows, test.rows, false);
  if (o.write_runs) {
    ensure_dir(run_dir);
    write_trace_csv(run_dir / "trace.csv", fit.chain.trace);
    write_json(run_dir / "config.json", config_to_json(c));
  }
  return RecipeRow{label, train.size(), split, ev.heldout->joint, ev.heldout->marginal};
}

std::uint64_t run_seed(std::uint64_t seed, const std::string& recipe, std::size_t index) {
  return RandomStream(seed).derive(recipe).derive(static_cast<std::uint64_t>(index)).key();
}

RecipeResult recipe_synthetic1(const RecipeOptions& o) {
  RecipeResult r;
  const std::size_t splits = o.splits.value_or(5);
  const fs::path dir = o.out / "synthetic1";
  const RandomStream root = RandomStream(o.seed).derive("synthetic1-data");
  std::size_t run = 0;
  for (std::size_t s = 0; s < splits; ++s) {
    RandomStream test_rng = root.derive(s).derive("test");
    RandomStream train_rng = root.derive(s).derive("train");
    const Dataset test = synthetic1_draw(60, test_rng);
    const Dataset train_full = synthetic1_draw(100, train_rng);
    const LoglikPair truth = synthetic1_truth_loglik(test.rows);
    for (std::size_t n : {std::size_t{20}, std::size_t{100}}) {
      Dataset train = train_full;
      train.rows.resize(n);
      r.rows.push_back({"truth", n, s, truth.joint, truth.marginal});
      for (const bool constrained : {true, false}) {
        RunConfig c = synthetic1_config(o, constrained);
        c.seed = run_seed(o.seed, "synthetic1", run++);
        const std::string label = constrained ? "constrained" : "unconstrained";
        r.rows.push_back(fit_and_score(c, label, s, train, test, o,
                                       dir / (label + "_n" + std::to_string(n) + "_split" + std::to_string(s))));
      }
    }
  }
  summarize(r);
  write_recipe(dir, r, o);
  return r;
}

RecipeResult recipe_synthetic2(const RecipeOptions& o) {
  RecipeResult r;
  const std::size_t splits = o.splits.value_or(10);
  const fs::path dir = o.out / "synthetic2";
  const RandomStream root = RandomStream(o.seed).derive("synthetic2-data");
  std::size_t run = 0;
  for (std::size_t s = 0; s < splits; ++s) {
    RandomStream test_rng = root.derive(s).derive("test");
    RandomStream train_rng = root.derive(s).derive("train");
    const Dataset test = synthetic2_draw(15, test_rng);
    const Dataset train = synthetic2_draw(15, train_rng);
    const LoglikPair truth = synthetic2_truth_loglik(test.rows);
    r.rows.push_back({"truth", 15, s, truth.joint, truth.marginal});
    struct Variant {
      const char* label;
      const char* centering;
      const char* prior;
      std::vector<double> params;
      const char* mode;
    };
    // Inv-Gamma(0.001, 0.001) on the constrained variance equals a scaled
    // inverse chi-square with 0.002 degrees of freedom and scale 1.
    const std::vector<Variant> variants = {
        {"shared_variance", "shared_variance", "normal_given_variance", {-10.0, 0.01}, "constrained"},
        {"constrained", "conditional_normal", "nix", {-10.0, 0.01, 0.002, 1.0}, "constrained"},
        {"unconstrained", "conditional_normal", "nix", {-10.0, 0.01, 0.002, 1.0}, "unconstrained"}};
    for (const auto& v : variants) {
      RunConfig c = base_config(o);
      c.constraint_family = "gaussian";
      c.centering = v.centering;
      c.phi_prior = v.prior;
      c.phi_prior_params = v.params;
      c.mode = v.mode;
      c.seed = run_seed(o.seed, "synthetic2", run++);
      r.rows.push_back(fit_and_score(c, v.label, s, train, test, o,
                                     dir / (std::string(v.label) + "_split" + std::to_string(s))));
    }
  }
  summarize(r);
  write_recipe(dir, r, o);
  return r;
}

RunConfig pm25_config(const RecipeOptions& o) {
  RunConfig c = base_config(o);
  c.dataset = o.data;
  c.constrained_columns = {"pm25"};
  c.free_columns = {"temperature"};
  c.constraint_family = "lognormal";
  c.phi_prior = "nix";
  c.phi_prior_params = {-10.0, 0.01, 0.001, 5.0};
  c.centering = "standardized_moments";
  c.theta_prior = {0.0, 0.001, 0.001, 0.001};
  return c;
}

RecipeResult recipe_pm25(const RecipeOptions& o) {
  if (o.data.empty()) {
    throw ConfigError("recipe pm25 needs --data: a CSV with columns pm25,temperature");
  }
  RecipeResult r;
  const std::size_t splits = o.splits.value_or(5);
  const fs::path dir = o.out / "pm25";
  const RunConfig base = pm25_config(o);
  const Model skeleton = build_model_skeleton(base);
  const Dataset all = ingest_csv(o.data, base.constrained_columns, base.free_columns, skeleton.constraint);
  const std::size_t test_n = 60;
  if (all.size() <= test_n + 3) throw DataError("pm25 data has too few rows for a 60-row test split");
  const std::size_t train_n = std::min<std::size_t>(296, all.size() - test_n);
  std::size_t run = 0;
  for (std::size_t s = 0; s < splits; ++s) {
    auto [train, test] = split_dataset(all, train_n, test_n, run_seed(o.seed, "pm25-split", s));
    for (const bool constrained : {true, false}) {
      RunConfig c = base;
      c.mode = constrained ? "constrained" : "unconstrained";
      c.seed = run_seed(o.seed, "pm25", run++);
      const std::string label = constrained ? "constrained" : "unconstrained";
      r.rows.push_back(
          fit_and_score(c, label, s, train, test, o, dir / (label + "_split" + std::to_string(s))));
    }
    const LoglikPair par = fit_parametric_baseline(train.rows, test.rows, true);
    r.rows.push_back({"parametric", train.size(), s, par.joint, par.marginal});
  }
  summarize(r);
  write_recipe(dir, r, o);
  return r;
}

RecipeResult recipe_earthquake(const RecipeOptions& o) {
  if (o.data.empty()) {
    throw ConfigError("recipe earthquake needs --data: a CSV with columns recurrence_time,magnitude");
  }
  RecipeResult r;
  const fs::path dir = o.out / "earthquake";
  RunConfig c = base_config(o);
  c.dataset = o.data;
  c.constrained_columns = {"recurrence_time"};
  c.free_columns = {"magnitude"};
  c.constraint_family = "exponential";
  c.phi_prior = "gamma";
  c.phi_prior_params = {0.1, 0.1};
  c.centering = "standardized_moments";
  c.theta_prior = {0.0, 0.001, 0.001, 0.001};
  c.probe_counts = {60, 59};
  c.seed = run_seed(o.seed, "earthquake", 0);
  c.output_dir = dir.string();
  command_fit(c);
  command_evaluate(c);
  command_diagnose(c);
  write_json(dir / "config.json", config_to_json(c));
  r.extra = read_json(dir / "probe_ess.json");
  r.extra.erase("values");
  return r;
}

}  // namespace

Dataset synthetic1_draw(std::size_t n, RandomStream& rng) {
  return draw_bvn(n, rng, {Eigen::Vector2d(13.0, -20.0), Eigen::Vector2d(13.0, 20.0)}, syn1_cov());
}

LoglikPair synthetic1_truth_loglik(std::span<const Point> test) {
  LoglikPair out;
  const Eigen::Matrix2d s = syn1_cov();
  for (const auto& p : test) {
    const Eigen::Vector2d x(p.xa[0], p.xac[0]);
    const double a = bvn_logpdf(x, Eigen::Vector2d(13.0, -20.0), s);
    const double b = bvn_logpdf(x, Eigen::Vector2d(13.0, 20.0), s);
    const double m = std::max(a, b);
    out.joint += m + std::log(0.5 * std::exp(a - m) + 0.5 * std::exp(b - m));
    out.marginal += normal_logpdf(p.xa[0], 13.0, 1.0);
  }
  return out;
}

Dataset synthetic2_draw(std::size_t n, RandomStream& rng) {
  return draw_bvn(n, rng, {Eigen::Vector2d(13.0, -5.0)}, syn2_cov());
}

LoglikPair synthetic2_truth_loglik(std::span<const Point> test) {
  LoglikPair out;
  for (const auto& p : test) {
    out.joint += bvn_logpdf(Eigen::Vector2d(p.xa[0], p.xac[0]), Eigen::Vector2d(13.0, -5.0), syn2_cov());
    out.marginal += normal_logpdf(p.xa[0], 13.0, 20.0);
  }
  return out;
}

RecipeResult run_recipe(const RecipeOptions& o) {
  if (o.name == "synthetic1") return recipe_synthetic1(o);
  if (o.name == "synthetic2") return recipe_synthetic2(o);
  if (o.name == "pm25") return recipe_pm25(o);
  if (o.name == "earthquake") return recipe_earthquake(o);
  throw ConfigError("unknown recipe '" + o.name + "' (expected synthetic1, synthetic2, pm25 or earthquake)");
}

}  // namespace mcgp
