#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcgp/config.hpp"
#include "mcgp/data.hpp"
#include "mcgp/density_eval.hpp"
#include "mcgp/diagnostics.hpp"
#include "mcgp/posterior.hpp"

namespace mcgp {

/// Version string written into metadata.
std::string library_version();

struct PreparedData {
  Dataset train;
  Dataset test;
};

/// Reads `dataset` (and `test_dataset`), applying the train/test split when
/// train_size is set. The split stream is derived from the seed.
PreparedData load_data(const RunConfig& c);

/// Evaluation region: grid_bounds when given, otherwise the bounding box of
/// all points expanded by grid_expand, with constrained axes covering the
/// constraint range of phi0 (the fixed value or the moment-matched estimate).
EvalGrid region_for(const RunConfig& c, const Model& model, std::span<const Point> train,
                    std::span<const Point> test, const std::vector<int>& counts);

struct FitResult {
  Model model;
  SamplerSettings settings;
  ChainConfig chain_config;
  EvalGrid region;
  ChainResult chain;
  ChainState final_state;
};

/// Builds the model for the training rows and runs the chain. probe_counts
/// (when nonempty) places a lambda probe grid over the region.
FitResult fit_model(const RunConfig& c, const Dataset& train, std::span<const Point> test);

struct EvaluationResult {
  DensitySurface surface;
  std::optional<HeldoutScore> heldout;
  std::optional<LoglikPair> parametric;
};

EvaluationResult evaluate_fit(const RunConfig& c, const FitResult& fit, std::span<const Point> train,
                              std::span<const Point> test, bool with_surface);

// Artifacts.
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);
nlohmann::json samples_to_json(std::span<const PosteriorSample> samples);
std::vector<PosteriorSample> samples_from_json(const nlohmann::json& j);
void write_surface_csv(const std::filesystem::path& path, const DensitySurface& surface,
                       const std::vector<std::string>& names);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);
nlohmann::json ess_report_json(const EssReport& r);

/// ESS over probe series, leaving out constant (degenerate) ones. midpoint
/// indexes the full probe list; excluded holds the indices that were dropped.
struct ProbeEss {
  EssReport report;
  std::vector<std::size_t> kept;
  std::vector<std::size_t> excluded;
};
ProbeEss probe_ess(const std::vector<Eigen::VectorXd>& probe_rows, std::size_t midpoint);

// Subcommands. Each writes into c.output_dir and returns normally on success.
void command_simulate(const RunConfig& c);
void command_fit(const RunConfig& c);
void command_evaluate(const RunConfig& c);
void command_diagnose(const RunConfig& c);
void command_split(const RunConfig& c);

struct RecipeOptions {
  std::string name;
  std::string data;
  std::filesystem::path out = "out";
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> burn_in;
  std::optional<std::size_t> splits;
  std::uint64_t seed = 1;
  /// Per-run trace and sample files under out/<run>/.
  bool write_runs = true;
};

struct RecipeRow {
  std::string model;
  std::size_t n = 0;
  std::size_t split = 0;
  double joint = 0.0;
  double marginal = 0.0;
};

struct RecipeSummaryRow {
  std::string model;
  std::size_t n = 0;
  std::string metric;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

struct RecipeResult {
  std::vector<RecipeRow> rows;
  std::vector<RecipeSummaryRow> summary;
  nlohmann::json extra;

  [[nodiscard]] double median(const std::string& model, std::size_t n, const std::string& metric) const;
};

/// Names: synthetic1, synthetic2, pm25, earthquake.
RecipeResult run_recipe(const RecipeOptions& o);

/// Linear-interpolation quantile of unsorted values.
double quantile(std::vector<double> v, double q);

/// Truth of the first synthetic example: 0.5 N((13,-20), S) + 0.5 N((13,20), S)
/// with S = [[1, 3 sqrt(5)/5], [3 sqrt(5)/5, 20]].
Dataset synthetic1_draw(std::size_t n, RandomStream& rng);
LoglikPair synthetic1_truth_loglik(std::span<const Point> test);

/// Truth of the second synthetic example: N((13,-5), [[20,6],[6,20]]).
Dataset synthetic2_draw(std::size_t n, RandomStream& rng);
LoglikPair synthetic2_truth_loglik(std::span<const Point> test);

}  // namespace mcgp
