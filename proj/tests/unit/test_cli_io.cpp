#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "mcgp/config.hpp"
#include "mcgp/errors.hpp"
#include "mcgp/io.hpp"
#include "mcgp/run.hpp"

using namespace mcgp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ScratchRoot {
  fs::path path;
  ScratchRoot() : path(fs::temp_directory_path() / ("mcgp_cli_io_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~ScratchRoot() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

fs::path scratch(const std::string& name) {
  static const ScratchRoot root;
  const fs::path p = root.path / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const MarginalConstraint kGaussian{Family::Gaussian, DiracPrior{Eigen::Vector2d(0.0, 1.0)}, 1};

Dataset numbered(std::size_t n) {
  Dataset d;
  d.a_names = {"x1"};
  d.ac_names = {"x2"};
  for (std::size_t i = 0; i < n; ++i) {
    d.rows.push_back({Eigen::VectorXd::Constant(1, static_cast<double>(i)), Eigen::VectorXd::Constant(1, -1.0 * i)});
  }
  return d;
}

// Small dataset and config for end-to-end runs.
fs::path small_run_config(const fs::path& dir, std::uint64_t seed, const std::string& out) {
  RandomStream rng(99);
  std::ostringstream csv;
  csv << "x1,x2\n";
  for (int i = 0; i < 15; ++i) csv << format_double(rng.normal(13.0, 1.0)) << ',' << format_double(rng.normal(0.0, 3.0)) << '\n';
  write_text(dir / "data.csv", csv.str());
  const json j{{"version", 1},
               {"dataset", (dir / "data.csv").string()},
               {"phi_prior", "dirac"},
               {"phi_prior_params", {13.0, 1.0}},
               {"iterations", 30},
               {"burn_in", 10},
               {"probe_counts", {16, 16}},
               {"seed", seed},
               {"output_dir", (dir / out).string()}};
  write_text(dir / (out + ".json"), j.dump());
  return dir / (out + ".json");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MCGP_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("doubles survive a text round trip bit-exactly") {
  RandomStream rng(1);
  std::vector<double> xs = {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-310, -2.5e300, std::numeric_limits<double>::max(),
                            std::numeric_limits<double>::min(), std::numeric_limits<double>::denorm_min()};
  for (int i = 0; i < 2000; ++i) xs.push_back(rng.normal() * std::pow(10.0, rng.uniform(-30.0, 30.0)));
  for (double x : xs) {
    const std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }

  const fs::path dir = scratch("roundtrip");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) rows.push_back({xs[i], xs[i + 1]});
  write_csv(dir / "t.csv", {"a", "b"}, rows);
  const CsvTable t = read_csv(dir / "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(std::memcmp(t.rows[i].data(), rows[i].data(), 2 * sizeof(double)) == 0);
  }

  const Dataset d = numbered(7);
  write_dataset(dir / "d.csv", d);
  const Dataset back = ingest_csv(dir / "d.csv", {"x1"}, {"x2"}, kGaussian);
  REQUIRE(back.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(back.rows[i].xa[0] == d.rows[i].xa[0]);
    CHECK(back.rows[i].xac[0] == d.rows[i].xac[0]);
  }
}

TEST_CASE("a non-numeric cell is reported with its line and column") {
  const fs::path dir = scratch("bad_cell");
  write_text(dir / "d.csv", "x1,x2\n1.0,2.0\n3.0,abc\n");
  try {
    (void)read_csv(dir / "d.csv");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("x2") != std::string::npos);
  }
  write_text(dir / "short.csv", "x1,x2\n1.0\n");
  CHECK_THROWS_AS(read_csv(dir / "short.csv"), DataError);
  write_text(dir / "empty.csv", "");
  CHECK_THROWS_AS(read_csv(dir / "empty.csv"), DataError);
  CHECK_THROWS_AS(read_csv(dir / "missing.csv"), DataError);
  write_text(dir / "ok.csv", "x1,x2\n1.0,2.0\n");
  CHECK_THROWS_AS(ingest_csv(dir / "ok.csv", {"x1"}, {"x3"}, kGaussian), DataError);
}

TEST_CASE("values outside the constraint support are rejected at ingestion") {
  const fs::path dir = scratch("support");
  write_text(dir / "eq.csv", "recurrence_time,magnitude\n1.5,5.1\n0,4.8\n2.0,6.0\n");
  const MarginalConstraint expo{Family::Exponential, GammaPrior{0.1, 0.1}, 1};
  try {
    (void)ingest_csv(dir / "eq.csv", {"recurrence_time"}, {"magnitude"}, expo);
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("support") != std::string::npos);
  }
  write_text(dir / "pm.csv", "pm25,temperature\n-3,10\n");
  const MarginalConstraint logn{Family::Lognormal, DiracPrior{Eigen::Vector2d(0.0, 1.0)}, 1};
  CHECK_THROWS_AS(ingest_csv(dir / "pm.csv", {"pm25"}, {"temperature"}, logn), DataError);
}

TEST_CASE("train/test split: sizes, determinism and partition") {
  const Dataset d = numbered(356);
  const auto [train, test] = split_dataset(d, 296, 60, 7);
  CHECK(train.size() == 296);
  CHECK(test.size() == 60);
  CHECK(train.a_names == d.a_names);
  const auto [train2, test2] = split_dataset(d, 296, 60, 7);
  std::set<double> seen;
  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(train.rows[i].xa[0] == train2.rows[i].xa[0]);
    seen.insert(train.rows[i].xa[0]);
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(test.rows[i].xa[0] == test2.rows[i].xa[0]);
    seen.insert(test.rows[i].xa[0]);
  }
  CHECK(seen.size() == 356);
  const auto [train3, test3] = split_dataset(d, 296, 60, 8);
  bool differs = false;
  for (std::size_t i = 0; i < test.size(); ++i) differs = differs || test.rows[i].xa[0] != test3.rows[i].xa[0];
  CHECK(differs);

  const auto [sub_train, sub_test] = split_dataset(d, 10, 5, 9);
  CHECK(sub_train.size() + sub_test.size() == 15);
  CHECK_THROWS_AS(split_dataset(d, 300, 60, 7), ConfigError);
}

TEST_CASE("config: unknown keys and a missing version are errors") {
  CHECK_THROWS_AS(config_from_json(json{{"version", 1}, {"iteratons", 10}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"iterations", 10}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"version", 2}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"version", 1}, {"iterations", "many"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"version", 1}, {"iterations", 10}, {"burn_in", 10}}), ConfigError);
  CHECK_NOTHROW(config_from_json(json{{"version", 1}}));

  const fs::path dir = scratch("config");
  write_text(dir / "c.json", R"({"version": 1, "phi_prior": "nix", "phi_prior_params": [0, 1]})");
  CHECK_THROWS_AS(load_config(dir / "c.json"), ConfigError);
  write_text(dir / "typo.json", R"({"version": 1, "seeed": 3})");
  try {
    (void)load_config(dir / "typo.json");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("typo.json") != std::string::npos);
    CHECK(msg.find("seeed") != std::string::npos);
  }
}

TEST_CASE("config echo reproduces the configuration") {
  RunConfig c;
  c.dataset = "data.csv";
  c.constraint_family = "lognormal";
  c.phi_prior = "nix";
  c.phi_prior_params = {-10.0, 0.01, 0.001, 5.0};
  c.centering = "standardized_moments";
  c.iterations = 1234;
  c.burn_in = 100;
  c.seed = 0xDEADBEEFCAFEULL;
  c.grid_counts = {30, 31};
  c.lengthscale_prior = {0.1, 0.7};
  const json j = config_to_json(c);
  const RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.seed == c.seed);
  CHECK(back.phi_prior_params == c.phi_prior_params);
  CHECK(j.at("version") == kConfigVersion);
}

TEST_CASE("recipes carry their published prior settings") {
  const fs::path dir = scratch("recipes");
  RecipeOptions o;
  o.name = "synthetic1";
  o.out = dir;
  o.iterations = 20;
  o.splits = 1;
  const RecipeResult r = run_recipe(o);
  const json c = json::parse(slurp(dir / "synthetic1" / "constrained_n20_split0" / "config.json"));
  CHECK(c.at("constraint_family") == "gaussian");
  CHECK(c.at("phi_prior") == "dirac");
  CHECK(c.at("phi_prior_params") == json({13.0, 1.0}));
  CHECK(c.at("theta_prior") == json({0.0, 0.001, 0.001, 0.001}));
  CHECK(c.at("mode") == "constrained");
  const json u = json::parse(slurp(dir / "synthetic1" / "unconstrained_n100_split0" / "config.json"));
  CHECK(u.at("mode") == "unconstrained");
  // Under a fixed constraint the marginal score is the truth's.
  CHECK(r.median("constrained", 20, "marginal") == doctest::Approx(r.median("truth", 20, "marginal")).epsilon(1e-12));

  RandomStream rng(3);
  std::ostringstream csv;
  csv << "recurrence_time,magnitude\n";
  for (int i = 0; i < 25; ++i) csv << format_double(-std::log(rng.uniform()) * 30.0) << ',' << format_double(rng.normal(5.5, 0.5)) << '\n';
  write_text(dir / "eq.csv", csv.str());
  RecipeOptions e;
  e.name = "earthquake";
  e.data = (dir / "eq.csv").string();
  e.out = dir;
  e.iterations = 60;
  const RecipeResult er = run_recipe(e);
  const json ec = json::parse(slurp(dir / "earthquake" / "config.json"));
  CHECK(ec.at("constraint_family") == "exponential");
  CHECK(ec.at("phi_prior") == "gamma");
  CHECK(ec.at("phi_prior_params") == json({0.1, 0.1}));
  CHECK(ec.at("constrained_columns") == json({"recurrence_time"}));
  CHECK(er.extra.contains("min"));
  CHECK(er.extra.contains("midpoint"));

  RecipeOptions missing;
  missing.name = "pm25";
  CHECK_THROWS_AS(run_recipe(missing), ConfigError);
  missing.name = "nope";
  CHECK_THROWS_AS(run_recipe(missing), ConfigError);
}

TEST_CASE("synthetic truth matches its mixture definition") {
  RandomStream rng(4);
  const Dataset d = synthetic1_draw(20000, rng);
  std::vector<double> x1;
  for (const Point& p : d.rows) x1.push_back(p.xa[0]);
  double mean = 0.0;
  for (double v : x1) mean += v / 20000.0;
  CHECK(std::abs(mean - 13.0) < 3.0 / std::sqrt(20000.0));

  const std::vector<Point> one{{Eigen::VectorXd::Constant(1, 13.0), Eigen::VectorXd::Constant(1, 20.0)}};
  const LoglikPair t = synthetic1_truth_loglik(one);
  const double c = 3.0 * std::sqrt(5.0) / 5.0;
  const double det = 20.0 - c * c;
  // At the second component's mean the first contributes exp(-quad / 2) with
  // quad = 40^2 / det (x1 offset 0).
  const double quad = 1600.0 * 1.0 / det;
  const double expect = std::log(0.5 / (2.0 * std::numbers::pi * std::sqrt(det)) * (1.0 + std::exp(-0.5 * quad)));
  CHECK(t.joint == doctest::Approx(expect).epsilon(1e-12));
  CHECK(t.marginal == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("same seed gives a byte-identical trace") {
  const fs::path dir = scratch("determinism");
  const RunConfig a = load_config(small_run_config(dir, 5, "a"));
  const RunConfig b = load_config(small_run_config(dir, 5, "b"));
  const RunConfig c = load_config(small_run_config(dir, 6, "c"));
  command_fit(a);
  command_fit(b);
  command_fit(c);
  const std::string ta = slurp(dir / "a" / "trace.csv");
  CHECK(!ta.empty());
  CHECK(ta == slurp(dir / "b" / "trace.csv"));
  CHECK(slurp(dir / "a" / "samples.json") == slurp(dir / "b" / "samples.json"));
  CHECK(ta != slurp(dir / "c" / "trace.csv"));

  const json meta = json::parse(slurp(dir / "a" / "metadata.json"));
  const RunConfig echoed = config_from_json(meta.at("config"));
  CHECK(config_to_json(echoed) == config_to_json(a));
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("exit_codes");
  const fs::path good = small_run_config(dir, 5, "run");
  CHECK(run_cli("fit -c " + good.string() + " --iterations 20") == 0);
  CHECK(fs::exists(dir / "run" / "trace.csv"));

  write_text(dir / "unknown.json", R"({"version": 1, "bogus": 1})");
  CHECK(run_cli("fit -c " + (dir / "unknown.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("fit") == 2);

  write_text(dir / "bad.csv", "x1,x2\n1,2\n3,oops\n");
  const json bad{{"version", 1}, {"dataset", (dir / "bad.csv").string()}, {"output_dir", (dir / "bad").string()}};
  write_text(dir / "bad.json", bad.dump());
  CHECK(run_cli("fit -c " + (dir / "bad.json").string()) == 3);

  // sigma(lambda) around exp(-60) exhausts the rejection rounds.
  const json hopeless{{"version", 1},     {"phi_prior", "dirac"},         {"phi_prior_params", {0.0, 1.0}},
                      {"gp_mean", -60.0}, {"theta_init", {0.0, 0.0, 1.0}}, {"round_cap", 5},
                      {"n_simulate", 3},  {"output_dir", (dir / "sim").string()}};
  write_text(dir / "hopeless.json", hopeless.dump());
  CHECK(run_cli("simulate -c " + (dir / "hopeless.json").string()) == 4);
}
