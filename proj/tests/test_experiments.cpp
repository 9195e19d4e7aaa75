#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "symvi/experiments.hpp"

using namespace symvi;
namespace fs = std::filesystem;

namespace {

ExperimentConfig smoke_optimizer(ExperimentConfig cfg) {
  cfg.optimizer.n_draws_per_step = 50;
  cfg.optimizer.max_steps = 300;
  cfg.optimizer.convergence_window = 50;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Everything except the wall clock must reproduce bit for bit.
void require_rerun_identical(const ExperimentConfig& cfg) {
  auto a = run(cfg);
  auto b = run(cfg);
  a.summary.erase("wall_clock_seconds");
  b.summary.erase("wall_clock_seconds");
  REQUIRE(a.summary.dump() == b.summary.dump());
  REQUIRE(a.curve_csv == b.curve_csv);
  REQUIRE(a.errors_csv == b.errors_csv);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    REQUIRE(a.trace[i].dump() == b.trace[i].dump());
  }
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("experiment catalog lists eight distinct experiments") {
  const auto& cat = experiment_catalog();
  REQUIRE(cat.size() == 8);
  for (std::size_t i = 0; i < cat.size(); ++i) {
    for (std::size_t j = i + 1; j < cat.size(); ++j) {
      REQUIRE(cat[i].first != cat[j].first);
    }
  }
  REQUIRE(table1_row_names().size() == 6);
}

TEST_CASE("named target registry covers the standard set and rejects unknowns") {
  for (const auto& name : standard_target_names()) {
    const auto t = make_named_target(name);
    REQUIRE(t.dim >= 1);
    REQUIRE(std::isfinite(t.log_density(Vector::Zero(t.dim))));
  }
  REQUIRE(standard_target_set().size() == standard_target_names().size());
  REQUIRE_THROWS_AS(make_named_target("no_such_target"), InvalidConfig);
}

TEST_CASE("config defaults parse and echo round-trips") {
  const auto cfg = config_from_json(nlohmann::json{{"experiment", "tail_robust"}});
  REQUIRE(cfg.seed == 1);
  REQUIRE(cfg.mode == ScaleMode::full_rank);
  REQUIRE(cfg.grid.step == 0.01);
  REQUIRE(cfg.optimizer.n_draws_per_step == 1000);

  const auto echo = config_to_json(cfg);
  const auto reparsed = config_from_json(nlohmann::json::parse(echo.dump()));
  REQUIRE(reparsed.experiment == cfg.experiment);
  REQUIRE(reparsed.seed == cfg.seed);
  REQUIRE(reparsed.grid.lo == cfg.grid.lo);
  REQUIRE(reparsed.alphas == cfg.alphas);
  REQUIRE(reparsed.probe.target == cfg.probe.target);
  REQUIRE(config_to_json(reparsed).dump() == echo.dump());
}

TEST_CASE("config validation rejects malformed requests") {
  const auto parse = [](nlohmann::json j) { return config_from_json(std::move(j)); };
  REQUIRE_THROWS_AS(parse({{"experiment", "unknown_kind"}}), InvalidConfig);
  REQUIRE_THROWS_AS(parse(nlohmann::json::object()), InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "tail_robust"}, {"typo_key", 1}}), InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "table1_row"}}), InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "table1_row"}, {"row", "bogus"}}), InvalidConfig);
  REQUIRE_THROWS_AS(
      parse({{"experiment", "tail_robust"}, {"grid", {{"lo", 1.0}, {"hi", -1.0}}}}),
      InvalidConfig);
  REQUIRE_THROWS_AS(
      parse({{"experiment", "tail_robust"}, {"grid", {{"step", 0.0}}}}), InvalidConfig);
  REQUIRE_THROWS_AS(
      parse({{"experiment", "multi_student_gamma"}, {"dfs", {2.0}}}), InvalidConfig);
  REQUIRE_THROWS_AS(
      parse({{"experiment", "skew"}, {"alphas", nlohmann::json::array()}}), InvalidConfig);
  REQUIRE_THROWS_AS(
      parse({{"experiment", "convexity_probe"}, {"probe", {{"n_points", 2}}}}), InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "tail_robust"},
                           {"optimizer", {{"step_size", -1.0}}}}),
                    InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "tail_robust"},
                           {"family", {{"base", "student_t"}, {"df", 2.0}}}}),
                    InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "tail_robust"}, {"family", {{"base", "beta"}}}}),
                    InvalidConfig);
  REQUIRE_THROWS_AS(parse({{"experiment", "tail_robust"}, {"seed", "not a number"}}),
                    InvalidConfig);
}

TEST_CASE("location sweeps find the symmetric center for heavy tailed targets") {
  ExperimentConfig cfg;
  cfg.experiment = "tail_robust";
  cfg.grid = {-0.5, 0.5, 0.05};
  const auto res = run(cfg);

  REQUIRE(res.summary.at("experiment") == "tail_robust");
  REQUIRE(res.summary.at("rows").size() == 3);
  for (const auto& row : res.summary.at("rows")) {
    REQUIRE(std::abs(row.at("best_nu").get<double>()) <= 0.05 + 1e-12);
    REQUIRE(row.at("n_points").get<int>() == 21);
  }
  REQUIRE(count_lines(res.curve_csv) == 1 + 3 * 21);
  REQUIRE(res.curve_csv.rfind("target,nu,kl\n", 0) == 0);
  REQUIRE(res.errors_csv.empty());
  REQUIRE(res.trace.empty());

  require_rerun_identical(cfg);
}

TEST_CASE("mixture location curves switch from convex to bistable") {
  ExperimentConfig cfg;
  cfg.experiment = "mixture_1d";
  const auto res = run(cfg);
  const auto& rows = res.summary.at("rows");
  REQUIRE(rows.size() == 2);

  const auto& narrow = rows[0];
  REQUIRE(narrow.at("m").get<double>() == 1.0);
  REQUIRE(narrow.at("interior_minima").size() == 1);
  REQUIRE(std::abs(narrow.at("interior_minima")[0].get<double>()) <= 0.1 + 1e-12);
  REQUIRE(narrow.at("center_second_difference").get<double>() > 0.0);

  const auto& wide = rows[1];
  REQUIRE(wide.at("m").get<double>() == 10.0);
  REQUIRE(wide.at("center_second_difference").get<double>() < 0.0);
  bool near_pos = false, near_neg = false;
  for (const auto& v : wide.at("interior_minima")) {
    if (std::abs(v.get<double>() - 10.0) <= 0.3) near_pos = true;
    if (std::abs(v.get<double>() + 10.0) <= 0.3) near_neg = true;
  }
  REQUIRE(near_pos);
  REQUIRE(near_neg);
  REQUIRE(res.curve_csv.rfind("m,nu,kl\n", 0) == 0);
}

TEST_CASE("skew sweep runs per alpha and reports location gaps") {
  ExperimentConfig cfg = smoke_optimizer({});
  cfg.experiment = "skew";
  cfg.alphas = {0.0, 3.0};
  cfg.seed = 7;
  const auto res = run(cfg);

  const auto& rows = res.summary.at("rows");
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].at("target_mean").get<double>() == 0.0);
  REQUIRE(rows[1].at("target_mean").get<double>() ==
          Catch::Approx(0.9486832980505138 * std::sqrt(2.0 / kPi)).epsilon(1e-12));
  // A symmetric target pins the swept location to its center; the skewed one
  // drifts to 1.3848 (cross-checked against an independent quadrature), giving
  // a gap of 0.6279 up to grid quantization.
  REQUIRE(std::abs(rows[0].at("nu_hat").get<double>()) < 1e-12);
  REQUIRE(rows[1].at("gap").get<double>() == Catch::Approx(0.62788118).margin(0.011));
  for (const auto& row : rows) REQUIRE_FALSE(row.at("argmin_at_edge").get<bool>());
  // The sweep is quadrature, not stochastic optimization: no trace to report.
  REQUIRE(res.trace.empty());
  REQUIRE(res.curve_csv.rfind("alpha,nu,kl\n", 0) == 0);
  REQUIRE(count_lines(res.curve_csv) == 1 + 2 * 401);
}

TEST_CASE("benchmark row with analytic reference produces a full error table") {
  ExperimentConfig cfg = smoke_optimizer({});
  cfg.experiment = "table1_row";
  cfg.row = "student";
  cfg.seed = 3;
  const auto res = run(cfg);

  // Exact draws reflected about the exact mean: the statistic vanishes no
  // matter how rough the fit is.
  REQUIRE(res.summary.at("epsilon_90").get<double>() < 1e-6);
  REQUIRE(res.summary.at("baseline").at("kind") == "analytic");
  REQUIRE(res.summary.at("dim").get<int>() == 2);
  REQUIRE(res.summary.at("mean_delta_mean").get<double>() >= 0.0);
  REQUIRE(res.summary.at("approximation").at("mode") == "full_rank");
  REQUIRE(res.errors_csv.rfind("coord,delta_mean,pair_i,pair_j,delta_corr,delta_cov,epsilon_90",
                               0) == 0);
  REQUIRE_FALSE(res.trace.empty());

  require_rerun_identical(cfg);
}

TEST_CASE("scale recovery smoke run emits the fitted versus reference grid") {
  ExperimentConfig cfg;
  cfg.experiment = "scale_recovery";
  cfg.dfs = {10.0};
  cfg.optimizer.n_draws_per_step = 40;
  cfg.optimizer.max_steps = 120;
  cfg.optimizer.convergence_window = 40;
  cfg.seed = 5;
  const auto res = run(cfg);

  REQUIRE(res.summary.at("df").get<double>() == 10.0);
  REQUIRE(res.summary.at("gamma_fit").get<double>() > 0.0);
  REQUIRE(res.summary.at("gamma_oracle").get<double>() > 1.0);
  REQUIRE(count_lines(res.curve_csv) == 1 + 55);
  REQUIRE(res.curve_csv.rfind("i,j,fitted_s,gamma2_m\n", 0) == 0);
}

TEST_CASE("logistic symmetry smoke run compares fits against baseline chains") {
  ExperimentConfig cfg = smoke_optimizer({});
  cfg.experiment = "logistic_symmetry";
  cfg.chain.n_warmup = 500;
  cfg.chain.n_samples = 4000;
  cfg.seed = 11;
  const auto res = run(cfg);

  const auto& rows = res.summary.at("rows");
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].at("n").get<int>() == 0);
  REQUIRE(rows[2].at("n").get<int>() == 128);
  for (const auto& row : rows) {
    REQUIRE(row.at("coords").size() == 3);
    REQUIRE(std::isfinite(row.at("worst_scaled_gap").get<double>()));
    REQUIRE(row.at("baseline_min_ess").get<double>() > 10.0);
  }
  REQUIRE(count_lines(res.curve_csv) == 1 + 9);
}

TEST_CASE("convexity probe runs from a parsed config") {
  const auto cfg = config_from_json(nlohmann::json{
      {"experiment", "convexity_probe"},
      {"probe",
       {{"target", "mixture1d_m1"}, {"a", {-2.0}}, {"b", {2.0}}, {"n_points", 7}}}});
  const auto res = run(cfg);
  REQUIRE(res.summary.at("convex").get<bool>());
  REQUIRE(res.summary.at("min_second_difference").get<double>() > 0.0);
  REQUIRE(count_lines(res.curve_csv) == 1 + 7);

  ExperimentConfig bad = cfg;
  bad.probe.a = {-2.0, 0.0};
  bad.probe.b = {2.0, 0.0};
  REQUIRE_THROWS_AS(run(bad), InvalidConfig);
}

TEST_CASE("emit writes the requested formats with stable bytes") {
  ExperimentConfig cfg;
  cfg.experiment = "tail_robust";
  cfg.grid = {-0.2, 0.2, 0.1};
  const auto res = run(cfg);

  const fs::path dir = fs::temp_directory_path() / "symvi_emit_test";
  fs::remove_all(dir);

  emit(res, (dir / "all").string(), "all");
  REQUIRE(fs::exists(dir / "all" / "result.json"));
  REQUIRE(fs::exists(dir / "all" / "curve.csv"));
  REQUIRE_FALSE(fs::exists(dir / "all" / "errors.csv"));
  REQUIRE_FALSE(fs::exists(dir / "all" / "trace.jsonl"));

  emit(res, (dir / "json").string(), "json");
  REQUIRE(fs::exists(dir / "json" / "result.json"));
  REQUIRE_FALSE(fs::exists(dir / "json" / "curve.csv"));

  emit(res, (dir / "csv").string(), "csv");
  REQUIRE(fs::exists(dir / "csv" / "curve.csv"));
  REQUIRE_FALSE(fs::exists(dir / "csv" / "result.json"));

  REQUIRE(slurp(dir / "all" / "curve.csv") == res.curve_csv);
  const auto parsed = nlohmann::json::parse(slurp(dir / "all" / "result.json"));
  REQUIRE(parsed.at("experiment") == "tail_robust");
  REQUIRE(parsed.at("config").at("grid").at("step").get<double>() == 0.1);
  REQUIRE(parsed.contains("wall_clock_seconds"));

  REQUIRE_THROWS_AS(emit(res, (dir / "bad").string(), "yaml"), InvalidConfig);
  fs::remove_all(dir);
}

TEST_CASE("run rejects configs that fail validation") {
  ExperimentConfig cfg;
  cfg.experiment = "not_an_experiment";
  REQUIRE_THROWS_AS(run(cfg), InvalidConfig);
}
