#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "symvi/experiments.hpp"

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitNumericalFailure = 3;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out, const std::string& format) {
  symvi::ExperimentConfig cfg;
  try {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "error: cannot read config " << config_path << "\n";
      return kExitInvalidConfig;
    }
    nlohmann::json j;
    is >> j;
    cfg = symvi::config_from_json(j);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out_dir = *out;
    if (format != "json" && format != "csv" && format != "all") {
      throw symvi::InvalidConfig("format must be json, csv, or all");
    }
  } catch (const symvi::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad config JSON: " << e.what() << "\n";
    return kExitInvalidConfig;
  }

  try {
    const auto result = symvi::run(cfg);
    symvi::emit(result, cfg.out_dir, format);
    std::cout << "ok: " << cfg.experiment
              << (cfg.row.empty() ? "" : " [" + cfg.row + "]") << " -> " << cfg.out_dir << " ("
              << result.summary.at("wall_clock_seconds").get<double>() << "s)\n";
    return 0;
  } catch (const symvi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalFailure;
  }
}

int cmd_list() {
  for (const auto& [name, desc] : symvi::experiment_catalog()) {
    std::cout << name << "\n    " << desc << "\n";
  }
  std::cout << "table1_row rows:";
  for (const auto& r : symvi::table1_row_names()) std::cout << " " << r;
  std::cout << "\n";
  return 0;
}

int cmd_check() {
  bool all_pass = true;
  try {
    for (const auto& c : symvi::run_contract_suite()) {
      std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
      all_pass = all_pass && c.pass;
    }
  } catch (const symvi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalFailure;
  }
  std::cout << (all_pass ? "all checks passed" : "CHECK FAILURES PRESENT") << "\n";
  return all_pass ? 0 : kExitNumericalFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box variational inference over location-scale families"};
  app.require_subcommand(1);

  std::string config_path;
  std::string format = "all";
  std::uint64_t seed_value = 0;
  std::string out_value;

  auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
  run->add_option("config", config_path, "path to the experiment config")->required();
  auto* seed_opt = run->add_option("--seed", seed_value, "override the config seed");
  auto* out_opt = run->add_option("--out", out_value, "override the output directory");
  run->add_option("--format", format, "which outputs to write: json, csv, or all");

  app.add_subcommand("list-experiments", "list experiment names and descriptions");
  app.add_subcommand("check", "run the numerical invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalidConfig;
  }

  if (run->parsed()) {
    return cmd_run(config_path,
                   seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt,
                   out_opt->count() ? std::optional<std::string>(out_value) : std::nullopt,
                   format);
  }
  if (app.get_subcommand("list-experiments")->parsed()) return cmd_list();
  return cmd_check();
}
