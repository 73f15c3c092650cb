// margint: simulate paths, estimate additive components, run Monte Carlo studies.
#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "margint/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Marginal-integration estimation of additive components for continuous-time processes"};
  app.set_version_flag("--version", std::string(margint::kVersion));
  app.require_subcommand(1);

  margint::RunOptions opt;
  std::string config;
  std::string out_dir;
  std::vector<std::string> sets;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "Config file (key = value lines); default scenario if omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_dir, "Output directory (overrides output.dir)");
    sub->add_option("--set", sets, "Override a config key, e.g. --set study.rate.replicas=50")
        ->take_all();
    sub->add_flag("--dry-run", opt.dry_run, "Validate and print the resolved bandwidths, compute nothing");
  };

  double horizon = 0.0;
  std::string path_file;

  auto* simulate = app.add_subcommand("simulate", "Simulate one sample path");
  common(simulate);
  simulate->add_option("-T,--horizon", horizon, "Horizon T (default sim.horizon)")->check(CLI::PositiveNumber);
  simulate->add_flag("--binary", opt.binary, "Write path.bin instead of path.csv");

  auto* estimate = app.add_subcommand("estimate", "Evaluate f_hat and m~ on a grid over C");
  common(estimate);
  estimate->add_option("-p,--path", path_file, "Path file (.csv or .bin); simulate from the config if omitted")
      ->check(CLI::ExistingFile);
  estimate->add_option("-T,--horizon", horizon, "Horizon of the simulated path")->check(CLI::PositiveNumber);

  auto* components = app.add_subcommand("components", "Estimate every additive component on a grid");
  common(components);
  components->add_option("-p,--path", path_file, "Path file (.csv or .bin); simulate from the config if omitted")
      ->check(CLI::ExistingFile);
  components->add_option("-T,--horizon", horizon, "Horizon of the simulated path")->check(CLI::PositiveNumber);

  auto* study = app.add_subcommand("study", "Monte Carlo studies");
  study->require_subcommand(1);
  std::vector<std::string> kinds{"rate", "normality", "coverage", "density-rate", "density-mode"};
  for (const auto& k : kinds) common(study->add_subcommand(k, "Run the " + k + " study"));

  auto* selftest = app.add_subcommand("selftest", "Run the manufactured-data checks of every study");
  common(selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : margint::kExitConfig;
  }

  if (!config.empty()) opt.config_file = config;
  if (!out_dir.empty()) opt.output_dir = out_dir;
  if (horizon > 0.0) opt.horizon = horizon;
  if (!path_file.empty()) opt.path_file = path_file;
  opt.overrides = sets;

  std::vector<std::string> cmd;
  for (auto* sub = app.get_subcommands().front(); sub != nullptr;) {
    cmd.push_back(sub->get_name());
    const auto next = sub->get_subcommands();
    sub = next.empty() ? nullptr : next.front();
  }
  return margint::run(cmd, opt, std::cout);
}
