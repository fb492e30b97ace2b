#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mvfbm/config.hpp"
#include "mvfbm/error.hpp"

int main(int argc, char** argv) {
  using namespace mvfbm;
  CLI::App app{"Tamed theta Euler-Maruyama for neutral McKean-Vlasov delay equations with fBm"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  for (auto name : {"sample-fbm", "simulate", "convergence", "chaos", "validate"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key=value configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the file)");
    sub->add_option("--seed", seed, "seed (overrides the file)");
  }
  CLI11_PARSE(app, argc, argv);

  const auto* chosen = app.get_subcommands().front();
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "I/O error: cannot read " << config_path << "\n";
    return cli::exit_code::io;
  }
  std::stringstream text;
  text << in.rdbuf();

  cli::RunConfig config;
  try {
    config = cli::parse_config(text.str());
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return cli::exit_code::config;
  }
  config.subcommand = *cli::parse_subcommand(chosen->get_name());
  if (chosen->count("--out") > 0) config.out = out_dir;
  if (chosen->count("--seed") > 0) config.experiment.scheme.seed = seed;
  return cli::run(config, std::cerr);
}
