// Command-line front end: equilibrium | simulate | ensemble | psd.
// Exit status: 0 ok, 1 equilibrium residual too large, 2 bad input or failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sprayer/cli.hpp"

namespace {

struct GlobalOptions
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 0;
};

sprayer::RunConfig resolve(const GlobalOptions& g)
{
  sprayer::RunConfig cfg =
      g.config.empty() ? sprayer::parse_config("{}") : sprayer::load_config(g.config);
  if (g.seed) {
    cfg.master_seed = *g.seed;
  }
  if (g.out) {
    cfg.output_dir = *g.out;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Stochastic dynamics of a trailed sprayer tower"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (overrides the config)");
  app.add_option("--threads", g.threads, "worker threads, 0 = all cores");

  auto* equilibrium = app.add_subcommand("equilibrium", "static equilibrium and rhs residual");

  auto* simulate = app.add_subcommand("simulate", "one realization to CSV/NDJSON");
  std::optional<std::size_t> index;
  sprayer::SweepSpec sweep;
  simulate->add_option("--index", index, "realization index");
  simulate->add_option("--a-corr", sweep.a_corr, "correlation lengths to sweep (m)")
      ->delimiter(',');
  simulate->add_option("--v-kmh", sweep.v_kmh, "speeds to sweep (km/h)")
      ->delimiter(',');

  auto* ensemble = app.add_subcommand("ensemble", "Monte Carlo ensemble and statistics");
  std::optional<std::size_t> n_s;
  ensemble->add_option("--n-s", n_s, "number of realizations");

  auto* psd = app.add_subcommand("psd", "long-run PSD of x2 and spectral slope");
  std::optional<double> horizon;
  psd->add_option("--horizon", horizon, "run length (s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;  // --help is not an error
  }

  try {
    sprayer::RunConfig cfg = resolve(g);
    if (*equilibrium) {
      return cmd_equilibrium(cfg, std::cout).ok() ? 0 : 1;
    }
    if (*simulate) {
      if (index) {
        cfg.simulate.realization_index = *index;
      }
      cmd_simulate(cfg, sweep, std::cerr);
      return 0;
    }
    if (*ensemble) {
      if (n_s) {
        cfg.n_s = *n_s;
        cfg.validate();
      }
      cmd_ensemble(cfg, g.threads, std::cerr);
      return 0;
    }
    if (*psd) {
      if (horizon) {
        cfg.analysis.psd_horizon = *horizon;
        cfg.validate();
      }
      const auto rep = cmd_psd(cfg, std::cerr);
      fmt::print("{:.6f}\n", rep.fit.slope);
      return 0;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
