#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sprayer/analysis.hpp"
#include "sprayer/config.hpp"

namespace sprayer {

/// Residual above which cmd_equilibrium reports failure.
inline constexpr double kEquilibriumTolerance = 1e-8;

struct EquilibriumReport
{
  State state;
  double residual = 0.0;  ///< Euclidean norm of rhs at the state, level tires
  bool ok() const { return residual <= kEquilibriumTolerance; }
};

EquilibriumReport cmd_equilibrium(const RunConfig& cfg, std::ostream& out);

/// Values swept by cmd_simulate; empty lists leave the config value alone.
/// With both lists set every combination is run.
struct SweepSpec
{
  std::vector<double> a_corr;
  std::vector<double> v_kmh;
};

struct SimulateReport
{
  std::filesystem::path directory;
  double a_corr = 0.0;
  double v_kmh = 0.0;
  std::size_t rows = 0;
  IntegrationStats stats;
};

/// Single realization (cfg.simulate.realization_index, cfg.master_seed).
/// Writes trajectory.csv, excitation.csv, phase_space.csv and frames.ndjson
/// into cfg.output_dir, or one subdirectory per sweep point.
std::vector<SimulateReport> cmd_simulate(const RunConfig& cfg,
                                         const SweepSpec& sweep,
                                         std::ostream& log);

struct EnsembleReport
{
  std::size_t realizations = 0;
  std::size_t failures = 0;
  ProbabilitySeries probability;
  std::vector<ConvPoint> conv;
  double envelope_coverage = 0.0;
};

/// Full ensemble experiment; every output file depends only on cfg.
EnsembleReport cmd_ensemble(const RunConfig& cfg, unsigned threads,
                            std::ostream& log);

struct PsdReport
{
  PsdEstimate psd;
  SlopeFit fit;
  std::size_t modes = 0;
  double horizon = 0.0;
};

/// Long single realization, Bartlett PSD of x2 and log-log slope.
PsdReport cmd_psd(const RunConfig& cfg, std::ostream& log);

/// Road/integrator settings used by the long PSD run.
RunConfig psd_run_config(const RunConfig& cfg);

}  // namespace sprayer
