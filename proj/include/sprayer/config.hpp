#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sprayer/montecarlo.hpp"

namespace sprayer {

enum class InitialState { static_equilibrium, loaded_equilibrium };

enum class ProbabilityEstimator { count, kde };

struct AnalysisConfig
{
  double large_vibration_fraction = 0.3;  ///< threshold as a fraction of B1
  ProbabilityEstimator probability_estimator = ProbabilityEstimator::count;
  double confidence = 0.95;
  std::vector<double> pdf_instants{7.5, 15.0, 22.5, 30.0};
  std::vector<std::size_t> conv_checkpoints{32, 64, 128, 192, 256};
  double psd_horizon = 600.0;     ///< s
  double psd_segment = 100.0;     ///< s
  double slope_band_lo = 0.3;     ///< Hz
  double slope_band_hi = 4.0;     ///< Hz
  /// Modes for the long PSD road. Unset: the road's n_kl scaled with the
  /// horizon so the resolved bandwidth matches the short runs.
  std::optional<std::size_t> psd_n_kl;
  std::size_t psd_realization = 0;
};

struct SimulateConfig
{
  std::size_t realization_index = 0;
  InitialState initial_state = InitialState::static_equilibrium;
  std::size_t frame_stride = 10;  ///< grid points between animation frames
};

/// Everything a CLI run needs. Thread count is deliberately absent: it never
/// changes results, so it stays out of the config echo and its hash.
struct RunConfig
{
  PhysicalParams physical;
  RoadParams road;
  IntegratorConfig integ;
  std::size_t n_s = 256;
  std::uint64_t master_seed = 1;
  bool keep_trajectories = false;
  FailurePolicy failure_policy = FailurePolicy::abort;
  RoadSampling road_sampling = RoadSampling::tabulated;
  std::optional<double> table_step;
  SimulateConfig simulate;
  AnalysisConfig analysis;
  std::filesystem::path output_dir = "out";

  void validate() const;
  EnsembleConfig ensemble(unsigned threads = 0) const;
};

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates a JSON document. Missing keys take their defaults,
/// unknown keys are rejected, syntax errors report line and column.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration with every default materialized.
nlohmann::ordered_json to_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical echo, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace sprayer
