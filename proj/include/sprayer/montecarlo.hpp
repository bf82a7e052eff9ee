#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprayer/integrator.hpp"
#include "sprayer/kl_road.hpp"
#include "sprayer/model.hpp"

namespace sprayer {

enum class Channel { x2, y1, phi1, phi2 };

inline constexpr std::array<Channel, 4> kAllChannels{
    Channel::x2, Channel::y1, Channel::phi1, Channel::phi2};

const char* channel_name(Channel c);
Channel parse_channel(const std::string& name);

enum class FailurePolicy { abort, record };

/// How integrator stages query the road: exact series evaluation, or the
/// Hermite-interpolated table (much cheaper for hundreds of modes).
enum class RoadSampling { exact, tabulated };

struct EnsembleConfig
{
  std::size_t n_s = 256;
  std::uint64_t master_seed = 1;
  PhysicalParams physical;
  RoadParams road;
  IntegratorConfig integ;
  bool keep_trajectories = false;  ///< store y1/phi1/phi2 series too (x2 always)
  FailurePolicy failure_policy = FailurePolicy::abort;
  RoadSampling road_sampling = RoadSampling::tabulated;
  std::optional<double> table_step;  ///< defaults to integ.dt_out
  unsigned threads = 0;              ///< 0: hardware concurrency

  void validate() const;
};

/// Welford accumulators per grid point, merged in realization order.
struct MomentSeries
{
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  void add(const std::vector<double>& x);
  std::vector<double> std_dev() const;  ///< unbiased; zeros when count < 2
};

struct RealizationRecord
{
  std::size_t index = 0;
  SeedInfo seed;
  bool failed = false;
  std::string failure;
  double failure_time = 0.0;
  double conv_integral = 0.0;  ///< integral of y1^2 + phi1^2 + phi2^2 over the grid
  IntegrationStats stats;
};

class EnsembleFailure : public std::runtime_error
{
public:
  EnsembleFailure(std::size_t index, const IntegrationFailure& cause);

  std::size_t index() const noexcept { return index_; }
  double time() const noexcept { return time_; }

private:
  std::size_t index_;
  double time_;
};

class Ensemble
{
public:
  std::vector<double> time;
  std::vector<RealizationRecord> records;  ///< one per realization, by index
  std::array<MomentSeries, 4> moments;     ///< successful realizations only
  std::vector<double> conv_curve;          ///< conv(n), n = 1..successes
  PhysicalParams physical;

  /// Successful realizations.
  std::size_t size() const noexcept { return x2_.size(); }
  bool has_channel(Channel c) const noexcept;
  /// One row per successful realization; throws for channels not retained.
  const std::vector<std::vector<double>>& series(Channel c) const;

  void append(const Trajectory& traj, bool keep_all);

private:
  std::vector<std::vector<double>> x2_, y1_, phi1_, phi2_;
  bool all_channels_ = false;
};

/// Serial-equivalent simulation of one realization: sample road, integrate
/// from static equilibrium, record. Pure function of (cfg, index, basis).
Trajectory simulate_realization(const EnsembleConfig& cfg,
                                std::shared_ptr<const KLBasis> basis,
                                std::size_t index, bool log_excitation = false);

/// Realizations are independent and their results are merged in index order,
/// so the output does not depend on the thread count.
Ensemble run_ensemble(const EnsembleConfig& cfg);

/// Integral of y1^2 + phi1^2 + phi2^2 by the trapezoid rule.
double conv_integrand_integral(const Trajectory& traj);

/// sqrt(mean of the first n per-realization integrals).
double conv_metric(const Ensemble& e, std::size_t n);

struct ConvPoint
{
  std::size_t n = 0;
  double conv = 0.0;
};

std::vector<ConvPoint> convergence_study(const Ensemble& e,
                                         std::span<const std::size_t> checkpoints);

std::vector<ConvPoint> convergence_study(const EnsembleConfig& cfg,
                                         std::span<const std::size_t> checkpoints);

}  // namespace sprayer
