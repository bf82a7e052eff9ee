#include "sprayer/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace sprayer {

const char* channel_name(Channel c)
{
  switch (c) {
    case Channel::x2: return "x2";
    case Channel::y1: return "y1";
    case Channel::phi1: return "phi1";
    case Channel::phi2: return "phi2";
  }
  return "?";
}

Channel parse_channel(const std::string& name)
{
  for (Channel c : kAllChannels) {
    if (name == channel_name(c)) {
      return c;
    }
  }
  throw std::invalid_argument("unknown channel '" + name + "'");
}

void EnsembleConfig::validate() const
{
  if (n_s < 1) {
    throw std::invalid_argument("ensemble needs n_s >= 1");
  }
  physical.validate();
  road.validate();
  integ.validate();
  if (integ.t0 < 0.0 || integ.tf > road.horizon * (1.0 + 1e-12)) {
    throw std::invalid_argument(fmt::format(
        "integration window [{}, {}] exceeds road horizon [0, {}]", integ.t0,
        integ.tf, road.horizon));
  }
  if (table_step && !(*table_step > 0.0)) {
    throw std::invalid_argument("table_step must be > 0");
  }
}

void MomentSeries::add(const std::vector<double>& x)
{
  if (count == 0) {
    mean.assign(x.size(), 0.0);
    m2.assign(x.size(), 0.0);
  }
  ++count;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    mean[i] += d * inv;
    m2[i] += d * (x[i] - mean[i]);
  }
}

std::vector<double> MomentSeries::std_dev() const
{
  std::vector<double> out(mean.size(), 0.0);
  if (count < 2) {
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::sqrt(std::max(0.0, m2[i] / static_cast<double>(count - 1)));
  }
  return out;
}

EnsembleFailure::EnsembleFailure(std::size_t index,
                                 const IntegrationFailure& cause)
    : std::runtime_error(
          fmt::format("realization {}: {}", index, cause.what())),
      index_(index),
      time_(cause.time())
{
}

bool Ensemble::has_channel(Channel c) const noexcept
{
  switch (c) {
    case Channel::x2: return true;
    default: return all_channels_;
  }
}

const std::vector<std::vector<double>>& Ensemble::series(Channel c) const
{
  if (!has_channel(c)) {
    throw std::logic_error(fmt::format(
        "channel {} was not retained (enable keep_trajectories)",
        channel_name(c)));
  }
  switch (c) {
    case Channel::y1: return y1_;
    case Channel::phi1: return phi1_;
    case Channel::phi2: return phi2_;
    default: return x2_;
  }
}

namespace {

std::array<std::vector<double>, 4> channels_of(const Trajectory& traj)
{
  std::array<std::vector<double>, 4> out;
  out[0] = traj.x2;
  for (auto& v : {&out[1], &out[2], &out[3]}) {
    v->reserve(traj.size());
  }
  for (const State& s : traj.states) {
    out[1].push_back(s.y1);
    out[2].push_back(s.phi1);
    out[3].push_back(s.phi2);
  }
  return out;
}

}  // namespace

void Ensemble::append(const Trajectory& traj, bool keep_all)
{
  auto ch = channels_of(traj);
  for (std::size_t i = 0; i < 4; ++i) {
    moments[i].add(ch[i]);
  }
  x2_.push_back(std::move(ch[0]));
  all_channels_ = keep_all;
  if (keep_all) {
    y1_.push_back(std::move(ch[1]));
    phi1_.push_back(std::move(ch[2]));
    phi2_.push_back(std::move(ch[3]));
  }
}

double conv_integrand_integral(const Trajectory& traj)
{
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const State& a = traj.states[k];
    const State& b = traj.states[k + 1];
    const double fa = a.y1 * a.y1 + a.phi1 * a.phi1 + a.phi2 * a.phi2;
    const double fb = b.y1 * b.y1 + b.phi1 * b.phi1 + b.phi2 * b.phi2;
    sum += 0.5 * (fa + fb) * (traj.time[k + 1] - traj.time[k]);
  }
  return sum;
}

Trajectory simulate_realization(const EnsembleConfig& cfg,
                                std::shared_ptr<const KLBasis> basis,
                                std::size_t index, bool log_excitation)
{
  const SeedInfo seed{cfg.master_seed, index};
  const RoadRealization road = sample_realization(basis, cfg.road, seed);
  const State q0 = static_equilibrium(cfg.physical);
  if (cfg.road_sampling == RoadSampling::exact) {
    return integrate(cfg.physical, q0, road, cfg.integ, log_excitation);
  }
  const TabulatedRoad table(road, cfg.integ.t0, cfg.integ.tf,
                            cfg.table_step.value_or(cfg.integ.dt_out));
  return integrate(cfg.physical, q0, table, cfg.integ, log_excitation);
}

Ensemble run_ensemble(const EnsembleConfig& cfg)
{
  cfg.validate();
  const auto basis = std::make_shared<const KLBasis>(build_basis(cfg.road));

  unsigned threads = cfg.threads;
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.n_s));

  Ensemble ens;
  ens.physical = cfg.physical;
  ens.records.resize(cfg.n_s);
  for (std::size_t i = 0; i < cfg.n_s; ++i) {
    ens.records[i].index = i;
    ens.records[i].seed = SeedInfo{cfg.master_seed, i};
  }

  // Batches bound the number of trajectories held before the ordered merge.
  const std::size_t batch = std::max<std::size_t>(16, 4 * threads);
  std::vector<std::optional<Trajectory>> slots(batch);
  std::vector<std::exception_ptr> errors(batch);
  double conv_sum = 0.0;

  for (std::size_t first = 0; first < cfg.n_s; first += batch) {
    const std::size_t count = std::min(batch, cfg.n_s - first);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t j = next++; j < count; j = next++) {
        try {
          slots[j] = simulate_realization(cfg, basis, first + j);
          errors[j] = nullptr;
        } catch (...) {
          slots[j].reset();
          errors[j] = std::current_exception();
        }
      }
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back(worker);
      }
    }

    for (std::size_t j = 0; j < count; ++j) {
      RealizationRecord& rec = ens.records[first + j];
      if (errors[j]) {
        try {
          std::rethrow_exception(errors[j]);
        } catch (const IntegrationFailure& f) {
          if (cfg.failure_policy == FailurePolicy::abort) {
            throw EnsembleFailure(first + j, f);
          }
          rec.failed = true;
          rec.failure = f.what();
          rec.failure_time = f.time();
          continue;
        }
      }
      Trajectory& traj = *slots[j];
      if (ens.time.empty()) {
        ens.time = traj.time;
      }
      rec.stats = traj.stats;
      rec.conv_integral = conv_integrand_integral(traj);
      conv_sum += rec.conv_integral;
      ens.append(traj, cfg.keep_trajectories);
      ens.conv_curve.push_back(
          std::sqrt(conv_sum / static_cast<double>(ens.size())));
      slots[j].reset();
    }
  }
  if (ens.time.empty()) {
    ens.time.reserve(cfg.integ.grid_size());
    for (std::size_t k = 0; k < cfg.integ.grid_size(); ++k) {
      ens.time.push_back(cfg.integ.grid_time(k));
    }
  }
  return ens;
}

double conv_metric(const Ensemble& e, std::size_t n)
{
  std::vector<double> integrals;
  for (const auto& rec : e.records) {
    if (!rec.failed) {
      integrals.push_back(rec.conv_integral);
    }
  }
  if (n < 1 || n > integrals.size()) {
    throw std::out_of_range(fmt::format(
        "conv_metric: n = {} outside [1, {}]", n, integrals.size()));
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sum += integrals[j];
  }
  return std::sqrt(sum / static_cast<double>(n));
}

std::vector<ConvPoint> convergence_study(const Ensemble& e,
                                         std::span<const std::size_t> checkpoints)
{
  std::vector<ConvPoint> out;
  std::size_t prev = 0;
  for (std::size_t n : checkpoints) {
    if (n < prev) {
      throw std::invalid_argument("convergence checkpoints must be sorted");
    }
    prev = n;
    out.push_back({n, conv_metric(e, n)});
  }
  return out;
}

std::vector<ConvPoint> convergence_study(const EnsembleConfig& cfg,
                                         std::span<const std::size_t> checkpoints)
{
  if (!checkpoints.empty() && checkpoints.back() > cfg.n_s) {
    throw std::invalid_argument("convergence checkpoint exceeds n_s");
  }
  return convergence_study(run_ensemble(cfg), checkpoints);
}

}  // namespace sprayer
