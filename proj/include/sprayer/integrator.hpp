#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sprayer/excitation.hpp"
#include "sprayer/model.hpp"

namespace sprayer {

struct IntegratorConfig
{
  double t0 = 0.0;
  double tf = 30.0;
  double dt_out = 1e-3;
  double rel_tol = 1e-6;
  double abs_tol = 1e-8;
  double dt_min = 1e-9;
  std::optional<double> dt_init;  ///< defaults to dt_out

  void validate() const;
  /// Number of reporting points, (tf - t0) / dt_out + 1.
  std::size_t grid_size() const;
  /// k-th reporting time; the last one is tf exactly.
  double grid_time(std::size_t k) const;
};

struct IntegrationStats
{
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  double min_dt = 0.0;
  double max_dt = 0.0;
};

class IntegrationFailure : public std::runtime_error
{
public:
  IntegrationFailure(const std::string& reason, double t, State::Vector last);

  /// Time of the last accepted state.
  double time() const noexcept { return t_; }
  const State::Vector& last_state() const noexcept { return last_; }

private:
  double t_;
  State::Vector last_;
};

using OdeRhs = std::function<State::Vector(double, const State::Vector&)>;

struct OdeSolution
{
  std::vector<double> time;
  std::vector<State::Vector> states;
  IntegrationStats stats;
};

/// Fehlberg 4(5) pair with local extrapolation (the fifth-order solution is
/// propagated) and component-wise mixed error control
///   |err_i| <= abs_tol + rel_tol * max(|q_i|, |q_new_i|).
/// Steps are clipped so every reporting time is reached exactly.
OdeSolution integrate_ode(const OdeRhs& f, const State::Vector& q0,
                          const IntegratorConfig& cfg);

struct Trajectory
{
  std::vector<double> time;
  std::vector<State> states;
  std::vector<double> x2;
  std::vector<double> y2;
  std::vector<ExcitationSample> excitation;  ///< empty unless requested
  IntegrationStats stats;

  std::size_t size() const noexcept { return time.size(); }
};

Trajectory integrate(const PhysicalParams& p, const State& q0,
                     const Excitation& excitation, const IntegratorConfig& cfg,
                     bool log_excitation = false);

/// T + V at every grid point. Uses the logged excitation when present,
/// level tires otherwise.
std::vector<Energy> energy_audit(const Trajectory& traj, const PhysicalParams& p);

}  // namespace sprayer
