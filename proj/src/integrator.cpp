#include "sprayer/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace sprayer {

void IntegratorConfig::validate() const
{
  auto require = [](bool ok, const char* what) {
    if (!ok) {
      throw std::invalid_argument(std::string("integrator config: ") + what);
    }
  };
  require(std::isfinite(t0) && std::isfinite(tf) && tf > t0, "need tf > t0");
  require(std::isfinite(dt_out) && dt_out > 0.0, "dt_out must be > 0");
  require(rel_tol > 0.0 && abs_tol > 0.0, "tolerances must be > 0");
  require(dt_min > 0.0, "dt_min must be > 0");
  require(!dt_init || *dt_init > 0.0, "dt_init must be > 0");
  const double steps = (tf - t0) / dt_out;
  require(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps),
          "tf - t0 must be a multiple of dt_out");
}

std::size_t IntegratorConfig::grid_size() const
{
  return static_cast<std::size_t>(std::llround((tf - t0) / dt_out)) + 1;
}

double IntegratorConfig::grid_time(std::size_t k) const
{
  return k + 1 == grid_size() ? tf : t0 + static_cast<double>(k) * dt_out;
}

IntegrationFailure::IntegrationFailure(const std::string& reason, double t,
                                       State::Vector last)
    : std::runtime_error(fmt::format("integration failed at t = {:.9g}: {}", t,
                                     reason)),
      t_(t),
      last_(last)
{
}

namespace {

// Fehlberg RK4(5) tableau.
constexpr double c2 = 1.0 / 4.0, c3 = 3.0 / 8.0, c4 = 12.0 / 13.0,
                 c6 = 1.0 / 2.0;
constexpr double a21 = 1.0 / 4.0;
constexpr double a31 = 3.0 / 32.0, a32 = 9.0 / 32.0;
constexpr double a41 = 1932.0 / 2197.0, a42 = -7200.0 / 2197.0,
                 a43 = 7296.0 / 2197.0;
constexpr double a51 = 439.0 / 216.0, a52 = -8.0, a53 = 3680.0 / 513.0,
                 a54 = -845.0 / 4104.0;
constexpr double a61 = -8.0 / 27.0, a62 = 2.0, a63 = -3544.0 / 2565.0,
                 a64 = 1859.0 / 4104.0, a65 = -11.0 / 40.0;
constexpr double b1 = 16.0 / 135.0, b3 = 6656.0 / 12825.0,
                 b4 = 28561.0 / 56430.0, b5 = -9.0 / 50.0, b6 = 2.0 / 55.0;
// fifth minus fourth order weights
constexpr double e1 = 1.0 / 360.0, e3 = -128.0 / 4275.0,
                 e4 = -2197.0 / 75240.0, e5 = 1.0 / 50.0, e6 = 2.0 / 55.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

}  // namespace

OdeSolution integrate_ode(const OdeRhs& f, const State::Vector& q0,
                          const IntegratorConfig& cfg)
{
  cfg.validate();
  if (!q0.allFinite()) {
    throw IntegrationFailure("non-finite initial state", cfg.t0, q0);
  }

  const std::size_t n_out = cfg.grid_size();
  OdeSolution sol;
  sol.time.reserve(n_out);
  sol.states.reserve(n_out);
  sol.time.push_back(cfg.t0);
  sol.states.push_back(q0);

  IntegrationStats& st = sol.stats;
  st.min_dt = std::numeric_limits<double>::infinity();
  st.max_dt = 0.0;

  State::Vector q = q0;
  double t = cfg.t0;
  double h = cfg.dt_init.value_or(cfg.dt_out);

  auto eval = [&](double tt, const State::Vector& qq) {
    ++st.rhs_evaluations;
    try {
      return f(tt, qq);
    } catch (const SingularMassMatrix& e) {
      throw IntegrationFailure(e.what(), t, q);
    }
  };

  State::Vector k1 = eval(t, q);
  for (std::size_t k = 1; k < n_out; ++k) {
    const double target = cfg.grid_time(k);
    while (t < target) {
      if (h < cfg.dt_min) {
        throw IntegrationFailure(
            fmt::format("step size {:.3e} below dt_min {:.3e}", h, cfg.dt_min),
            t, q);
      }
      const double remaining = target - t;
      const bool clipped = h >= remaining;
      const double step = clipped ? remaining : h;

      const State::Vector k2 = eval(t + c2 * step, q + step * (a21 * k1));
      const State::Vector k3 =
          eval(t + c3 * step, q + step * (a31 * k1 + a32 * k2));
      const State::Vector k4 =
          eval(t + c4 * step, q + step * (a41 * k1 + a42 * k2 + a43 * k3));
      const State::Vector k5 = eval(
          t + step, q + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const State::Vector k6 =
          eval(t + c6 * step, q + step * (a61 * k1 + a62 * k2 + a63 * k3 +
                                          a64 * k4 + a65 * k5));

      const State::Vector q_new =
          q + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const State::Vector err =
          step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6);

      double err_norm = 0.0;
      for (int i = 0; i < 6; ++i) {
        const double scale =
            cfg.abs_tol + cfg.rel_tol * std::max(std::abs(q[i]), std::abs(q_new[i]));
        err_norm = std::max(err_norm, std::abs(err[i]) / scale);
      }
      if (!std::isfinite(err_norm) || !q_new.allFinite()) {
        err_norm = std::numeric_limits<double>::infinity();
      }

      if (err_norm <= 1.0) {
        ++st.accepted;
        st.min_dt = std::min(st.min_dt, step);
        st.max_dt = std::max(st.max_dt, step);
        t = clipped ? target : t + step;
        q = q_new;
        k1 = eval(t, q);
        const double factor =
            err_norm == 0.0
                ? kMaxFactor
                : std::clamp(kSafety * std::pow(err_norm, -0.2), kMinFactor,
                             kMaxFactor);
        const double proposal = step * factor;
        h = clipped ? std::max(h, proposal) : proposal;
      } else {
        ++st.rejected;
        const double factor =
            std::isfinite(err_norm)
                ? std::clamp(kSafety * std::pow(err_norm, -0.2), kMinFactor, 1.0)
                : kMinFactor;
        h = step * factor;
      }
    }
    if (!q.allFinite()) {
      throw IntegrationFailure("non-finite state", t, q);
    }
    sol.time.push_back(target);
    sol.states.push_back(q);
  }
  if (st.accepted == 0) {
    st.min_dt = 0.0;
  }
  return sol;
}

Trajectory integrate(const PhysicalParams& p, const State& q0,
                     const Excitation& excitation, const IntegratorConfig& cfg,
                     bool log_excitation)
{
  const OdeRhs f = [&](double t, const State::Vector& q) {
    return rhs(p, State::from_vector(q), excitation.at(t));
  };
  OdeSolution sol = integrate_ode(f, q0.to_vector(), cfg);

  Trajectory traj;
  traj.time = std::move(sol.time);
  traj.stats = sol.stats;
  traj.states.reserve(traj.time.size());
  traj.x2.reserve(traj.time.size());
  traj.y2.reserve(traj.time.size());
  for (const auto& v : sol.states) {
    const State s = State::from_vector(v);
    const TowerPosition pos = tower_kinematics(p, s);
    traj.states.push_back(s);
    traj.x2.push_back(pos.x2);
    traj.y2.push_back(pos.y2);
  }
  if (log_excitation) {
    traj.excitation.reserve(traj.time.size());
    for (double t : traj.time) {
      traj.excitation.push_back(excitation.at(t));
    }
  }
  return traj;
}

std::vector<Energy> energy_audit(const Trajectory& traj, const PhysicalParams& p)
{
  std::vector<Energy> out;
  out.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    ExcitationSample e;
    if (!traj.excitation.empty()) {
      e = traj.excitation[i];
    }
    out.push_back(mechanical_energy(p, traj.states[i], e));
  }
  return out;
}

}  // namespace sprayer
