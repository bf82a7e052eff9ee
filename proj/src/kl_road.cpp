#include "sprayer/kl_road.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

namespace sprayer {

ExcitationSample ZeroExcitation::at(double t) const
{
  ExcitationSample e;
  e.t = t;
  return e;
}

ExcitationSample ConstantExcitation::at(double t) const
{
  return ExcitationSample{ye1_, ye2_, 0.0, 0.0, t};
}

void RoadParams::validate() const
{
  auto require = [](bool ok, const std::string& what) {
    if (!ok) {
      throw std::invalid_argument("road parameters: " + what);
    }
  };
  require(std::isfinite(mu1) && std::isfinite(mu2), "means must be finite");
  require(std::isfinite(sigma1) && sigma1 >= 0.0, "sigma1 must be >= 0");
  require(std::isfinite(sigma2) && sigma2 >= 0.0, "sigma2 must be >= 0");
  require(std::isfinite(a_corr) && a_corr > 0.0, "a_corr must be > 0");
  require(std::isfinite(v) && v > 0.0, "v must be > 0");
  require(std::isfinite(horizon) && horizon > 0.0, "horizon must be > 0");
  require(n_kl.has_value() != tau.has_value(),
          "exactly one of N_KL and tau must be set");
  if (n_kl) {
    require(*n_kl >= 1, "N_KL must be >= 1");
  }
  if (tau) {
    require(*tau > 0.0 && *tau < 1.0, "tau must lie in (0, 1)");
  }
}

double correlation_kernel(double t1, double t2, double c)
{
  return std::exp(-c * std::abs(t2 - t1));
}

KLBasis::KLBasis(double c, double horizon, std::vector<KLMode> modes)
    : c_(c), horizon_(horizon), modes_(std::move(modes))
{
}

double KLBasis::eigenfunction(std::size_t n, double t) const
{
  const KLMode& m = modes_[n];
  const double x = t - 0.5 * horizon_;
  return m.norm * (m.parity == Parity::even ? std::cos(m.omega * x)
                                            : std::sin(m.omega * x));
}

double KLBasis::eigenfunction_derivative(std::size_t n, double t) const
{
  const KLMode& m = modes_[n];
  const double x = t - 0.5 * horizon_;
  return m.norm * m.omega *
         (m.parity == Parity::even ? -std::sin(m.omega * x)
                                   : std::cos(m.omega * x));
}

double KLBasis::partial_energy(std::size_t n) const
{
  n = std::min(n, modes_.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += modes_[i].lambda;
  }
  return sum;
}

KLBasis KLBasis::truncated(std::size_t n) const
{
  n = std::min(n, modes_.size());
  return KLBasis(c_, horizon_,
                 std::vector<KLMode>(modes_.begin(), modes_.begin() + n));
}

InsufficientModes::InsufficientModes(double tau, double reached,
                                     std::size_t n_modes)
    : std::runtime_error(fmt::format(
          "energy fraction {} not reached with {} modes (reached {:.9f}); "
          "raise the number of computed modes",
          tau, n_modes, reached)),
      reached_(reached)
{
}

namespace {

template <class F>
double bisect(F&& f, double lo, double hi, const char* family, std::size_t k)
{
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) {
    return lo;
  }
  if (fhi == 0.0) {
    return hi;
  }
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw RootBracketError(fmt::format(
        "{} root {}: no sign change on [{:.17g}, {:.17g}] (f = {:.3e}, {:.3e})",
        family, k, lo, hi, flo, fhi));
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    const double fm = f(mid);
    if (fm == 0.0) {
      return mid;
    }
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

KLBasis solve_fredholm(double c, double horizon, std::size_t n_modes)
{
  if (!(c > 0.0) || !(horizon > 0.0) || n_modes == 0) {
    throw std::invalid_argument(
        "solve_fredholm requires c > 0, T > 0 and n_modes >= 1");
  }
  const double a = 0.5 * horizon;
  const double pi = std::numbers::pi;

  std::vector<KLMode> modes;
  modes.reserve(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    KLMode mode;
    if (m % 2 == 0) {
      const std::size_t k = m / 2;
      const double lo = static_cast<double>(k) * pi / a;
      const double hi = (static_cast<double>(k) + 0.5) * pi / a;
      mode.omega = bisect(
          [&](double w) { return c * std::cos(w * a) - w * std::sin(w * a); },
          lo, hi, "even", k);
      mode.parity = Parity::even;
      mode.norm =
          1.0 / std::sqrt(a + std::sin(2.0 * mode.omega * a) / (2.0 * mode.omega));
    } else {
      const std::size_t k = (m + 1) / 2;
      const double lo = (static_cast<double>(k) - 0.5) * pi / a;
      const double hi = static_cast<double>(k) * pi / a;
      mode.omega = bisect(
          [&](double w) { return w * std::cos(w * a) + c * std::sin(w * a); },
          lo, hi, "odd", k);
      mode.parity = Parity::odd;
      mode.norm =
          1.0 / std::sqrt(a - std::sin(2.0 * mode.omega * a) / (2.0 * mode.omega));
    }
    mode.lambda = 2.0 * c / (mode.omega * mode.omega + c * c);
    modes.push_back(mode);
  }
  return KLBasis(c, horizon, std::move(modes));
}

std::size_t truncation_order(const KLBasis& basis, double tau)
{
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("tau must lie in (0, 1)");
  }
  const double target = tau * basis.energy_total();
  double sum = 0.0;
  for (std::size_t n = 0; n < basis.size(); ++n) {
    sum += basis.modes()[n].lambda;
    if (sum >= target) {
      return n + 1;
    }
  }
  throw InsufficientModes(tau, sum / basis.energy_total(), basis.size());
}

KLBasis build_basis(const RoadParams& params)
{
  params.validate();
  const double c = params.decay_rate();
  const double T = params.horizon;
  if (params.n_kl) {
    return solve_fredholm(c, T, *params.n_kl);
  }
  // The tail beyond frequency W carries about (2/pi)(pi/2 - atan(W/c)) of the
  // energy and the modes are spaced by ~pi/T.
  const double tau = *params.tau;
  const double w = c * std::tan(0.5 * std::numbers::pi * tau);
  auto n = static_cast<std::size_t>(std::ceil(1.1 * w * T / std::numbers::pi)) + 16;
  for (;;) {
    KLBasis full = solve_fredholm(c, T, n);
    try {
      return full.truncated(truncation_order(full, tau));
    } catch (const InsufficientModes&) {
      n *= 2;
    }
  }
}

RoadRealization::RoadRealization(std::shared_ptr<const KLBasis> basis,
                                 std::vector<double> y1, std::vector<double> y2,
                                 const RoadParams& params, SeedInfo seed)
    : basis_(std::move(basis)),
      y1_(std::move(y1)),
      y2_(std::move(y2)),
      mu1_(params.mu1),
      mu2_(params.mu2),
      sigma1_(params.sigma1),
      sigma2_(params.sigma2),
      seed_(seed)
{
  if (!basis_ || y1_.size() != basis_->size() || y2_.size() != basis_->size()) {
    throw std::invalid_argument(
        "road realization needs one coefficient per basis mode and tire");
  }
}

std::vector<double> RoadRealization::amplitudes(int tire) const
{
  const auto& y = tire == 0 ? y1_ : y2_;
  const double sigma = tire == 0 ? sigma1_ : sigma2_;
  std::vector<double> amp(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) {
    const KLMode& m = basis_->modes()[n];
    amp[n] = sigma * std::sqrt(m.lambda) * m.norm * y[n];
  }
  return amp;
}

ExcitationSample RoadRealization::evaluate(double t) const
{
  const double T = basis_->horizon();
  const double slack = 1e-9 * T;
  if (!(t >= -slack && t <= T + slack)) {
    throw std::out_of_range(
        fmt::format("road evaluated at t = {} outside [0, {}]", t, T));
  }
  const double x = t - 0.5 * T;
  double v1 = 0.0, v2 = 0.0, d1 = 0.0, d2 = 0.0;
  const auto modes = basis_->modes();
  for (std::size_t n = 0; n < modes.size(); ++n) {
    const KLMode& m = modes[n];
    const double w = std::sqrt(m.lambda) * m.norm;
    const double cs = std::cos(m.omega * x);
    const double sn = std::sin(m.omega * x);
    double phi, dphi;
    if (m.parity == Parity::even) {
      phi = cs;
      dphi = -m.omega * sn;
    } else {
      phi = sn;
      dphi = m.omega * cs;
    }
    v1 += w * phi * y1_[n];
    v2 += w * phi * y2_[n];
    d1 += w * dphi * y1_[n];
    d2 += w * dphi * y2_[n];
  }
  return ExcitationSample{mu1_ + sigma1_ * v1, mu2_ + sigma2_ * v2,
                          sigma1_ * d1, sigma2_ * d2, t};
}

RoadRealization sample_realization(std::shared_ptr<const KLBasis> basis,
                                   const RoadParams& params, Philox4x32& left,
                                   Philox4x32& right, SeedInfo seed)
{
  const std::size_t n = basis->size();
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> y1(n), y2(n);
  for (auto& y : y1) {
    y = normal(left);
  }
  normal.reset();
  for (auto& y : y2) {
    y = normal(right);
  }
  return RoadRealization(std::move(basis), std::move(y1), std::move(y2),
                         params, seed);
}

RoadRealization sample_realization(std::shared_ptr<const KLBasis> basis,
                                   const RoadParams& params, SeedInfo seed)
{
  Philox4x32 left = make_substream(seed.master_seed, seed.realization_index, 0);
  Philox4x32 right = make_substream(seed.master_seed, seed.realization_index, 1);
  return sample_realization(std::move(basis), params, left, right, seed);
}

TabulatedRoad::TabulatedRoad(const RoadRealization& road, double t_begin,
                             double t_end, double step)
{
  const double T = road.basis().horizon();
  if (!(t_begin >= 0.0 && t_end <= T * (1.0 + 1e-12) && t_end > t_begin)) {
    throw std::out_of_range(fmt::format(
        "tabulation window [{}, {}] outside road horizon [0, {}]", t_begin,
        t_end, T));
  }
  if (!(step > 0.0)) {
    throw std::invalid_argument("tabulation step must be > 0");
  }
  const auto intervals =
      static_cast<std::size_t>(std::ceil((t_end - t_begin) / step - 1e-9));
  n_ = std::max<std::size_t>(intervals, 1) + 1;
  t_begin_ = t_begin;
  t_end_ = t_end;
  step_ = (t_end - t_begin) / static_cast<double>(n_ - 1);

  const auto amp_left = road.amplitudes(0);
  const auto amp_right = road.amplitudes(1);
  left_ = tabulate(road.basis(), amp_left, road.mean(0), t_begin_, step_, n_);
  right_ = tabulate(road.basis(), amp_right, road.mean(1), t_begin_, step_, n_);
}

TabulatedRoad::Channel TabulatedRoad::tabulate(const KLBasis& basis,
                                               std::span<const double> amp,
                                               double mean, double t_begin,
                                               double step, std::size_t n)
{
  Channel ch;
  ch.value.assign(n, 0.0);
  ch.rate.assign(n, 0.0);
  ch.accel.assign(n, 0.0);

  const auto modes = basis.modes();
  const double half = 0.5 * basis.horizon();
  constexpr std::size_t kBlock = 512;
  constexpr std::size_t kGroup = 4;

  // Phasors exp(i omega x) advanced by rotation within a block and reseeded
  // exactly at each block start.
  for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
    const std::size_t j1 = std::min(n, j0 + kBlock);
    const double x0 = t_begin + static_cast<double>(j0) * step - half;
    for (std::size_t m0 = 0; m0 < modes.size(); m0 += kGroup) {
      std::array<double, kGroup> zr{}, zi{}, rr{}, ri{}, ae{}, ao{}, w{};
      for (std::size_t k = 0; k < kGroup && m0 + k < modes.size(); ++k) {
        const KLMode& m = modes[m0 + k];
        w[k] = m.omega;
        zr[k] = std::cos(m.omega * x0);
        zi[k] = std::sin(m.omega * x0);
        rr[k] = std::cos(m.omega * step);
        ri[k] = std::sin(m.omega * step);
        (m.parity == Parity::even ? ae[k] : ao[k]) = amp[m0 + k];
      }
      for (std::size_t j = j0; j < j1; ++j) {
        double val = 0.0, rate = 0.0, acc = 0.0;
        for (std::size_t k = 0; k < kGroup; ++k) {
          const double re = ae[k] * zr[k] + ao[k] * zi[k];
          val += re;
          rate += w[k] * (ao[k] * zr[k] - ae[k] * zi[k]);
          acc -= w[k] * w[k] * re;
          const double nr = zr[k] * rr[k] - zi[k] * ri[k];
          zi[k] = zr[k] * ri[k] + zi[k] * rr[k];
          zr[k] = nr;
        }
        ch.value[j] += val;
        ch.rate[j] += rate;
        ch.accel[j] += acc;
      }
    }
  }
  for (auto& v : ch.value) {
    v += mean;
  }
  return ch;
}

ExcitationSample TabulatedRoad::at(double t) const
{
  const double slack = 1e-9 * std::max(1.0, t_end_);
  if (!(t >= t_begin_ - slack && t <= t_end_ + slack)) {
    throw std::out_of_range(fmt::format(
        "tabulated road evaluated at t = {} outside [{}, {}]", t, t_begin_,
        t_end_));
  }
  const double u = (t - t_begin_) / step_;
  auto j = static_cast<std::size_t>(std::max(0.0, std::floor(u)));
  j = std::min(j, n_ - 2);
  const double s = u - static_cast<double>(j);
  const double s2 = s * s;
  const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
  const double h10 = s * (1.0 - s) * (1.0 - s);
  const double h01 = s2 * (3.0 - 2.0 * s);
  const double h11 = s2 * (s - 1.0);

  auto interp = [&](const std::vector<double>& f, const std::vector<double>& df) {
    return h00 * f[j] + h10 * step_ * df[j] + h01 * f[j + 1] +
           h11 * step_ * df[j + 1];
  };
  return ExcitationSample{interp(left_.value, left_.rate),
                          interp(right_.value, right_.rate),
                          interp(left_.rate, left_.accel),
                          interp(right_.rate, right_.accel), t};
}

}  // namespace sprayer
