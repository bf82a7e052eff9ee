#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprayer/excitation.hpp"
#include "sprayer/random.hpp"

namespace sprayer {

/// Statistical description of the two tire displacement processes.
/// Truncation is driven by exactly one of n_kl or tau.
struct RoadParams
{
  double mu1 = 0.5;
  double mu2 = 0.5;
  double sigma1 = 0.175;
  double sigma2 = 0.175;
  double a_corr = 1.0;        ///< correlation length (m)
  double v = 12.0 / 3.6;      ///< forward speed (m/s)
  std::optional<std::size_t> n_kl = 403;
  std::optional<double> tau;
  double horizon = 30.0;      ///< process defined on [0, horizon] (s)

  /// a_corr / v (s)
  double correlation_time() const { return a_corr / v; }
  /// v / a_corr (1/s), the decay rate of the correlation kernel.
  double decay_rate() const { return v / a_corr; }

  void validate() const;
};

/// exp(-c |t2 - t1|)
double correlation_kernel(double t1, double t2, double c);

enum class Parity { even, odd };

struct KLMode
{
  double lambda = 0.0;  ///< eigenvalue (s)
  double omega = 0.0;   ///< angular frequency (rad/s)
  Parity parity = Parity::even;
  double norm = 0.0;    ///< L2 normalization on [0, T]
};

/// Eigenpairs of the unit exponential kernel on [0, T].
///
/// With x = t - T/2 and a = T/2 the eigenfunctions are
///   even: norm * cos(omega x),  c - omega tan(omega a) = 0
///   odd:  norm * sin(omega x),  omega + c tan(omega a) = 0
/// and lambda = 2c / (omega^2 + c^2). Modes are stored by decreasing lambda,
/// which alternates even/odd.
class KLBasis
{
public:
  KLBasis(double c, double horizon, std::vector<KLMode> modes);

  double decay_rate() const noexcept { return c_; }
  double horizon() const noexcept { return horizon_; }
  /// Sum of all eigenvalues of the untruncated kernel (= trace = T).
  double energy_total() const noexcept { return horizon_; }

  std::size_t size() const noexcept { return modes_.size(); }
  std::span<const KLMode> modes() const noexcept { return modes_; }
  const KLMode& mode(std::size_t n) const { return modes_.at(n); }

  double eigenfunction(std::size_t n, double t) const;
  double eigenfunction_derivative(std::size_t n, double t) const;

  /// lambda_1 + ... + lambda_n
  double partial_energy(std::size_t n) const;

  /// Copy retaining only the leading n modes.
  KLBasis truncated(std::size_t n) const;

private:
  double c_;
  double horizon_;
  std::vector<KLMode> modes_;
};

class RootBracketError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class InsufficientModes : public std::runtime_error
{
public:
  InsufficientModes(double tau, double reached, std::size_t n_modes);

  double reached() const noexcept { return reached_; }

private:
  double reached_;
};

/// Leading n_modes eigenpairs by bisection on the analytic brackets.
KLBasis solve_fredholm(double c, double horizon, std::size_t n_modes);

/// Smallest N whose eigenvalue sum reaches tau * energy_total.
std::size_t truncation_order(const KLBasis& basis, double tau);

/// Basis truncated per params (fixed n_kl, or grown until tau is reached).
KLBasis build_basis(const RoadParams& params);

struct SeedInfo
{
  std::uint64_t master_seed = 0;
  std::uint64_t realization_index = 0;
};

/// One sample path of the left/right tire processes.
class RoadRealization final : public Excitation
{
public:
  RoadRealization(std::shared_ptr<const KLBasis> basis, std::vector<double> y1,
                  std::vector<double> y2, const RoadParams& params,
                  SeedInfo seed);

  /// mu + sigma * sum sqrt(lambda_n) phi_n(t) Y_n, and its exact derivative.
  /// Throws std::out_of_range outside [0, T].
  ExcitationSample evaluate(double t) const;
  ExcitationSample at(double t) const override { return evaluate(t); }

  const KLBasis& basis() const noexcept { return *basis_; }
  std::shared_ptr<const KLBasis> basis_ptr() const noexcept { return basis_; }
  std::span<const double> coefficients_left() const noexcept { return y1_; }
  std::span<const double> coefficients_right() const noexcept { return y2_; }
  double mean(int tire) const noexcept { return tire == 0 ? mu1_ : mu2_; }
  double sigma(int tire) const noexcept { return tire == 0 ? sigma1_ : sigma2_; }
  SeedInfo seed_info() const noexcept { return seed_; }

  /// sigma_i * sqrt(lambda_n) * norm_n * Y_{i,n}
  std::vector<double> amplitudes(int tire) const;

private:
  std::shared_ptr<const KLBasis> basis_;
  std::vector<double> y1_;
  std::vector<double> y2_;
  double mu1_, mu2_, sigma1_, sigma2_;
  SeedInfo seed_;
};

/// Independent standard normal coefficients; left tire draws from `left`,
/// right tire from `right`.
RoadRealization sample_realization(std::shared_ptr<const KLBasis> basis,
                                   const RoadParams& params, Philox4x32& left,
                                   Philox4x32& right, SeedInfo seed = {});

/// Uses the (master seed, realization index, tire) substreams.
RoadRealization sample_realization(std::shared_ptr<const KLBasis> basis,
                                   const RoadParams& params, SeedInfo seed);

/// Realization sampled on a uniform grid (values, first and second
/// derivatives, computed exactly from the series) and evaluated by cubic
/// Hermite interpolation. Used by long runs where direct series evaluation
/// per integrator stage is too slow.
class TabulatedRoad final : public Excitation
{
public:
  TabulatedRoad(const RoadRealization& road, double t_begin, double t_end,
                double step);

  ExcitationSample at(double t) const override;

  double step() const noexcept { return step_; }
  std::size_t nodes() const noexcept { return n_; }

private:
  struct Channel
  {
    std::vector<double> value, rate, accel;
  };
  static Channel tabulate(const KLBasis& basis, std::span<const double> amp,
                          double mean, double t_begin, double step,
                          std::size_t n);

  double t_begin_;
  double t_end_;
  double step_;
  std::size_t n_;
  Channel left_;
  Channel right_;
};

}  // namespace sprayer
