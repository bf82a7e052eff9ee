#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sprayer {

class Ensemble;
enum class Channel;

/// Pointwise sample statistics and empirical quantile envelope.
struct BandStatistics
{
  std::vector<double> time;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> lower;
  std::vector<double> upper;
  double confidence = 0.95;
};

/// Gaussian KDE on a fixed abscissa.
struct PdfEstimate
{
  std::vector<double> abscissa;
  std::vector<double> density;
  std::string tag;               ///< time in seconds, or "time-averaged"
  double sample_mean = 0.0;      ///< normalization used (0 when not normalized)
  double sample_std = 1.0;
  double bandwidth = 0.0;
};

struct ProbabilitySeries
{
  std::vector<double> time;
  std::vector<double> probability;
  double threshold = 0.0;        ///< absolute threshold (m)
  double time_average = 0.0;
  double peak = 0.0;
};

/// One-sided power spectral density.
struct PsdEstimate
{
  std::vector<double> freqs;     ///< Hz
  std::vector<double> power;     ///< unit^2 / Hz
  double segment_length = 0.0;   ///< s
  std::size_t n_segments = 0;
  std::string window = "rectangular";

  double frequency_step() const
  {
    return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0;
  }
};

struct SlopeFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t bins = 0;
};

class AnalysisError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Linear-interpolated empirical quantile (Hyndman-Fan type 7) of an
/// unsorted sample; `values` is reordered.
double empirical_quantile(std::span<double> values, double prob);

/// Mean, unbiased std, and (1-p)/2, (1+p)/2 quantile envelope at each time.
/// `series` holds one row per realization, each row of size time.size().
BandStatistics band_statistics(std::span<const double> time,
                               std::span<const std::vector<double>> series,
                               double confidence = 0.95);

BandStatistics ensemble_statistics(const Ensemble& e, Channel channel,
                                   double confidence = 0.95);

/// Fraction of (realization, time) pairs that fall inside the envelope.
double envelope_coverage(const BandStatistics& band,
                         std::span<const std::vector<double>> series);

/// Abscissa spanning [-5, 5] with 512 points.
std::vector<double> default_pdf_abscissa();

/// Silverman rule-of-thumb bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE. When `normalize` is set the samples are shifted/scaled to
/// zero mean and unit std first. Requires >= 30 samples with nonzero spread.
PdfEstimate pdf_estimate(std::span<const double> samples, bool normalize = true,
                         std::string tag = {});

/// Equal-weight mean of the normalized per-instant PDFs of a channel over
/// every `stride`-th point of the reporting grid, renormalized to unit
/// integral. Instants without spread are skipped.
PdfEstimate time_averaged_pdf(const Ensemble& e, Channel channel,
                              std::size_t stride = 1);

PdfEstimate time_averaged_pdf(std::span<const std::vector<double>> series,
                              std::size_t stride = 1);

/// Trapezoid integral of a density on its abscissa.
double integrate_density(const PdfEstimate& pdf);

/// Fraction of realizations with |x(t)| > threshold at every grid time.
ProbabilitySeries exceedance_probability(
    std::span<const double> time, std::span<const std::vector<double>> series,
    double threshold);

/// P(|x2(t)| > fraction * B1) by direct counting over the ensemble.
ProbabilitySeries large_vibration_probability(const Ensemble& e,
                                              double fraction = 0.3);

/// Same event probability from integrating the normalized KDE of x2(t)
/// over [-threshold, threshold]; a cross-check of the counting estimator.
ProbabilitySeries large_vibration_probability_kde(const Ensemble& e,
                                                  double fraction = 0.3);

/// Bartlett periodogram: non-overlapping rectangular segments, mean removed
/// per segment, one-sided scaling with sum(P df) = mean segment variance.
PsdEstimate psd_periodogram(std::span<const double> signal, double fs,
                            double segment_length);

/// Least squares fit log10(power) = slope log10(f) + intercept on
/// [f_lo, f_hi]. Needs at least 10 bins with positive power.
SlopeFit spectral_slope(const PsdEstimate& psd, double f_lo, double f_hi);

/// Number of strict local maxima of a sampled density (plateaus count once).
std::size_t count_local_maxima(std::span<const double> density);

/// Pearson correlation of two equal-length series.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace sprayer
