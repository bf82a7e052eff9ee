#include "sprayer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fftw3.h>
#include <fmt/format.h>

#include "sprayer/montecarlo.hpp"

namespace sprayer {

namespace {

void require_rectangular(std::span<const double> time,
                         std::span<const std::vector<double>> series)
{
  for (const auto& row : series) {
    if (row.size() != time.size()) {
      throw AnalysisError("ensemble rows must match the time grid");
    }
  }
}

struct MeanStd
{
  double mean;
  double std;
};

MeanStd mean_std(std::span<const double> x)
{
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) {
    ss += (v - mean) * (v - mean);
  }
  return {mean, x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

constexpr double kInvSqrt2Pi = 0.3989422804014327;

}  // namespace

double empirical_quantile(std::span<double> values, double prob)
{
  if (values.empty()) {
    throw AnalysisError("quantile of an empty sample");
  }
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BandStatistics band_statistics(std::span<const double> time,
                               std::span<const std::vector<double>> series,
                               double confidence)
{
  if (series.empty()) {
    throw AnalysisError("band statistics need at least one realization");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw AnalysisError("confidence level must lie in (0, 1)");
  }
  require_rectangular(time, series);

  BandStatistics out;
  out.confidence = confidence;
  out.time.assign(time.begin(), time.end());
  const std::size_t nt = time.size();
  out.mean.resize(nt);
  out.std.resize(nt);
  out.lower.resize(nt);
  out.upper.resize(nt);

  const double p_lo = 0.5 * (1.0 - confidence);
  const double p_hi = 1.0 - p_lo;
  std::vector<double> column(series.size());
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t j = 0; j < series.size(); ++j) {
      column[j] = series[j][k];
    }
    const MeanStd ms = mean_std(column);
    out.mean[k] = ms.mean;
    out.std[k] = ms.std;
    out.lower[k] = empirical_quantile(column, p_lo);
    out.upper[k] = empirical_quantile(column, p_hi);
  }
  return out;
}

BandStatistics ensemble_statistics(const Ensemble& e, Channel channel,
                                   double confidence)
{
  return band_statistics(e.time, e.series(channel), confidence);
}

double envelope_coverage(const BandStatistics& band,
                         std::span<const std::vector<double>> series)
{
  require_rectangular(band.time, series);
  std::size_t inside = 0;
  std::size_t total = 0;
  for (const auto& row : series) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      inside += row[k] >= band.lower[k] && row[k] <= band.upper[k];
      ++total;
    }
  }
  return total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
}

std::vector<double> default_pdf_abscissa()
{
  constexpr std::size_t n = 512;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = -5.0 + 10.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return x;
}

double silverman_bandwidth(std::span<const double> samples)
{
  std::vector<double> sorted(samples.begin(), samples.end());
  const double sd = mean_std(samples).std;
  const double iqr = empirical_quantile(sorted, 0.75) -
                     empirical_quantile(sorted, 0.25);
  double spread = sd;
  if (iqr > 0.0) {
    spread = std::min(sd, iqr / 1.34);
  }
  return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

namespace {

// Kernel contributions beyond 8 bandwidths are below 1e-14 of the peak.
void accumulate_kde(std::span<const double> z, double bw,
                    std::span<const double> x, std::span<double> density)
{
  const double x0 = x.front();
  const double dx = x[1] - x[0];
  const double inv_bw = 1.0 / bw;
  const double norm = kInvSqrt2Pi * inv_bw / static_cast<double>(z.size());
  const double reach = 8.0 * bw;
  const auto last = static_cast<std::ptrdiff_t>(x.size()) - 1;
  for (double zi : z) {
    const auto i0 = std::max<std::ptrdiff_t>(
        0, static_cast<std::ptrdiff_t>(std::ceil((zi - reach - x0) / dx)));
    const auto i1 = std::min<std::ptrdiff_t>(
        last, static_cast<std::ptrdiff_t>(std::floor((zi + reach - x0) / dx)));
    for (std::ptrdiff_t i = i0; i <= i1; ++i) {
      const double u = (x[static_cast<std::size_t>(i)] - zi) * inv_bw;
      density[static_cast<std::size_t>(i)] += norm * std::exp(-0.5 * u * u);
    }
  }
}

}  // namespace

PdfEstimate pdf_estimate(std::span<const double> samples, bool normalize,
                         std::string tag)
{
  if (samples.size() < 30) {
    throw AnalysisError(fmt::format(
        "density estimate needs >= 30 samples, got {}", samples.size()));
  }
  const MeanStd ms = mean_std(samples);
  if (!(ms.std > 0.0)) {
    throw AnalysisError("density estimate of a zero-variance sample");
  }

  PdfEstimate out;
  out.tag = std::move(tag);
  std::vector<double> z(samples.begin(), samples.end());
  if (normalize) {
    for (double& v : z) {
      v = (v - ms.mean) / ms.std;
    }
    out.sample_mean = ms.mean;
    out.sample_std = ms.std;
    out.abscissa = default_pdf_abscissa();
  } else {
    out.sample_mean = 0.0;
    out.sample_std = 1.0;
    out.abscissa = default_pdf_abscissa();
    for (double& x : out.abscissa) {
      x = ms.mean + ms.std * x;
    }
  }
  out.bandwidth = silverman_bandwidth(z);
  out.density.assign(out.abscissa.size(), 0.0);
  accumulate_kde(z, out.bandwidth, out.abscissa, out.density);
  return out;
}

PdfEstimate time_averaged_pdf(std::span<const std::vector<double>> series,
                              std::size_t stride)
{
  if (stride < 1) {
    throw AnalysisError("time-averaged PDF stride must be >= 1");
  }
  if (series.empty() || series.front().empty()) {
    throw AnalysisError("time-averaged PDF needs a non-empty ensemble");
  }
  const std::size_t nt = series.front().size();
  PdfEstimate out;
  out.tag = "time-averaged";
  out.abscissa = default_pdf_abscissa();
  out.density.assign(out.abscissa.size(), 0.0);

  std::vector<double> column(series.size());
  std::size_t used = 0;
  for (std::size_t k = 0; k < nt; k += stride) {
    for (std::size_t j = 0; j < series.size(); ++j) {
      column[j] = series[j][k];
    }
    const MeanStd ms = mean_std(column);
    // Instants with no spread (e.g. the deterministic initial state) have no
    // normalized density and are skipped.
    if (!(ms.std > 0.0) || column.size() < 30) {
      continue;
    }
    const PdfEstimate inst = pdf_estimate(column, true);
    for (std::size_t i = 0; i < out.density.size(); ++i) {
      out.density[i] += inst.density[i];
    }
    out.bandwidth += inst.bandwidth;
    ++used;
  }
  if (used == 0) {
    throw AnalysisError("time-averaged PDF: no instant with spread");
  }
  out.bandwidth /= static_cast<double>(used);
  const double mass = integrate_density(out);
  for (double& d : out.density) {
    d /= mass;
  }
  return out;
}

PdfEstimate time_averaged_pdf(const Ensemble& e, Channel channel,
                              std::size_t stride)
{
  return time_averaged_pdf(e.series(channel), stride);
}

double integrate_density(const PdfEstimate& pdf)
{
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pdf.abscissa.size(); ++i) {
    s += 0.5 * (pdf.density[i] + pdf.density[i + 1]) *
         (pdf.abscissa[i + 1] - pdf.abscissa[i]);
  }
  return s;
}

ProbabilitySeries exceedance_probability(
    std::span<const double> time, std::span<const std::vector<double>> series,
    double threshold)
{
  if (series.empty()) {
    throw AnalysisError("exceedance probability of an empty ensemble");
  }
  require_rectangular(time, series);
  ProbabilitySeries out;
  out.threshold = threshold;
  out.time.assign(time.begin(), time.end());
  out.probability.assign(time.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(series.size());
  for (std::size_t k = 0; k < time.size(); ++k) {
    std::size_t count = 0;
    for (const auto& row : series) {
      if (std::abs(row[k]) > threshold) {
        ++count;
      }
    }
    out.probability[k] = static_cast<double>(count) * inv_n;
  }
  double sum = 0.0;
  for (double p : out.probability) {
    sum += p;
    out.peak = std::max(out.peak, p);
  }
  out.time_average = time.empty() ? 0.0 : sum / static_cast<double>(time.size());
  return out;
}

ProbabilitySeries large_vibration_probability(const Ensemble& e, double fraction)
{
  return exceedance_probability(e.time, e.series(Channel::x2),
                                fraction * e.physical.B1);
}

ProbabilitySeries large_vibration_probability_kde(const Ensemble& e,
                                                  double fraction)
{
  const auto& series = e.series(Channel::x2);
  const double threshold = fraction * e.physical.B1;
  ProbabilitySeries out;
  out.threshold = threshold;
  out.time = e.time;
  out.probability.assign(e.time.size(), 0.0);
  std::vector<double> column(series.size());
  for (std::size_t k = 0; k < e.time.size(); ++k) {
    for (std::size_t j = 0; j < series.size(); ++j) {
      column[j] = series[j][k];
    }
    const MeanStd ms = mean_std(column);
    if (!(ms.std > 0.0) || column.size() < 30) {
      out.probability[k] = std::abs(ms.mean) > threshold ? 1.0 : 0.0;
      continue;
    }
    // Integrate the KDE analytically: each kernel is a normal in x2 units.
    std::vector<double> z(column);
    for (double& v : z) {
      v = (v - ms.mean) / ms.std;
    }
    const double bw = silverman_bandwidth(z) * ms.std;
    double inside = 0.0;
    for (double xi : column) {
      inside += 0.5 * (std::erf((threshold - xi) / (bw * std::numbers::sqrt2)) -
                       std::erf((-threshold - xi) / (bw * std::numbers::sqrt2)));
    }
    out.probability[k] = 1.0 - inside / static_cast<double>(column.size());
  }
  double sum = 0.0;
  for (double p : out.probability) {
    sum += p;
    out.peak = std::max(out.peak, p);
  }
  out.time_average = sum / static_cast<double>(out.probability.size());
  return out;
}

PsdEstimate psd_periodogram(std::span<const double> signal, double fs,
                            double segment_length)
{
  if (!(fs > 0.0) || !(segment_length > 0.0)) {
    throw AnalysisError("periodogram needs fs > 0 and segment length > 0");
  }
  const auto seg = static_cast<std::size_t>(std::llround(segment_length * fs));
  if (seg < 2 || signal.size() < 2 * seg) {
    throw AnalysisError(fmt::format(
        "signal of {} samples too short for two {} s segments at {} Hz",
        signal.size(), segment_length, fs));
  }
  const std::size_t n_seg = signal.size() / seg;
  const std::size_t n_bins = seg / 2 + 1;

  PsdEstimate out;
  out.segment_length = static_cast<double>(seg) / fs;
  out.n_segments = n_seg;
  out.freqs.resize(n_bins);
  out.power.assign(n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k) {
    out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(seg);
  }

  double* in = fftw_alloc_real(seg);
  fftw_complex* spec = fftw_alloc_complex(n_bins);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(seg), in, spec,
                                        FFTW_ESTIMATE);
  const double scale = 1.0 / (fs * static_cast<double>(seg));
  for (std::size_t s = 0; s < n_seg; ++s) {
    const auto block = signal.subspan(s * seg, seg);
    const double mean =
        std::accumulate(block.begin(), block.end(), 0.0) / static_cast<double>(seg);
    for (std::size_t i = 0; i < seg; ++i) {
      in[i] = block[i] - mean;
    }
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double mag2 = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
      const bool edge = k == 0 || (seg % 2 == 0 && k == n_bins - 1);
      out.power[k] += (edge ? 1.0 : 2.0) * mag2 * scale;
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(spec);
  fftw_free(in);

  for (double& p : out.power) {
    p /= static_cast<double>(n_seg);
  }
  return out;
}

SlopeFit spectral_slope(const PsdEstimate& psd, double f_lo, double f_hi)
{
  if (!(f_lo > 0.0 && f_hi > f_lo)) {
    throw AnalysisError("slope band needs 0 < f_lo < f_hi");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f = psd.freqs[k];
    if (f < f_lo || f > f_hi || !(psd.power[k] > 0.0)) {
      continue;
    }
    const double x = std::log10(f);
    const double y = std::log10(psd.power[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++n;
  }
  if (n < 10) {
    throw AnalysisError(fmt::format(
        "slope band [{}, {}] Hz holds {} usable bins (need 10)", f_lo, f_hi, n));
  }
  const double dn = static_cast<double>(n);
  const double cov = sxy - sx * sy / dn;
  const double varx = sxx - sx * sx / dn;
  const double vary = syy - sy * sy / dn;
  SlopeFit fit;
  fit.bins = n;
  fit.slope = cov / varx;
  fit.intercept = (sy - fit.slope * sx) / dn;
  fit.r_squared = vary > 0.0 ? cov * cov / (varx * vary) : 1.0;
  return fit;
}

std::size_t count_local_maxima(std::span<const double> density)
{
  std::size_t count = 0;
  std::size_t i = 0;
  const std::size_t n = density.size();
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && density[j + 1] == density[i]) {
      ++j;
    }
    const bool rises = i == 0 || density[i - 1] < density[i];
    const bool falls = j + 1 == n || density[j + 1] < density[j];
    if (rises && falls && density[i] > 0.0 && (i > 0 || j + 1 < n)) {
      ++count;
    }
    i = j + 1;
  }
  return count;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size() || a.size() < 2) {
    throw AnalysisError("correlation needs two equal series of length >= 2");
  }
  const MeanStd ma = mean_std(a);
  const MeanStd mb = mean_std(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += (a[i] - ma.mean) * (b[i] - mb.mean);
  }
  return s / (static_cast<double>(a.size() - 1) * ma.std * mb.std);
}

}  // namespace sprayer
