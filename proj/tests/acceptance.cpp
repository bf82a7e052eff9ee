// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run all ten
//   acceptance --only 6   run a subset (comma separated)
//
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oracles/lagrangian.hpp"
#include "oracles/nystrom.hpp"
#include "sprayer/analysis.hpp"
#include "sprayer/cli.hpp"
#include "sprayer/kl_road.hpp"
#include "sprayer/montecarlo.hpp"

using namespace sprayer;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path scratch_dir(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("sprayer_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// Ensemble runs shared by criteria 5, 7 and 9.
struct EnsembleRuns
{
  fs::path serial_dir = scratch_dir("ensemble_t1");
  fs::path parallel_dir = scratch_dir("ensemble_t4");
  std::optional<EnsembleReport> serial;
  bool parallel_done = false;
  double serial_seconds = 0.0;

  ~EnsembleRuns()
  {
    fs::remove_all(serial_dir);
    fs::remove_all(parallel_dir);
  }

  const EnsembleReport& serial_report()
  {
    if (!serial) {
      RunConfig cfg = parse_config("{}");
      cfg.output_dir = serial_dir;
      std::ostringstream log;
      const Stopwatch sw;
      serial = cmd_ensemble(cfg, 1, log);
      serial_seconds = sw.seconds();
    }
    return *serial;
  }

  void run_parallel()
  {
    if (!parallel_done) {
      RunConfig cfg = parse_config("{}");
      cfg.output_dir = parallel_dir;
      std::ostringstream log;
      cmd_ensemble(cfg, 4, log);
      parallel_done = true;
    }
  }
};

EnsembleRuns& ensemble_runs()
{
  static EnsembleRuns runs;
  return runs;
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 1 ------------------------------------------------------------------------

Outcome static_equilibrium_fidelity()
{
  const RunConfig cfg = parse_config("{}");
  std::ostringstream out;
  const EquilibriumReport rep = cmd_equilibrium(cfg, out);
  const PhysicalParams& p = cfg.physical;
  const double formula = -(p.m1 + p.m2) * p.g_acc / (p.k1 + p.k2);
  // The quoted -0.07701 is rounded; the formula gives -0.0770032.
  const bool pass = relative(rep.state.y1, formula) < 1e-12 &&
                    relative(rep.state.y1, -0.07701) < 1e-4 && rep.residual < 1e-10;
  return {pass, fmt::format("y1 = {:.7f} m (formula {:.7f}), |rhs| = {:.1e}", rep.state.y1,
                            formula, rep.residual)};
}

// 2 ------------------------------------------------------------------------

Outcome dynamics_oracle()
{
  const PhysicalParams p;
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> angle(-0.3, 0.3), pos(-0.3, 0.3), rate(-1.5, 1.5),
      road(-0.2, 1.0), road_rate(-2.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const State s{pos(rng), angle(rng), angle(rng), rate(rng), rate(rng), rate(rng)};
    const ExcitationSample e{road(rng), road(rng), road_rate(rng), road_rate(rng), 0.0};
    const State::Vector model = rhs(p, s, e);
    const Eigen::Vector3d ref = oracle::accelerations(p, s, e);
    const double err = (model.tail<3>() - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
  }
  return {worst < 1e-6, fmt::format("worst relative mismatch {:.2e} over 100 states", worst)};
}

// 3 ------------------------------------------------------------------------

Outcome kl_correctness()
{
  const RoadParams road;
  const double c = road.decay_rate();
  const double T = road.horizon;

  // Analytic eigenpairs against the extrapolated Nystrom solution.
  const std::size_t count = 50;
  const KLBasis analytic = solve_fredholm(c, T, count);
  const oracle::NystromSolution ref = oracle::nystrom_extrapolated(c, T, 1024, count);
  double eig_err = 0.0, fun_err = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    eig_err = std::max(eig_err, relative(ref.eigenvalues[n], analytic.mode(n).lambda));
    const double sign = analytic.eigenfunction(n, 0.0) < 0.0 ? -1.0 : 1.0;
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < ref.nodes.size(); ++i) {
      const double v = sign * analytic.eigenfunction(n, ref.nodes[i]);
      worst = std::max(worst, std::abs(v - ref.modes[n][i]));
      peak = std::max(peak, std::abs(v));
    }
    fun_err = std::max(fun_err, worst / peak);
  }

  // Mercer reconstruction with the energy-rule basis.
  RoadParams full = road;
  full.n_kl.reset();
  full.tau = 0.999;
  const KLBasis basis = build_basis(full);
  const std::size_t grid = 100;
  std::vector<double> t(grid);
  Eigen::MatrixXd phi(grid, basis.size());
  for (std::size_t i = 0; i < grid; ++i) {
    t[i] = T * static_cast<double>(i) / static_cast<double>(grid - 1);
    for (std::size_t n = 0; n < basis.size(); ++n) {
      phi(i, n) = std::sqrt(basis.mode(n).lambda) * basis.eigenfunction(n, t[i]);
    }
  }
  const Eigen::MatrixXd mercer = phi * phi.transpose();
  double mercer_err = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      mercer_err = std::max(mercer_err, std::abs(mercer(i, j) - correlation_kernel(t[i], t[j], c)));
    }
  }

  // Sample statistics of the default (403-mode) paths.
  const auto paths = std::make_shared<const KLBasis>(build_basis(road));
  const std::vector<double> times{3.0, 7.5, 12.0, 16.5, 21.0, 25.5};
  const std::size_t n_real = 10000;
  std::vector<double> sum(times.size()), sum2(times.size());
  double lag = 0.0;
  for (std::size_t r = 0; r < n_real; ++r) {
    const RoadRealization path = sample_realization(paths, road, SeedInfo{1, r});
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double a = path.evaluate(times[k]).ye1 - road.mu1;
      const double b = path.evaluate(times[k] + 0.3).ye1 - road.mu1;
      sum[k] += a;
      sum2[k] += a * a;
      lag += a * b;
    }
  }
  double sigma_err = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double m = sum[k] / n_real;
    const double sd = std::sqrt(sum2[k] / n_real - m * m);
    sigma_err = std::max(sigma_err, std::abs(sd - road.sigma1));
  }
  const double cov = lag / static_cast<double>(n_real * times.size());
  const double cov_target = road.sigma1 * road.sigma1 * std::exp(-1.0);
  const double cov_err = relative(cov, cov_target);

  const bool pass = eig_err < 1e-6 && fun_err < 1e-6 && mercer_err < 0.05 && sigma_err < 0.01 &&
                    cov_err < 0.10;
  return {pass, fmt::format("eig {:.1e}, eigfun {:.1e}, Mercer {:.4f} (N = {}), |sd - 0.175| <= "
                            "{:.4f}, lag cov off {:.1f}%",
                            eig_err, fun_err, mercer_err, basis.size(), sigma_err,
                            100 * cov_err)};
}

// 4 ------------------------------------------------------------------------

Outcome integrator_order()
{
  const PhysicalParams p;
  const RoadParams road;
  const auto basis = std::make_shared<const KLBasis>(build_basis(road));
  const RoadRealization frozen = sample_realization(basis, road, SeedInfo{1, 0});
  const State q0 = static_equilibrium(p);

  IntegratorConfig cfg;
  cfg.tf = 5.0;
  cfg.dt_out = 0.5;
  auto run = [&](double tol) {
    IntegratorConfig c = cfg;
    c.rel_tol = tol;
    c.abs_tol = tol;
    c.dt_min = 1e-12;
    return integrate(p, q0, frozen, c);
  };
  const Trajectory ref = run(1e-12);

  std::vector<double> x, y;
  for (double tol : {1e-5, 1e-6, 1e-7, 1e-8, 1e-9}) {
    const Trajectory traj = run(tol);
    double err = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      err = std::max(err, (traj.states[k].to_vector() - ref.states[k].to_vector()).cwiseAbs().maxCoeff());
    }
    x.push_back(std::log(static_cast<double>(traj.stats.accepted)));
    y.push_back(std::log(err));
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double order = -sxy / sxx;
  return {order >= 4.0, fmt::format("empirical order {:.2f} (steps {:.0f} to {:.0f}, reference "
                                    "{} steps)",
                                    order, std::exp(x.front()), std::exp(x.back()),
                                    ref.stats.accepted)};
}

// 5 ------------------------------------------------------------------------

Outcome mc_convergence()
{
  const EnsembleReport& rep = ensemble_runs().serial_report();
  std::map<std::size_t, double> conv;
  for (const ConvPoint& pt : rep.conv) {
    conv[pt.n] = pt.conv;
  }
  if (!conv.count(128) || !conv.count(256)) {
    return {false, "checkpoints 128 and 256 missing"};
  }
  const double change = std::abs(conv[256] - conv[128]) / conv[256];
  return {change < 0.01 && rep.failures == 0,
          fmt::format("conv(128) = {:.5f}, conv(256) = {:.5f}, change {:.2f}%, {} failures",
                      conv[128], conv[256], 100 * change, rep.failures)};
}

// 6 ------------------------------------------------------------------------

Outcome spectral_slope_criterion()
{
  RunConfig cfg = parse_config("{}");
  cfg.output_dir = scratch_dir("psd");
  std::ostringstream log;
  const PsdReport rep = cmd_psd(cfg, log);
  fs::remove_all(cfg.output_dir);
  const double s = rep.fit.slope;
  return {s >= -2.3 && s <= -1.7,
          fmt::format("slope {:.3f} over [0.3, 4] Hz (r^2 {:.3f}, {} bins, {} s run, {} modes)", s,
                      rep.fit.r_squared, rep.fit.bins, rep.horizon, rep.modes)};
}

// 7 ------------------------------------------------------------------------

Outcome large_vibration()
{
  const EnsembleReport& rep = ensemble_runs().serial_report();
  const double avg = rep.probability.time_average;
  const double peak = rep.probability.peak;
  return {avg >= 0.12 && avg <= 0.28 && peak >= 0.30 && peak <= 0.50,
          fmt::format("time-averaged P = {:.3f} (band [0.12, 0.28]), peak P = {:.3f} (band "
                      "[0.30, 0.50])",
                      avg, peak)};
}

// 8 ------------------------------------------------------------------------

Outcome statistical_engine()
{
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::vector<double> samples(100000);
  for (double& s : samples) {
    s = normal(rng);
  }
  const PdfEstimate pdf = pdf_estimate(samples);
  double kde_err = 0.0;
  for (std::size_t i = 0; i < pdf.abscissa.size(); ++i) {
    const double x = pdf.abscissa[i];
    kde_err = std::max(kde_err, std::abs(pdf.density[i] - std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi)));
  }

  const std::size_t n_s = 256, n_t = 500;
  std::vector<std::vector<double>> rows(n_s, std::vector<double>(n_t));
  for (auto& r : rows) {
    for (double& v : r) {
      v = normal(rng);
    }
  }
  std::vector<double> time(n_t);
  for (std::size_t k = 0; k < n_t; ++k) {
    time[k] = static_cast<double>(k);
  }
  const ProbabilitySeries prob = exceedance_probability(time, rows, 1.0);
  const double p0 = prob.probability.front();
  const BandStatistics band = band_statistics(time, rows, 0.95);
  const double coverage = envelope_coverage(band, rows);

  const bool pass = kde_err < 0.02 && std::abs(p0 - 0.3173) <= 0.06 &&
                    std::abs(prob.time_average - 0.3173) <= 0.06 && coverage >= 0.92 &&
                    coverage <= 0.98;
  return {pass, fmt::format("KDE error {:.4f}, P(|x| > 1) = {:.3f} (mean over instants {:.4f}), "
                            "95% coverage {:.4f}",
                            kde_err, p0, prob.time_average, coverage)};
}

// 9 ------------------------------------------------------------------------

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility()
{
  EnsembleRuns& runs = ensemble_runs();
  runs.serial_report();
  runs.run_parallel();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(runs.serial_dir)) {
    if (e.is_regular_file()) {
      files.push_back(fs::relative(e.path(), runs.serial_dir));
    }
  }
  std::size_t other = 0;
  for (const auto& e : fs::recursive_directory_iterator(runs.parallel_dir)) {
    other += e.is_regular_file();
  }
  std::size_t differ = 0, bytes = 0;
  for (const fs::path& f : files) {
    const std::string a = slurp(runs.serial_dir / f);
    bytes += a.size();
    if (a != slurp(runs.parallel_dir / f)) {
      ++differ;
    }
  }
  return {!files.empty() && differ == 0 && other == files.size(),
          fmt::format("{} files ({} bytes), {} differ between 1 and 4 threads", files.size(), bytes,
                      differ)};
}

// 10 -----------------------------------------------------------------------

Outcome qualitative_behaviour()
{
  const std::size_t seeds = 8;
  double worst_corr = 1.0;
  auto amplitude = [&](double a_corr, double v_kmh) {
    EnsembleConfig cfg;
    cfg.road.a_corr = a_corr;
    cfg.road.v = v_kmh / 3.6;
    const auto basis = std::make_shared<const KLBasis>(build_basis(cfg.road));
    double total = 0.0;
    for (std::size_t s = 1; s <= seeds; ++s) {
      cfg.master_seed = s;  // same draws at every sweep point
      const Trajectory traj = simulate_realization(cfg, basis, 0);
      std::vector<double> x2, y1, y2;
      for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.time[k] >= 5.0) {
          x2.push_back(traj.x2[k]);
          y1.push_back(traj.states[k].y1);
          y2.push_back(traj.y2[k]);
        }
      }
      worst_corr = std::min(worst_corr, pearson_correlation(y1, y2));
      double m = 0.0, m2 = 0.0;
      for (double v : x2) {
        m += v;
      }
      m /= x2.size();
      for (double v : x2) {
        m2 += (v - m) * (v - m);
      }
      total += std::sqrt(m2 / (x2.size() - 1));
    }
    return total / seeds;
  };
  const double a05 = amplitude(0.5, 12), a1 = amplitude(1.0, 12), a2 = amplitude(2.0, 12);
  const double v6 = amplitude(1.0, 6), v24 = amplitude(1.0, 24);
  const bool pass = a05 < a1 && a1 < a2 && v6 > a1 && a1 > v24 && worst_corr > 0.99;
  return {pass, fmt::format("std x2 vs a_corr (0.5, 1, 2) = ({:.4f}, {:.4f}, {:.4f}); vs v (6, 12, "
                            "24) = ({:.4f}, {:.4f}, {:.4f}); min corr(y1, y2) = {:.5f}",
                            a05, a1, a2, v6, a1, v24, worst_corr)};
}

struct Criterion
{
  int id;
  const char* name;
  std::function<Outcome()> run;
  std::optional<double> limit_s;  ///< runtime budget, when the criterion states one
};

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "static equilibrium", static_equilibrium_fidelity, 1.0},
      {2, "dynamics oracle", dynamics_oracle, 10.0},
      {3, "KL correctness", kl_correctness, 120.0},
      {4, "integrator order", integrator_order, 120.0},
      {5, "MC convergence", mc_convergence, std::nullopt},
      {6, "spectral slope", spectral_slope_criterion, 120.0},
      {7, "large-vibration probability", large_vibration, std::nullopt},
      {8, "statistical engine", statistical_engine, 60.0},
      {9, "reproducibility", reproducibility, std::nullopt},
      {10, "qualitative behaviour", qualitative_behaviour, 300.0},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
      continue;
    }
    const Stopwatch sw;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, fmt::format("exception: {}", e.what())};
    }
    const double t = sw.seconds();
    std::string timing = fmt::format("{:.2f} s", t);
    if (c.limit_s) {
      timing += fmt::format(" / limit {:.0f} s", *c.limit_s);
      if (t >= *c.limit_s) {
        out.pass = false;
        timing += " EXCEEDED";
      }
    }
    if (c.id == 5 && ensemble_runs().serial) {
      timing += fmt::format(", ensemble run {:.1f} s", ensemble_runs().serial_seconds);
    }
    fmt::print("[{}] {:2d} {}: {} ({})\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail,
               timing);
    std::fflush(stdout);
    failures += !out.pass;
  }
  return failures == 0 ? 0 : 1;
}
