#include "sprayer/cli.hpp"

#include <cmath>
#include <memory>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "sprayer/io.hpp"

namespace sprayer {

using json = nlohmann::ordered_json;

namespace {

Provenance provenance_of(const RunConfig& cfg)
{
  return {config_hash(cfg), cfg.master_seed, code_version()};
}

void write_config_echo(const RunConfig& cfg, const std::filesystem::path& dir)
{
  // The output directory is left out so that runs written to different
  // places stay byte-identical.
  json echo = to_json(cfg);
  echo.erase("output_dir");
  echo["config_hash"] = config_hash(cfg);
  write_json(dir / "config_echo.json", echo, provenance_of(cfg));
}

std::string tag_number(double x) { return fmt::format("{:g}", x); }

State initial_state(const RunConfig& cfg)
{
  if (cfg.simulate.initial_state == InitialState::loaded_equilibrium) {
    return loaded_equilibrium(cfg.physical, cfg.road.mu1, cfg.road.mu2);
  }
  return static_equilibrium(cfg.physical);
}

Trajectory run_single(const RunConfig& cfg, std::size_t index, State q0,
                      std::size_t* modes = nullptr)
{
  const auto basis = std::make_shared<const KLBasis>(build_basis(cfg.road));
  if (modes) {
    *modes = basis->size();
  }
  const RoadRealization road =
      sample_realization(basis, cfg.road, SeedInfo{cfg.master_seed, index});
  if (cfg.road_sampling == RoadSampling::exact) {
    return integrate(cfg.physical, q0, road, cfg.integ, true);
  }
  const TabulatedRoad table(road, cfg.integ.t0, cfg.integ.tf,
                            cfg.table_step.value_or(cfg.integ.dt_out));
  return integrate(cfg.physical, q0, table, cfg.integ, true);
}

// Reports how much of the kernel energy the configured truncation keeps and
// how many modes the 99.9% energy rule would need on the same horizon.
void log_truncation(const RoadParams& road, std::ostream& log)
{
  if (!road.n_kl) {
    return;
  }
  RoadParams by_tau = road;
  by_tau.n_kl.reset();
  by_tau.tau = 0.999;
  const KLBasis fixed = build_basis(road);
  const std::size_t implied = build_basis(by_tau).size();
  fmt::print(log,
             "road: N_KL = {} keeps {:.2f}% of the energy on [0, {}] s; "
             "99.9% would need N = {}\n",
             fixed.size(), 100.0 * fixed.partial_energy(fixed.size()) / fixed.energy_total(),
             road.horizon, implied);
}

json point(double x, double y) { return json::array({x, y}); }

void write_simulation(const RunConfig& cfg, const Trajectory& traj,
                      const std::filesystem::path& dir)
{
  const Provenance prov = provenance_of(cfg);
  const std::size_t n = traj.size();
  const PhysicalParams& p = cfg.physical;

  std::array<std::vector<double>, 6> q;
  std::vector<double> ye1(n), ye2(n), ye1_dot(n), ye2_dot(n);
  std::vector<double> x2_dot(n), y2_dot(n);
  for (auto& col : q) {
    col.resize(n);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const State::Vector v = traj.states[k].to_vector();
    for (int i = 0; i < 6; ++i) {
      q[i][k] = v[i];
    }
    const ExcitationSample& e = traj.excitation[k];
    ye1[k] = e.ye1;
    ye2[k] = e.ye2;
    ye1_dot[k] = e.ye1_dot;
    ye2_dot[k] = e.ye2_dot;
    const TowerPosition vel = tower_velocity(p, traj.states[k]);
    x2_dot[k] = vel.x2;
    y2_dot[k] = vel.y2;
  }

  const std::vector<CsvColumn> trajectory{
      {"t", traj.time},       {"y1", q[0]},       {"phi1", q[1]},
      {"phi2", q[2]},         {"y1_dot", q[3]},   {"phi1_dot", q[4]},
      {"phi2_dot", q[5]},     {"x2", traj.x2},    {"y2", traj.y2},
      {"ye1", ye1},           {"ye2", ye2}};
  write_csv(dir / "trajectory.csv", trajectory, prov);

  const std::vector<CsvColumn> excitation{{"t", traj.time},
                                          {"ye1", ye1},
                                          {"ye2", ye2},
                                          {"ye1_dot", ye1_dot},
                                          {"ye2_dot", ye2_dot}};
  write_csv(dir / "excitation.csv", excitation, prov);

  const std::vector<CsvColumn> phase{
      {"t", traj.time},      {"x2", traj.x2},     {"x2_dot", x2_dot},
      {"y2", traj.y2},       {"y2_dot", y2_dot},  {"y1", q[0]},
      {"y1_dot", q[3]},      {"phi1", q[1]},      {"phi1_dot", q[4]},
      {"phi2", q[2]},        {"phi2_dot", q[5]}};
  write_csv(dir / "phase_space.csv", phase, prov);

  // Animation geometry in the vertical transverse plane: tire contact
  // points, trailer beam ends, articulation point and tower tip.
  std::vector<json> frames;
  for (std::size_t k = 0; k < n; k += cfg.simulate.frame_stride) {
    const State& s = traj.states[k];
    const double c1 = std::cos(s.phi1);
    const double s1 = std::sin(s.phi1);
    const double jx = -p.L1 * s1;
    const double jy = s.y1 + p.L1 * c1;
    json f;
    f["t"] = traj.time[k];
    f["tire_left"] = point(-p.B1, ye1[k]);
    f["tire_right"] = point(p.B2, ye2[k]);
    f["trailer"] = json::array(
        {point(-p.B1 * c1, s.y1 - p.B1 * s1), point(p.B2 * c1, s.y1 + p.B2 * s1)});
    f["trailer_cg"] = point(0.0, s.y1);
    f["tower"] = json::array({point(jx, jy), point(traj.x2[k], traj.y2[k])});
    frames.push_back(std::move(f));
  }
  write_ndjson(dir / "frames.ndjson", frames, prov);
}

std::vector<double> column_at(const std::vector<std::vector<double>>& rows,
                              std::size_t k)
{
  std::vector<double> out(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    out[j] = rows[j][k];
  }
  return out;
}

}  // namespace

EquilibriumReport cmd_equilibrium(const RunConfig& cfg, std::ostream& out)
{
  EquilibriumReport rep;
  rep.state = static_equilibrium(cfg.physical);
  rep.residual = rhs(cfg.physical, rep.state, ExcitationSample{}).norm();
  fmt::print(out, "static equilibrium (level tires)\n");
  fmt::print(out, "  y1       = {:.10g} m\n", rep.state.y1);
  fmt::print(out, "  phi1     = {:.10g} rad\n", rep.state.phi1);
  fmt::print(out, "  phi2     = {:.10g} rad\n", rep.state.phi2);
  fmt::print(out, "  velocities = 0\n");
  fmt::print(out, "  |rhs|    = {:.3e}  ({})\n", rep.residual,
             rep.ok() ? "ok" : fmt::format("exceeds {:.0e}", kEquilibriumTolerance));
  if (!rep.ok()) {
    // With k1 B1 != k2 B2 the level-tire guess is not a fixed point; show
    // where the vehicle actually settles.
    const State s = loaded_equilibrium(cfg.physical, 0.0, 0.0);
    fmt::print(out, "  settled state: y1 = {:.10g} m, phi1 = {:.10g} rad, phi2 = {:.10g} rad\n",
               s.y1, s.phi1, s.phi2);
  }
  return rep;
}

std::vector<SimulateReport> cmd_simulate(const RunConfig& cfg,
                                         const SweepSpec& sweep,
                                         std::ostream& log)
{
  std::vector<double> a_values = sweep.a_corr;
  std::vector<double> v_values = sweep.v_kmh;
  const bool sweeping = !a_values.empty() || !v_values.empty();
  if (a_values.empty()) {
    a_values.push_back(cfg.road.a_corr);
  }
  if (v_values.empty()) {
    v_values.push_back(cfg.road.v * 3.6);
  }

  write_config_echo(cfg, cfg.output_dir);
  log_truncation(cfg.road, log);
  std::vector<SimulateReport> reports;
  for (double a : a_values) {
    for (double v : v_values) {
      RunConfig run = cfg;
      run.road.a_corr = a;
      run.road.v = v / 3.6;
      run.validate();

      std::filesystem::path dir = cfg.output_dir;
      if (sweeping) {
        std::string name;
        if (!sweep.a_corr.empty()) {
          name += "a_corr_" + tag_number(a);
        }
        if (!sweep.v_kmh.empty()) {
          name += (name.empty() ? "" : "_") + std::string("v_kmh_") + tag_number(v);
        }
        dir /= name;
        write_config_echo(run, dir);
      }

      const Trajectory traj =
          run_single(run, run.simulate.realization_index, initial_state(run));
      write_simulation(run, traj, dir);

      SimulateReport rep{dir, a, v, traj.size(), traj.stats};
      fmt::print(log, "simulate a_corr={} m v={} km/h: {} rows, {} steps ({} rejected) -> {}\n",
                 a, v, rep.rows, rep.stats.accepted, rep.stats.rejected,
                 dir.string());
      reports.push_back(rep);
    }
  }
  return reports;
}

EnsembleReport cmd_ensemble(const RunConfig& cfg, unsigned threads,
                            std::ostream& log)
{
  const Provenance prov = provenance_of(cfg);
  const std::filesystem::path& dir = cfg.output_dir;
  write_config_echo(cfg, dir);

  fmt::print(log, "ensemble: {} realizations, seed {}\n", cfg.n_s, cfg.master_seed);
  log_truncation(cfg.road, log);
  const Ensemble ens = run_ensemble(cfg.ensemble(threads));

  EnsembleReport rep;
  rep.realizations = ens.size();
  rep.failures = cfg.n_s - ens.size();

  std::vector<json> records;
  for (const RealizationRecord& r : ens.records) {
    json j;
    j["index"] = r.index;
    j["master_seed"] = r.seed.master_seed;
    j["realization_index"] = r.seed.realization_index;
    j["failed"] = r.failed;
    if (r.failed) {
      j["failure"] = r.failure;
      j["failure_time"] = r.failure_time;
    } else {
      j["conv_integral"] = r.conv_integral;
      j["accepted_steps"] = r.stats.accepted;
      j["rejected_steps"] = r.stats.rejected;
    }
    records.push_back(std::move(j));
  }
  write_ndjson(dir / "realizations.ndjson", records, prov);
  if (ens.size() == 0) {
    fmt::print(log, "ensemble: every realization failed\n");
    return rep;
  }

  // Pointwise moments of every channel, streamed during the run.
  {
    std::vector<std::vector<double>> cols;
    std::vector<std::string> names;
    for (Channel c : kAllChannels) {
      const MomentSeries& m = ens.moments[static_cast<std::size_t>(c)];
      cols.push_back(m.mean);
      cols.push_back(m.std_dev());
      names.push_back(fmt::format("{}_mean", channel_name(c)));
      names.push_back(fmt::format("{}_std", channel_name(c)));
    }
    std::vector<CsvColumn> columns{{"t", ens.time}};
    for (std::size_t i = 0; i < cols.size(); ++i) {
      columns.push_back({names[i], cols[i]});
    }
    write_csv(dir / "ensemble_summary.csv", columns, prov);
  }

  const double confidence = cfg.analysis.confidence;
  for (Channel c : kAllChannels) {
    if (!ens.has_channel(c)) {
      continue;
    }
    const BandStatistics band = ensemble_statistics(ens, c, confidence);
    if (c == Channel::x2) {
      rep.envelope_coverage = envelope_coverage(band, ens.series(c));
    }
    const std::vector<CsvColumn> columns{{"t", band.time},
                                         {"mean", band.mean},
                                         {"std", band.std},
                                         {"lo", band.lower},
                                         {"hi", band.upper}};
    write_csv(dir / fmt::format("band_{}.csv", channel_name(c)), columns, prov);
  }

  const double fraction = cfg.analysis.large_vibration_fraction;
  rep.probability =
      cfg.analysis.probability_estimator == ProbabilityEstimator::kde
          ? large_vibration_probability_kde(ens, fraction)
          : large_vibration_probability(ens, fraction);
  {
    const std::vector<CsvColumn> columns{{"t", rep.probability.time},
                                         {"P", rep.probability.probability}};
    write_csv(dir / "probability.csv", columns, prov);
  }

  // Normalized x2 densities at the requested instants (nearest grid point)
  // and averaged over the run.
  json pdf_meta = json::array();
  if (ens.size() >= 30) {
    std::vector<double> x, density, tag;
    const double t0 = ens.time.front();
    const double dt = cfg.integ.dt_out;
    for (double ti : cfg.analysis.pdf_instants) {
      const double kk = std::round((ti - t0) / dt);
      if (kk < 0.0 || kk >= static_cast<double>(ens.time.size())) {
        fmt::print(log, "pdf instant {} s outside the grid, skipped\n", ti);
        continue;
      }
      const auto k = static_cast<std::size_t>(kk);
      const auto samples = column_at(ens.series(Channel::x2), k);
      PdfEstimate pdf;
      try {
        pdf = pdf_estimate(samples, true, tag_number(ens.time[k]));
      } catch (const AnalysisError& e) {
        fmt::print(log, "pdf at {} s skipped: {}\n", ti, e.what());
        continue;
      }
      x.insert(x.end(), pdf.abscissa.begin(), pdf.abscissa.end());
      density.insert(density.end(), pdf.density.begin(), pdf.density.end());
      tag.insert(tag.end(), pdf.abscissa.size(), ens.time[k]);
      pdf_meta.push_back({{"t", ens.time[k]},
                          {"mean", pdf.sample_mean},
                          {"std", pdf.sample_std},
                          {"bandwidth", pdf.bandwidth}});
    }
    const std::vector<CsvColumn> columns{{"x", x}, {"density", density}, {"t_tag", tag}};
    write_csv(dir / "pdfs.csv", columns, prov);

    // Every tenth grid point (100 Hz at the default grid) keeps the
    // time-averaged estimate cheap without changing its shape.
    const PdfEstimate avg = time_averaged_pdf(ens, Channel::x2, 10);
    const std::vector<CsvColumn> avg_cols{{"x", avg.abscissa}, {"density", avg.density}};
    write_csv(dir / "pdf_time_averaged.csv", avg_cols, prov);
  } else {
    fmt::print(log, "fewer than 30 realizations: PDFs skipped\n");
  }

  {
    std::vector<double> n(ens.conv_curve.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
      n[i] = static_cast<double>(i + 1);
    }
    const std::vector<CsvColumn> columns{{"n", n}, {"conv", ens.conv_curve}};
    write_csv(dir / "conv.csv", columns, prov);
  }
  for (std::size_t n : cfg.analysis.conv_checkpoints) {
    if (n >= 1 && n <= ens.size()) {
      rep.conv.push_back({n, conv_metric(ens, n)});
    }
  }

  json summary;
  summary["realizations"] = rep.realizations;
  summary["failures"] = rep.failures;
  summary["threshold_m"] = rep.probability.threshold;
  summary["probability_time_average"] = rep.probability.time_average;
  summary["probability_peak"] = rep.probability.peak;
  summary["x2_envelope_coverage"] = rep.envelope_coverage;
  json conv = json::array();
  for (const ConvPoint& c : rep.conv) {
    conv.push_back({{"n", c.n}, {"conv", c.conv}});
  }
  summary["conv"] = conv;
  summary["pdfs"] = pdf_meta;
  write_json(dir / "ensemble_report.json", summary, prov);

  fmt::print(log, "ensemble: {} ok, {} failed; P time-average {:.4f}, peak {:.4f}\n",
             rep.realizations, rep.failures, rep.probability.time_average,
             rep.probability.peak);
  return rep;
}

RunConfig psd_run_config(const RunConfig& cfg)
{
  RunConfig run = cfg;
  const double horizon = cfg.analysis.psd_horizon;
  if (cfg.road.n_kl) {
    // Keep the highest resolved road frequency: mode spacing scales as 1/T.
    run.road.n_kl = cfg.analysis.psd_n_kl.value_or(static_cast<std::size_t>(
        std::llround(static_cast<double>(*cfg.road.n_kl) * horizon / cfg.road.horizon)));
  }
  run.road.horizon = horizon;
  run.integ.t0 = 0.0;
  run.integ.tf = horizon;
  run.validate();
  return run;
}

PsdReport cmd_psd(const RunConfig& cfg, std::ostream& log)
{
  const double seg = cfg.analysis.psd_segment;
  const double horizon = cfg.analysis.psd_horizon;
  if (seg > horizon || 2.0 * seg > horizon) {
    throw ConfigError(fmt::format(
        "psd: segment of {} s needs a horizon of at least {} s (have {} s)", seg,
        2.0 * seg, horizon));
  }
  const RunConfig run = psd_run_config(cfg);
  const Provenance prov = provenance_of(cfg);
  write_config_echo(cfg, cfg.output_dir);

  PsdReport rep;
  rep.horizon = horizon;
  fmt::print(log, "psd: {} s realization {}\n", horizon, cfg.analysis.psd_realization);
  const Trajectory traj = run_single(run, cfg.analysis.psd_realization,
                                     static_equilibrium(run.physical), &rep.modes);
  const double fs = 1.0 / run.integ.dt_out;
  rep.psd = psd_periodogram(traj.x2, fs, seg);
  rep.fit = spectral_slope(rep.psd, cfg.analysis.slope_band_lo,
                           cfg.analysis.slope_band_hi);

  const std::vector<CsvColumn> columns{{"f", rep.psd.freqs}, {"power", rep.psd.power}};
  write_csv(cfg.output_dir / "psd.csv", columns, prov);

  json slope;
  slope["channel"] = "x2";
  slope["slope"] = rep.fit.slope;
  slope["intercept"] = rep.fit.intercept;
  slope["r_squared"] = rep.fit.r_squared;
  slope["bins"] = rep.fit.bins;
  slope["band_hz"] = {cfg.analysis.slope_band_lo, cfg.analysis.slope_band_hi};
  slope["horizon_s"] = horizon;
  slope["segment_s"] = rep.psd.segment_length;
  slope["segments"] = rep.psd.n_segments;
  slope["window"] = rep.psd.window;
  slope["modes"] = rep.modes;
  write_json(cfg.output_dir / "slope.json", slope, prov);

  fmt::print(log, "psd: slope {:.3f} over [{}, {}] Hz (r^2 {:.3f}, {} bins, {} modes)\n",
             rep.fit.slope, cfg.analysis.slope_band_lo, cfg.analysis.slope_band_hi,
             rep.fit.r_squared, rep.fit.bins, rep.modes);
  return rep;
}

}  // namespace sprayer
