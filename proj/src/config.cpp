#include "sprayer/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace sprayer {

using json = nlohmann::ordered_json;

namespace {

const char* name_of(InitialState s)
{
  return s == InitialState::static_equilibrium ? "static" : "loaded";
}

const char* name_of(ProbabilityEstimator e)
{
  return e == ProbabilityEstimator::count ? "count" : "kde";
}

const char* name_of(FailurePolicy f)
{
  return f == FailurePolicy::abort ? "abort" : "record";
}

const char* name_of(RoadSampling r)
{
  return r == RoadSampling::exact ? "exact" : "tabulated";
}

// Reads fields out of one JSON object and remembers which keys were used,
// so leftovers can be reported as unknown.
class Section
{
public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
  {
    if (!obj_.is_object()) {
      throw ConfigError(fmt::format("{}: expected an object", where()));
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  template <class T>
  void get(const char* key, T& out)
  {
    if (!obj_.contains(key)) {
      return;
    }
    used_.insert(key);
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) {
          throw ConfigError("expected a boolean");
        }
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
          throw ConfigError("expected an integer");
        }
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() &&
              v.template get<std::int64_t>() < 0) {
            throw ConfigError("expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) {
          throw ConfigError("expected a number");
        }
      }
      out = v.template get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where(), key, e.what()));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where(), key, e.what()));
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out)
  {
    if (!obj_.contains(key)) {
      return;
    }
    if (obj_.at(key).is_null()) {
      used_.insert(key);
      out.reset();
      return;
    }
    T tmp{};
    get(key, tmp);
    out = tmp;
  }

  template <class E>
  void get_enum(const char* key, E& out, std::initializer_list<E> options)
  {
    std::string s;
    if (!obj_.contains(key)) {
      return;
    }
    get(key, s);
    for (E e : options) {
      if (s == name_of(e)) {
        out = e;
        return;
      }
    }
    std::string allowed;
    for (E e : options) {
      allowed += fmt::format("{}'{}'", allowed.empty() ? "" : ", ", name_of(e));
    }
    throw ConfigError(fmt::format("{}.{}: '{}' is not one of {}", where(), key,
                                  s, allowed));
  }

  Section child(const char* key)
  {
    used_.insert(key);
    return Section(obj_.at(key), path_.empty() ? std::string(key)
                                               : fmt::format("{}.{}", path_, key));
  }

  void finish() const
  {
    for (const auto& item : obj_.items()) {
      if (!used_.count(item.key())) {
        throw ConfigError(
            fmt::format("{}: unknown key '{}'", where(), item.key()));
      }
    }
  }

private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void read_physical(Section s, PhysicalParams& p)
{
  s.get("m1", p.m1);
  s.get("m2", p.m2);
  s.get("I1", p.I1);
  s.get("I2", p.I2);
  s.get("L1", p.L1);
  s.get("L2", p.L2);
  s.get("k1", p.k1);
  s.get("k2", p.k2);
  s.get("c1", p.c1);
  s.get("c2", p.c2);
  s.get("B1", p.B1);
  s.get("B2", p.B2);
  s.get("kT", p.kT);
  s.get("cT", p.cT);
  s.get("g_acc", p.g_acc);
  s.finish();
}

void read_road(Section s, RoadParams& r, bool& horizon_given)
{
  s.get("mu1", r.mu1);
  s.get("mu2", r.mu2);
  s.get("sigma1", r.sigma1);
  s.get("sigma2", r.sigma2);
  s.get("a_corr_m", r.a_corr);
  double v_kmh = r.v * 3.6;
  s.get("v_kmh", v_kmh);
  r.v = v_kmh / 3.6;
  if (s.has("tau")) {
    r.n_kl.reset();
    s.get("tau", r.tau);
  }
  if (s.has("N_KL")) {
    s.get("N_KL", r.n_kl);
  }
  horizon_given = s.has("T_s");
  s.get("T_s", r.horizon);
  s.finish();
}

void read_integrator(Section s, IntegratorConfig& c)
{
  s.get("t0_s", c.t0);
  s.get("tf_s", c.tf);
  s.get("dt_out_s", c.dt_out);
  s.get("rel_tol", c.rel_tol);
  s.get("abs_tol", c.abs_tol);
  s.get("dt_min_s", c.dt_min);
  s.get("dt_init_s", c.dt_init);
  s.finish();
}

void read_ensemble(Section s, RunConfig& cfg)
{
  s.get("n_s", cfg.n_s);
  s.get("master_seed", cfg.master_seed);
  s.get("keep_trajectories", cfg.keep_trajectories);
  s.get_enum("failure_policy", cfg.failure_policy,
             {FailurePolicy::abort, FailurePolicy::record});
  s.get_enum("road_sampling", cfg.road_sampling,
             {RoadSampling::exact, RoadSampling::tabulated});
  s.get("table_step_s", cfg.table_step);
  s.finish();
}

void read_simulate(Section s, SimulateConfig& c)
{
  s.get("realization_index", c.realization_index);
  s.get_enum("initial_state", c.initial_state,
             {InitialState::static_equilibrium, InitialState::loaded_equilibrium});
  s.get("frame_stride", c.frame_stride);
  s.finish();
}

void read_analysis(Section s, AnalysisConfig& a)
{
  s.get("large_vibration_fraction", a.large_vibration_fraction);
  s.get_enum("probability_estimator", a.probability_estimator,
             {ProbabilityEstimator::count, ProbabilityEstimator::kde});
  s.get("confidence", a.confidence);
  s.get("pdf_instants_s", a.pdf_instants);
  s.get("conv_checkpoints", a.conv_checkpoints);
  s.get("psd_horizon_s", a.psd_horizon);
  s.get("psd_segment_s", a.psd_segment);
  std::vector<double> band{a.slope_band_lo, a.slope_band_hi};
  s.get("slope_band_hz", band);
  if (band.size() != 2) {
    throw ConfigError("analysis.slope_band_hz: expected [lo, hi]");
  }
  a.slope_band_lo = band[0];
  a.slope_band_hi = band[1];
  s.get("psd_N_KL", a.psd_n_kl);
  s.get("psd_realization", a.psd_realization);
  s.finish();
}

}  // namespace

void RunConfig::validate() const
{
  try {
    physical.validate();
    road.validate();
    integ.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const std::string& what) {
    if (!ok) {
      throw ConfigError(what);
    }
  };
  require(integ.t0 >= 0.0 && integ.tf <= road.horizon * (1.0 + 1e-12),
          fmt::format("integration window [{}, {}] exceeds road horizon T_s = {}",
                      integ.t0, integ.tf, road.horizon));
  require(n_s >= 1, "ensemble.n_s must be >= 1");
  require(!table_step || *table_step > 0.0, "ensemble.table_step_s must be > 0");
  require(simulate.frame_stride >= 1, "simulate.frame_stride must be >= 1");
  const auto& a = analysis;
  require(a.large_vibration_fraction > 0.0,
          "analysis.large_vibration_fraction must be > 0");
  require(a.confidence > 0.0 && a.confidence < 1.0,
          "analysis.confidence must lie in (0, 1)");
  require(a.psd_segment > 0.0 && a.psd_horizon > 0.0,
          "analysis.psd_segment_s and psd_horizon_s must be > 0");
  require(a.slope_band_lo > 0.0 && a.slope_band_hi > a.slope_band_lo,
          "analysis.slope_band_hz needs 0 < lo < hi");
  require(!a.psd_n_kl || *a.psd_n_kl >= 1, "analysis.psd_N_KL must be >= 1");
  for (std::size_t i = 1; i < a.conv_checkpoints.size(); ++i) {
    require(a.conv_checkpoints[i] >= a.conv_checkpoints[i - 1],
            "analysis.conv_checkpoints must be sorted");
  }
}

EnsembleConfig RunConfig::ensemble(unsigned threads) const
{
  EnsembleConfig e;
  e.n_s = n_s;
  e.master_seed = master_seed;
  e.physical = physical;
  e.road = road;
  e.integ = integ;
  e.keep_trajectories = keep_trajectories;
  e.failure_policy = failure_policy;
  e.road_sampling = road_sampling;
  e.table_step = table_step;
  e.threads = threads;
  return e;
}

RunConfig parse_config(const std::string& text)
{
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // The library message already carries "line L, column C".
    throw ConfigError(e.what());
  }

  RunConfig cfg;
  Section root(doc, "");
  bool horizon_given = false;
  if (root.has("physical")) {
    read_physical(root.child("physical"), cfg.physical);
  }
  if (root.has("road")) {
    read_road(root.child("road"), cfg.road, horizon_given);
  }
  if (root.has("integrator")) {
    read_integrator(root.child("integrator"), cfg.integ);
  }
  if (!horizon_given) {
    cfg.road.horizon = cfg.integ.tf;
  }
  if (root.has("ensemble")) {
    read_ensemble(root.child("ensemble"), cfg);
  }
  if (root.has("simulate")) {
    read_simulate(root.child("simulate"), cfg.simulate);
  }
  if (root.has("analysis")) {
    read_analysis(root.child("analysis"), cfg.analysis);
  }
  std::string out = cfg.output_dir.string();
  root.get("output_dir", out);
  cfg.output_dir = out;
  root.finish();

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

json to_json(const RunConfig& cfg)
{
  const PhysicalParams& p = cfg.physical;
  const RoadParams& r = cfg.road;
  const IntegratorConfig& c = cfg.integ;
  const AnalysisConfig& a = cfg.analysis;

  json out;
  out["physical"] = {{"m1", p.m1},   {"m2", p.m2}, {"I1", p.I1}, {"I2", p.I2},
                     {"L1", p.L1},   {"L2", p.L2}, {"k1", p.k1}, {"k2", p.k2},
                     {"c1", p.c1},   {"c2", p.c2}, {"B1", p.B1}, {"B2", p.B2},
                     {"kT", p.kT},   {"cT", p.cT}, {"g_acc", p.g_acc}};
  json road = {{"mu1", r.mu1},           {"mu2", r.mu2},
               {"sigma1", r.sigma1},     {"sigma2", r.sigma2},
               {"a_corr_m", r.a_corr},
               // undo the m/s conversion's last-digit noise
               {"v_kmh", std::round(r.v * 3.6 * 1e9) / 1e9}};
  if (r.n_kl) {
    road["N_KL"] = *r.n_kl;
  } else {
    road["tau"] = *r.tau;
  }
  road["T_s"] = r.horizon;
  out["road"] = road;

  json integ = {{"t0_s", c.t0},         {"tf_s", c.tf},
                {"dt_out_s", c.dt_out}, {"rel_tol", c.rel_tol},
                {"abs_tol", c.abs_tol}, {"dt_min_s", c.dt_min}};
  integ["dt_init_s"] = c.dt_init ? json(*c.dt_init) : json(nullptr);
  out["integrator"] = integ;

  out["ensemble"] = {
      {"n_s", cfg.n_s},
      {"master_seed", cfg.master_seed},
      {"keep_trajectories", cfg.keep_trajectories},
      {"failure_policy", name_of(cfg.failure_policy)},
      {"road_sampling", name_of(cfg.road_sampling)},
      {"table_step_s", cfg.table_step ? json(*cfg.table_step) : json(nullptr)}};
  out["simulate"] = {{"realization_index", cfg.simulate.realization_index},
                     {"initial_state", name_of(cfg.simulate.initial_state)},
                     {"frame_stride", cfg.simulate.frame_stride}};
  out["analysis"] = {
      {"large_vibration_fraction", a.large_vibration_fraction},
      {"probability_estimator", name_of(a.probability_estimator)},
      {"confidence", a.confidence},
      {"pdf_instants_s", a.pdf_instants},
      {"conv_checkpoints", a.conv_checkpoints},
      {"psd_horizon_s", a.psd_horizon},
      {"psd_segment_s", a.psd_segment},
      {"slope_band_hz", {a.slope_band_lo, a.slope_band_hi}},
      {"psd_N_KL", a.psd_n_kl ? json(*a.psd_n_kl) : json(nullptr)},
      {"psd_realization", a.psd_realization}};
  out["output_dir"] = cfg.output_dir.string();
  return out;
}

std::string config_hash(const RunConfig& cfg)
{
  // output_dir only names where files go; leave it out so relocated runs
  // carry the same hash.
  json echo = to_json(cfg);
  echo.erase("output_dir");
  const std::string text = echo.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace sprayer
