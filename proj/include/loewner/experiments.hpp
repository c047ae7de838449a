#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loewner/io.hpp"
#include "loewner/pathint.hpp"
#include "loewner/svg.hpp"
#include "loewner/trace.hpp"
#include "loewner/verify.hpp"

namespace loewner {

// Config problems exit with code 2; failed checks with 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Driver descriptions appearing in experiment configs. Deterministic kinds
// (zero / linear / piecewise) build finite-energy drivers; stochastic kinds
// map onto DriverSpec; "file" loads a driver CSV; "corpus_fe" expands to the
// deterministic part of the standard corpus.
// ---------------------------------------------------------------------------
struct DriverConfig {
  enum class Mode { deterministic, stochastic, file, corpus_fe };
  Mode mode = Mode::deterministic;
  std::string name = "zero";
  Json json;  // canonical form
  FiniteEnergyDriver fe;       // deterministic
  DriverSpec spec;             // stochastic
  std::filesystem::path file;  // file mode
};

namespace detail {

inline double get_num(const Json& j, const std::string& key, double fallback,
                      bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ConfigError("missing field: " + key);
    return fallback;
  }
  if (!j.at(key).is_number()) throw ConfigError("field must be a number: " + key);
  return j.at(key).get<double>();
}

inline FiniteEnergyDriver fe_from_json(const Json& j, const TimeGrid& grid) {
  const std::string kind = j.value("kind", "zero");
  if (kind == "zero")
    return make_finite_energy(std::vector<double>(static_cast<std::size_t>(grid.steps), 0.0), grid);
  if (kind == "linear") return linear_driver(get_num(j, "c", 1.0), grid);
  if (kind == "piecewise") {
    if (!j.contains("slopes") || !j.at("slopes").is_array() || j.at("slopes").empty())
      throw ConfigError("piecewise driver needs a nonempty slopes array");
    const auto slopes = j.at("slopes").get<std::vector<double>>();
    std::vector<double> hdot(static_cast<std::size_t>(grid.steps));
    for (int i = 0; i < grid.steps; ++i) {
      const std::size_t seg = std::min(slopes.size() - 1,
                                       static_cast<std::size_t>(slopes.size() * i / grid.steps));
      hdot[static_cast<std::size_t>(i)] = slopes[seg];
    }
    return make_finite_energy(hdot, grid);
  }
  throw ConfigError("unknown deterministic driver kind: " + kind);
}

}  // namespace detail

inline DriverConfig parse_driver_config(const Json& j, const TimeGrid& grid) {
  DriverConfig d;
  d.json = j;
  // Standalone spec files may carry their grid; it must agree with the
  // experiment grid when both are given.
  if (j.contains("T") && std::abs(detail::get_num(j, "T", grid.horizon) - grid.horizon) >
                             1e-12 * grid.horizon)
    throw ConfigError("driver spec T disagrees with grid.T");
  if (j.contains("n") &&
      static_cast<int>(detail::get_num(j, "n", grid.steps)) != grid.steps)
    throw ConfigError("driver spec n disagrees with grid.n");
  if (j.contains("file")) {
    d.mode = DriverConfig::Mode::file;
    d.file = j.at("file").get<std::string>();
    d.name = d.file.stem().string();
    return d;
  }
  const std::string kind = j.value("kind", "zero");
  d.name = kind;
  if (kind == "corpus_fe") {
    d.mode = DriverConfig::Mode::corpus_fe;
    return d;
  }
  if (kind == "zero" || kind == "linear" || kind == "piecewise") {
    d.mode = DriverConfig::Mode::deterministic;
    d.fe = detail::fe_from_json(j, grid);
    return d;
  }
  d.mode = DriverConfig::Mode::stochastic;
  const std::uint64_t seed = j.value("seed", 1ull);
  if (kind == "brownian") {
    const double kappa = detail::get_num(j, "kappa", 1.0, true);
    if (kappa < 0.0) throw ConfigError("brownian: kappa must be >= 0");
    d.spec = DriverSpec::brownian_spec(kappa, seed);
  } else if (kind == "variable_kappa") {
    if (!j.contains("kappa_steps")) throw ConfigError("variable_kappa: missing kappa_steps");
    StepFunction sf;
    sf.breaks = j.at("kappa_steps").at("breaks").get<std::vector<double>>();
    sf.values = j.at("kappa_steps").at("values").get<std::vector<double>>();
    sf.validate();
    for (double v : sf.values)
      if (v < 0.0) throw ConfigError("variable_kappa: kappa(.) must be >= 0");
    d.spec = DriverSpec::variable_kappa_spec(sf, seed);
  } else if (kind == "ou") {
    const double lambda = detail::get_num(j, "lambda", 1.0, true);
    if (!(lambda > 0.0)) throw ConfigError("ou: lambda must be > 0");
    d.spec = DriverSpec::ou_spec(lambda, seed);
  } else if (kind == "functional") {
    const std::string fname = j.value("F", "");
    if (fname.empty()) throw ConfigError("functional: missing F");
    const double param = detail::get_num(j, fname == "linear" ? "c" : "p", 1.0);
    d.spec = DriverSpec::functional_spec(functional_by_name(fname, param), seed);
  } else if (kind == "h_perturbed") {
    if (!j.contains("inner") || !j.contains("h"))
      throw ConfigError("h_perturbed: needs inner and h");
    DriverConfig inner = parse_driver_config(j.at("inner"), grid);
    if (inner.mode != DriverConfig::Mode::stochastic)
      throw ConfigError("h_perturbed: inner must be stochastic");
    d.spec = DriverSpec::h_perturbed_spec(inner.spec, detail::fe_from_json(j.at("h"), grid));
    d.spec.seed = seed;
  } else {
    throw ConfigError("unknown driver kind: " + kind);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Experiment configuration with all defaults materialized, so the emitted
// report pins every knob that was in effect.
// ---------------------------------------------------------------------------
struct ExperimentConfig {
  std::string experiment;
  TimeGrid grid{1.0, 1 << 12};
  Json driver_json = Json::object();
  FlowConfig flow;
  TraceConfig trace;
  int partition_levels = 0;  // 0: all available
  double kappa = 1.0;
  int seeds = 100;
  std::uint64_t seed_base = 1;
  std::vector<double> ys{1.0, 0.1, 0.01};
  std::vector<double> ts{0.25, 0.5, 1.0};
  double slack_deterministic = 1e-3;
  double slack_stochastic = 5e-2;
  double pass_fraction = 0.95;
  double y_ratio_max = 3.0;
  double gap_tol_deterministic = 1e-4;  // limit-identity tolerance
  double gap_tol_stochastic = 1e-2;
  double alpha = 2.0;             // momentof-f exponent
  double theta = 0.9;             // tail exponent
  double b_target = 2.0;          // tail slope target
  int tail_m_lo = 2, tail_m_hi = 7;
  int continuity_count = 5;       // perturbation ladder length
  double continuity_slope = 1.0;  // base perturbation slope
  double energy_budget = 64.0;
  double continuity_alpha = 0.4;  // Holder exponent of the difference column
  double continuity_eps = 0.1;    // p-variation column uses p = 1 + eps
  bool plots = true;
  std::string out_dir;

  Json canonical() const;
  std::string hash() const { return hex64(fnv1a64(canonical().dump())); }
};

inline Json ExperimentConfig::canonical() const {
  Json j;
  j["experiment"] = experiment;
  j["grid"] = {{"T", grid.horizon}, {"n", grid.steps}};
  j["driver"] = driver_json;
  j["flow"] = {{"scheme", flow.scheme == Scheme::rk4 ? "rk4" : "slit"},
               {"substeps", flow.substeps},
               {"swallow_scale", flow.swallow_scale},
               {"min_im", flow.min_im},
               {"resolve", flow.resolve}};
  j["trace"] = {{"y0", trace.y0},     {"factor", trace.factor}, {"k_max", trace.k_max},
                {"tol", trace.tol},   {"theta", trace.theta}};
  j["partitions"] = {{"levels", partition_levels}};
  j["kappa"] = kappa;
  j["seeds"] = {{"count", seeds}, {"base", seed_base}};
  j["ys"] = ys;
  j["ts"] = ts;
  j["thresholds"] = {{"slack_deterministic", slack_deterministic},
                     {"slack_stochastic", slack_stochastic},
                     {"pass_fraction", pass_fraction},
                     {"y_ratio_max", y_ratio_max},
                     {"gap_tol_deterministic", gap_tol_deterministic},
                     {"gap_tol_stochastic", gap_tol_stochastic}};
  j["alpha"] = alpha;
  j["tail"] = {{"theta", theta}, {"b_target", b_target}, {"m_lo", tail_m_lo}, {"m_hi", tail_m_hi}};
  j["continuity"] = {{"count", continuity_count},
                     {"slope", continuity_slope},
                     {"energy_budget", energy_budget},
                     {"alpha", continuity_alpha},
                     {"eps", continuity_eps}};
  j["plots"] = plots;
  j["rng"] = kRngTag;
  return j;
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "gen",       "solve",         "trace",      "qv",        "represent", "verify-cm",
      "verify-keyest", "verify-key1", "mc-moment", "momentof-f", "tail",     "continuity"};
  return names;
}

inline ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known_fields = {
      "experiment", "grid",  "driver",     "flow", "trace", "partitions",
      "kappa",      "seeds", "ys",         "ts",   "thresholds", "alpha",
      "tail",       "continuity", "plots", "out"};
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    for (const auto& k : known_fields) found = found || k == key;
    if (!found) throw ConfigError("unknown config field: " + key);
  }
  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError("missing field: experiment");
  c.experiment = j.at("experiment").get<std::string>();
  bool known = false;
  for (const auto& n : experiment_names()) known = known || n == c.experiment;
  if (!known) throw ConfigError("unknown experiment: " + c.experiment);

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    const double T = detail::get_num(g, "T", 1.0);
    const double n = detail::get_num(g, "n", 4096);
    if (!(T > 0.0)) throw ConfigError("grid.T must be > 0");
    const int ni = static_cast<int>(n);
    if (ni < 8 || (ni & (ni - 1)) != 0)
      throw ConfigError("grid.n must be a power of two >= 8");
    c.grid = TimeGrid::make(T, ni);
  }
  c.driver_json = j.value("driver", Json::object());
  parse_driver_config(c.driver_json, c.grid);  // validate early

  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    const std::string scheme = f.value("scheme", "rk4");
    if (scheme == "rk4") c.flow.scheme = Scheme::rk4;
    else if (scheme == "slit") c.flow.scheme = Scheme::slit;
    else throw ConfigError("flow.scheme must be rk4 or slit");
    c.flow.substeps = static_cast<int>(detail::get_num(f, "substeps", c.flow.substeps));
    if (c.flow.substeps < 1) throw ConfigError("flow.substeps must be >= 1");
    c.flow.swallow_scale = detail::get_num(f, "swallow_scale", c.flow.swallow_scale);
    if (!(c.flow.swallow_scale > 0.0)) throw ConfigError("flow.swallow_scale must be > 0");
    c.flow.min_im = detail::get_num(f, "min_im", c.flow.min_im);
    c.flow.resolve = detail::get_num(f, "resolve", c.flow.resolve);
    if (!(c.flow.resolve > 0.0)) throw ConfigError("flow.resolve must be > 0");
  }
  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    c.trace.y0 = detail::get_num(t, "y0", c.trace.y0);
    c.trace.factor = detail::get_num(t, "factor", c.trace.factor);
    c.trace.k_max = static_cast<int>(detail::get_num(t, "k_max", c.trace.k_max));
    c.trace.tol = detail::get_num(t, "tol", c.trace.tol);
    c.trace.theta = detail::get_num(t, "theta", c.trace.theta);
    try {
      c.trace.validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("partitions"))
    c.partition_levels = static_cast<int>(detail::get_num(j.at("partitions"), "levels", 0));
  c.kappa = detail::get_num(j, "kappa", c.kappa);
  if (c.experiment == "verify-key1" || c.experiment == "mc-moment") {
    if (!(c.kappa > 0.0 && c.kappa < 2.0)) throw ConfigError("kappa must be < 2 (and > 0)");
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.seeds = static_cast<int>(detail::get_num(s, "count", c.seeds));
    c.seed_base = static_cast<std::uint64_t>(detail::get_num(s, "base", 1));
    if (c.seeds < 1) throw ConfigError("seeds.count must be >= 1");
  }
  if (j.contains("ys")) c.ys = j.at("ys").get<std::vector<double>>();
  if (j.contains("ts")) c.ts = j.at("ts").get<std::vector<double>>();
  for (double y : c.ys)
    if (!(y > 0.0)) throw ConfigError("ys must be positive");
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    c.slack_deterministic = detail::get_num(t, "slack_deterministic", c.slack_deterministic);
    c.slack_stochastic = detail::get_num(t, "slack_stochastic", c.slack_stochastic);
    c.pass_fraction = detail::get_num(t, "pass_fraction", c.pass_fraction);
    c.y_ratio_max = detail::get_num(t, "y_ratio_max", c.y_ratio_max);
    c.gap_tol_deterministic = detail::get_num(t, "gap_tol_deterministic", c.gap_tol_deterministic);
    c.gap_tol_stochastic = detail::get_num(t, "gap_tol_stochastic", c.gap_tol_stochastic);
  }
  c.alpha = detail::get_num(j, "alpha", c.alpha);
  if (j.contains("tail")) {
    const auto& t = j.at("tail");
    c.theta = detail::get_num(t, "theta", c.theta);
    c.b_target = detail::get_num(t, "b_target", c.b_target);
    c.tail_m_lo = static_cast<int>(detail::get_num(t, "m_lo", c.tail_m_lo));
    c.tail_m_hi = static_cast<int>(detail::get_num(t, "m_hi", c.tail_m_hi));
    if (!(c.theta > 0.0 && c.theta < 1.0)) throw ConfigError("tail.theta must be in (0,1)");
    if (c.tail_m_hi < c.tail_m_lo) throw ConfigError("tail.m_hi must be >= m_lo");
  }
  if (j.contains("continuity")) {
    const auto& t = j.at("continuity");
    c.continuity_count = static_cast<int>(detail::get_num(t, "count", c.continuity_count));
    c.continuity_slope = detail::get_num(t, "slope", c.continuity_slope);
    c.energy_budget = detail::get_num(t, "energy_budget", c.energy_budget);
    c.continuity_alpha = detail::get_num(t, "alpha", c.continuity_alpha);
    c.continuity_eps = detail::get_num(t, "eps", c.continuity_eps);
  }
  if (j.contains("plots")) c.plots = j.at("plots").get<bool>();
  if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  return c;
}

}  // namespace loewner
