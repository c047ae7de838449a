#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "loewner/experiments.hpp"

namespace loewner {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Standard driver corpus: the deterministic finite-energy family plus the
// stochastic kinds used throughout the experiments, with pinned seeds.
// ---------------------------------------------------------------------------
struct CorpusEntry {
  std::string name;
  Json spec;
  DriverPath path;
};

inline std::vector<double> default_piecewise_slopes() { return {1.0, -2.0}; }

inline std::vector<CorpusEntry> build_corpus(const TimeGrid& grid) {
  std::vector<CorpusEntry> out;
  auto add_fe = [&](const std::string& name, const Json& spec) {
    DriverConfig d = parse_driver_config(spec, grid);
    out.push_back({name, spec, d.fe.base});
  };
  auto add_sample = [&](const std::string& name, Json spec) {
    DriverConfig d = parse_driver_config(spec, grid);
    const DriverSample s = sample_driver(d.spec, grid, d.spec.seed);
    out.push_back({name, spec, s.path});
  };
  add_fe("zero", Json{{"kind", "zero"}});
  add_fe("linear_c1", Json{{"kind", "linear"}, {"c", 1.0}});
  add_fe("linear_c2", Json{{"kind", "linear"}, {"c", 2.0}});
  add_fe("piecewise_slope", Json{{"kind", "piecewise"}, {"slopes", default_piecewise_slopes()}});
  add_sample("brownian_k033", Json{{"kind", "brownian"}, {"kappa", 1.0 / 3.0}, {"seed", 11}});
  add_sample("brownian_k100", Json{{"kind", "brownian"}, {"kappa", 1.0}, {"seed", 7}});
  add_sample("brownian_k190", Json{{"kind", "brownian"}, {"kappa", 1.9}, {"seed", 13}});
  add_sample("step_kappa",
             Json{{"kind", "variable_kappa"},
                  {"kappa_steps", Json{{"breaks", {0.0, 0.5}}, {"values", {1.0, 1.9}}}},
                  {"seed", 17}});
  add_sample("ou_l1", Json{{"kind", "ou"}, {"lambda", 1.0}, {"seed", 19}});
  add_sample("h_perturbed",
             Json{{"kind", "h_perturbed"},
                  {"inner", Json{{"kind", "brownian"}, {"kappa", 1.0}, {"seed", 23}}},
                  {"h", Json{{"kind", "linear"}, {"c", 1.0}}},
                  {"seed", 23}});
  add_sample("tpb_p05", Json{{"kind", "functional"}, {"F", "t_pow_p"}, {"p", 0.5}, {"seed", 29}});
  add_sample("tpb_p10", Json{{"kind", "functional"}, {"F", "t_pow_p"}, {"p", 1.0}, {"seed", 31}});
  add_sample("tlog1pb2", Json{{"kind", "functional"}, {"F", "t_log1p_x2"}, {"seed", 37}});
  return out;
}

// The finite-energy members, as drivers with their energy tables.
inline std::vector<std::pair<std::string, FiniteEnergyDriver>> corpus_finite_energy(
    const TimeGrid& grid) {
  std::vector<std::pair<std::string, FiniteEnergyDriver>> out;
  out.emplace_back("zero", make_finite_energy(
                               std::vector<double>(static_cast<std::size_t>(grid.steps), 0.0),
                               grid));
  out.emplace_back("linear_c1", linear_driver(1.0, grid));
  out.emplace_back("linear_c2", linear_driver(2.0, grid));
  std::vector<double> hdot(static_cast<std::size_t>(grid.steps));
  const auto slopes = default_piecewise_slopes();
  for (int i = 0; i < grid.steps; ++i)
    hdot[static_cast<std::size_t>(i)] =
        slopes[std::min(slopes.size() - 1, static_cast<std::size_t>(slopes.size() * i / grid.steps))];
  out.emplace_back("piecewise_slope", make_finite_energy(hdot, grid));
  return out;
}

inline Json write_corpus(const fs::path& dir, const TimeGrid& grid) {
  fs::create_directories(dir);
  auto entries = build_corpus(grid);
  Json manifest;
  manifest["T"] = grid.horizon;
  manifest["n"] = grid.steps;
  manifest["rng"] = kRngTag;
  Json list = Json::array();
  std::string all_bytes;
  for (const auto& e : entries) {
    std::vector<std::string> meta = {"driver=" + e.name, "rng=" + std::string(kRngTag)};
    if (e.spec.contains("seed"))
      meta.push_back("seed=" + std::to_string(e.spec.at("seed").get<std::uint64_t>()));
    const std::string csv = driver_csv(e.path, meta);
    write_file(dir / (e.name + ".csv"), csv);
    all_bytes += e.name + ":" + csv;
    list.push_back(Json{{"name", e.name}, {"file", e.name + ".csv"}, {"spec", e.spec}});
  }
  manifest["drivers"] = list;
  manifest["corpus_hash"] = hex64(fnv1a64(all_bytes));
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Experiment runner. Returns 0 when every enabled check passed, 1 when a
// check failed (reports are still written), and throws ConfigError for
// configuration problems (mapped to exit 2 by the CLI).
// ---------------------------------------------------------------------------
struct RunOptions {
  fs::path out_dir = ".";
  int threads = 1;
  std::uint64_t seed_offset = 0;
  bool strict = false;
};

namespace detail {

inline Json envelope(const ExperimentConfig& c, const RunOptions& opt) {
  Json j;
  j["experiment"] = c.experiment;
  j["config"] = c.canonical();
  j["config_hash"] = c.hash();
  j["rng"] = kRngTag;
  j["seed_offset"] = opt.seed_offset;
  std::string seeds;
  for (int s = 0; s < c.seeds; ++s)
    seeds += std::to_string(c.seed_base + opt.seed_offset + static_cast<std::uint64_t>(s)) + ",";
  j["seed_list_hash"] = hex64(fnv1a64(seeds));
  return j;
}

inline Json report_json(const EstimateReport& r) {
  Json j;
  j["name"] = r.name;
  j["slack"] = r.slack;
  j["gated"] = r.gated;
  if (!r.gate_note.empty()) j["gate_note"] = r.gate_note;
  j["kappa_hat"] = r.kappa_hat;
  j["min_margin"] = r.entries.empty() ? 0.0 : r.min_margin();
  j["pass"] = r.pass();
  Json es = Json::array();
  for (const auto& e : r.entries)
    es.push_back(Json{{"t", e.t}, {"y", e.y}, {"x", e.x},
                      {"lhs", e.lhs}, {"rhs", e.rhs}, {"margin", e.margin}});
  j["entries"] = es;
  return j;
}

// Resolve the driver into one sampled/loaded path per requested seed.
struct ResolvedDriver {
  std::string name;
  bool stochastic = false;
  DriverConfig config;
  DriverPath path_for_seed(const TimeGrid& grid, std::uint64_t seed) const {
    switch (config.mode) {
      case DriverConfig::Mode::deterministic: return config.fe.base;
      case DriverConfig::Mode::file: return read_driver_csv(config.file);
      case DriverConfig::Mode::stochastic: return sample_driver(config.spec, grid, seed).path;
      case DriverConfig::Mode::corpus_fe:
        throw ConfigError("corpus_fe driver is only valid for verify-cm");
    }
    throw ConfigError("unresolved driver");
  }
};

inline ResolvedDriver resolve_driver(const ExperimentConfig& c) {
  ResolvedDriver r;
  r.config = parse_driver_config(c.driver_json, c.grid);
  r.name = r.config.name;
  r.stochastic = r.config.mode == DriverConfig::Mode::stochastic;
  return r;
}

// Diffusivity pinned by the driver description when there is one; gates the
// bracket-Lipschitz hypothesis instead of the upward-noisy sup estimator.
inline double spec_kappa_gate(const DriverConfig& d) {
  if (d.mode != DriverConfig::Mode::stochastic)
    return std::numeric_limits<double>::quiet_NaN();
  switch (d.spec.kind) {
    case DriverSpec::Kind::brownian: return d.spec.kappa;
    case DriverSpec::Kind::variable_kappa: {
      double hi = 0.0;
      for (double v : d.spec.kappa_steps.values) hi = std::max(hi, v);
      return hi;
    }
    case DriverSpec::Kind::functional:
      return d.spec.functional.kappa_bound ? d.spec.functional.kappa_bound(1.0)
                                           : std::numeric_limits<double>::quiet_NaN();
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

inline Decomposition decompose_finite_energy(const FiniteEnergyDriver& h, double t) {
  const int m = h.base.grid.index_of(t);
  std::vector<double> adot(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) adot[j] = h.hdot[static_cast<std::size_t>(m - 1 - j)];
  return loewner::detail::decompose_from_drift(time_reverse(h.base, t), std::move(adot));
}

}  // namespace detail

inline int run_experiment(const ExperimentConfig& c, const RunOptions& opt) {
  fs::create_directories(opt.out_dir);
  const std::string stem = c.experiment + "-" + c.hash();
  Json rep = detail::envelope(c, opt);
  const std::uint64_t seed0 = c.seed_base + opt.seed_offset;
  bool pass = true;

  const auto parts_for = [&](int steps) {
    return PartitionSequence::dyadic(steps, c.partition_levels);
  };
  const auto meta_lines = [&](std::uint64_t seed) {
    return std::vector<std::string>{"config=" + c.hash(), "seed=" + std::to_string(seed),
                                    "rng=" + std::string(kRngTag)};
  };

  if (c.experiment == "gen") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    const DriverPath path = drv.path_for_seed(c.grid, seed0);
    const std::string csv = driver_csv(path, meta_lines(seed0));
    write_file(opt.out_dir / (stem + ".csv"), csv);
    rep["driver"] = drv.name;
    rep["values_hash"] = hex64(fnv1a64(csv));
  } else if (c.experiment == "solve") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    const DriverPath path = drv.path_for_seed(c.grid, seed0);
    std::string csv;
    for (const auto& m : meta_lines(seed0)) csv += "# " + m + "\n";
    csv += "t,z_re,z_im,swallowed,tau,g_re,g_im,f_re,f_im,roundtrip_err\n";
    for (double t : c.ts)
      for (double y : c.ys) {
        const Complex z(0.0, y > 0 ? y : 1.0);
        const ForwardResult fr = forward_point(path, z, t, c.flow);
        Complex f{}, g{};
        double rt = 0.0, tau = 0.0;
        if (fr.swallowed) {
          tau = fr.tau;
        } else {
          g = fr.g;
          f = eval_f(path, g, t, c.flow);
          rt = std::abs(f - z);
        }
        csv += fmt(t) + "," + fmt(z.real()) + "," + fmt(z.imag()) + "," +
               (fr.swallowed ? "1" : "0") + "," + fmt(tau) + "," + fmt(g.real()) + "," +
               fmt(g.imag()) + "," + fmt(f.real()) + "," + fmt(f.imag()) + "," + fmt(rt) + "\n";
      }
    write_file(opt.out_dir / (stem + ".csv"), csv);
  } else if (c.experiment == "trace") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    const DriverPath path = drv.path_for_seed(c.grid, seed0);
    TraceConfig tc = c.trace;
    tc.threads = opt.threads;
    const Trace tr = extract_trace(path, tc, c.flow);
    write_file(opt.out_dir / (stem + ".csv"), trace_csv(tr, meta_lines(seed0)));
    rep["driver"] = drv.name;
    rep["unconverged"] = tr.unconverged_count();
    rep["converged_fraction"] =
        1.0 - static_cast<double>(tr.unconverged_count()) / static_cast<double>(tr.points.size());
    double min_theta_slope = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < tr.points.size(); ++i)
      if (tr.points[i].converged)
        min_theta_slope = std::min(min_theta_slope, tr.points[i].theta_slope);
    rep["min_theta_slope"] = min_theta_slope;  // decay certificate: > -theta wanted
    const ConeReport cone = cone_check(path, c.ys, c.ts, c.flow);
    rep["cone"] = Json{{"gate_ok", cone.gate_ok},
                       {"holder_half_driver", cone.holder_half},
                       {"sigma_hat", cone.gate_ok ? cone.sigma_hat : 0.0},
                       {"c_hat", cone.c_hat},
                       {"upper_ok", cone.gate_ok ? cone.upper_ok : false}};
    if (tr.all_converged()) {
      rep["holder_half"] = holder_half_norm(tr);
      rep["lip_sqrt_reparam"] = sqrt_reparam_lip(tr);
      rep["grid_pvar_1_1"] = pvar_norm(tr, 1.1);
      rep["min_gap_T64"] = simple_curve_check(tr, c.grid.horizon / 64.0);
    } else {
      const auto norms = regularity_norms(tr);
      rep["holder_half"] = norms.holder_half;
      rep["lip_sqrt_reparam"] = norms.lip_sqrt;
      rep["excluded_points"] = norms.excluded;
    }
    if (opt.strict && !tr.all_converged()) pass = false;
    if (c.plots) {
      std::vector<std::vector<Complex>> curves(1);
      for (const auto& p : tr.points) curves[0].push_back(p.gamma);
      write_file(opt.out_dir / (stem + ".svg"),
                 svg::polyline_plot(curves, "trace " + drv.name));
    }
  } else if (c.experiment == "qv") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    const DriverPath path = drv.path_for_seed(c.grid, seed0);
    const QVPath qv = follmer_qv(path.values, c.grid.dt(), parts_for(c.grid.steps));
    rep["driver"] = drv.name;
    rep["kappa_hat"] = qv.kappa_hat;
    Json lv = Json::array();
    for (std::size_t k = 0; k < qv.level_brackets.size(); ++k)
      lv.push_back(Json{{"stride", qv.partitions.strides[k]},
                        {"bracket_T", qv.level_brackets[k].back()}});
    rep["levels"] = lv;
    std::string csv;
    for (const auto& m : meta_lines(seed0)) csv += "# " + m + "\n";
    csv += "t,bracket\n";
    const auto& fin = qv.finest();
    for (int i = 0; i <= c.grid.steps; i += qv.partitions.finest_stride())
      csv += fmt(c.grid.t(i)) + "," + fmt(fin[static_cast<std::size_t>(i)]) + "\n";
    write_file(opt.out_dir / (stem + ".csv"), csv);
    if (c.plots) {
      std::vector<double> finals;
      for (const auto& b : qv.level_brackets) finals.push_back(b.back());
      write_file(opt.out_dir / (stem + ".svg"), svg::ladder(finals, "bracket by level"));
    }
  } else if (c.experiment == "represent") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    const DriverPath path = drv.path_for_seed(c.grid, seed0);
    const double slack = drv.stochastic ? c.gap_tol_stochastic : c.gap_tol_deterministic;
    Json entries = Json::array();
    double max_gap = 0.0;
    std::vector<double> ladder_vals;
    for (double t : c.ts)
      for (double y : c.ys) {
        const RepresentationReport r =
            check_representation(path, Complex(0.0, y), t, parts_for(c.grid.steps), c.flow);
        max_gap = std::max(max_gap, r.gap);
        if (ladder_vals.empty())
          for (double rv : r.rhs_levels) ladder_vals.push_back(std::abs(r.lhs - rv));
        entries.push_back(Json{{"t", t}, {"y", y}, {"lhs", r.lhs}, {"rhs", r.rhs},
                               {"gap", r.gap}, {"m_follmer", r.m_follmer},
                               {"bracket_term", r.bracket_term}, {"gdot_sq", r.gdot_sq},
                               {"follmer_cauchy", r.follmer_cauchy}});
      }
    rep["entries"] = entries;
    rep["max_gap"] = max_gap;
    rep["slack"] = slack;
    pass = max_gap <= slack;
    if (c.plots && !ladder_vals.empty())
      write_file(opt.out_dir / (stem + ".svg"), svg::ladder(ladder_vals, "|lhs-rhs| by level"));
  } else if (c.experiment == "verify-cm") {
    const DriverConfig dc = parse_driver_config(c.driver_json, c.grid);
    std::vector<std::pair<std::string, FiniteEnergyDriver>> drivers;
    if (dc.mode == DriverConfig::Mode::corpus_fe) {
      drivers = corpus_finite_energy(c.grid);
      std::string bytes;
      for (const auto& [name, fe] : drivers) bytes += name + ":" + driver_csv(fe.base);
      rep["corpus_hash"] = hex64(fnv1a64(bytes));
    } else if (dc.mode == DriverConfig::Mode::deterministic) {
      drivers.emplace_back(dc.name, dc.fe);
    } else {
      throw ConfigError("verify-cm needs a finite-energy driver");
    }
    Json all = Json::array();
    double min_margin = std::numeric_limits<double>::infinity();
    std::vector<double> margins;
    for (const auto& [name, fe] : drivers) {
      const CmBoundReport r = check_cm_bound(fe, c.ys, c.ts, c.flow, {1.0, 2.0, 4.0},
                                             c.slack_deterministic);
      Json j;
      j["driver"] = name;
      j["main"] = detail::report_json(r.main);
      j["finer"] = detail::report_json(r.finer);
      all.push_back(j);
      min_margin = std::min({min_margin, r.main.min_margin(), r.finer.min_margin()});
      pass = pass && r.main.pass() && r.finer.pass();
      for (const auto& e : r.main.entries) margins.push_back(e.margin);
    }
    rep["reports"] = all;
    rep["min_margin"] = min_margin;
    std::string csv;
    for (const auto& m : meta_lines(seed0)) csv += "# " + m + "\n";
    csv += "driver,bound,t,y,x,lhs,rhs,margin\n";
    for (const auto& dj : all)
      for (const char* part : {"main", "finer"})
        for (const auto& e : dj.at(part).at("entries"))
          csv += dj.at("driver").get<std::string>() + "," + part + "," +
                 fmt(e.at("t").get<double>()) + "," + fmt(e.at("y").get<double>()) + "," +
                 fmt(e.at("x").get<double>()) + "," + fmt(e.at("lhs").get<double>()) + "," +
                 fmt(e.at("rhs").get<double>()) + "," + fmt(e.at("margin").get<double>()) + "\n";
    write_file(opt.out_dir / (stem + ".csv"), csv);
    if (c.plots)
      write_file(opt.out_dir / (stem + ".svg"), svg::histogram(margins, 24, "cm margins"));
  } else if (c.experiment == "verify-keyest" || c.experiment == "verify-key1") {
    const bool is_key1 = c.experiment == "verify-key1";
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    const double gate = detail::spec_kappa_gate(drv.config);
    const EstimateConstants cs = is_key1 ? constants_for_kappa(c.kappa) : EstimateConstants{};
    const int n_seeds = drv.stochastic ? c.seeds : 1;
    const double slack = drv.stochastic ? c.slack_stochastic : c.slack_deterministic;
    std::vector<double> margins;
    std::vector<Json> rows(static_cast<std::size_t>(n_seeds));
    std::vector<std::vector<double>> row_margins(static_cast<std::size_t>(n_seeds));
    parallel_for(0, n_seeds, opt.threads, [&](int si) {
      const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(si);
      Json entries = Json::array();
      if (is_key1) {
        DriverSample sample;
        if (drv.stochastic) sample = sample_driver(drv.config.spec, c.grid, seed);
        for (double t : c.ts) {
          const Decomposition dec =
              drv.stochastic ? decompose_driver(drv.config.spec, sample, t)
                             : detail::decompose_finite_energy(drv.config.fe, t);
          for (double y : c.ys) {
            const Key1Result r = key1_check(dec, y, cs, parts_for(c.grid.steps), c.flow);
            row_margins[si].push_back(r.margin);
            entries.push_back(Json{{"t", r.t}, {"y", r.y}, {"margin", r.margin},
                                   {"kappa_hat", r.kappa_hat}});
          }
        }
      } else {
        const DriverPath path = drv.path_for_seed(c.grid, seed);
        for (double t : c.ts)
          for (double y : c.ys) {
            const KeyestResult r =
                keyest_check(path, y, t, parts_for(c.grid.steps), c.flow, gate);
            row_margins[si].push_back(r.margin);
            entries.push_back(Json{{"t", r.t}, {"y", r.y}, {"margin", r.margin},
                                   {"kappa_hat", r.kappa_hat}, {"gated", r.gated}});
          }
      }
      rows[si] = Json{{"seed", seed}, {"entries", entries}};
    });
    int ok = 0;
    for (int si = 0; si < n_seeds; ++si) {
      double worst = std::numeric_limits<double>::infinity();
      for (double m : row_margins[si]) {
        worst = std::min(worst, m);
        margins.push_back(m);
      }
      if (worst >= 1.0 - slack) ++ok;
    }
    const double frac = static_cast<double>(ok) / n_seeds;
    rep["samples"] = rows;
    rep["pass_fraction"] = frac;
    rep["slack"] = slack;
    std::string csv;
    for (const auto& m : meta_lines(seed0)) csv += "# " + m + "\n";
    csv += "seed,t,y,margin\n";
    for (int si = 0; si < n_seeds; ++si)
      for (const auto& e : rows[si].at("entries"))
        csv += std::to_string(seed0 + static_cast<std::uint64_t>(si)) + "," +
               fmt(e.at("t").get<double>()) + "," + fmt(e.at("y").get<double>()) + "," +
               fmt(e.at("margin").get<double>()) + "\n";
    write_file(opt.out_dir / (stem + ".csv"), csv);
    pass = drv.stochastic ? frac >= c.pass_fraction : frac == 1.0;
    if (c.plots)
      write_file(opt.out_dir / (stem + ".svg"),
                 svg::histogram(margins, 24, c.experiment + " margins"));
  } else if (c.experiment == "mc-moment") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    if (!drv.stochastic) throw ConfigError("mc-moment needs a stochastic driver");
    const EstimateConstants cs = constants_for_kappa(c.kappa);
    const MomentReport r = mc_moment(drv.config.spec, cs, c.ys, c.ts, c.seeds, c.grid,
                                     parts_for(c.grid.steps), c.flow, opt.threads, seed0);
    Json cells = Json::array();
    bool finite = true;
    for (const auto& cell : r.cells) {
      finite = finite && std::isfinite(cell.mean);
      cells.push_back(Json{{"t", cell.t}, {"y", cell.y}, {"mean", cell.mean}, {"ci", cell.ci},
                           {"proxy_mean", cell.proxy_mean}, {"proxy_ci", cell.proxy_ci}});
    }
    rep["b"] = r.b;
    rep["p"] = r.p;
    rep["count"] = r.count;
    rep["cells"] = cells;
    std::string csv;
    for (const auto& m : meta_lines(seed0)) csv += "# " + m + "\n";
    csv += "t,y,mean,ci,proxy_mean,proxy_ci\n";
    for (const auto& cell : r.cells)
      csv += fmt(cell.t) + "," + fmt(cell.y) + "," + fmt(cell.mean) + "," + fmt(cell.ci) + "," +
             fmt(cell.proxy_mean) + "," + fmt(cell.proxy_ci) + "\n";
    write_file(opt.out_dir / (stem + ".csv"), csv);
    rep["y_ratio"] = r.y_ratio;
    rep["y_ratio_max"] = c.y_ratio_max;
    rep["proxy_ok"] = r.proxy_within(3.0);
    pass = finite && r.proxy_within(3.0) && r.y_ratio < c.y_ratio_max;
  } else if (c.experiment == "momentof-f") {
    const DriverConfig dc = parse_driver_config(c.driver_json, c.grid);
    if (dc.mode != DriverConfig::Mode::stochastic ||
        dc.spec.kind != DriverSpec::Kind::functional)
      throw ConfigError("momentof-f needs a functional driver");
    const FunctionalMomentReport r = check_momentof_f(
        dc.spec.functional, c.alpha, c.grid.horizon, c.grid.steps, c.seeds, opt.threads, seed0);
    rep["alpha"] = r.alpha;
    rep["kappa_eff"] = r.kappa_eff;
    rep["gate_ok"] = r.gate_ok;
    rep["mean"] = r.mean;
    rep["ci"] = r.ci;
    rep["top_decile_share"] = r.top_decile_share;
    Json lad = Json::array();
    for (const auto& [T, mean] : r.horizon_ladder) lad.push_back(Json{{"T", T}, {"mean", mean}});
    rep["horizon_ladder"] = lad;
    pass = r.gate_ok && std::isfinite(r.mean) && r.top_decile_share < 0.5;
  } else if (c.experiment == "tail") {
    const detail::ResolvedDriver drv = detail::resolve_driver(c);
    if (!drv.stochastic) throw ConfigError("tail needs a stochastic driver");
    if (c.grid.dt() > std::ldexp(1.0, -2 * c.tail_m_hi))
      throw ConfigError("tail: grid.n too small for t = y^2 at tail.m_hi");
    const TailReport r = grid_tail_prob(drv.config.spec, c.theta, c.b_target, c.seeds,
                                        c.tail_m_lo, c.tail_m_hi, c.grid, c.flow,
                                        opt.threads, seed0);
    Json lv = Json::array();
    for (const auto& l : r.levels)
      lv.push_back(Json{{"m", l.m}, {"y", l.y}, {"count", l.count}, {"prob", l.prob}});
    rep["levels"] = lv;
    rep["slope"] = r.slope;
    rep["fitted_levels"] = r.fitted_levels;
    std::string csv;
    for (const auto& m : meta_lines(seed0)) csv += "# " + m + "\n";
    csv += "m,y,count,prob\n";
    for (const auto& l : r.levels)
      csv += std::to_string(l.m) + "," + fmt(l.y) + "," + std::to_string(l.count) + "," +
             fmt(l.prob) + "\n";
    write_file(opt.out_dir / (stem + ".csv"), csv);
    pass = r.pass;
  } else if (c.experiment == "continuity") {
    const DriverConfig dc = parse_driver_config(c.driver_json, c.grid);
    if (dc.mode != DriverConfig::Mode::deterministic)
      throw ConfigError("continuity needs a deterministic base driver");
    std::vector<FiniteEnergyDriver> seq;
    for (int k = 0; k < c.continuity_count; ++k) {
      const double slope = c.continuity_slope / static_cast<double>(1 << k);
      std::vector<double> hdot = dc.fe.hdot;
      for (double& v : hdot) v += slope;
      seq.push_back(make_finite_energy(hdot, c.grid));
    }
    TraceConfig tc = c.trace;
    tc.threads = opt.threads;
    const ContinuityTable table =
        continuity_experiment(seq, dc.fe, c.continuity_alpha, c.continuity_eps,
                              c.energy_budget, tc, c.flow);
    rep["refused"] = table.refused;
    rep["energy_sup"] = table.energy_sup;
    Json rows = Json::array();
    for (const auto& r : table.rows)
      rows.push_back(Json{{"driver_gap", r.driver_gap}, {"sup", r.sup_norm},
                          {"holder", r.holder}, {"pvar", r.pvar}});
    rep["rows"] = rows;
    if (table.refused) {
      pass = false;
    } else {
      for (std::size_t k = 1; k < table.rows.size(); ++k) {
        pass = pass && table.rows[k].sup_norm * 1.5 <= table.rows[k - 1].sup_norm;
        pass = pass && table.rows[k].holder * 1.5 <= table.rows[k - 1].holder;
        pass = pass && table.rows[k].pvar * 1.5 <= table.rows[k - 1].pvar;
      }
    }
  } else {
    throw ConfigError("unknown experiment: " + c.experiment);
  }

  rep["pass"] = pass;
  write_file(opt.out_dir / (stem + ".json"), rep.dump(2) + "\n");
  return pass ? 0 : 1;
}

}  // namespace loewner
