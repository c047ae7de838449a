#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "loewner/flow.hpp"
#include "loewner/parallel.hpp"

namespace loewner {

// ---------------------------------------------------------------------------
// Trace extraction: gamma_t = lim_{y->0+} f_t(iy + U_t), approached down a
// geometric y-ladder with a Cauchy stopping rule per grid time.
// ---------------------------------------------------------------------------
struct TraceConfig {
  double y0 = 1.0;        // ladder start
  double factor = 0.5;    // geometric decay of the ladder
  int k_max = 20;         // maximum ladder depth
  double tol = 1e-3;      // Cauchy stopping tolerance
  double theta = 0.9;     // decay exponent for the auxiliary certificate
  int threads = 1;

  void validate() const {
    if (!(y0 > 0.0) || !(factor > 0.0 && factor < 1.0) || !(tol > 0.0) ||
        !(theta > 0.0 && theta < 1.0) || k_max < 2)
      throw std::invalid_argument("TraceConfig: invalid parameters");
  }
};

struct TracePoint {
  Complex gamma{};
  bool converged = false;
  int level = 0;        // ladder level at which the Cauchy rule fired
  double gap = 0.0;     // last Cauchy gap
  double v_est = 0.0;   // estimate of v(t, y_stop) = int_0^y |f'| dr
  double fprime = 0.0;  // |f'| at the stopping level
  double theta_slope = 0.0;  // fitted slope of log|f'| vs log y (decay certificate)
};

struct Trace {
  TimeGrid grid;
  std::vector<TracePoint> points;  // size steps+1, gamma_0 = 0
  TraceConfig config;

  int unconverged_count() const {
    int c = 0;
    for (const auto& p : points)
      if (!p.converged) ++c;
    return c;
  }
  bool all_converged() const { return unconverged_count() == 0; }
};

// One ladder row, exposed for diagnostics (Koebe bound, decay fits).
struct LadderRow {
  double y = 0.0;
  Complex f{};
  double fprime = 0.0;
  double v = 0.0;  // running estimate of int_0^y |f'(ir + U_t)| dr
};

namespace detail {

inline TracePoint run_ladder(const DriverPath& u, double t, const TraceConfig& cfg,
                             const FlowConfig& fcfg, std::vector<LadderRow>* rows) {
  TracePoint pt;
  const ReversedDriver beta = time_reverse(u, t);
  std::vector<double> ys, fmods;
  Complex prev{};
  double prev_y = 0.0;
  int stop = -1;
  for (int k = 0; k <= cfg.k_max; ++k) {
    const double y = cfg.y0 * std::pow(cfg.factor, k);
    const BackwardFlow flow = backward_flow(beta, 0.0, y, fcfg);
    const Complex f = flow.endpoint();
    const double fp = std::exp(flow.logfp);
    ys.push_back(y);
    fmods.push_back(fp);
    if (rows) rows->push_back(LadderRow{y, f, fp, 0.0});
    if (k > 0) {
      pt.gap = std::abs(f - prev);
      pt.level = k;
      pt.gamma = f;
      pt.fprime = fp;
      if (pt.gap < cfg.tol) {
        pt.converged = true;
        stop = k;
        break;
      }
    } else {
      pt.gamma = f;
      pt.fprime = fp;
    }
    prev = f;
    prev_y = y;
  }
  (void)prev_y;
  if (stop < 0) stop = static_cast<int>(ys.size()) - 1;

  // v(t, y) estimated by trapezoid down the ladder, with the tail below the
  // deepest level taken as |f'| * y there.
  double v = fmods[static_cast<std::size_t>(stop)] * ys[static_cast<std::size_t>(stop)];
  pt.v_est = v;
  if (rows) {
    auto& rws = *rows;
    rws[static_cast<std::size_t>(stop)].v = v;
    for (int k = stop - 1; k >= 0; --k) {
      v += 0.5 * (fmods[k] + fmods[k + 1]) * (ys[k] - ys[k + 1]);
      rws[static_cast<std::size_t>(k)].v = v;
    }
  }

  // Least-squares slope of log|f'| against log y over the ladder.
  const std::size_t n = ys.size();
  if (n >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double lx = std::log(ys[k]);
      const double ly = std::log(std::max(fmods[k], 1e-300));
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    pt.theta_slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  }
  return pt;
}

inline double holder_norm(const std::vector<Complex>& g, const std::vector<double>& t,
                          double alpha) {
  double sup = 0.0;
  for (std::size_t j = 1; j < g.size(); ++j)
    for (std::size_t i = 0; i < j; ++i)
      sup = std::max(sup, std::abs(g[j] - g[i]) / std::pow(t[j] - t[i], alpha));
  return sup;
}

}  // namespace detail

inline Trace extract_trace(const DriverPath& u, const TraceConfig& cfg,
                           const FlowConfig& fcfg) {
  cfg.validate();
  u.validate();
  Trace tr;
  tr.grid = u.grid;
  tr.config = cfg;
  tr.points.resize(static_cast<std::size_t>(u.grid.steps) + 1);
  tr.points[0] = TracePoint{Complex(0.0, 0.0), true, 0, 0.0, 0.0, 1.0, 0.0};
  parallel_for(1, u.grid.steps + 1, cfg.threads, [&](int i) {
    tr.points[static_cast<std::size_t>(i)] =
        detail::run_ladder(u, u.grid.t(i), cfg, fcfg, nullptr);
  });
  return tr;
}

// Full ladder table at one grid time, for Koebe / decay diagnostics.
inline std::vector<LadderRow> trace_ladder(const DriverPath& u, double t,
                                           const TraceConfig& cfg, const FlowConfig& fcfg) {
  std::vector<LadderRow> rows;
  detail::run_ladder(u, t, cfg, fcfg, &rows);
  return rows;
}

namespace detail {

inline void require_converged(const Trace& tr, const char* who) {
  if (!tr.all_converged())
    throw std::invalid_argument(std::string(who) + ": trace has unconverged points");
}

}  // namespace detail

// sup |gamma_t - gamma_s| / sqrt(t-s) over all grid pairs.
inline double holder_half_norm(const Trace& tr) {
  detail::require_converged(tr, "holder_half_norm");
  double sup = 0.0;
  const int n = tr.grid.steps;
  for (int j = 1; j <= n; ++j)
    for (int i = 0; i < j; ++i)
      sup = std::max(sup, std::abs(tr.points[j].gamma - tr.points[i].gamma) /
                              std::sqrt(tr.grid.t(j) - tr.grid.t(i)));
  return sup;
}

// Lipschitz constant of t -> gamma(t^2), evaluated on the sampled times.
inline double sqrt_reparam_lip(const Trace& tr) {
  detail::require_converged(tr, "sqrt_reparam_lip");
  double sup = 0.0;
  const int n = tr.grid.steps;
  for (int j = 1; j <= n; ++j)
    for (int i = 0; i < j; ++i)
      sup = std::max(sup, std::abs(tr.points[j].gamma - tr.points[i].gamma) /
                              (std::sqrt(tr.grid.t(j)) - std::sqrt(tr.grid.t(i))));
  return sup;
}

// Grid p-variation: exact on the sampled points (dynamic program over the
// last retained point). This lower-bounds the true p-variation.
inline double pvar_norm(const Trace& tr, double p) {
  detail::require_converged(tr, "pvar_norm");
  if (!(p >= 1.0)) throw std::invalid_argument("pvar_norm: p must be >= 1");
  const int n = tr.grid.steps;
  std::vector<double> best(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    double b = 0.0;
    for (int i = 0; i < j; ++i)
      b = std::max(b, best[i] + std::pow(std::abs(tr.points[j].gamma - tr.points[i].gamma), p));
    best[j] = b;
  }
  return std::pow(best[n], 1.0 / p);
}

// Norms over the converged subset: unconverged points are excluded and the
// exclusion count reported, for traces where the Cauchy rule ran out of
// ladder at a few times.
struct RegularityNorms {
  double holder_half = 0.0;
  double lip_sqrt = 0.0;
  int excluded = 0;
};

inline RegularityNorms regularity_norms(const Trace& tr) {
  RegularityNorms out;
  out.excluded = tr.unconverged_count();
  const int n = tr.grid.steps;
  for (int j = 1; j <= n; ++j) {
    if (!tr.points[j].converged) continue;
    for (int i = 0; i < j; ++i) {
      if (!tr.points[i].converged) continue;
      const double d = std::abs(tr.points[j].gamma - tr.points[i].gamma);
      out.holder_half = std::max(out.holder_half, d / std::sqrt(tr.grid.t(j) - tr.grid.t(i)));
      out.lip_sqrt =
          std::max(out.lip_sqrt, d / (std::sqrt(tr.grid.t(j)) - std::sqrt(tr.grid.t(i))));
    }
  }
  return out;
}

// Grid 1/2-Holder norm of a scalar driver (gate for the cone estimate).
inline double driver_holder_half(const DriverPath& u) {
  double sup = 0.0;
  const int n = u.grid.steps;
  for (int j = 1; j <= n; ++j)
    for (int i = 0; i < j; ++i)
      sup = std::max(sup, std::abs(u.values[j] - u.values[i]) /
                              std::sqrt(u.grid.t(j) - u.grid.t(i)));
  return sup;
}

// ---------------------------------------------------------------------------
// Cone containment: sigma sqrt(t) <= Im f_t(iy + U_t) <= sqrt(y^2 + 4t),
// |Re f_t(iy + U_t)| <= c sqrt(t), fitted on a (t, y) matrix. Requires the
// driver's 1/2-Holder norm below 4; otherwise the check is reported skipped.
// ---------------------------------------------------------------------------
struct ConeReport {
  bool gate_ok = false;
  double holder_half = 0.0;
  bool upper_ok = false;      // Y_t <= sqrt(y^2+4t) with multiplicative slack
  double upper_slack = 1e-9;
  double sigma_hat = 0.0;     // inf Im f / sqrt(t)
  double c_hat = 0.0;         // sup |Re f| / sqrt(t)
  struct Entry { double t, y, re, im; };
  std::vector<Entry> entries;
};

inline ConeReport cone_check(const DriverPath& u, const std::vector<double>& ys,
                             const std::vector<double>& ts, const FlowConfig& fcfg) {
  ConeReport rep;
  rep.holder_half = driver_holder_half(u);
  rep.gate_ok = rep.holder_half < 4.0;
  if (!rep.gate_ok) return rep;  // hypothesis of the estimate fails; skip
  rep.upper_ok = true;
  rep.sigma_hat = std::numeric_limits<double>::infinity();
  for (double t : ts) {
    const ReversedDriver beta = time_reverse(u, t);
    for (double y : ys) {
      const BackwardFlow flow = backward_flow(beta, 0.0, y, fcfg);
      const double X = flow.X.back(), Y = flow.Y.back();
      rep.entries.push_back({t, y, X, Y});
      if (Y > std::sqrt(y * y + 4.0 * t) * (1.0 + rep.upper_slack)) rep.upper_ok = false;
      rep.sigma_hat = std::min(rep.sigma_hat, Y / std::sqrt(t));
      rep.c_hat = std::max(rep.c_hat, std::abs(X) / std::sqrt(t));
    }
  }
  return rep;
}

// Separated self-distance screen: min |gamma_t - gamma_s| over |t-s| >= s0.
inline double simple_curve_check(const Trace& tr, double s0) {
  detail::require_converged(tr, "simple_curve_check");
  double min_gap = std::numeric_limits<double>::infinity();
  const int n = tr.grid.steps;
  for (int j = 1; j <= n; ++j)
    for (int i = 0; i < j; ++i)
      if (tr.grid.t(j) - tr.grid.t(i) >= s0)
        min_gap = std::min(min_gap, std::abs(tr.points[j].gamma - tr.points[i].gamma));
  return min_gap;
}

// ---------------------------------------------------------------------------
// Continuity of the driver-to-trace map along a sequence U^n -> U with
// uniformly bounded energy. Columns converge to zero; each should shrink by
// a configured factor per halving of the driver perturbation.
// ---------------------------------------------------------------------------
struct ContinuityTable {
  bool refused = false;  // energy budget violated: hypothesis fails
  double energy_sup = 0.0;
  struct Row {
    double driver_gap = 0.0;  // ||U^n - U||_inf
    double sup_norm = 0.0;    // ||gamma^n - gamma||_inf
    double holder = 0.0;      // ||gamma^n - gamma||_alpha
    double pvar = 0.0;        // (1+eps)-variation of the difference
  };
  std::vector<Row> rows;
};

inline ContinuityTable continuity_experiment(const std::vector<FiniteEnergyDriver>& useq,
                                             const FiniteEnergyDriver& ulim, double alpha,
                                             double eps, double energy_budget,
                                             const TraceConfig& tcfg, const FlowConfig& fcfg) {
  ContinuityTable table;
  table.energy_sup = ulim.norm_sq();
  for (const auto& un : useq) table.energy_sup = std::max(table.energy_sup, un.norm_sq());
  if (table.energy_sup > energy_budget) {
    table.refused = true;  // the continuity statement assumes bounded energy
    return table;
  }
  const Trace base = extract_trace(ulim.base, tcfg, fcfg);
  const int n = base.grid.steps;
  std::vector<double> times(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) times[i] = base.grid.t(i);
  for (const auto& un : useq) {
    const Trace tn = extract_trace(un.base, tcfg, fcfg);
    ContinuityTable::Row row;
    for (int i = 0; i <= n; ++i)
      row.driver_gap = std::max(row.driver_gap,
                                std::abs(un.base.values[i] - ulim.base.values[i]));
    std::vector<Complex> diff(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) diff[i] = tn.points[i].gamma - base.points[i].gamma;
    for (const auto& d : diff) row.sup_norm = std::max(row.sup_norm, std::abs(d));
    row.holder = detail::holder_norm(diff, times, alpha);
    // Exact grid p-variation of the difference path, p = 1 + eps.
    const double p = 1.0 + eps;
    std::vector<double> best(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = 1; j <= n; ++j) {
      double b = 0.0;
      for (int i = 0; i < j; ++i)
        b = std::max(b, best[i] + std::pow(std::abs(diff[j] - diff[i]), p));
      best[j] = b;
    }
    row.pvar = std::pow(best[n], 1.0 / p);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace loewner
