#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "loewner/drivers.hpp"
#include "loewner/flow.hpp"
#include "loewner/parallel.hpp"
#include "loewner/pathint.hpp"

namespace loewner {

// ---------------------------------------------------------------------------
// Constants for the power estimate, kappa < 2. The closed-form choice
//   eps = (2-kappa)/4, c_eps = (1-eps)/kappa + 1/2, b = 1 + c_eps,
//   p = 2 c_eps / b
// closes the reduction chain with equality at the p-step (p b^2/2 = b c_eps)
// and degenerates exactly at kappa = 2 (b -> 2, p -> 1, eps -> 0).
// ---------------------------------------------------------------------------
struct EstimateConstants {
  double kappa = 0.0;
  double c0 = 0.0;     // 1/2 + 1/kappa
  double eps = 0.0;
  double c_eps = 0.0;
  double b = 0.0;
  double p = 0.0;
};

inline EstimateConstants constants_for_kappa(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
  if (!(kappa < 2.0)) throw std::invalid_argument("kappa must be < 2");
  EstimateConstants c;
  c.kappa = kappa;
  c.c0 = 0.5 + 1.0 / kappa;
  c.eps = (2.0 - kappa) / 4.0;
  c.c_eps = (1.0 - c.eps) / kappa + 0.5;
  c.b = 1.0 + c.c_eps;
  c.p = 2.0 * c.c_eps / c.b;
  if (!(c.b > 2.0) || !(c.p > 1.0) || !(c.eps > 0.0) ||
      std::abs(c.p * c.b / 2.0 - c.c_eps) > 1e-12 * c.c_eps ||
      c.c_eps > (1.0 - c.eps) / kappa + 0.5 + 1e-12)
    throw std::logic_error("constants_for_kappa: invariant chain failed");
  return c;
}

// ---------------------------------------------------------------------------
// Inequality reports: one row per evaluated point, margin = RHS/LHS, pass
// when the minimum margin stays above 1 - slack.
// ---------------------------------------------------------------------------
struct EstimateEntry {
  double t = 0.0, y = 0.0, x = 0.0;
  double lhs = 0.0, rhs = 0.0, margin = 0.0;
};

struct EstimateReport {
  std::string name;
  double slack = 1e-3;
  bool gated = false;        // hypothesis of the estimate failed; margins kept
  std::string gate_note;
  double kappa_hat = 0.0;
  std::vector<EstimateEntry> entries;

  double min_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) m = std::min(m, e.margin);
    return m;
  }
  bool pass() const { return !entries.empty() && min_margin() >= 1.0 - slack; }
};

// ---------------------------------------------------------------------------
// Finite-energy derivative bound |f'_t(iy+U_t)| <= exp(||U||_t^2 / 4) and the
// finer x-dependent bound (y/Y_t)(1 + x^2/y^2) exp(||U||_t^2 / 4) on cone rays.
// ---------------------------------------------------------------------------
struct CmBoundReport {
  EstimateReport main;
  EstimateReport finer;
};

inline CmBoundReport check_cm_bound(const FiniteEnergyDriver& h, const std::vector<double>& ys,
                                    const std::vector<double>& ts, const FlowConfig& cfg,
                                    const std::vector<double>& cone_rays = {1.0, 2.0, 4.0},
                                    double slack = 1e-3) {
  CmBoundReport rep;
  rep.main.name = "cm_bound";
  rep.finer.name = "cm_bound_finer";
  rep.main.slack = rep.finer.slack = slack;
  for (double t : ts) {
    const ReversedDriver beta = time_reverse(h.base, t);
    const double energy = cm_norm_sq(h, beta.anchor);
    const double rhs0 = std::exp(0.25 * energy);
    for (double y : ys) {
      const BackwardFlow f0 = backward_flow(beta, 0.0, y, cfg);
      rep.main.entries.push_back({beta.anchor, y, 0.0, std::exp(f0.logfp), rhs0,
                                  rhs0 / std::exp(f0.logfp)});
      for (double ray : cone_rays) {
        const double x = ray * y;
        const BackwardFlow fx = backward_flow(beta, x, y, cfg);
        const double rhs = (y / fx.Y.back()) * (1.0 + (x * x) / (y * y)) * rhs0;
        const double lhs = std::exp(fx.logfp);
        rep.finer.entries.push_back({beta.anchor, y, x, lhs, rhs, rhs / lhs});
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Pathwise derivative estimate with the bracket:
//   |f'_t(iy+U_t)| <= exp[ M^pi_t - int Gdot^2 d(r + [beta]_r / 2) ].
// The bracket-Lipschitz hypothesis is certified through kappa_hat; when an
// experiment pins the diffusivity the gate may use that instead, since the
// sup-estimator is upward noisy at any finite level.
// ---------------------------------------------------------------------------
struct KeyestResult {
  double t = 0.0, y = 0.0;
  double lhs_log = 0.0, rhs_log = 0.0, margin = 0.0;
  double kappa_hat = 0.0;
  bool gated = false;
  double m_follmer = 0.0, gdot_sq = 0.0, bracket_quad = 0.0;
  double follmer_cauchy = 0.0;
};

inline KeyestResult keyest_check(const DriverPath& u, double y, double t,
                                 const PartitionSequence& partitions, const FlowConfig& cfg,
                                 double kappa_gate = std::numeric_limits<double>::quiet_NaN()) {
  const ReversedDriver beta = time_reverse(u, t);
  const int m = beta.path.grid.steps;
  PartitionSequence parts =
      partitions.path_steps == m ? partitions : partitions.truncated(m);
  const BackwardFlow flow = backward_flow(beta, 0.0, y, cfg);

  KeyestResult r;
  r.t = beta.anchor;
  r.y = y;
  const QVPath qv = follmer_qv(beta.path.values, beta.path.grid.dt(), parts);
  r.kappa_hat = qv.kappa_hat;
  const double gate_value = std::isnan(kappa_gate) ? r.kappa_hat : kappa_gate;
  r.gated = !(gate_value < 2.0);

  std::vector<double> gdot_sq(flow.Gdot.size());
  for (std::size_t i = 0; i < gdot_sq.size(); ++i) gdot_sq[i] = flow.Gdot[i] * flow.Gdot[i];
  const IntegralEstimate mf = follmer_integral(flow.Gdot, beta.path.values, parts);
  r.m_follmer = mf.value;
  r.follmer_cauchy = mf.cauchy;
  r.gdot_sq = flow.gdot_sq_integral;
  r.bracket_quad = stieltjes_vs_bracket(gdot_sq, beta.path.values, parts.finest_stride());
  r.lhs_log = flow.logfp;
  r.rhs_log = r.m_follmer - r.gdot_sq - 0.5 * r.bracket_quad;
  r.margin = std::exp(r.rhs_log - r.lhs_log);
  return r;
}

// ---------------------------------------------------------------------------
// Power estimate with decomposition beta = N + A:
//   |f'|^b <= exp( b int Gdot dN - (p b^2/2) int Gdot^2 d[N] )
//            * exp( (b/4eps) ||A||_t^2 ).
// ---------------------------------------------------------------------------
struct Key1Result {
  double t = 0.0, y = 0.0;
  double lhs_log = 0.0, rhs_log = 0.0, margin = 0.0;
  double kappa_hat = 0.0;
  bool gated = false;
  double m_follmer_n = 0.0, bracket_quad_n = 0.0, drift_norm_sq = 0.0;
};

inline Key1Result key1_check(const Decomposition& dec, double y,
                             const EstimateConstants& cs,
                             const PartitionSequence& partitions, const FlowConfig& cfg) {
  const int m = dec.beta.path.grid.steps;
  PartitionSequence parts =
      partitions.path_steps == m ? partitions : partitions.truncated(m);
  const BackwardFlow flow = backward_flow(dec.beta, 0.0, y, cfg);

  Key1Result r;
  r.t = dec.beta.anchor;
  r.y = y;
  const QVPath qv = follmer_qv(dec.beta.path.values, dec.beta.path.grid.dt(), parts);
  r.kappa_hat = qv.kappa_hat;
  r.gated = !(cs.kappa < 2.0);

  std::vector<double> gdot_sq(flow.Gdot.size());
  for (std::size_t i = 0; i < gdot_sq.size(); ++i) gdot_sq[i] = flow.Gdot[i] * flow.Gdot[i];
  r.m_follmer_n = follmer_integral(flow.Gdot, dec.martingale, parts).value;
  r.bracket_quad_n = stieltjes_vs_bracket(gdot_sq, dec.martingale, parts.finest_stride());
  r.drift_norm_sq = dec.drift_norm_sq;
  r.lhs_log = cs.b * flow.logfp;
  r.rhs_log = cs.b * r.m_follmer_n - 0.5 * cs.p * cs.b * cs.b * r.bracket_quad_n +
              (cs.b / (4.0 * cs.eps)) * r.drift_norm_sq;
  r.margin = std::exp(r.rhs_log - r.lhs_log);
  return r;
}

// Young split used inside the power estimate:
// int Gdot dA <= eps int Gdot^2 dr + (1/4eps) int Adot^2 dr.
struct YoungSplit {
  double lhs = 0.0, rhs = 0.0;
  bool holds(double tol = 1e-12) const { return lhs <= rhs + tol; }
};

inline YoungSplit young_split_check(const BackwardFlow& flow, const FiniteEnergyDriver& a,
                                    double eps) {
  YoungSplit y;
  const double dt = a.base.grid.dt();
  for (std::size_t j = 0; j + 1 < flow.Gdot.size(); ++j)
    y.lhs += flow.Gdot[j] * a.hdot[j] * dt;
  y.rhs = eps * flow.gdot_sq_integral + a.norm_sq() / (4.0 * eps);
  return y;
}

// Term-by-term consistency of the reduction chain, with A == 0:
// replacing int Gdot^2 dr by (1/kappa) int Gdot^2 d[beta] in the bracket
// estimate and raising to the power b gives exp[b(M - c0 Q)], which the
// power-estimate right side exp[b(M - c_eps Q)] dominates since c_eps <= c0.
struct ChainConsistency {
  double est_lm_log = 0.0;   // b (M - c0 Q)
  double key1_log = 0.0;     // b M - (p b^2/2) Q
  bool coeff_ok = false;     // p b^2/2 <= b c0
  bool dominance_ok = false; // est_lm_log <= key1_log
};

inline ChainConsistency chain_consistency(double m_follmer, double bracket_quad,
                                          const EstimateConstants& cs) {
  ChainConsistency c;
  c.est_lm_log = cs.b * (m_follmer - cs.c0 * bracket_quad);
  c.key1_log = cs.b * m_follmer - 0.5 * cs.p * cs.b * cs.b * bracket_quad;
  const double tol = 1e-12 * (1.0 + std::abs(c.key1_log));
  c.coeff_ok = 0.5 * cs.p * cs.b * cs.b <= cs.b * cs.c0 + 1e-12;
  c.dominance_ok = bracket_quad >= 0.0 && c.est_lm_log <= c.key1_log + tol;
  return c;
}

// ---------------------------------------------------------------------------
// Monte Carlo moment study: empirical E|f'_t(iy+U_t)|^b across a (t,y) grid,
// plus the stochastic-exponential proxy
//   exp( pb int Gdot dN - (pb)^2/2 int Gdot^2 d[N] ),
// whose mean is bounded by one (supermartingale started at 1).
// ---------------------------------------------------------------------------
struct MomentCell {
  double t = 0.0, y = 0.0;
  double mean = 0.0, ci = 0.0;              // E|f'|^b with 1.96 sd / sqrt(n)
  double proxy_mean = 0.0, proxy_ci = 0.0;  // stochastic exponential
};

struct MomentReport {
  double b = 0.0, p = 0.0;
  int count = 0;
  std::vector<MomentCell> cells;
  double y_ratio = 0.0;  // max over t of (max over y) / (min over y) of means

  bool proxy_within(double ci_mult = 3.0) const {
    for (const auto& c : cells)
      if (c.proxy_mean > 1.0 + ci_mult * c.proxy_ci) return false;
    return true;
  }
};

inline MomentReport mc_moment(const DriverSpec& spec, const EstimateConstants& cs,
                              const std::vector<double>& ys, const std::vector<double>& ts,
                              int n_paths, const TimeGrid& grid,
                              const PartitionSequence& partitions, const FlowConfig& cfg,
                              int threads = 1, std::uint64_t seed_base = 1) {
  const std::size_t cells_n = ys.size() * ts.size();
  std::vector<double> pw(static_cast<std::size_t>(n_paths) * cells_n);
  std::vector<double> px(static_cast<std::size_t>(n_paths) * cells_n);
  parallel_for(0, n_paths, threads, [&](int path_i) {
    const DriverSample sample =
        sample_driver(spec, grid, seed_base + static_cast<std::uint64_t>(path_i));
    std::size_t cell = 0;
    for (double t : ts) {
      const Decomposition dec = decompose_driver(spec, sample, t);
      const int m = dec.beta.path.grid.steps;
      const PartitionSequence parts = partitions.truncated(m);
      for (double y : ys) {
        const BackwardFlow flow = backward_flow(dec.beta, 0.0, y, cfg);
        std::vector<double> gdot_sq(flow.Gdot.size());
        for (std::size_t i = 0; i < gdot_sq.size(); ++i)
          gdot_sq[i] = flow.Gdot[i] * flow.Gdot[i];
        const double i_n = follmer_integral(flow.Gdot, dec.martingale, parts).value;
        const double q_n =
            stieltjes_vs_bracket(gdot_sq, dec.martingale, parts.finest_stride());
        const double pb = cs.p * cs.b;
        pw[static_cast<std::size_t>(path_i) * cells_n + cell] = std::exp(cs.b * flow.logfp);
        px[static_cast<std::size_t>(path_i) * cells_n + cell] =
            std::exp(pb * i_n - 0.5 * pb * pb * q_n);
        ++cell;
      }
    }
  });

  MomentReport rep;
  rep.b = cs.b;
  rep.p = cs.p;
  rep.count = n_paths;
  const auto stats = [&](const std::vector<double>& v, std::size_t cell) {
    double mean = 0.0;
    for (int i = 0; i < n_paths; ++i) mean += v[static_cast<std::size_t>(i) * cells_n + cell];
    mean /= n_paths;
    double var = 0.0;
    for (int i = 0; i < n_paths; ++i) {
      const double d = v[static_cast<std::size_t>(i) * cells_n + cell] - mean;
      var += d * d;
    }
    var /= std::max(1, n_paths - 1);
    return std::pair<double, double>(mean, 1.96 * std::sqrt(var / n_paths));
  };
  std::size_t cell = 0;
  rep.y_ratio = 0.0;
  for (double t : ts) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double y : ys) {
      MomentCell mc;
      mc.t = t;
      mc.y = y;
      std::tie(mc.mean, mc.ci) = stats(pw, cell);
      std::tie(mc.proxy_mean, mc.proxy_ci) = stats(px, cell);
      rep.cells.push_back(mc);
      lo = std::min(lo, mc.mean);
      hi = std::max(hi, mc.mean);
      ++cell;
    }
    rep.y_ratio = std::max(rep.y_ratio, hi / lo);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exponential moment of the time-reversal drift integrand for U = F(t, B_t):
//   Z_T = alpha int_0^T { integrand(r, B_r) }^2 dr,
// with the integrand matching the decomposition route: Ft alone when Fx is
// space independent, otherwise Ft - Fxx/2 + Fx B_r / r (first step skipped,
// the same singular-step rule as the decomposition). Reports the empirical
// mean of exp(Z) at T and at halved horizons, and a heavy-tail diagnostic.
// ---------------------------------------------------------------------------
struct FunctionalMomentReport {
  double alpha = 0.0;
  double kappa_eff = 0.0;  // sup |Fx|^2 over [0,T]
  bool gate_ok = false;    // kappa_eff < 2
  int count = 0;
  double mean = 0.0, ci = 0.0;
  double top_decile_share = 0.0;  // fraction of the mean carried by the top 10%
  std::vector<std::pair<double, double>> horizon_ladder;  // (T', mean at T')
};

inline FunctionalMomentReport check_momentof_f(const FunctionalSpec& f, double alpha,
                                               double horizon, int n_steps, int n_paths,
                                               int threads = 1, std::uint64_t seed_base = 1) {
  FunctionalMomentReport rep;
  rep.alpha = alpha;
  rep.kappa_eff = f.kappa_bound ? f.kappa_bound(horizon) : std::numeric_limits<double>::quiet_NaN();
  rep.gate_ok = rep.kappa_eff < 2.0;
  rep.count = n_paths;
  const TimeGrid grid = TimeGrid::make(horizon, n_steps);
  const double dt = grid.dt();
  const std::vector<int> cuts = {n_steps / 4, n_steps / 2, n_steps};

  std::vector<double> z_full(static_cast<std::size_t>(n_paths) * cuts.size());
  parallel_for(0, n_paths, threads, [&](int path_i) {
    Rng rng(seed_base + static_cast<std::uint64_t>(path_i));
    const double sd = std::sqrt(dt);
    double bcur = 0.0, z = 0.0;
    std::size_t ci = 0;
    for (int j = 0; j < n_steps; ++j) {
      const double r = grid.t(j);
      double integrand = 0.0;
      if (j > 0) {
        integrand = f.space_independent
                        ? f.Ft(r, bcur)
                        : f.Ft(r, bcur) - 0.5 * f.Fxx(r, bcur) + f.Fx(r, bcur) * bcur / r;
      }
      z += alpha * integrand * integrand * dt;
      bcur += sd * rng.gaussian();
      if (ci < cuts.size() && j + 1 == cuts[ci]) {
        z_full[static_cast<std::size_t>(path_i) * cuts.size() + ci] = z;
        ++ci;
      }
    }
  });

  for (std::size_t c = 0; c < cuts.size(); ++c) {
    std::vector<double> ez(static_cast<std::size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i)
      ez[i] = std::exp(z_full[static_cast<std::size_t>(i) * cuts.size() + c]);
    double mean = 0.0;
    for (double v : ez) mean += v;
    mean /= n_paths;
    rep.horizon_ladder.push_back({grid.t(cuts[c]), mean});
    if (c + 1 == cuts.size()) {
      double var = 0.0;
      for (double v : ez) var += (v - mean) * (v - mean);
      var /= std::max(1, n_paths - 1);
      rep.mean = mean;
      rep.ci = 1.96 * std::sqrt(var / n_paths);
      std::sort(ez.begin(), ez.end());
      double top = 0.0;
      const std::size_t k0 = ez.size() - ez.size() / 10;
      for (std::size_t k = k0; k < ez.size(); ++k) top += ez[k];
      rep.top_decile_share = top / (mean * n_paths);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Tail exceedance table: P[ |f'_t(i y + U_t)| >= y^{-theta} ] for y = 2^{-m}.
// The dyadic evaluation grid couples t to y as t = k y^2: by Brownian
// scaling this is the regime where the point i y sits at the parabolic
// scale of the hull, so exceedances occur with a fittable power-law rate;
// at fixed macroscopic t the tip derivative contracts and exceedances are
// unobservably rare. Exceedance at level m is the union over k of the
// per-time events, a least-squares slope of log P against log y is fitted
// over levels carrying at least `min_count` exceedances.
// ---------------------------------------------------------------------------
struct TailReport {
  double theta = 0.0, b_target = 0.0;
  struct Level {
    int m = 0;
    double y = 0.0;
    long count = 0;
    double prob = 0.0;
  };
  std::vector<Level> levels;
  double slope = 0.0;
  int fitted_levels = 0;
  bool pass = false;
};

inline TailReport grid_tail_prob(const DriverSpec& spec, double theta, double b_target,
                                 int n_paths, int m_lo, int m_hi, const TimeGrid& grid,
                                 const FlowConfig& cfg, int threads = 1,
                                 std::uint64_t seed_base = 1, long min_count = 10,
                                 const std::vector<int>& k_factors = {1, 2, 4, 8}) {
  if (!(theta < 1.0)) throw std::invalid_argument("grid_tail_prob: theta must be < 1");
  if (grid.dt() > std::ldexp(1.0, -2 * m_hi))
    throw std::invalid_argument("grid_tail_prob: grid too coarse for t = y^2 at m_hi");
  const int n_levels = m_hi - m_lo + 1;
  std::vector<unsigned char> exceed(static_cast<std::size_t>(n_paths) * n_levels, 0);
  parallel_for(0, n_paths, threads, [&](int path_i) {
    const DriverSample sample =
        sample_driver(spec, grid, seed_base + static_cast<std::uint64_t>(path_i));
    for (int m = m_lo; m <= m_hi; ++m) {
      const double y = std::ldexp(1.0, -m);
      const double thresh = theta * m * 0.6931471805599453;  // log y^{-theta}
      for (int k : k_factors) {
        const double t = k * y * y;
        if (t > grid.horizon + 1e-12) break;
        const ReversedDriver beta = time_reverse(sample.path, t);
        const BackwardFlow flow = backward_flow(beta, 0.0, y, cfg);
        if (flow.logfp >= thresh) {
          exceed[static_cast<std::size_t>(path_i) * n_levels + (m - m_lo)] = 1;
          break;
        }
      }
    }
  });

  TailReport rep;
  rep.theta = theta;
  rep.b_target = b_target;
  std::vector<double> lx, ly;
  for (int m = m_lo; m <= m_hi; ++m) {
    TailReport::Level lv;
    lv.m = m;
    lv.y = std::ldexp(1.0, -m);
    for (int i = 0; i < n_paths; ++i)
      lv.count += exceed[static_cast<std::size_t>(i) * n_levels + (m - m_lo)];
    lv.prob = static_cast<double>(lv.count) / n_paths;
    rep.levels.push_back(lv);
    if (lv.count >= min_count) {
      lx.push_back(std::log(lv.y));
      ly.push_back(std::log(lv.prob));
    }
  }
  rep.fitted_levels = static_cast<int>(lx.size());
  if (rep.fitted_levels >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i]; sy += ly[i]; sxx += lx[i] * lx[i]; sxy += lx[i] * ly[i];
    }
    const double n = static_cast<double>(lx.size());
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.pass = rep.slope >= b_target - 0.5;
  }
  return rep;
}

}  // namespace loewner
