#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "loewner/flow.hpp"
#include "loewner/partition.hpp"

namespace loewner {

// ---------------------------------------------------------------------------
// Quadratic variation along a nested partition sequence.
// ---------------------------------------------------------------------------
struct QVPath {
  PartitionSequence partitions;
  double dt = 0.0;
  // One bracket path per level, sampled at every grid index (cells are
  // truncated at t, so values inside a cell follow the partial increment).
  std::vector<std::vector<double>> level_brackets;
  double kappa_hat = 0.0;  // bracket-Lipschitz sup at the default window

  const std::vector<double>& finest() const { return level_brackets.back(); }
  double value(int t_index) const { return finest()[static_cast<std::size_t>(t_index)]; }
};

// Sup over pairs of finest-level partition points with separation at least
// `window_steps` grid steps of ([U]_t - [U]_s)/(t - s). Any wider pair is an
// average of pairs with separation in [W, 2W], so scanning that band is
// exact. Windows narrower than the finest mesh are excluded by construction;
// they would bias the sup upward (single squared increments).
inline double bracket_lipschitz_sup(const QVPath& qv, int window_steps = 0) {
  const auto& br = qv.finest();
  const int m = static_cast<int>(br.size()) - 1;
  const int stride = qv.partitions.finest_stride();
  int w = std::max(window_steps, stride);
  w = std::min(w, m);
  w = ((w + stride - 1) / stride) * stride;  // round up to a cell boundary
  double sup = 0.0;
  for (int i = 0; i + w <= m; i += stride) {
    const int jmax = std::min(m, i + 2 * w);
    for (int j = i + w; j <= jmax; j += stride) {
      const double slope = (br[j] - br[i]) / ((j - i) * qv.dt);
      sup = std::max(sup, slope);
    }
  }
  return sup;
}

inline QVPath follmer_qv(const std::vector<double>& path, double dt,
                         const PartitionSequence& partitions) {
  partitions.validate();
  const int m = static_cast<int>(path.size()) - 1;
  if (partitions.path_steps != m)
    throw std::invalid_argument("follmer_qv: partition does not match path length");
  QVPath qv;
  qv.partitions = partitions;
  qv.dt = dt;
  qv.level_brackets.reserve(partitions.strides.size());
  for (int stride : partitions.strides) {
    std::vector<double> bracket(static_cast<std::size_t>(m) + 1, 0.0);
    double done = 0.0;  // sum over completed cells
    int cell_left = 0;
    for (int j = 1; j <= m; ++j) {
      if (j - cell_left > stride) {
        const double inc = path[cell_left + stride] - path[cell_left];
        done += inc * inc;
        cell_left += stride;
      }
      const double partial = path[j] - path[cell_left];
      bracket[j] = done + partial * partial;
    }
    qv.level_brackets.push_back(std::move(bracket));
  }
  qv.kappa_hat = bracket_lipschitz_sup(qv, std::max(qv.partitions.finest_stride(), m / 64));
  return qv;
}

// ---------------------------------------------------------------------------
// Pathwise integrals along the partition levels. The limit along the
// sequence is reported as the finest-level value together with a Cauchy
// certificate (the last two successive level differences).
// ---------------------------------------------------------------------------
struct IntegralEstimate {
  std::vector<double> levels;
  double value = 0.0;        // finest level
  double cauchy = 0.0;       // |levels[last] - levels[last-1]|
  double prev_cauchy = 0.0;  // |levels[last-1] - levels[last-2]|

  void finish() {
    value = levels.back();
    const std::size_t n = levels.size();
    cauchy = n >= 2 ? std::abs(levels[n - 1] - levels[n - 2]) : 0.0;
    prev_cauchy = n >= 3 ? std::abs(levels[n - 2] - levels[n - 3]) : 0.0;
  }
};

// Left-point (Follmer-Ito) sums: sum over cells [u,v] of V_u (p_{v^t} - p_{u^t}).
inline IntegralEstimate follmer_integral(const std::vector<double>& V,
                                         const std::vector<double>& path,
                                         const PartitionSequence& partitions,
                                         int t_index = -1) {
  const int m = static_cast<int>(path.size()) - 1;
  if (V.size() != path.size())
    throw std::invalid_argument("follmer_integral: integrand/path size mismatch");
  if (t_index < 0) t_index = m;
  IntegralEstimate est;
  for (int stride : partitions.strides) {
    double sum = 0.0;
    for (int u = 0; u < t_index; u += stride) {
      const int v = std::min(u + stride, t_index);
      sum += V[u] * (path[v] - path[u]);
    }
    est.levels.push_back(sum);
  }
  est.finish();
  return est;
}

// Compensated (rough) sums with Gubinelli derivative:
// sum of Gdot_u (b_v - b_u) + 1/2 Gdot'_u (b_v - b_u)^2.
inline IntegralEstimate rough_integral(const std::vector<double>& gdot,
                                       const std::vector<double>& gdot_prime,
                                       const std::vector<double>& beta,
                                       const PartitionSequence& partitions,
                                       int t_index = -1) {
  const int m = static_cast<int>(beta.size()) - 1;
  if (gdot.size() != beta.size() || gdot_prime.size() != beta.size())
    throw std::invalid_argument("rough_integral: size mismatch");
  if (t_index < 0) t_index = m;
  IntegralEstimate est;
  for (int stride : partitions.strides) {
    double sum = 0.0;
    for (int u = 0; u < t_index; u += stride) {
      const int v = std::min(u + stride, t_index);
      const double inc = beta[v] - beta[u];
      sum += gdot[u] * inc + 0.5 * gdot_prime[u] * inc * inc;
    }
    est.levels.push_back(sum);
  }
  est.finish();
  return est;
}

// Left-point Stieltjes sum of V against the level-`stride` bracket of beta:
// along its own cells the bracket increment is the squared cell increment.
inline double stieltjes_vs_bracket(const std::vector<double>& V,
                                   const std::vector<double>& beta, int stride,
                                   int t_index = -1) {
  const int m = static_cast<int>(beta.size()) - 1;
  if (t_index < 0) t_index = m;
  double sum = 0.0;
  for (int u = 0; u < t_index; u += stride) {
    const int v = std::min(u + stride, t_index);
    const double inc = beta[v] - beta[u];
    sum += V[u] * inc * inc;
  }
  return sum;
}

// Measured sup of the controlled-path remainder |Gdot_v - Gdot_u -
// Gdot'_u (beta_v - beta_u)| over cells of the given stride, scaled by
// mesh^{2 alpha}. A diagnostic: the controlled structure fixes the analysis
// but not a numerical constant, so this is reported, never asserted.
inline double gubinelli_remainder_sup(const BackwardFlow& flow,
                                      const std::vector<double>& beta, int stride,
                                      double alpha) {
  const int m = static_cast<int>(beta.size()) - 1;
  const double mesh = stride * (flow.anchor / m);
  double sup = 0.0;
  for (int u = 0; u + stride <= m; u += stride) {
    const int v = u + stride;
    const double rem =
        std::abs(flow.Gdot[v] - flow.Gdot[u] - flow.Gdot_prime[u] * (beta[v] - beta[u]));
    sup = std::max(sup, rem / std::pow(mesh, 2.0 * alpha));
  }
  return sup;
}

// ---------------------------------------------------------------------------
// Representation identity for log |f_t'(z + U_t)|:
//   LHS: the flow quadrature of 2(X^2-Y^2)/(X^2+Y^2)^2,
//   RHS: M^pi + 1/2 int Gdot' d[beta]^pi - int Gdot^2 dr
//        + log(Y_t/y) - log((X_t^2+Y_t^2)/(x^2+y^2)).
// ---------------------------------------------------------------------------
struct RepresentationReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  std::vector<double> rhs_levels;  // RHS assembled per partition level
  // Terms at the finest level:
  double m_follmer = 0.0;
  double m_rough = 0.0;  // compensated sum = m_follmer + bracket term
  double bracket_term = 0.0;
  double gdot_sq = 0.0;         // int Gdot^2 dr
  double gdot_sq_bracket = 0.0; // int Gdot^2 d[beta]^pi at the finest level
  double log_y_ratio = 0.0;
  double log_mod_ratio = 0.0;
  double follmer_cauchy = 0.0;
};

inline RepresentationReport check_representation(const DriverPath& u, Complex z, double t,
                                                 const PartitionSequence& partitions,
                                                 const FlowConfig& cfg) {
  if (!(z.imag() > 0.0)) throw std::invalid_argument("check_representation: Im z must be > 0");
  const ReversedDriver beta = time_reverse(u, t);
  const BackwardFlow flow = backward_flow(beta, z.real(), z.imag(), cfg);
  const auto& b = beta.path.values;
  const int m = beta.path.grid.steps;
  PartitionSequence parts = partitions;
  if (parts.path_steps != m) parts = partitions.truncated(m);

  RepresentationReport rep;
  rep.lhs = flow.logfp;
  rep.gdot_sq = flow.gdot_sq_integral;
  const double x0 = flow.x0, y0 = flow.y0;
  rep.log_y_ratio = std::log(flow.Y.back() / y0);
  rep.log_mod_ratio = std::log((flow.X.back() * flow.X.back() + flow.Y.back() * flow.Y.back()) /
                               (x0 * x0 + y0 * y0));

  const IntegralEstimate mf = follmer_integral(flow.Gdot, b, parts);
  rep.follmer_cauchy = mf.cauchy;
  for (std::size_t lvl = 0; lvl < parts.strides.size(); ++lvl) {
    const double bra = 0.5 * stieltjes_vs_bracket(flow.Gdot_prime, b, parts.strides[lvl]);
    rep.rhs_levels.push_back(mf.levels[lvl] + bra - rep.gdot_sq + rep.log_y_ratio -
                             rep.log_mod_ratio);
  }
  rep.m_follmer = mf.value;
  rep.bracket_term = 0.5 * stieltjes_vs_bracket(flow.Gdot_prime, b, parts.finest_stride());
  rep.m_rough = rep.m_follmer + rep.bracket_term;
  std::vector<double> gdot_sq_samples(flow.Gdot.size());
  for (std::size_t i = 0; i < gdot_sq_samples.size(); ++i)
    gdot_sq_samples[i] = flow.Gdot[i] * flow.Gdot[i];
  rep.gdot_sq_bracket = stieltjes_vs_bracket(gdot_sq_samples, b, parts.finest_stride());
  rep.rhs = rep.rhs_levels.back();
  rep.gap = std::abs(rep.lhs - rep.rhs);
  return rep;
}

}  // namespace loewner
