#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "loewner/drivers.hpp"
#include "loewner/grid.hpp"

namespace loewner {

using Complex = std::complex<double>;

enum class Scheme { rk4, slit };

struct FlowConfig {
  Scheme scheme = Scheme::rk4;
  int substeps = 8;              // base substeps per grid step
  double swallow_scale = 1e-6;   // swallow threshold delta = scale * sqrt(dt)
  double min_im = 1e-12;         // imaginary guard for the forward flow
  // Adaptive substep cap: h <= resolve * (X^2+Y^2). The flow relaxes on the
  // time scale |Q|^2, so this resolves the boundary layer near s = 0 at a
  // cost logarithmic in 1/y. Tighten for high-accuracy derivative work.
  double resolve = 1.0 / 64.0;
  int max_substeps_per_step = 1 << 14;

  FlowConfig with_scheme(Scheme s) const { FlowConfig c = *this; c.scheme = s; return c; }
  FlowConfig with_substeps(int n) const { FlowConfig c = *this; c.substeps = n; return c; }
  FlowConfig with_resolve(double r) const { FlowConfig c = *this; c.resolve = r; return c; }

  // Preset for two-route derivative checks at ~1e-5 accuracy.
  static FlowConfig precise() {
    FlowConfig c;
    c.substeps = 8;
    c.resolve = 1.0 / 1024.0;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Forward Loewner flow: gdot = 2 / (g - U_t), g_0 = z.
// ---------------------------------------------------------------------------
struct ForwardResult {
  bool swallowed = false;
  Complex g{};          // valid when alive
  double tau = 0.0;     // swallowing time when swallowed
  double hcap_check = 0.0;  // Re((g - z) z) / 2, ~ t for |z| large
};

namespace detail {

// Root of w with nonnegative imaginary part; boundary (real, positive w)
// values take the sign hint so that real trajectories stay on their side.
inline Complex sqrt_upper(Complex w, double sign_hint) {
  Complex r = std::sqrt(w);
  if (r.imag() < 0.0) r = -r;
  if (r.imag() == 0.0 && sign_hint < 0.0) r = -r;
  return r;
}

}  // namespace detail

inline ForwardResult forward_point(const DriverPath& u, Complex z, double t,
                                   const FlowConfig& cfg) {
  u.validate();
  if (z == Complex(0.0, 0.0))
    throw std::invalid_argument("forward_point: z = 0 is excluded");
  if (z.imag() < 0.0) throw std::invalid_argument("forward_point: z must lie in closed H");
  const int m = u.grid.index_of(t);
  const double dt = u.grid.dt();
  const double delta = cfg.swallow_scale * std::sqrt(dt);
  const double delta2 = delta * delta;
  const double h_base = dt / std::max(1, cfg.substeps);
  const double h_floor = dt / cfg.max_substeps_per_step;

  ForwardResult out;
  Complex g = z;
  double s = 0.0;

  if (cfg.scheme == Scheme::slit) {
    // Exact vertical-slit composition per substep, driver frozen at the
    // substep midpoint. Within a substep (g-u)^2 = w0 + 4h, so the minimum
    // of |g-u| over the substep is explicit and gives the swallowing time.
    for (int j = 0; j < m && !out.swallowed; ++j) {
      for (int k = 0; k < std::max(1, cfg.substeps); ++k) {
        const double h = dt / std::max(1, cfg.substeps);
        const double um = u.value_at(s + 0.5 * h);
        const Complex d = g - um;
        const Complex w0 = d * d;
        if (std::norm(d) <= delta2) {
          out.swallowed = true;
          out.tau = s;
          break;
        }
        if (w0.real() < 0.0 && std::abs(w0.imag()) <= delta2 && -w0.real() <= 4.0 * h) {
          out.swallowed = true;
          out.tau = s - 0.25 * w0.real();
          break;
        }
        g = um + detail::sqrt_upper(w0 + 4.0 * h, d.real());
        s += h;
      }
    }
  } else {
    for (int j = 0; j < m && !out.swallowed; ++j) {
      const double step_end = dt * (j + 1);
      while (s < step_end - 0.25 * h_floor) {
        const double d2 = std::norm(g - u.value_at(s));
        if (d2 <= delta2) {
          out.swallowed = true;
          out.tau = s;
          break;
        }
        // Frozen-driver time to the singularity is ~ d2/4; once it drops
        // under the substep floor the point is numerically absorbed.
        if (0.25 * d2 <= h_floor) {
          out.swallowed = true;
          out.tau = s + 0.25 * d2;
          break;
        }
        double h = std::min({h_base, step_end - s, cfg.resolve * d2});
        h = std::max(h, std::min(h_floor, step_end - s));
        const auto rhs = [&u](Complex gg, double ss) { return 2.0 / (gg - u.value_at(ss)); };
        const Complex k1 = rhs(g, s);
        const Complex k2 = rhs(g + 0.5 * h * k1, s + 0.5 * h);
        const Complex k3 = rhs(g + 0.5 * h * k2, s + 0.5 * h);
        const Complex k4 = rhs(g + h * k3, s + h);
        g += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += h;
        if (!std::isfinite(g.real()) || !std::isfinite(g.imag()) ||
            (z.imag() > 0.0 && g.imag() < cfg.min_im)) {
          out.swallowed = true;  // crossed the singularity between checks
          out.tau = s;
          break;
        }
      }
    }
  }
  if (!out.swallowed) {
    out.g = g;
    out.hcap_check = 0.5 * ((g - z) * z).real();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward flow in the coordinates of the reversed driver.
//
// With beta_s = U_t - U_{t-s} and Q_s = X_s + i Y_s,
//   dX = d beta - 2X/(X^2+Y^2) ds,  X_0 = x,
//   dY = 2Y/(X^2+Y^2) ds,           Y_0 = y,
// and f_t(z + U_t) = Q_t. Along the way we accumulate
//   logfp = int 2(X^2-Y^2)/(X^2+Y^2)^2 dr = log |f_t'(z + U_t)|
// and int Gdot^2 dr by substep trapezoid, and store per-grid-index samples of
// X, Y, G = beta - X, Gdot = 2X/(X^2+Y^2), Gdot' = Ydot/Y - Gdot^2.
// ---------------------------------------------------------------------------
struct BackwardFlow {
  double anchor = 0.0;
  double x0 = 0.0, y0 = 0.0;
  std::vector<double> X, Y, G, Gdot, Gdot_prime;  // size m+1 on the [0,t] grid
  double logfp = 0.0;
  double gdot_sq_integral = 0.0;  // int_0^t Gdot^2 dr

  Complex endpoint() const { return Complex(X.back(), Y.back()); }
};

inline BackwardFlow backward_flow(const ReversedDriver& beta, double x, double y,
                                  const FlowConfig& cfg) {
  if (!(y > 0.0)) throw std::invalid_argument("backward_flow: y must be > 0");
  const TimeGrid& grid = beta.path.grid;
  const int m = grid.steps;
  const double dt = grid.dt();
  const double h_base = dt / std::max(1, cfg.substeps);
  const double h_floor = dt / cfg.max_substeps_per_step;

  BackwardFlow out;
  out.anchor = beta.anchor;
  out.x0 = x;
  out.y0 = y;
  out.X.resize(m + 1);
  out.Y.resize(m + 1);
  out.G.resize(m + 1);
  out.Gdot.resize(m + 1);
  out.Gdot_prime.resize(m + 1);

  double X = x, Y = y;
  auto record = [&](int j) {
    const double D = X * X + Y * Y;
    out.X[j] = X;
    out.Y[j] = Y;
    out.G[j] = beta.path.values[j] - X;
    out.Gdot[j] = 2.0 * X / D;
    out.Gdot_prime[j] = 2.0 / D - out.Gdot[j] * out.Gdot[j];
  };
  record(0);

  double logfp = 0.0, gsq = 0.0;
  double D = X * X + Y * Y;
  double integrand = 2.0 * (X * X - Y * Y) / (D * D);
  double gdot2 = (2.0 * X / D) * (2.0 * X / D);

  for (int j = 0; j < m; ++j) {
    const double bdot = (beta.path.values[j + 1] - beta.path.values[j]) / dt;
    double s = 0.0;
    while (s < dt - 0.25 * h_floor) {
      double h = std::min({h_base, dt - s, cfg.resolve * (X * X + Y * Y)});
      h = std::max(h, h_floor);
      h = std::min(h, dt - s);
      // RK4 with the driver slope frozen over the grid step (piecewise
      // linear driver): the (X,Y) system is then autonomous.
      const auto fx = [bdot](double Xv, double Yv) {
        return bdot - 2.0 * Xv / (Xv * Xv + Yv * Yv);
      };
      const auto fy = [](double Xv, double Yv) { return 2.0 * Yv / (Xv * Xv + Yv * Yv); };
      const double k1x = fx(X, Y), k1y = fy(X, Y);
      const double x2 = X + 0.5 * h * k1x, y2 = Y + 0.5 * h * k1y;
      const double k2x = fx(x2, y2), k2y = fy(x2, y2);
      const double x3 = X + 0.5 * h * k2x, y3 = Y + 0.5 * h * k2y;
      const double k3x = fx(x3, y3), k3y = fy(x3, y3);
      const double x4 = X + h * k3x, y4 = Y + h * k3y;
      const double k4x = fx(x4, y4), k4y = fy(x4, y4);
      X += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      Y += (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
      s += h;
      D = X * X + Y * Y;
      const double integrand_new = 2.0 * (X * X - Y * Y) / (D * D);
      const double gdot2_new = (2.0 * X / D) * (2.0 * X / D);
      logfp += 0.5 * h * (integrand + integrand_new);
      gsq += 0.5 * h * (gdot2 + gdot2_new);
      integrand = integrand_new;
      gdot2 = gdot2_new;
    }
    record(j + 1);
  }
  out.logfp = logfp;
  out.gdot_sq_integral = gsq;
  return out;
}

// f_t(z + U_t) via the backward flow; never swallowed since Im P increases.
inline Complex eval_f(const DriverPath& u, Complex z, double t, const FlowConfig& cfg) {
  if (!(z.imag() > 0.0)) throw std::invalid_argument("eval_f: Im z must be > 0");
  const ReversedDriver beta = time_reverse(u, t);
  if (cfg.scheme == Scheme::slit) {
    // Exact inverse-slit composition with the reversed driver frozen at
    // substep midpoints: Q jumps by the driver increment at substep
    // boundaries and follows Q^2 -> Q^2 - 4h in between.
    const TimeGrid& g = beta.path.grid;
    const double h = g.dt() / std::max(1, cfg.substeps);
    const int total = g.steps * std::max(1, cfg.substeps);
    double u_prev = beta.path.value_at(0.5 * h);
    Complex q = z + u_prev;
    for (int k = 0; k < total; ++k) {
      if (k > 0) {
        const double u_mid = beta.path.value_at((k + 0.5) * h);
        q += u_mid - u_prev;
        u_prev = u_mid;
      }
      q = detail::sqrt_upper(q * q - 4.0 * h, 0.0);
    }
    return (q - u_prev) + u.values[u.grid.index_of(t)];
  }
  const BackwardFlow flow = backward_flow(beta, z.real(), z.imag(), cfg);
  return flow.endpoint();
}

// f_t'(z + U_t) by the variational route: dP'/ds = 2 P' / (P + beta)^2
// integrated alongside the backward flow. Independent cross-check for
// exp(backward_flow.logfp).
inline Complex fprime_variational(const DriverPath& u, Complex z, double t,
                                  const FlowConfig& cfg) {
  if (!(z.imag() > 0.0)) throw std::invalid_argument("fprime_variational: Im z must be > 0");
  const ReversedDriver beta = time_reverse(u, t);
  const TimeGrid& grid = beta.path.grid;
  const double dt = grid.dt();

  if (cfg.scheme == Scheme::slit) {
    // Each slit substep has exact derivative Q_before / Q_after; shifts
    // contribute factor 1.
    const double h = dt / std::max(1, cfg.substeps);
    const int total = grid.steps * std::max(1, cfg.substeps);
    double u_prev = beta.path.value_at(0.5 * h);
    Complex q = z + u_prev;
    Complex deriv(1.0, 0.0);
    for (int k = 0; k < total; ++k) {
      if (k > 0) {
        const double u_mid = beta.path.value_at((k + 0.5) * h);
        q += u_mid - u_prev;
        u_prev = u_mid;
      }
      const Complex q_new = detail::sqrt_upper(q * q - 4.0 * h, 0.0);
      deriv *= q / q_new;
      q = q_new;
    }
    return deriv;
  }

  const double h_base = dt / std::max(1, cfg.substeps);
  const double h_floor = dt / cfg.max_substeps_per_step;
  double X = z.real(), Y = z.imag();
  Complex deriv(1.0, 0.0);
  for (int j = 0; j < grid.steps; ++j) {
    const double bdot = (beta.path.values[j + 1] - beta.path.values[j]) / dt;
    double s = 0.0;
    while (s < dt - 0.25 * h_floor) {
      double h = std::min({h_base, dt - s, cfg.resolve * (X * X + Y * Y)});
      h = std::max(h, h_floor);
      h = std::min(h, dt - s);
      // Joint RK4 on (X, Y, P'); Q = X + iY and dP'/ds = 2 P' / Q^2.
      struct State { double x, y; Complex p; };
      const auto rhs = [bdot](const State& st) {
        const double D = st.x * st.x + st.y * st.y;
        const Complex q(st.x, st.y);
        return State{bdot - 2.0 * st.x / D, 2.0 * st.y / D, 2.0 * st.p / (q * q)};
      };
      const State s0{X, Y, deriv};
      const State k1 = rhs(s0);
      const State k2 = rhs({X + 0.5 * h * k1.x, Y + 0.5 * h * k1.y, deriv + 0.5 * h * k1.p});
      const State k3 = rhs({X + 0.5 * h * k2.x, Y + 0.5 * h * k2.y, deriv + 0.5 * h * k2.p});
      const State k4 = rhs({X + h * k3.x, Y + h * k3.y, deriv + h * k3.p});
      X += (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
      Y += (h / 6.0) * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
      deriv += (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
      s += h;
    }
  }
  return deriv;
}

// Both derivative routes at once. When the routes disagree beyond rel_tol
// the substeps are doubled (and the resolve cap tightened) up to `retries`
// times; the config actually used is reported back.
struct TwoRouteDerivative {
  double logfp = 0.0;       // quadrature route
  Complex fprime{};         // variational route
  double rel_gap = 0.0;     // | |fprime| - exp(logfp) | / exp(logfp)
  FlowConfig used;
  BackwardFlow flow;
};

inline TwoRouteDerivative log_fprime_checked(const DriverPath& u, Complex z, double t,
                                             FlowConfig cfg, double rel_tol = 1e-4,
                                             int retries = 3) {
  TwoRouteDerivative r;
  for (int attempt = 0;; ++attempt) {
    r.flow = backward_flow(time_reverse(u, t), z.real(), z.imag(), cfg);
    r.logfp = r.flow.logfp;
    r.fprime = fprime_variational(u, z, t, cfg);
    const double mod = std::exp(r.logfp);
    r.rel_gap = std::abs(std::abs(r.fprime) - mod) / mod;
    r.used = cfg;
    if (r.rel_gap <= rel_tol || attempt >= retries) return r;
    cfg.substeps *= 2;
    cfg.resolve *= 0.5;
  }
}

}  // namespace loewner
