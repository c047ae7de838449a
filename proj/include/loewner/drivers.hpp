#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "loewner/grid.hpp"
#include "loewner/rng.hpp"

namespace loewner {

// ---------------------------------------------------------------------------
// Finite-energy (Cameron-Martin) drivers.
//
// The derivative is stored piecewise constant per grid step, which makes the
// path values exact integrals of hdot and the energy e(t) = int_0^t hdot^2
// an exact step quadrature.
// ---------------------------------------------------------------------------
struct FiniteEnergyDriver {
  DriverPath base;
  std::vector<double> hdot;    // one value per grid step
  std::vector<double> energy;  // e(t_i), size steps+1, nondecreasing, e(0)=0

  double norm_sq() const { return energy.back(); }
};

inline FiniteEnergyDriver make_finite_energy(const std::vector<double>& hdot,
                                             const TimeGrid& grid) {
  if (static_cast<int>(hdot.size()) != grid.steps)
    throw std::invalid_argument("make_finite_energy: need one hdot value per grid step");
  for (double d : hdot)
    if (!std::isfinite(d)) throw std::invalid_argument("make_finite_energy: non-finite derivative");
  FiniteEnergyDriver h;
  h.hdot = hdot;
  h.base.grid = grid;
  h.base.values.resize(static_cast<std::size_t>(grid.steps) + 1, 0.0);
  h.energy.resize(static_cast<std::size_t>(grid.steps) + 1, 0.0);
  const double dt = grid.dt();
  for (int i = 0; i < grid.steps; ++i) {
    h.base.values[i + 1] = h.base.values[i] + hdot[i] * dt;
    h.energy[i + 1] = h.energy[i] + hdot[i] * hdot[i] * dt;
  }
  return h;
}

// ||h||_t^2, the Cameron-Martin norm square up to grid time t.
inline double cm_norm_sq(const FiniteEnergyDriver& h, double t) {
  return h.energy[static_cast<std::size_t>(h.base.grid.index_of(t))];
}

inline FiniteEnergyDriver linear_driver(double slope, const TimeGrid& grid) {
  return make_finite_energy(std::vector<double>(static_cast<std::size_t>(grid.steps), slope), grid);
}

// ---------------------------------------------------------------------------
// Stochastic driver specifications.
// ---------------------------------------------------------------------------
struct BrownianPath {
  TimeGrid grid;
  std::vector<double> values;  // b_0 = 0, increments N(0, kappa(t_i) dt)
  std::uint64_t seed = 0;
};

// A step function on [0,T]: value(j) applies on [break(j), break(j+1)).
struct StepFunction {
  std::vector<double> breaks;  // ascending, breaks.front() == 0
  std::vector<double> values;  // one per interval

  double at(double t) const {
    std::size_t j = 0;
    while (j + 1 < breaks.size() && t >= breaks[j + 1]) ++j;
    return values[j];
  }

  void validate() const {
    if (breaks.empty() || values.size() != breaks.size())
      throw std::invalid_argument("StepFunction: need one value per break");
    if (breaks.front() != 0.0) throw std::invalid_argument("StepFunction: first break must be 0");
    for (std::size_t j = 1; j < breaks.size(); ++j)
      if (!(breaks[j] > breaks[j - 1]))
        throw std::invalid_argument("StepFunction: breaks must be increasing");
  }
};

// A C^{1,2} function F(t,x) with the partials needed by the time-reversal
// decomposition: Fx = dF/dx, Fxx = d2F/dx2, Ft = dF/dt. `space_independent`
// marks Fx free of x, in which case the decomposition avoids the expanded
// filtration drift. `kappa_bound(T)` returns sup |Fx|^2 over [0,T] x R.
struct FunctionalSpec {
  std::string name;
  std::function<double(double, double)> F, Fx, Fxx, Ft;
  bool space_independent = false;
  std::function<double(double)> kappa_bound;
};

inline FunctionalSpec functional_linear(double c) {
  FunctionalSpec f;
  f.name = "linear";
  f.F = [c](double, double x) { return c * x; };
  f.Fx = [c](double, double) { return c; };
  f.Fxx = [](double, double) { return 0.0; };
  f.Ft = [](double, double) { return 0.0; };
  f.space_independent = true;
  f.kappa_bound = [c](double) { return c * c; };
  return f;
}

inline FunctionalSpec functional_t_pow(double p) {
  if (!(p > 0.0)) throw std::invalid_argument("functional_t_pow: p must be > 0");
  FunctionalSpec f;
  f.name = "t_pow_p";
  f.F = [p](double t, double x) { return std::pow(t, p) * x; };
  f.Fx = [p](double t, double) { return std::pow(t, p); };
  f.Fxx = [](double, double) { return 0.0; };
  f.Ft = [p](double t, double x) { return t > 0.0 ? p * std::pow(t, p - 1.0) * x : 0.0; };
  f.space_independent = true;
  f.kappa_bound = [p](double T) { return std::pow(T, 2.0 * p); };
  return f;
}

inline FunctionalSpec functional_t_log1p_x2() {
  FunctionalSpec f;
  f.name = "t_log1p_x2";
  f.F = [](double t, double x) { return t * std::log1p(x * x); };
  f.Fx = [](double t, double x) { return t * 2.0 * x / (1.0 + x * x); };
  f.Fxx = [](double t, double x) {
    const double d = 1.0 + x * x;
    return t * 2.0 * (1.0 - x * x) / (d * d);
  };
  f.Ft = [](double, double x) { return std::log1p(x * x); };
  f.space_independent = false;
  f.kappa_bound = [](double T) { return T * T; };  // |2x/(1+x^2)| <= 1
  return f;
}

inline FunctionalSpec functional_by_name(const std::string& name, double param) {
  if (name == "linear") return functional_linear(param);
  if (name == "t_pow_p") return functional_t_pow(param);
  if (name == "t_log1p_x2") return functional_t_log1p_x2();
  throw std::invalid_argument("unknown functional: " + name);
}

struct DriverSpec {
  enum class Kind { brownian, variable_kappa, h_perturbed, ou, functional };

  Kind kind = Kind::brownian;
  double kappa = 1.0;                      // brownian
  StepFunction kappa_steps;                // variable_kappa
  double lambda = 1.0;                     // ou
  FunctionalSpec functional;               // functional
  std::shared_ptr<DriverSpec> inner;       // h_perturbed
  std::shared_ptr<FiniteEnergyDriver> h;   // h_perturbed
  std::uint64_t seed = 0;

  static DriverSpec brownian_spec(double kappa, std::uint64_t seed) {
    DriverSpec s;
    s.kind = Kind::brownian;
    s.kappa = kappa;
    s.seed = seed;
    return s;
  }
  static DriverSpec variable_kappa_spec(StepFunction k, std::uint64_t seed) {
    DriverSpec s;
    s.kind = Kind::variable_kappa;
    s.kappa_steps = std::move(k);
    s.seed = seed;
    return s;
  }
  static DriverSpec h_perturbed_spec(DriverSpec inner, FiniteEnergyDriver h) {
    DriverSpec s;
    s.kind = Kind::h_perturbed;
    s.seed = inner.seed;
    s.inner = std::make_shared<DriverSpec>(std::move(inner));
    s.h = std::make_shared<FiniteEnergyDriver>(std::move(h));
    return s;
  }
  static DriverSpec ou_spec(double lambda, std::uint64_t seed) {
    DriverSpec s;
    s.kind = Kind::ou;
    s.lambda = lambda;
    s.seed = seed;
    return s;
  }
  static DriverSpec functional_spec(FunctionalSpec f, std::uint64_t seed) {
    DriverSpec s;
    s.kind = Kind::functional;
    s.functional = std::move(f);
    s.seed = seed;
    return s;
  }

  void validate() const {
    switch (kind) {
      case Kind::brownian:
        if (!(kappa >= 0.0)) throw std::invalid_argument("brownian: kappa must be >= 0");
        break;
      case Kind::variable_kappa:
        kappa_steps.validate();
        for (double v : kappa_steps.values)
          if (!(v >= 0.0)) throw std::invalid_argument("variable_kappa: kappa(.) must be >= 0");
        break;
      case Kind::h_perturbed:
        if (!inner || !h) throw std::invalid_argument("h_perturbed: missing inner spec or h");
        inner->validate();
        break;
      case Kind::ou:
        if (!(lambda > 0.0)) throw std::invalid_argument("ou: lambda must be > 0");
        break;
      case Kind::functional:
        if (!functional.F) throw std::invalid_argument("functional: F missing");
        if (functional.F(0.0, 0.0) != 0.0)
          throw std::invalid_argument("functional: F(0,0) must be 0");
        break;
    }
  }
};

// One sampled realization. `aux` keeps the latent path some kinds need for
// their semimartingale decomposition: the standard Brownian base for
// `functional`, the OU state Z for `ou`. Empty otherwise.
struct DriverSample {
  DriverPath path;
  std::vector<double> aux;
  std::uint64_t seed = 0;
};

inline BrownianPath sample_brownian(const TimeGrid& grid, double kappa, std::uint64_t seed) {
  BrownianPath b;
  b.grid = grid;
  b.seed = seed;
  b.values.resize(static_cast<std::size_t>(grid.steps) + 1, 0.0);
  Rng rng(seed);
  const double sd = std::sqrt(kappa * grid.dt());
  for (int i = 0; i < grid.steps; ++i) b.values[i + 1] = b.values[i] + sd * rng.gaussian();
  return b;
}

inline DriverSample sample_driver(const DriverSpec& spec, const TimeGrid& grid,
                                  std::uint64_t seed) {
  spec.validate();
  DriverSample out;
  out.seed = seed;
  out.path.grid = grid;
  auto& u = out.path.values;
  u.assign(static_cast<std::size_t>(grid.steps) + 1, 0.0);
  const double dt = grid.dt();
  Rng rng(seed);

  switch (spec.kind) {
    case DriverSpec::Kind::brownian: {
      const double sd = std::sqrt(spec.kappa * dt);
      for (int i = 0; i < grid.steps; ++i) u[i + 1] = u[i] + sd * rng.gaussian();
      break;
    }
    case DriverSpec::Kind::variable_kappa: {
      // Exact Ito sums for step kappa: the step's value applies on
      // [t_i, t_{i+1}); non-aligned breakpoints read the left endpoint.
      for (int i = 0; i < grid.steps; ++i) {
        const double k = spec.kappa_steps.at(grid.t(i));
        u[i + 1] = u[i] + std::sqrt(k * dt) * rng.gaussian();
      }
      break;
    }
    case DriverSpec::Kind::h_perturbed: {
      if (spec.h->base.grid != grid)
        throw std::invalid_argument("h_perturbed: h not sampled on the experiment grid");
      DriverSample inner = sample_driver(*spec.inner, grid, seed);
      for (int i = 0; i <= grid.steps; ++i) u[i] = inner.path.values[i] + spec.h->base.values[i];
      out.aux = std::move(inner.aux);
      break;
    }
    case DriverSpec::Kind::ou: {
      // Exact AR(1) transition of dZ = -lambda Z dt + sqrt(lambda) dB with
      // Z_0 drawn from the stationary law N(0, 1/2); U = Z - Z_0.
      const double a = std::exp(-spec.lambda * dt);
      const double step_sd = std::sqrt(0.5 * (1.0 - a * a));
      std::vector<double> z(static_cast<std::size_t>(grid.steps) + 1);
      z[0] = std::sqrt(0.5) * rng.gaussian();
      for (int i = 0; i < grid.steps; ++i) z[i + 1] = a * z[i] + step_sd * rng.gaussian();
      for (int i = 0; i <= grid.steps; ++i) u[i] = z[i] - z[0];
      out.aux = std::move(z);
      break;
    }
    case DriverSpec::Kind::functional: {
      std::vector<double> b(static_cast<std::size_t>(grid.steps) + 1, 0.0);
      const double sd = std::sqrt(dt);
      for (int i = 0; i < grid.steps; ++i) b[i + 1] = b[i] + sd * rng.gaussian();
      for (int i = 0; i <= grid.steps; ++i) u[i] = spec.functional.F(grid.t(i), b[i]);
      out.aux = std::move(b);
      break;
    }
  }
  out.path.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Time reversal and semimartingale decompositions.
// ---------------------------------------------------------------------------

// beta_s = U_t - U_{t-s} on the grid of [0, t].
struct ReversedDriver {
  double anchor = 0.0;
  DriverPath path;
};

inline ReversedDriver time_reverse(const DriverPath& u, double t) {
  const int m = u.grid.index_of(t);
  if (m < 1) throw std::invalid_argument("time_reverse: anchor must be a positive grid time");
  ReversedDriver r;
  r.anchor = u.grid.t(m);
  r.path.grid = u.grid.prefix(m);
  r.path.values.resize(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j <= m; ++j) r.path.values[j] = u.values[m] - u.values[m - j];
  return r;
}

// beta = N + A with A finite energy; N_j + A_j = beta_j exactly at every
// grid index by construction.
struct Decomposition {
  ReversedDriver beta;
  std::vector<double> martingale;  // N_j on the [0,t] grid
  FiniteEnergyDriver drift;        // A
  double drift_norm_sq = 0.0;      // ||A||_t^2
};

namespace detail {

inline Decomposition decompose_from_drift(ReversedDriver beta, std::vector<double> adot) {
  Decomposition d;
  d.beta = std::move(beta);
  d.drift = make_finite_energy(adot, d.beta.path.grid);
  d.drift_norm_sq = d.drift.norm_sq();
  const std::size_t n = d.beta.path.values.size();
  d.martingale.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    d.martingale[j] = d.beta.path.values[j] - d.drift.base.values[j];
  return d;
}

}  // namespace detail

// Decomposition of beta_s = F(t,B_t) - F(t-s,B_{t-s}) at a grid anchor t.
//
// The drift is integrated with left-point steps. With Fx space independent
// the integrand is Ft(t-r, B_{t-r}) and no filtration expansion is needed;
// otherwise the integrand carries the expanded-filtration term
// Fx * B_{t-r}/(t-r), and the grid step containing r = t is assigned zero
// drift: the omitted mass is O(sqrt(dt)) and vanishes under refinement.
inline Decomposition decompose_functional(const FunctionalSpec& f,
                                          const BrownianPath& b, double t) {
  const int m = b.grid.index_of(t);
  if (m < 1) throw std::invalid_argument("decompose_functional: anchor must be positive");
  const double tm = b.grid.t(m);
  DriverPath u{b.grid, {}, Interp::piecewise_linear};
  u.values.resize(b.values.size());
  for (std::size_t i = 0; i < b.values.size(); ++i)
    u.values[i] = f.F(b.grid.t(static_cast<int>(i)), b.values[i]);
  ReversedDriver beta = time_reverse(u, tm);

  std::vector<double> adot(static_cast<std::size_t>(m), 0.0);
  for (int j = 0; j < m; ++j) {
    const double rev_t = b.grid.t(m - j);  // = t - r at the left point
    const double x = b.values[static_cast<std::size_t>(m - j)];
    if (f.space_independent) {
      adot[j] = f.Ft(rev_t, x);
    } else {
      if (j == m - 1) continue;  // singular factor 1/(t-r); step contributes 0
      adot[j] = f.Ft(rev_t, x) - 0.5 * f.Fxx(rev_t, x) + f.Fx(rev_t, x) * x / rev_t;
    }
  }
  return detail::decompose_from_drift(std::move(beta), std::move(adot));
}

// Decomposition of the reversed driver for a sampled spec.
inline Decomposition decompose_driver(const DriverSpec& spec, const DriverSample& sample,
                                      double t) {
  const TimeGrid& grid = sample.path.grid;
  const int m = grid.index_of(t);
  ReversedDriver beta = time_reverse(sample.path, t);
  switch (spec.kind) {
    case DriverSpec::Kind::brownian:
    case DriverSpec::Kind::variable_kappa:
      // Reversed (scaled) Brownian motion is again a martingale: N = beta.
      return detail::decompose_from_drift(std::move(beta),
                                          std::vector<double>(static_cast<std::size_t>(m), 0.0));
    case DriverSpec::Kind::h_perturbed: {
      // A_s = h_t - h_{t-s}, so Adot(s) = hdot(t-s) read off the slope table.
      std::vector<double> adot(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) adot[j] = spec.h->hdot[static_cast<std::size_t>(m - 1 - j)];
      return detail::decompose_from_drift(std::move(beta), std::move(adot));
    }
    case DriverSpec::Kind::ou: {
      // d beta_s = lambda Z_{t-s} ds - sqrt(lambda) dB~_s by reversibility.
      if (sample.aux.size() != sample.path.values.size())
        throw std::invalid_argument("decompose_driver: OU sample lacks its state path");
      std::vector<double> adot(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) adot[j] = spec.lambda * sample.aux[static_cast<std::size_t>(m - j)];
      return detail::decompose_from_drift(std::move(beta), std::move(adot));
    }
    case DriverSpec::Kind::functional: {
      if (sample.aux.size() != sample.path.values.size())
        throw std::invalid_argument("decompose_driver: functional sample lacks its base path");
      BrownianPath b{grid, sample.aux, sample.seed};
      return decompose_functional(spec.functional, b, t);
    }
  }
  throw std::logic_error("decompose_driver: unreachable");
}

}  // namespace loewner
