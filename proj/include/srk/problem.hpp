// SDE problem definitions. Drift/diffusion and their directional derivatives
// are user-supplied callbacks; the catalog provides the stock test problems.
//
// Directional derivative conventions:
//   df(y, v)        = (grad f)(y) v
//   d2f(y, u, v)    = D^2 f(y)(u, v), symmetric bilinear in (u, v)
//   d3g(y, u, v, w) = D^3 g(y)(u, v, w)
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srk/rng.hpp"
#include "srk/types.hpp"

namespace srk {

using Field = std::function<State(const State&)>;
using Directional1 = std::function<State(const State&, const State&)>;
using Directional2 = std::function<State(const State&, const State&, const State&)>;
using Directional3 = std::function<State(const State&, const State&, const State&, const State&)>;

// Stratonovich SDE with scalar multiplicative noise,
//   dY = f(Y) dt + g(Y) o dW.
struct SdeProblem {
  int dim = 1;
  Field f, g;
  Directional1 df, dg;
  Directional2 d2f, d2g;
  Directional3 d3g;
  State x0;
  std::string name;
};

// Ito SDE with constant (d x m) diffusion, dX = f(X) dt + sigma dW.
// There is no diffusion callback at all: the additive steppers structurally
// cannot evaluate a state-dependent diffusion derivative.
struct AdditiveProblem {
  int dim = 1;
  int m = 1;
  Field f;
  Directional1 df;
  Directional2 d2f;
  StateMatrix sigma;
  State x0;
  std::string name;

  State sigma_column(int k) const { return sigma.col(k); }
  State sigma_times(const State& w) const { return sigma * w; }
};

// --------------------------------------------------------------------------
// Finite-difference fallbacks (lower accuracy than analytic callbacks; used
// when a problem definition omits a derivative).

inline Directional1 fd_directional1(Field f, double step) {
  return [f = std::move(f), step](const State& y, const State& v) -> State {
    const double eps = step * (1.0 + y.norm());
    return (f(y + eps * v) - f(y - eps * v)) / (2.0 * eps);
  };
}

inline Directional2 fd_directional2(Field f, double step) {
  // Polarization of the pure second difference keeps the oracle independent
  // of any first-derivative callback.
  auto pure = [f = std::move(f), step](const State& y, const State& u) -> State {
    const double eps = step * (1.0 + y.norm());
    return (f(y + eps * u) - 2.0 * f(y) + f(y - eps * u)) / (eps * eps);
  };
  return [pure](const State& y, const State& u, const State& v) -> State {
    return (pure(y, State(u + v)) - pure(y, State(u - v))) / 4.0;
  };
}

inline Directional3 fd_directional3(Field f, double step) {
  auto pure = [f = std::move(f), step](const State& y, const State& u) -> State {
    const double eps = step * (1.0 + y.norm());
    return (f(y + 2.0 * eps * u) - 2.0 * f(y + eps * u) + 2.0 * f(y - eps * u) - f(y - 2.0 * eps * u)) /
           (2.0 * eps * eps * eps);
  };
  return [pure](const State& y, const State& u, const State& v, const State& w) -> State {
    // trilinear polarization: 1/24 sum over sign patterns
    State acc = State::Zero(y.size());
    const double signs[2] = {1.0, -1.0};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          acc += signs[a] * signs[b] * signs[c] * pure(y, State(signs[a] * u + signs[b] * v + signs[c] * w));
    return acc / 24.0;
  };
}

inline void complete_derivatives(SdeProblem& p, double step = 1e-5) {
  if (!p.df) p.df = fd_directional1(p.f, step);
  if (!p.dg) p.dg = fd_directional1(p.g, step);
  if (!p.d2f) p.d2f = fd_directional2(p.f, step);
  if (!p.d2g) p.d2g = fd_directional2(p.g, step);
  if (!p.d3g) p.d3g = fd_directional3(p.g, step);
}

// --------------------------------------------------------------------------
// Derivative validation against central finite differences at random states.

struct DerivativeCheck {
  std::string callback;
  double max_rel_error = 0.0;
  State worst_state;
  bool ok = true;
};

struct DerivativeReport {
  std::vector<DerivativeCheck> checks;
  double tol = 0.0;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    return true;
  }
  void require() const {
    for (const auto& c : checks)
      if (!c.ok) {
        std::ostringstream msg;
        msg << "derivative mismatch in '" << c.callback << "': max relative error " << c.max_rel_error << " > tol "
            << tol << " at state [" << c.worst_state.transpose() << "]";
        throw std::runtime_error(msg.str());
      }
  }
};

namespace detail {

// Deterministic sampling box around x0 (radius `box`), philox-backed.
inline State random_state(const State& x0, double box, std::uint64_t seed, std::uint64_t idx, std::uint64_t tag) {
  State out(x0.size());
  for (int i = 0; i < x0.size(); ++i) {
    const auto w = philox4x64({seed, 0xD3A11DA7E5ULL + tag}, {idx, static_cast<std::uint64_t>(i), 0, 0});
    out[i] = x0[i] + box * (2.0 * uniform_open01(w[0]) - 1.0);
  }
  return out;
}

inline State random_direction(int dim, std::uint64_t seed, std::uint64_t idx, std::uint64_t tag) {
  State out(dim);
  for (int i = 0; i < dim; ++i) {
    const auto w = philox4x64({seed, 0xD16ULL + tag}, {idx, static_cast<std::uint64_t>(i), 1, 0});
    out[i] = 2.0 * uniform_open01(w[0]) - 1.0;
  }
  return out;
}

template <typename Supplied, typename Oracle>
DerivativeCheck compare_derivative(const std::string& name, const State& x0, double box, int n_samples, double tol,
                                   std::uint64_t seed, Supplied&& supplied, Oracle&& oracle) {
  DerivativeCheck check;
  check.callback = name;
  check.worst_state = x0;
  for (int s = 0; s < n_samples; ++s) {
    const State y = random_state(x0, box, seed, s, std::hash<std::string>{}(name));
    const State got = supplied(y, s);
    const State want = oracle(y, s);
    const double scale = std::max(1.0, want.template lpNorm<Eigen::Infinity>());
    const double err = (got - want).template lpNorm<Eigen::Infinity>() / scale;
    if (err > check.max_rel_error) {
      check.max_rel_error = err;
      check.worst_state = y;
    }
  }
  check.ok = check.max_rel_error <= tol;
  return check;
}

}  // namespace detail

inline DerivativeReport validate_derivatives(const SdeProblem& p, int n_samples = 64, double fd_step = 1e-5,
                                             double tol = 1e-6, double box = 2.0, std::uint64_t seed = 20240901) {
  if (n_samples < 1) throw std::invalid_argument("validate_derivatives: n_samples must be >= 1");
  if (!(fd_step > 0)) throw std::invalid_argument("validate_derivatives: fd_step must be > 0");
  DerivativeReport rep;
  rep.tol = tol;
  const auto dir = [&](std::uint64_t s, std::uint64_t k) { return detail::random_direction(p.dim, seed, s, k); };
  if (p.df) {
    auto fd = fd_directional1(p.f, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "df", p.x0, box, n_samples, tol, seed, [&](const State& y, int s) { return p.df(y, dir(s, 1)); },
        [&](const State& y, int s) { return fd(y, dir(s, 1)); }));
  }
  if (p.dg) {
    auto fd = fd_directional1(p.g, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "dg", p.x0, box, n_samples, tol, seed, [&](const State& y, int s) { return p.dg(y, dir(s, 2)); },
        [&](const State& y, int s) { return fd(y, dir(s, 2)); }));
  }
  if (p.d2f) {
    auto fd = fd_directional2(p.f, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "d2f", p.x0, box, n_samples, tol, seed,
        [&](const State& y, int s) { return p.d2f(y, dir(s, 3), dir(s, 4)); },
        [&](const State& y, int s) { return fd(y, dir(s, 3), dir(s, 4)); }));
  }
  if (p.d2g) {
    auto fd = fd_directional2(p.g, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "d2g", p.x0, box, n_samples, tol, seed,
        [&](const State& y, int s) { return p.d2g(y, dir(s, 5), dir(s, 6)); },
        [&](const State& y, int s) { return fd(y, dir(s, 5), dir(s, 6)); }));
  }
  if (p.d3g) {
    auto fd = fd_directional3(p.g, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "d3g", p.x0, box, n_samples, tol, seed,
        [&](const State& y, int s) { return p.d3g(y, dir(s, 7), dir(s, 7), dir(s, 7)); },
        [&](const State& y, int s) { return fd(y, dir(s, 7), dir(s, 7), dir(s, 7)); }));
  }
  return rep;
}

inline DerivativeReport validate_derivatives(const AdditiveProblem& p, int n_samples = 64, double fd_step = 1e-5,
                                             double tol = 1e-6, double box = 2.0, std::uint64_t seed = 20240901) {
  if (n_samples < 1) throw std::invalid_argument("validate_derivatives: n_samples must be >= 1");
  if (!(fd_step > 0)) throw std::invalid_argument("validate_derivatives: fd_step must be > 0");
  DerivativeReport rep;
  rep.tol = tol;
  const auto dir = [&](std::uint64_t s, std::uint64_t k) { return detail::random_direction(p.dim, seed, s, k); };
  {
    auto fd = fd_directional1(p.f, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "df", p.x0, box, n_samples, tol, seed, [&](const State& y, int s) { return p.df(y, dir(s, 1)); },
        [&](const State& y, int s) { return fd(y, dir(s, 1)); }));
  }
  if (p.d2f) {
    auto fd = fd_directional2(p.f, fd_step);
    rep.checks.push_back(detail::compare_derivative(
        "d2f", p.x0, box, n_samples, tol, seed,
        [&](const State& y, int s) { return p.d2f(y, dir(s, 3), dir(s, 4)); },
        [&](const State& y, int s) { return fd(y, dir(s, 3), dir(s, 4)); }));
  }
  return rep;
}

// --------------------------------------------------------------------------
// Builtin problems

inline State scalar_state(double x) {
  State s(1);
  s[0] = x;
  return s;
}

// dX = (-10 X + sin X) dt + sigma1 dW1
inline AdditiveProblem example61(double x0 = 1.0, double sigma1 = 1.0) {
  AdditiveProblem p;
  p.dim = 1;
  p.m = 1;
  p.name = "example61";
  p.f = [](const State& y) { return scalar_state(-10.0 * y[0] + std::sin(y[0])); };
  p.df = [](const State& y, const State& v) { return scalar_state((-10.0 + std::cos(y[0])) * v[0]); };
  p.d2f = [](const State& y, const State& u, const State& v) { return scalar_state(-std::sin(y[0]) * u[0] * v[0]); };
  p.sigma = StateMatrix::Constant(1, 1, sigma1);
  p.x0 = scalar_state(x0);
  return p;
}

// dX = (X + ln(1 + X^2)) dt + sigma1 dW1 + sigma2 dW2
inline AdditiveProblem example62(double x0 = 1.0, double sigma1 = 1.0, double sigma2 = 1.0) {
  AdditiveProblem p;
  p.dim = 1;
  p.m = 2;
  p.name = "example62";
  p.f = [](const State& y) { return scalar_state(y[0] + std::log1p(y[0] * y[0])); };
  p.df = [](const State& y, const State& v) {
    const double x = y[0];
    return scalar_state((1.0 + 2.0 * x / (1.0 + x * x)) * v[0]);
  };
  p.d2f = [](const State& y, const State& u, const State& v) {
    const double x = y[0];
    const double q = 1.0 + x * x;
    return scalar_state((2.0 - 2.0 * x * x) / (q * q) * u[0] * v[0]);
  };
  p.sigma = StateMatrix(1, 2);
  p.sigma(0, 0) = sigma1;
  p.sigma(0, 1) = sigma2;
  p.x0 = scalar_state(x0);
  return p;
}

// Scalar multiplicative test problem with f = g = ln(1 + x^2).
inline SdeProblem mul_log(double x0 = 1.0) {
  auto val = [](double x) { return std::log1p(x * x); };
  auto d1 = [](double x) { return 2.0 * x / (1.0 + x * x); };
  auto d2 = [](double x) {
    const double q = 1.0 + x * x;
    return (2.0 - 2.0 * x * x) / (q * q);
  };
  auto d3 = [](double x) {
    const double q = 1.0 + x * x;
    return (4.0 * x * x * x - 12.0 * x) / (q * q * q);
  };
  SdeProblem p;
  p.dim = 1;
  p.name = "mul_log";
  p.f = [val](const State& y) { return scalar_state(val(y[0])); };
  p.g = p.f;
  p.df = [d1](const State& y, const State& v) { return scalar_state(d1(y[0]) * v[0]); };
  p.dg = p.df;
  p.d2f = [d2](const State& y, const State& u, const State& v) { return scalar_state(d2(y[0]) * u[0] * v[0]); };
  p.d2g = p.d2f;
  p.d3g = [d3](const State& y, const State& u, const State& v, const State& w) {
    return scalar_state(d3(y[0]) * u[0] * v[0] * w[0]);
  };
  p.x0 = scalar_state(x0);
  return p;
}

// Linear additive problem dX = a X dt + sigma dW, handy for closed-form
// oracles.
inline AdditiveProblem linear_additive(double a, std::vector<double> sigma_row, double x0 = 1.0) {
  AdditiveProblem p;
  p.dim = 1;
  p.m = static_cast<int>(sigma_row.size());
  p.name = "linear";
  p.f = [a](const State& y) { return scalar_state(a * y[0]); };
  p.df = [a](const State&, const State& v) { return scalar_state(a * v[0]); };
  p.d2f = [](const State& y, const State&, const State&) { return State(State::Zero(y.size())); };
  p.sigma = StateMatrix(1, p.m);
  for (int k = 0; k < p.m; ++k) p.sigma(0, k) = sigma_row[k];
  p.x0 = scalar_state(x0);
  return p;
}

using ParamMap = std::map<std::string, double>;

namespace detail {
inline double param(const ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}
}  // namespace detail

inline AdditiveProblem builtin_additive_problem(const std::string& name, const ParamMap& params = {}) {
  const double x0 = detail::param(params, "x0", 1.0);
  if (name == "example61") return example61(x0, detail::param(params, "sigma1", 1.0));
  if (name == "example62")
    return example62(x0, detail::param(params, "sigma1", 1.0), detail::param(params, "sigma2", 1.0));
  if (name == "linear")
    return linear_additive(detail::param(params, "a", -1.0), {detail::param(params, "sigma1", 1.0)}, x0);
  throw std::invalid_argument("unknown additive problem '" + name + "'");
}

inline SdeProblem builtin_multiplicative_problem(const std::string& name, const ParamMap& params = {}) {
  if (name == "mul_log") return mul_log(detail::param(params, "x0", 1.0));
  throw std::invalid_argument("unknown multiplicative problem '" + name + "'");
}

}  // namespace srk
