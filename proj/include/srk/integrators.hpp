// One-step maps and trajectory drivers.
//
// Implicit stages are solved by fixed-point iteration on the stacked stage
// vector, stopping when successive iterates differ by less than fp_tol in the
// max norm. The multiplicative scheme consumes truncated increments; the
// additive scheme consumes raw increments; the appurtenant companions are
// explicit and consume raw increments plus the per-step iterated integrals.
#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srk/derived.hpp"
#include "srk/noise.hpp"
#include "srk/problem.hpp"
#include "srk/tableau.hpp"
#include "srk/types.hpp"

namespace srk {

struct StepperConfig {
  double fp_tol = 1e-12;
  int fp_max_iter = 200;
  bool contraction_guard = true;  // probe the stage map and warn when the
                                  // contraction estimate reaches 1

  void validate() const {
    if (!(fp_tol > 0)) throw std::invalid_argument("fp_tol must be > 0");
    if (fp_max_iter < 1) throw std::invalid_argument("fp_max_iter must be >= 1");
  }
};

class NonConvergentError : public std::runtime_error {
 public:
  NonConvergentError(int iterations, double last_residual, std::int64_t step_index = -1)
      : std::runtime_error(message(iterations, last_residual, step_index)),
        iterations_(iterations),
        last_residual_(last_residual),
        step_index_(step_index) {}

  int iterations() const { return iterations_; }
  double last_residual() const { return last_residual_; }
  std::int64_t step_index() const { return step_index_; }

  static NonConvergentError at_step(const NonConvergentError& e, std::int64_t step) {
    return NonConvergentError(e.iterations_, e.last_residual_, step);
  }

 private:
  static std::string message(int iterations, double residual, std::int64_t step) {
    std::ostringstream out;
    out << "stage fixed-point iteration did not converge (iterations=" << iterations << ", residual=" << residual;
    if (step >= 0) out << ", step=" << step;
    out << "); the step size is too large for this problem";
    return out.str();
  }

  int iterations_;
  double last_residual_;
  std::int64_t step_index_;
};

// Double-precision tableau mirrors used by the steppers.
struct RunTableau {
  std::size_t s0 = 0;
  std::vector<double> A, B;  // row-major
  std::vector<double> alpha, beta;
  std::string name;

  static RunTableau from(const Tableau& tab) {
    tab.validate();
    RunTableau rt;
    rt.s0 = tab.s0;
    rt.name = tab.name;
    rt.A.resize(tab.s0 * tab.s0);
    rt.B.resize(tab.s0 * tab.s0);
    for (std::size_t i = 0; i < tab.s0; ++i)
      for (std::size_t j = 0; j < tab.s0; ++j) {
        rt.A[i * tab.s0 + j] = tab.A(i, j).convert_to<double>();
        rt.B[i * tab.s0 + j] = tab.B(i, j).convert_to<double>();
      }
    for (const auto& v : tab.alpha) rt.alpha.push_back(v.convert_to<double>());
    for (const auto& v : tab.beta) rt.beta.push_back(v.convert_to<double>());
    return rt;
  }
};

struct RunAdditiveTableau {
  std::size_t s0 = 0;
  std::vector<double> Abar;
  std::vector<double> bbar, alphabar;
  std::string name;

  static RunAdditiveTableau from(const AdditiveTableau& tab) {
    tab.validate();
    RunAdditiveTableau rt;
    rt.s0 = tab.s0;
    rt.name = tab.name;
    rt.Abar.resize(tab.s0 * tab.s0);
    for (std::size_t i = 0; i < tab.s0; ++i)
      for (std::size_t j = 0; j < tab.s0; ++j) rt.Abar[i * tab.s0 + j] = tab.Abar(i, j).convert_to<double>();
    for (const auto& v : tab.bbar) rt.bbar.push_back(v.convert_to<double>());
    for (const auto& v : tab.alphabar) rt.alphabar.push_back(v.convert_to<double>());
    return rt;
  }
};

struct StepResult {
  State y;
  int iterations = 0;
  bool guard_warning = false;
};

namespace detail {

inline double max_norm_diff(const std::vector<State>& a, const std::vector<State>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    out = std::max(out, (a[i] - b[i]).lpNorm<Eigen::Infinity>());
  return out;
}

}  // namespace detail

// Implicit multiplicative SRK step; stage system
//   Z_i = y + h sum_j A_ij f(Z_j) + dW_hat sum_j B_ij g(Z_j).
inline StepResult srk_mul_step(const SdeProblem& p, const RunTableau& rt, const State& y, double h, double dW_hat,
                               const StepperConfig& cfg = {}) {
  cfg.validate();
  const std::size_t s0 = rt.s0;
  std::vector<State> Z(s0, y), Znew(s0), F(s0), G(s0);

  auto apply_stage_map = [&](const std::vector<State>& in, std::vector<State>& out) {
    for (std::size_t j = 0; j < s0; ++j) {
      F[j] = p.f(in[j]);
      G[j] = p.g(in[j]);
    }
    for (std::size_t i = 0; i < s0; ++i) {
      State acc = y;
      for (std::size_t j = 0; j < s0; ++j) acc += (h * rt.A[i * s0 + j]) * F[j] + (dW_hat * rt.B[i * s0 + j]) * G[j];
      out[i] = acc;
    }
  };

  StepResult result;
  double diff = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < cfg.fp_max_iter; ++it) {
    apply_stage_map(Z, Znew);
    if (it == 0 && cfg.contraction_guard) {
      // Lipschitz probe of the stage map, reusing the first iterate.
      std::vector<State> probe(s0), mapped(s0);
      const double delta = 1e-4 * (1.0 + y.lpNorm<Eigen::Infinity>());
      for (std::size_t i = 0; i < s0; ++i) probe[i] = Z[i] + State(State::Constant(y.size(), delta));
      apply_stage_map(probe, mapped);
      result.guard_warning = detail::max_norm_diff(Znew, mapped) / delta >= 1.0;
    }
    diff = detail::max_norm_diff(Z, Znew);
    Z.swap(Znew);
    if (diff < cfg.fp_tol) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged) throw NonConvergentError(it, diff);

  for (std::size_t j = 0; j < s0; ++j) {
    F[j] = p.f(Z[j]);
    G[j] = p.g(Z[j]);
  }
  State out = y;
  for (std::size_t i = 0; i < s0; ++i) out += (h * rt.alpha[i]) * F[i] + (dW_hat * rt.beta[i]) * G[i];
  result.y = std::move(out);
  result.iterations = it;
  return result;
}

// Explicit appurtenant companion of the multiplicative SRK step. Consumes the
// raw increment and the per-step iterated integrals i2, i3.
inline State appurtenant_mul_step(const DerivedCoefficients& d, const State& y, double h, double dW, double i2,
                                  double i3) {
  const SdeProblem& p = d.problem();
  const State g = p.g(y);
  State out = y + dW * g + h * d.fbar(y) + i2 * p.dg(y, g) + (dW * h) * (d.F1(y) + 3.0 * d.F2(y)) +
              (6.0 * i3) * d.F2(y) +
              (h * h) * (d.contractions().alpha_Ae * p.df(y, p.f(y)) + d.F3(y) + 3.0 * d.F4(y));
  return out;
}

// Implicit additive SRK step; stage system
//   Z_i = x + h sum_j Abar_ij f(Z_j) + bbar_i sigma dW.
inline StepResult srk_add_step(const AdditiveProblem& p, const RunAdditiveTableau& rt, const State& x, double h,
                               const State& dW, const StepperConfig& cfg = {}) {
  cfg.validate();
  const std::size_t s0 = rt.s0;
  const State noise = p.sigma_times(dW);
  std::vector<State> Z(s0, x), Znew(s0), F(s0);

  auto apply_stage_map = [&](const std::vector<State>& in, std::vector<State>& out) {
    for (std::size_t j = 0; j < s0; ++j) F[j] = p.f(in[j]);
    for (std::size_t i = 0; i < s0; ++i) {
      State acc = x + rt.bbar[i] * noise;
      for (std::size_t j = 0; j < s0; ++j) acc += (h * rt.Abar[i * s0 + j]) * F[j];
      out[i] = acc;
    }
  };

  StepResult result;
  double diff = 0.0;
  bool converged = false;
  int it = 0;
  for (; it < cfg.fp_max_iter; ++it) {
    apply_stage_map(Z, Znew);
    if (it == 0 && cfg.contraction_guard) {
      std::vector<State> probe(s0), mapped(s0);
      const double delta = 1e-4 * (1.0 + x.lpNorm<Eigen::Infinity>());
      for (std::size_t i = 0; i < s0; ++i) probe[i] = Z[i] + State(State::Constant(x.size(), delta));
      apply_stage_map(probe, mapped);
      result.guard_warning = detail::max_norm_diff(Znew, mapped) / delta >= 1.0;
    }
    diff = detail::max_norm_diff(Z, Znew);
    Z.swap(Znew);
    if (diff < cfg.fp_tol) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged) throw NonConvergentError(it, diff);

  for (std::size_t j = 0; j < s0; ++j) F[j] = p.f(Z[j]);
  State out = x + noise;
  for (std::size_t i = 0; i < s0; ++i) out += (h * rt.alphabar[i]) * F[i];
  result.y = std::move(out);
  result.iterations = it;
  return result;
}

// Explicit appurtenant companion of the additive SRK step.
inline State appurtenant_add_step(const AdditiveProblem& p, const AdditiveContractions& c, const State& x, double h,
                                  const State& dW) {
  const State noise = p.sigma_times(dW);
  State sum_d2f = State::Zero(x.size());
  for (int k = 0; k < p.m; ++k) {
    const State col = p.sigma_column(k);
    sum_d2f += p.d2f(x, col, col);
  }
  return x + noise + h * p.f(x) + (c.alphabar_bbar * h) * p.df(x, noise) +
         (c.alphabar_bbar_sq * 0.5 * h * h) * sum_d2f + (c.alphabar_Abar_e * h * h) * p.df(x, p.f(x));
}

// Plain explicit Euler step, state + h drift(state) + diffusion(state) * dW.
template <typename Drift, typename Diffusion>
State euler_step(Drift&& drift, Diffusion&& diffusion, const State& x, double h, double dW) {
  return x + h * drift(x) + diffusion(x) * dW;
}

// --------------------------------------------------------------------------
// Trajectory driver

struct Trajectory {
  double h = 0.0;
  std::string label;
  std::vector<State> states;       // N + 1 entries
  std::vector<int> fp_iterations;  // per step, implicit schemes only
  int guard_warnings = 0;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
  double time(std::size_t n) const { return static_cast<double>(n) * h; }
  const State& terminal() const { return states.back(); }
};

enum class Scheme { srk, appurtenant };

struct MulMethod {
  RunTableau tableau;
  TableauContractions contractions;
  Scheme scheme = Scheme::srk;
  std::string label;

  static MulMethod make(const Tableau& tab, Scheme scheme = Scheme::srk) {
    MulMethod m;
    m.tableau = RunTableau::from(tab);
    m.contractions = TableauContractions::from_tableau(tab);
    m.scheme = scheme;
    m.label = scheme == Scheme::srk ? tab.name : tab.name + "_appurtenant";
    return m;
  }
};

struct AddMethod {
  RunAdditiveTableau tableau;
  AdditiveContractions contractions;
  Scheme scheme = Scheme::srk;
  std::string label;

  static AddMethod make(const AdditiveTableau& tab, Scheme scheme = Scheme::srk) {
    AddMethod m;
    m.tableau = RunAdditiveTableau::from(tab);
    m.contractions = AdditiveContractions::from_tableau(tab);
    m.scheme = scheme;
    m.label = scheme == Scheme::srk ? tab.name : tab.name + "_appurtenant";
    return m;
  }
};

inline Trajectory run(const SdeProblem& problem, const MulMethod& method, const BrownianPath& path,
                      const StepperConfig& cfg = {}) {
  if (path.spec.m != 1) throw std::invalid_argument("multiplicative schemes require scalar noise");
  const std::uint64_t N = path.steps();
  Trajectory traj;
  traj.h = path.h;
  traj.label = method.label;
  traj.states.reserve(N + 1);
  traj.states.push_back(problem.x0);

  if (method.scheme == Scheme::srk) {
    traj.fp_iterations.reserve(N);
    for (std::uint64_t n = 0; n < N; ++n) {
      try {
        StepResult r = srk_mul_step(problem, method.tableau, traj.states.back(), path.h, path.dW_hat(n), cfg);
        traj.states.push_back(std::move(r.y));
        traj.fp_iterations.push_back(r.iterations);
        traj.guard_warnings += r.guard_warning ? 1 : 0;
      } catch (const NonConvergentError& e) {
        throw NonConvergentError::at_step(e, static_cast<std::int64_t>(n));
      }
    }
  } else {
    const DerivedCoefficients derived(problem, method.contractions);
    for (std::uint64_t n = 0; n < N; ++n)
      traj.states.push_back(appurtenant_mul_step(derived, traj.states.back(), path.h, path.dW(n), path.i2[n], path.i3[n]));
  }
  return traj;
}

inline Trajectory run(const AdditiveProblem& problem, const AddMethod& method, const BrownianPath& path,
                      const StepperConfig& cfg = {}) {
  if (path.spec.m != static_cast<std::uint64_t>(problem.m))
    throw std::invalid_argument("path dimension does not match the problem's noise dimension");
  const std::uint64_t N = path.steps();
  Trajectory traj;
  traj.h = path.h;
  traj.label = method.label;
  traj.states.reserve(N + 1);
  traj.states.push_back(problem.x0);

  State dW(problem.m);
  for (std::uint64_t n = 0; n < N; ++n) {
    for (int c = 0; c < problem.m; ++c) dW[c] = path.dW(n, c);
    if (method.scheme == Scheme::srk) {
      try {
        StepResult r = srk_add_step(problem, method.tableau, traj.states.back(), path.h, dW, cfg);
        traj.states.push_back(std::move(r.y));
        traj.fp_iterations.push_back(r.iterations);
        traj.guard_warnings += r.guard_warning ? 1 : 0;
      } catch (const NonConvergentError& e) {
        throw NonConvergentError::at_step(e, static_cast<std::int64_t>(n));
      }
    } else {
      traj.states.push_back(appurtenant_add_step(problem, method.contractions, traj.states.back(), path.h, dW));
    }
  }
  return traj;
}

inline std::string trajectory_to_csv(const Trajectory& traj) {
  std::ostringstream out;
  out.precision(17);
  out << "t";
  const int dim = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  for (int i = 1; i <= dim; ++i) out << ",x_" << i;
  out << "\n";
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    out << traj.time(n);
    for (int i = 0; i < dim; ++i) out << "," << traj.states[n][i];
    out << "\n";
  }
  return out.str();
}

}  // namespace srk
