// Simulators for the limit processes governing the asymptotic error
// distribution: U(t) for scalar multiplicative noise, V(t) for additive
// noise, and their unified forms when every weak-order-2 residual vanishes.
//
// The limit equations are linear SDEs whose coefficients are frozen along a
// reference solution trajectory; they are discretized by Euler-Maruyama on a
// grid the reference grid refines.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "srk/derived.hpp"
#include "srk/integrators.hpp"
#include "srk/noise.hpp"
#include "srk/parallel.hpp"
#include "srk/stats.hpp"

namespace srk {

struct LimitSpec {
  double T = 1.0;
  std::uint64_t N_limit = 0;          // 0 means: use the reference grid
  const Trajectory* reference = nullptr;
  const BrownianPath* primary = nullptr;  // path that drove the reference
  const BrownianPath* auxiliary = nullptr;

  std::uint64_t resolved_N() const { return N_limit == 0 ? reference->steps() : N_limit; }

  std::uint64_t ratio_or_throw() const {
    if (!reference || !primary) throw std::invalid_argument("limit spec: reference and primary path are required");
    const std::uint64_t n_ref = reference->steps();
    const std::uint64_t n_lim = resolved_N();
    if (n_lim == 0 || n_ref % n_lim != 0)
      throw std::invalid_argument("limit spec: reference grid must refine the limit grid");
    if (primary->steps() != n_ref)
      throw std::invalid_argument("limit spec: primary path grid must match the reference grid");
    return n_ref / n_lim;
  }
};

namespace detail {

// Increment of the primary path over limit step n (left-to-right sum of the
// fine increments; exact for coupled refinements).
inline double coarse_increment(const BrownianPath& path, std::uint64_t ratio, std::uint64_t n, std::uint64_t c) {
  double acc = 0.0;
  for (std::uint64_t j = 0; j < ratio; ++j) acc += path.dW(n * ratio + j, c);
  return acc;
}

}  // namespace detail

// Limit process for the multiplicative SRK family:
//   dU = (grad fbar)(Y) U dt + (grad g)(Y) U dW + T H1(Y) dt + T H2(Y) dW
//        + (T/sqrt(12)) [ (grad f) g - (grad g) f ](Y) dWt1
//        + (T/sqrt(6)) H3(Y) dWt2,     U(0) = 0.
inline Trajectory simulate_U(const DerivedCoefficients& d, const LimitSpec& spec) {
  const std::uint64_t ratio = spec.ratio_or_throw();
  const std::uint64_t N = spec.resolved_N();
  if (!spec.auxiliary || spec.auxiliary->steps() != N || spec.auxiliary->spec.m != 2)
    throw std::invalid_argument("simulate_U: auxiliary path must be 2-dimensional on the limit grid");
  const double T = spec.T;
  const double h = T / static_cast<double>(N);
  const double c1 = T / std::sqrt(12.0);
  const double c2 = T / std::sqrt(6.0);

  Trajectory traj;
  traj.h = h;
  traj.label = "U";
  traj.states.reserve(N + 1);
  State u = State::Zero(spec.reference->states.front().size());
  traj.states.push_back(u);
  for (std::uint64_t n = 0; n < N; ++n) {
    const State& y = spec.reference->states[n * ratio];
    const double dw = detail::coarse_increment(*spec.primary, ratio, n, 0);
    const double dw1 = spec.auxiliary->dW(n, 0);
    const double dw2 = spec.auxiliary->dW(n, 1);
    u = u + h * (d.dfbar(y, u) + T * d.H1(y)) + (d.problem().dg(y, u) + T * d.H2(y)) * dw +
        (c1 * dw1) * d.commutator(y) + (c2 * dw2) * d.H3(y);
    traj.states.push_back(u);
  }
  return traj;
}

// Unified form (all fourteen residuals zero):
//   dU = (grad fbar)(Y) U dt + (grad g)(Y) U dW
//        + (T/sqrt(12)) [ (grad f) g - (grad g) f ](Y) dWt1.
inline Trajectory simulate_U_unified(const DerivedCoefficients& d, const LimitSpec& spec) {
  const std::uint64_t ratio = spec.ratio_or_throw();
  const std::uint64_t N = spec.resolved_N();
  if (!spec.auxiliary || spec.auxiliary->steps() != N)
    throw std::invalid_argument("simulate_U_unified: auxiliary path must live on the limit grid");
  const double T = spec.T;
  const double h = T / static_cast<double>(N);
  const double c1 = T / std::sqrt(12.0);

  Trajectory traj;
  traj.h = h;
  traj.label = "U_unified";
  traj.states.reserve(N + 1);
  State u = State::Zero(spec.reference->states.front().size());
  traj.states.push_back(u);
  for (std::uint64_t n = 0; n < N; ++n) {
    const State& y = spec.reference->states[n * ratio];
    const double dw = detail::coarse_increment(*spec.primary, ratio, n, 0);
    u = u + h * d.dfbar(y, u) + d.problem().dg(y, u) * dw + (c1 * spec.auxiliary->dW(n, 0)) * d.commutator(y);
    traj.states.push_back(u);
  }
  return traj;
}

// Limit process for the additive SRK family:
//   dV = (grad f)(X) V dt
//        + (abar'(Abar e) - 1/2) T (grad f) f dt
//        + (1/2)(abar'bbar^2 - 1/2) T sum_k D^2 f(sigma_k, sigma_k) dt
//        + (abar'bbar - 1/2) T (grad f) sigma dW
//        - (T/sqrt(12)) (grad f) sigma dWt,      V(0) = 0.
inline Trajectory simulate_V(const AdditiveProblem& p, const AdditiveContractions& c, const LimitSpec& spec) {
  const std::uint64_t ratio = spec.ratio_or_throw();
  const std::uint64_t N = spec.resolved_N();
  if (!spec.auxiliary || spec.auxiliary->steps() != N ||
      spec.auxiliary->spec.m != static_cast<std::uint64_t>(p.m))
    throw std::invalid_argument("simulate_V: auxiliary path must be m-dimensional on the limit grid");
  const double T = spec.T;
  const double h = T / static_cast<double>(N);
  const double c_tilde = T / std::sqrt(12.0);
  const auto r = c.residuals();

  Trajectory traj;
  traj.h = h;
  traj.label = "V";
  traj.states.reserve(N + 1);
  State v = State::Zero(p.x0.size());
  traj.states.push_back(v);
  State dW(p.m), dWt(p.m);
  for (std::uint64_t n = 0; n < N; ++n) {
    const State& x = spec.reference->states[n * ratio];
    for (int k = 0; k < p.m; ++k) {
      dW[k] = detail::coarse_increment(*spec.primary, ratio, n, k);
      dWt[k] = spec.auxiliary->dW(n, k);
    }
    State sum_d2f = State::Zero(v.size());
    for (int k = 0; k < p.m; ++k) {
      const State col = p.sigma_column(k);
      sum_d2f += p.d2f(x, col, col);
    }
    v = v + h * (p.df(x, v) + (r[0] * T) * p.df(x, p.f(x)) + (0.5 * r[1] * T) * sum_d2f) +
        (r[2] * T) * p.df(x, p.sigma_times(dW)) - c_tilde * p.df(x, p.sigma_times(dWt));
    traj.states.push_back(v);
  }
  return traj;
}

// Unified form (eta2 = 0): dV = (grad f)(X) V dt - (T/sqrt(12)) (grad f) sigma dWt.
inline Trajectory simulate_V_unified(const AdditiveProblem& p, const LimitSpec& spec) {
  AdditiveContractions exact;  // defaults sit on the weak-2 targets
  Trajectory traj = simulate_V(p, exact, spec);
  traj.label = "V_unified";
  return traj;
}

// --------------------------------------------------------------------------
// Long-time growth scan: Monte Carlo E|V(T)|^2 per (tableau, T).

struct EtaScanOptions {
  double h_ref = 1.0 / 512;   // reference/limit grid resolution
  std::uint64_t seed = 1;
  int threads = 1;
  StepperConfig stepper{};
  AddMethod reference_method = AddMethod::make(trapezoid_tableau());
};

struct EtaScanRow {
  double T = 0;
  std::string method;
  double eta2 = 0;
  double mean_sq = 0;
  double std_error = 0;
};

inline std::vector<EtaScanRow> eta_growth_scan(const AdditiveProblem& problem, const std::vector<AddMethod>& methods,
                                               const std::vector<double>& T_list, int M,
                                               const EtaScanOptions& opt = {}) {
  std::vector<EtaScanRow> rows;
  for (double T : T_list) {
    const auto N_ref = static_cast<std::uint64_t>(std::llround(T / opt.h_ref));
    if (N_ref == 0) throw std::invalid_argument("eta_growth_scan: T shorter than the reference step");
    std::vector<std::vector<double>> sq(methods.size(), std::vector<double>(M));
    parallel_for(0, M, opt.threads, [&](std::uint64_t path_idx) {
      PathSpec ps{T, N_ref, static_cast<std::uint64_t>(problem.m), opt.seed, path_idx};
      const BrownianPath w = generate(ps);
      const BrownianPath wt = generate_auxiliary(ps, problem.m);
      const Trajectory ref = run(problem, opt.reference_method, w, opt.stepper);
      LimitSpec spec;
      spec.T = T;
      spec.reference = &ref;
      spec.primary = &w;
      spec.auxiliary = &wt;
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const Trajectory v = simulate_V(problem, methods[mi].contractions, spec);
        sq[mi][path_idx] = v.terminal().squaredNorm();
      }
    });
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const SampleStats stats = summarize(sq[mi]);
      double eta = 0;
      for (double r : methods[mi].contractions.residuals()) eta += r * r;
      rows.push_back({T, methods[mi].label, eta, stats.mean, stats.std_error()});
    }
  }
  return rows;
}

// True when, at the largest scanned T, sorting by E|V(T)|^2 and sorting by
// eta2 give the same method order.
inline bool eta_ordering_consistent(const std::vector<EtaScanRow>& rows) {
  double t_max = 0;
  for (const auto& r : rows) t_max = std::max(t_max, r.T);
  std::vector<EtaScanRow> last;
  for (const auto& r : rows)
    if (r.T == t_max) last.push_back(r);
  auto by_eta = last;
  std::sort(by_eta.begin(), by_eta.end(), [](const auto& a, const auto& b) { return a.eta2 < b.eta2; });
  auto by_err = last;
  std::sort(by_err.begin(), by_err.end(), [](const auto& a, const auto& b) { return a.mean_sq < b.mean_sq; });
  for (std::size_t i = 0; i < last.size(); ++i)
    if (by_eta[i].method != by_err[i].method) return false;
  return true;
}

}  // namespace srk
