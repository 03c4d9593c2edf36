// Monte Carlo campaigns: strong and weak convergence orders, convergence in
// distribution of the normalized terminal error, and time evolution of
// mean-square errors.
//
// Every campaign couples its step-size ladder to one fine reference path per
// sample via bridge refinement, distributes paths over a worker pool with
// per-path result slots, and reduces in path order, so outputs are
// bit-identical for any worker count.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srk/integrators.hpp"
#include "srk/limitsde.hpp"
#include "srk/noise.hpp"
#include "srk/parallel.hpp"
#include "srk/stats.hpp"

namespace srk {

struct Phi {
  std::string name;
  std::function<double(const State&)> fn;
};

inline Phi phi_by_name(const std::string& name) {
  if (name == "sin") return {"sin", [](const State& x) { return std::sin(x[0]); }};
  if (name == "sin_x3") return {"sin_x3", [](const State& x) { return std::sin(x[0] * x[0] * x[0]); }};
  if (name == "exp_neg") return {"exp_neg", [](const State& x) { return std::exp(-x[0]); }};
  if (name == "identity") return {"identity", [](const State& x) { return x[0]; }};
  if (name == "const") return {"const", [](const State&) { return 1.0; }};
  throw std::invalid_argument("unknown test function '" + name + "'");
}

class NoSignalError : public std::runtime_error {
 public:
  explicit NoSignalError(const std::string& what) : std::runtime_error(what) {}
};

// Dyadic ladder "2^-a..2^-b" -> step sizes 2^-a, ..., 2^-b (a <= b).
inline std::vector<double> parse_dyadic_ladder(const std::string& text) {
  const auto sep = text.find("..");
  auto parse_one = [](const std::string& tok) {
    if (tok.rfind("2^", 0) != 0) throw std::invalid_argument("ladder entries must look like 2^-k: '" + tok + "'");
    return std::stoi(tok.substr(2));
  };
  if (sep == std::string::npos) return {std::ldexp(1.0, parse_one(text))};
  const int hi = parse_one(text.substr(0, sep));
  const int lo = parse_one(text.substr(sep + 2));
  if (hi > lo) throw std::invalid_argument("ladder must go from coarse to fine: '" + text + "'");
  std::vector<double> out;
  for (int k = hi; k <= lo; ++k) out.push_back(std::ldexp(1.0, k));
  return out;
}

namespace detail {

inline std::uint64_t steps_for(double T, double h) {
  const double ratio = T / h;
  const auto n = static_cast<std::uint64_t>(std::llround(ratio));
  if (n == 0 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
    throw std::invalid_argument("step size does not divide the horizon evenly");
  return n;
}

inline void verify_coupling(const BrownianPath& parent, const BrownianPath& child) {
  const std::uint64_t factor = child.spec.N / parent.spec.N;
  for (std::uint64_t n = 0; n < parent.spec.N; ++n)
    for (std::uint64_t c = 0; c < parent.spec.m; ++c) {
      double acc = 0.0;
      for (std::uint64_t j = 0; j < factor; ++j) acc += child.dW(n * factor + j, c);
      if (acc != parent.dW(n, c)) throw std::logic_error("coupled refinement lost bit-exactness");
    }
}

// All coupled paths for one sample: the path is generated on the finest
// (reference) grid and aggregated onto every requested coarser level, so each
// coarse increment is exactly the sum of its fine refinements.
inline std::vector<BrownianPath> coupled_ladder(const PathSpec& spec, double kappa,
                                                const std::vector<std::uint64_t>& level_N, bool verify) {
  for (std::size_t k = 0; k + 1 < level_N.size(); ++k)
    if (level_N[k + 1] % level_N[k] != 0)
      throw std::invalid_argument("coupled ladder: each level must divide the next finer one");
  PathSpec fine_spec = spec;
  fine_spec.N = level_N.back();
  std::vector<BrownianPath> out(level_N.size());
  out.back() = generate(fine_spec, kappa);
  for (std::size_t k = level_N.size() - 1; k-- > 0;) {
    out[k] = coarsen(out[k + 1], level_N[k + 1] / level_N[k]);
    if (verify) verify_coupling(out[k], out[k + 1]);
  }
  return out;
}

inline std::vector<std::uint64_t> ladder_levels(double T, const std::vector<double>& ladder_h, double reference_h) {
  std::vector<std::uint64_t> levels;
  for (double h : ladder_h) levels.push_back(steps_for(T, h));
  const std::uint64_t n_ref = steps_for(T, reference_h);
  std::sort(levels.begin(), levels.end());
  if (std::unique(levels.begin(), levels.end()) != levels.end())
    throw std::invalid_argument("ladder contains duplicate step sizes");
  for (std::uint64_t n : levels)
    if (n_ref % n != 0) throw std::invalid_argument("reference step must divide every ladder step");
  if (levels.empty() || levels.back() != n_ref) levels.push_back(n_ref);
  return levels;
}

}  // namespace detail

struct CampaignOptions {
  double T = 1.0;
  std::vector<double> ladder_h;   // coarse to fine
  double reference_h = 0.0;
  int M = 100;
  std::uint64_t seed = 1;
  double kappa = 3.0;
  int threads = 1;
  StepperConfig stepper{};
  bool crn = true;                   // common random numbers for weak tests
  double noise_floor_mult = 3.0;     // exclude points with error below k * stderr
  std::uint64_t N_limit = 0;         // distribution tests: 0 = reference grid

  void validate() const {
    if (ladder_h.empty()) throw std::invalid_argument("campaign: empty step ladder");
    if (!(reference_h > 0)) throw std::invalid_argument("campaign: reference step required");
    if (M < 1) throw std::invalid_argument("campaign: M must be >= 1");
  }
};

struct OrderPoint {
  double h = 0;
  double error = 0;
  double std_error = 0;
  bool excluded = false;  // below the Monte Carlo noise floor
};

struct OrderEstimate {
  std::string method;
  std::string phi;  // weak tests only
  std::vector<OrderPoint> points;
  std::optional<SlopeFit> fit;

  std::vector<std::pair<double, double>> included_points() const {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : points)
      if (!p.excluded) out.emplace_back(p.h, p.error);
    return out;
  }
};

// --------------------------------------------------------------------------
// Strong order: RMS terminal error against a fine reference driven by the
// same Brownian path.

template <typename Problem, typename Method>
std::vector<OrderEstimate> strong_order(const Problem& problem, const std::vector<Method>& methods,
                                        const Method& reference_method, const CampaignOptions& opt) {
  opt.validate();
  const auto levels = detail::ladder_levels(opt.T, opt.ladder_h, opt.reference_h);
  const std::uint64_t m = [&] {
    if constexpr (std::is_same_v<Problem, AdditiveProblem>)
      return static_cast<std::uint64_t>(problem.m);
    else
      return std::uint64_t{1};
  }();

  std::vector<std::vector<std::vector<double>>> sq(
      methods.size(), std::vector<std::vector<double>>(opt.ladder_h.size(), std::vector<double>(opt.M)));

  parallel_for(0, opt.M, opt.threads, [&](std::uint64_t path_idx) {
    PathSpec coarse{opt.T, levels.front(), m, opt.seed, path_idx};
    const auto paths = detail::coupled_ladder(coarse, opt.kappa, levels, path_idx == 0);
    const Trajectory ref = run(problem, reference_method, paths.back(), opt.stepper);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (std::size_t li = 0; li < opt.ladder_h.size(); ++li) {
        const std::uint64_t n_level = detail::steps_for(opt.T, opt.ladder_h[li]);
        const auto it = std::find_if(paths.begin(), paths.end(),
                                     [&](const BrownianPath& p) { return p.spec.N == n_level; });
        const Trajectory x = run(problem, methods[mi], *it, opt.stepper);
        sq[mi][li][path_idx] = (x.terminal() - ref.terminal()).squaredNorm();
      }
    }
  });

  std::vector<OrderEstimate> out;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    OrderEstimate est;
    est.method = methods[mi].label;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t li = 0; li < opt.ladder_h.size(); ++li) {
      const SampleStats stats = summarize(sq[mi][li]);
      OrderPoint p;
      p.h = opt.ladder_h[li];
      p.error = std::sqrt(stats.mean);
      p.std_error = p.error > 0 ? stats.std_error() / (2.0 * p.error) : 0.0;
      est.points.push_back(p);
      if (p.error > 0) pts.emplace_back(p.h, p.error);
    }
    if (pts.size() >= 2) est.fit = fit_slope(pts);
    out.push_back(std::move(est));
  }
  return out;
}

// RMS gap between the implicit chain and its explicit appurtenant companion
// on shared paths (no reference needed).
template <typename Problem, typename Method>
OrderEstimate two_chain_gap(const Problem& problem, const Method& srk_method, const Method& appurtenant_method,
                            const CampaignOptions& opt) {
  if (opt.ladder_h.empty() || opt.M < 1) throw std::invalid_argument("two_chain_gap: bad campaign");
  const std::uint64_t m = [&] {
    if constexpr (std::is_same_v<Problem, AdditiveProblem>)
      return static_cast<std::uint64_t>(problem.m);
    else
      return std::uint64_t{1};
  }();
  std::vector<std::uint64_t> levels;
  for (double h : opt.ladder_h) levels.push_back(detail::steps_for(opt.T, h));
  std::sort(levels.begin(), levels.end());

  std::vector<std::vector<double>> sq(opt.ladder_h.size(), std::vector<double>(opt.M));
  parallel_for(0, opt.M, opt.threads, [&](std::uint64_t path_idx) {
    PathSpec coarse{opt.T, levels.front(), m, opt.seed, path_idx};
    const auto paths = detail::coupled_ladder(coarse, opt.kappa, levels, false);
    for (std::size_t li = 0; li < opt.ladder_h.size(); ++li) {
      const std::uint64_t n_level = detail::steps_for(opt.T, opt.ladder_h[li]);
      const auto it =
          std::find_if(paths.begin(), paths.end(), [&](const BrownianPath& p) { return p.spec.N == n_level; });
      const Trajectory a = run(problem, srk_method, *it, opt.stepper);
      const Trajectory b = run(problem, appurtenant_method, *it, opt.stepper);
      sq[li][path_idx] = (a.terminal() - b.terminal()).squaredNorm();
    }
  });

  OrderEstimate est;
  est.method = srk_method.label + "_vs_" + appurtenant_method.label;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t li = 0; li < opt.ladder_h.size(); ++li) {
    const SampleStats stats = summarize(sq[li]);
    OrderPoint p;
    p.h = opt.ladder_h[li];
    p.error = std::sqrt(stats.mean);
    p.std_error = p.error > 0 ? stats.std_error() / (2.0 * p.error) : 0.0;
    est.points.push_back(p);
    if (p.error > 0) pts.emplace_back(p.h, p.error);
  }
  if (pts.size() >= 2) est.fit = fit_slope(pts);
  return est;
}

// --------------------------------------------------------------------------
// Weak order: |E phi(X_h) - E phi(X_ref)| per ladder step, CRN by default.
// Points below the noise floor are flagged and excluded from the slope fit;
// a fit needs at least two live points or the estimate raises NoSignalError.

template <typename Problem, typename Method>
std::vector<OrderEstimate> weak_order(const Problem& problem, const std::vector<Method>& methods,
                                      const Method& reference_method, const std::vector<Phi>& phis,
                                      const CampaignOptions& opt) {
  opt.validate();
  const auto levels = detail::ladder_levels(opt.T, opt.ladder_h, opt.reference_h);
  const std::uint64_t m = [&] {
    if constexpr (std::is_same_v<Problem, AdditiveProblem>)
      return static_cast<std::uint64_t>(problem.m);
    else
      return std::uint64_t{1};
  }();

  // values[mi][li][pi][path]: phi(X_level) - phi(X_ref) under CRN, else
  // phi(X_level); ref_values[pi][path] used in the non-CRN split.
  const std::size_t n_methods = methods.size(), n_levels = opt.ladder_h.size(), n_phis = phis.size();
  std::vector<double> values(n_methods * n_levels * n_phis * opt.M);
  std::vector<double> ref_values(n_phis * opt.M);
  auto slot = [&](std::size_t mi, std::size_t li, std::size_t pi, std::uint64_t path) {
    return ((mi * n_levels + li) * n_phis + pi) * opt.M + path;
  };

  parallel_for(0, opt.M, opt.threads, [&](std::uint64_t path_idx) {
    PathSpec coarse{opt.T, levels.front(), m, opt.seed, path_idx};
    const auto paths = detail::coupled_ladder(coarse, opt.kappa, levels, false);
    const Trajectory ref = run(problem, reference_method, paths.back(), opt.stepper);
    for (std::size_t pi = 0; pi < n_phis; ++pi) ref_values[pi * opt.M + path_idx] = phis[pi].fn(ref.terminal());
    for (std::size_t mi = 0; mi < n_methods; ++mi)
      for (std::size_t li = 0; li < n_levels; ++li) {
        const std::uint64_t n_level = detail::steps_for(opt.T, opt.ladder_h[li]);
        const auto it =
            std::find_if(paths.begin(), paths.end(), [&](const BrownianPath& p) { return p.spec.N == n_level; });
        const Trajectory x = run(problem, methods[mi], *it, opt.stepper);
        for (std::size_t pi = 0; pi < n_phis; ++pi) {
          const double vx = phis[pi].fn(x.terminal());
          values[slot(mi, li, pi, path_idx)] = opt.crn ? vx - ref_values[pi * opt.M + path_idx] : vx;
        }
      }
  });

  std::vector<OrderEstimate> out;
  for (std::size_t mi = 0; mi < n_methods; ++mi)
    for (std::size_t pi = 0; pi < n_phis; ++pi) {
      OrderEstimate est;
      est.method = methods[mi].label;
      est.phi = phis[pi].name;
      for (std::size_t li = 0; li < n_levels; ++li) {
        std::span<const double> vals(&values[slot(mi, li, pi, 0)], opt.M);
        const SampleStats stats = summarize(vals);
        OrderPoint p;
        p.h = opt.ladder_h[li];
        if (opt.crn) {
          p.error = std::abs(stats.mean);
          p.std_error = stats.std_error();
        } else {
          std::span<const double> refs(&ref_values[pi * opt.M], opt.M);
          const SampleStats ref_stats = summarize(refs);
          p.error = std::abs(stats.mean - ref_stats.mean);
          p.std_error = std::hypot(stats.std_error(), ref_stats.std_error());
        }
        p.excluded = p.error < opt.noise_floor_mult * p.std_error || p.error == 0;
        est.points.push_back(p);
      }
      const auto pts = est.included_points();
      if (pts.size() < 2)
        throw NoSignalError("weak order for " + est.method + "/" + est.phi +
                            ": all ladder points are at the Monte Carlo noise floor; increase M");
      est.fit = fit_slope(pts);
      out.push_back(std::move(est));
    }
  return out;
}

// --------------------------------------------------------------------------
// Convergence in distribution: compare E phi(N (X_N - X_ref(T))) against
// E phi(V(T)) from an independent ensemble of limit simulations.

struct DistPoint {
  std::string phi;
  double h = 0;
  double error = 0;
  double std_error = 0;
};

inline std::vector<DistPoint> dist_convergence(const AdditiveProblem& problem, const AddMethod& method,
                                               const AddMethod& reference_method, const std::vector<Phi>& phis,
                                               const CampaignOptions& opt) {
  opt.validate();
  const auto levels = detail::ladder_levels(opt.T, opt.ladder_h, opt.reference_h);
  const std::uint64_t n_ref = detail::steps_for(opt.T, opt.reference_h);
  const auto m = static_cast<std::uint64_t>(problem.m);
  const std::size_t n_levels = opt.ladder_h.size(), n_phis = phis.size();

  std::vector<double> chain_vals(n_levels * n_phis * opt.M);
  parallel_for(0, opt.M, opt.threads, [&](std::uint64_t path_idx) {
    PathSpec coarse{opt.T, levels.front(), m, opt.seed, path_idx};
    const auto paths = detail::coupled_ladder(coarse, opt.kappa, levels, false);
    const Trajectory ref = run(problem, reference_method, paths.back(), opt.stepper);
    for (std::size_t li = 0; li < n_levels; ++li) {
      const std::uint64_t n_level = detail::steps_for(opt.T, opt.ladder_h[li]);
      const auto it =
          std::find_if(paths.begin(), paths.end(), [&](const BrownianPath& p) { return p.spec.N == n_level; });
      const Trajectory x = run(problem, method, *it, opt.stepper);
      const State scaled = static_cast<double>(n_level) * (x.terminal() - ref.terminal());
      for (std::size_t pi = 0; pi < n_phis; ++pi) chain_vals[(li * n_phis + pi) * opt.M + path_idx] = phis[pi].fn(scaled);
    }
  });

  // Independent ensemble for the limit process (disjoint path indices).
  std::vector<double> limit_vals(n_phis * opt.M);
  parallel_for(0, opt.M, opt.threads, [&](std::uint64_t k) {
    PathSpec ps{opt.T, n_ref, m, opt.seed, static_cast<std::uint64_t>(opt.M) + k};
    const BrownianPath w = generate(ps, opt.kappa);
    const Trajectory ref = run(problem, reference_method, w, opt.stepper);
    LimitSpec spec;
    spec.T = opt.T;
    spec.N_limit = opt.N_limit;
    spec.reference = &ref;
    spec.primary = &w;
    const BrownianPath wt = [&] {
      PathSpec aux = ps;
      aux.N = spec.resolved_N();
      return generate_auxiliary(aux, m);
    }();
    spec.auxiliary = &wt;
    const Trajectory v = simulate_V(problem, method.contractions, spec);
    for (std::size_t pi = 0; pi < n_phis; ++pi) limit_vals[pi * opt.M + k] = phis[pi].fn(v.terminal());
  });

  std::vector<DistPoint> out;
  for (std::size_t pi = 0; pi < n_phis; ++pi) {
    std::span<const double> lv(&limit_vals[pi * opt.M], opt.M);
    const SampleStats limit_stats = summarize(lv);
    for (std::size_t li = 0; li < n_levels; ++li) {
      std::span<const double> cv(&chain_vals[(li * n_phis + pi) * opt.M], opt.M);
      const SampleStats chain_stats = summarize(cv);
      DistPoint p;
      p.phi = phis[pi].name;
      p.h = opt.ladder_h[li];
      p.error = std::abs(chain_stats.mean - limit_stats.mean);
      p.std_error = std::hypot(chain_stats.std_error(), limit_stats.std_error());
      out.push_back(p);
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Evolution of the mean-square error over time at fixed h.

struct EvolutionCurve {
  std::string method;
  std::vector<double> times;
  std::vector<double> rmse;

  double rmse_at(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i)
      if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return rmse[i];
    throw std::out_of_range("no evolution sample at the requested time");
  }
};

struct EvolutionOptions {
  double T = 5.0;
  double h = 0.01;
  double h_ref = 1e-3;
  int M = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  StepperConfig stepper{};
};

inline std::vector<EvolutionCurve> mse_evolution(const AdditiveProblem& problem, const std::vector<AddMethod>& methods,
                                                 const AddMethod& reference_method, const EvolutionOptions& opt) {
  const std::uint64_t n_coarse = detail::steps_for(opt.T, opt.h);
  const std::uint64_t n_fine = detail::steps_for(opt.T, opt.h_ref);
  if (n_fine % n_coarse != 0) throw std::invalid_argument("evolution: reference step must divide the coarse step");
  const std::uint64_t factor = n_fine / n_coarse;
  const auto m = static_cast<std::uint64_t>(problem.m);

  std::vector<std::vector<double>> sq(methods.size(), std::vector<double>((n_coarse + 1) * opt.M));
  parallel_for(0, opt.M, opt.threads, [&](std::uint64_t path_idx) {
    PathSpec fine_spec{opt.T, n_fine, m, opt.seed, path_idx};
    const BrownianPath fine = generate(fine_spec);
    const BrownianPath path = coarsen(fine, factor);
    const Trajectory ref = run(problem, reference_method, fine, opt.stepper);
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const Trajectory x = run(problem, methods[mi], path, opt.stepper);
      for (std::uint64_t n = 0; n <= n_coarse; ++n)
        sq[mi][n * opt.M + path_idx] = (x.states[n] - ref.states[n * factor]).squaredNorm();
    }
  });

  std::vector<EvolutionCurve> out;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    EvolutionCurve curve;
    curve.method = methods[mi].label;
    for (std::uint64_t n = 0; n <= n_coarse; ++n) {
      std::span<const double> vals(&sq[mi][n * opt.M], opt.M);
      curve.times.push_back(static_cast<double>(n) * opt.h);
      curve.rmse.push_back(std::sqrt(summarize(vals).mean));
    }
    out.push_back(std::move(curve));
  }
  return out;
}

// --------------------------------------------------------------------------
// CSV emitters (canonical campaign outputs).

inline std::string orders_to_csv(const std::vector<OrderEstimate>& estimates) {
  std::ostringstream out;
  out.precision(17);
  out << "method,h,error,stderr,slope,slope_stderr\n";
  for (const auto& est : estimates) {
    const std::string label = est.phi.empty() ? est.method : est.method + ":" + est.phi;
    for (const auto& p : est.points)
      out << label << "," << p.h << "," << p.error << "," << p.std_error << ","
          << (est.fit ? est.fit->slope : std::nan("")) << "," << (est.fit ? est.fit->std_error : std::nan("")) << "\n";
  }
  return out.str();
}

inline std::string dist_to_csv(const std::vector<DistPoint>& points) {
  std::ostringstream out;
  out.precision(17);
  out << "phi,h,err,stderr\n";
  for (const auto& p : points) out << p.phi << "," << p.h << "," << p.error << "," << p.std_error << "\n";
  return out.str();
}

inline std::string evolution_to_csv(const std::vector<EvolutionCurve>& curves) {
  std::ostringstream out;
  out.precision(17);
  out << "method,t,rmse\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.times.size(); ++i) out << c.method << "," << c.times[i] << "," << c.rmse[i] << "\n";
  return out.str();
}

inline std::string eta_scan_to_csv(const std::vector<EtaScanRow>& rows) {
  std::ostringstream out;
  out.precision(17);
  out << "T,method,eta,mean_sq,stderr\n";
  for (const auto& r : rows)
    out << r.T << "," << r.method << "," << r.eta2 << "," << r.mean_sq << "," << r.std_error << "\n";
  return out.str();
}

}  // namespace srk
