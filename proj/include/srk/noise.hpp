// Seeded Brownian paths on uniform grids: truncated increments, per-step
// iterated integrals (scalar noise), and coupled refinement.
//
// Coupling contract: summing a refined path's increments left-to-right over
// each parent step reproduces the parent increment bit-exactly, so a fine
// reference trajectory and a coarse trajectory are driven by the same
// Brownian motion with no statistical slack.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "srk/rng.hpp"

namespace srk {

struct PathSpec {
  double T = 1.0;
  std::uint64_t N = 1;  // steps; h = T/N
  std::uint64_t m = 1;  // driving dimension
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  void validate() const {
    if (N == 0) throw std::invalid_argument("path spec: N must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("path spec: T must be > 0");
    if (m == 0) throw std::invalid_argument("path spec: m must be >= 1");
  }
};

// Streams 1+ are auxiliary Brownian motions independent of the primary path.
inline constexpr std::uint64_t kPrimaryStream = 0;

struct BrownianPath {
  PathSpec spec;
  std::uint64_t stream = kPrimaryStream;
  std::uint64_t level = 0;  // refinement generation (0 = generated directly)
  double h = 0.0;
  double kappa = 3.0;
  bool truncation_disabled = false;  // set when h >= 1 so A_h is undefined

  std::vector<double> increments;  // N x m, step-major
  std::vector<double> truncated;   // N x m, sqrt(h) * clamp(xi, +-A_h)
  std::vector<double> i2;          // (dW^2 - h)/2, scalar noise only
  std::vector<double> i3;          // (dW^3 - 3 h dW)/6, scalar noise only

  std::uint64_t steps() const { return increments.size() / spec.m; }
  double dW(std::uint64_t n, std::uint64_t c = 0) const { return increments[n * spec.m + c]; }
  double dW_hat(std::uint64_t n, std::uint64_t c = 0) const { return truncated[n * spec.m + c]; }
};

namespace detail {

// Chooses the last two sub-increments of a bridge split so that the
// left-to-right rounded sum over the parent step lands on `total` exactly:
//   fl(fl(partial + d_a) + d_b) == total.
//
// When the running sum stays within a factor of two of the total, the
// remainder subtraction is exact (Sterbenz) and the bridge draw survives
// bit-for-bit or within a few ulps. When the running sum dwarfs the total no
// representable pair closes the sum near the draw at all (the sum lattice is
// coarser than the total's rounding window), so the split point is pulled
// geometrically toward total/2 and settles at the first magnitude that
// closes. Exactness always wins over the draw; coarsen() is the construction
// that preserves the increment law exactly.
inline void close_split(double total, double partial, double& d_a, double& d_b) {
  auto attempt = [&](double cand) {
    const double q = partial + cand;
    const double base = total - q;
    const double inf = std::numeric_limits<double>::infinity();
    for (double rem : {base, std::nextafter(base, inf), std::nextafter(base, -inf)}) {
      if (q + rem == total) {
        d_a = cand;
        d_b = rem;
        return true;
      }
    }
    return false;
  };
  if (attempt(d_a)) return;
  const double q0 = partial + d_a;
  const double scale = std::max({std::abs(partial), std::abs(q0), std::abs(d_a), std::abs(total)});
  const double delta = std::nextafter(scale, std::numeric_limits<double>::infinity()) - scale;
  const double d0 = d_a;
  for (int i = 1; i <= 64; ++i) {
    if (attempt(d0 + static_cast<double>(i) * delta)) return;
    if (attempt(d0 - static_cast<double>(i) * delta)) return;
  }
  // Pull the implied split point toward total/2 until a closure exists.
  const double center = 0.5 * total;
  double offset = q0 - center;
  for (int k = 0; k < 200; ++k) {
    offset *= 0.5;
    const double cand = (center + offset) - partial;
    const double local = std::nextafter(std::abs(center + offset) + std::abs(total),
                                        std::numeric_limits<double>::infinity()) -
                         (std::abs(center + offset) + std::abs(total));
    for (int i = 0; i <= 8; ++i) {
      if (attempt(cand + static_cast<double>(i) * local)) return;
      if (i > 0 && attempt(cand - static_cast<double>(i) * local)) return;
    }
  }
  throw std::logic_error("refine: could not close a bridge split exactly");
}

inline void fill_truncation(BrownianPath& path) {
  const double h = path.h;
  const std::uint64_t n_total = path.increments.size();
  path.truncated.resize(n_total);
  if (h >= 1.0) {
    path.truncation_disabled = true;
    path.truncated = path.increments;
    return;
  }
  path.truncation_disabled = false;
  const double a_h = std::sqrt(2.0 * path.kappa * std::abs(std::log(h)));
  const double sqrt_h = std::sqrt(h);
  const double bound = sqrt_h * a_h;
  for (std::uint64_t i = 0; i < n_total; ++i) {
    const double w = path.increments[i];
    path.truncated[i] = w > bound ? bound : (w < -bound ? -bound : w);
  }
}

inline void fill_iterated_integrals(BrownianPath& path) {
  if (path.spec.m != 1) {
    path.i2.clear();
    path.i3.clear();
    return;
  }
  const double h = path.h;
  const std::uint64_t n = path.steps();
  path.i2.resize(n);
  path.i3.resize(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    const double w = path.increments[k];
    path.i2[k] = 0.5 * (w * w - h);
    path.i3[k] = (w * w * w - 3.0 * h * w) / 6.0;
  }
}

}  // namespace detail

inline BrownianPath generate(const PathSpec& spec, double kappa = 3.0, std::uint64_t stream = kPrimaryStream) {
  spec.validate();
  if (kappa < 1.0) throw std::invalid_argument("kappa must be >= 1");
  BrownianPath path;
  path.spec = spec;
  path.stream = stream;
  path.kappa = kappa;
  path.h = spec.T / static_cast<double>(spec.N);
  path.increments.resize(spec.N * spec.m);
  const PhiloxKey key{spec.seed, spec.path_index};
  const double sqrt_h = std::sqrt(path.h);
  for (std::uint64_t n = 0; n < spec.N; ++n)
    for (std::uint64_t c = 0; c < spec.m; ++c)
      path.increments[n * spec.m + c] = sqrt_h * standard_normal(key, noise_counter(stream, DrawKind::base, 0, n, c));
  detail::fill_truncation(path);
  detail::fill_iterated_integrals(path);
  return path;
}

// Brownian-bridge refinement by an integer factor (default dyadic). Bridge
// positions inside each parent step come from the refinement substream of the
// child level; the final two sub-increments are adjusted so the left-to-right
// sum over the parent step is exact. Exact closure forces a relocation of the
// split point on the ~20% of splits whose bridge draw dwarfs the parent
// increment, which thins the tails of the sub-increment law slightly;
// coarsen() couples grids with the increment law intact.
inline BrownianPath refine(const BrownianPath& parent, std::uint64_t factor = 2) {
  if (factor < 2) throw std::invalid_argument("refine: factor must be >= 2");
  BrownianPath child;
  child.spec = parent.spec;
  child.spec.N = parent.spec.N * factor;
  child.stream = parent.stream;
  child.level = parent.level + 1;
  child.kappa = parent.kappa;
  child.h = parent.h / static_cast<double>(factor);
  const std::uint64_t m = parent.spec.m;
  child.increments.resize(child.spec.N * m);

  const PhiloxKey key{parent.spec.seed, parent.spec.path_index};
  const double hc = child.h;
  for (std::uint64_t n = 0; n < parent.spec.N; ++n) {
    for (std::uint64_t c = 0; c < m; ++c) {
      const double total = parent.increments[n * m + c];
      double partial = 0.0;  // left-to-right sum of the settled sub-increments
      double last_draw = 0.0;
      for (std::uint64_t j = 0; j + 1 < factor; ++j) {
        const double remaining_time = static_cast<double>(factor - j) * hc;
        const double z =
            standard_normal(key, noise_counter(child.stream, DrawKind::refine, child.level, n * factor + j, c));
        const double mean = (total - partial) * (hc / remaining_time);
        const double sd = std::sqrt(hc * (remaining_time - hc) / remaining_time);
        const double d = mean + sd * z;
        child.increments[(n * factor + j) * m + c] = d;
        if (j + 2 < factor)
          partial += d;
        else
          last_draw = d;  // kept out of the partial so close_split can adjust it
      }
      double d_a = last_draw, d_b = 0.0;
      detail::close_split(total, partial, d_a, d_b);
      child.increments[(n * factor + factor - 2) * m + c] = d_a;
      child.increments[(n * factor + factor - 1) * m + c] = d_b;
    }
  }
  detail::fill_truncation(child);
  detail::fill_iterated_integrals(child);
  return child;
}

// Exact aggregation onto a coarser grid: each coarse increment is the
// left-to-right sum of its `factor` fine increments, so restriction of the
// fine path to the coarse grid reproduces the coarse path bit-exactly by
// construction. Statistically (coarse, fine) has the same joint law as
// (path, refine(path)).
inline BrownianPath coarsen(const BrownianPath& fine, std::uint64_t factor) {
  if (factor < 2) throw std::invalid_argument("coarsen: factor must be >= 2");
  if (fine.spec.N % factor != 0) throw std::invalid_argument("coarsen: factor must divide the step count");
  BrownianPath coarse;
  coarse.spec = fine.spec;
  coarse.spec.N = fine.spec.N / factor;
  coarse.stream = fine.stream;
  coarse.level = fine.level;
  coarse.kappa = fine.kappa;
  coarse.h = fine.h * static_cast<double>(factor);
  const std::uint64_t m = fine.spec.m;
  coarse.increments.resize(coarse.spec.N * m);
  for (std::uint64_t n = 0; n < coarse.spec.N; ++n)
    for (std::uint64_t c = 0; c < m; ++c) {
      double acc = 0.0;
      for (std::uint64_t j = 0; j < factor; ++j) acc += fine.increments[(n * factor + j) * m + c];
      coarse.increments[n * m + c] = acc;
    }
  detail::fill_truncation(coarse);
  detail::fill_iterated_integrals(coarse);
  return coarse;
}

// Refines through a dyadic (or mixed-radix) ladder until the step count
// reaches `target_N`; `target_N` must be `path.N` times a product of the
// factors applied (factor 2 used while it divides evenly, else the remaining
// ratio in one shot).
inline BrownianPath refine_to(BrownianPath path, std::uint64_t target_N) {
  if (target_N < path.spec.N || target_N % path.spec.N != 0)
    throw std::invalid_argument("refine_to: target step count must be a multiple of the current one");
  while (path.spec.N != target_N) {
    const std::uint64_t ratio = target_N / path.spec.N;
    path = refine(path, ratio % 2 == 0 ? 2 : ratio);
  }
  return path;
}

inline std::pair<const std::vector<double>&, const std::vector<double>&> iterated_integrals(const BrownianPath& path) {
  if (path.spec.m != 1) throw std::invalid_argument("iterated integrals are stored for scalar noise only");
  return {path.i2, path.i3};
}

// Auxiliary Brownian motion of dimension `dim` on the same grid, independent
// of the primary path by stream separation.
inline BrownianPath generate_auxiliary(const PathSpec& primary, std::uint64_t dim, std::uint64_t aux_id = 0) {
  PathSpec spec = primary;
  spec.m = dim;
  return generate(spec, 3.0, 1 + aux_id);
}

}  // namespace srk
