#include <cmath>
#include <random>

#include "doctest.h"
#include "srk/noise.hpp"
#include "srk/stats.hpp"

using namespace srk;

namespace {

// Closed-form tail moments of the clamp zeta = clamp(xi, +-A) for xi ~ N(0,1).
double tail_Q(double A) { return 0.5 * std::erfc(A / std::sqrt(2.0)); }
double density(double A) { return std::exp(-0.5 * A * A) / std::sqrt(2.0 * M_PI); }
double clamp_m2(double A) { return 2.0 * ((1.0 + A * A) * tail_Q(A) - A * density(A)); }
double clamp_d2(double A) { return 2.0 * (A * density(A) + (1.0 - A * A) * tail_Q(A)); }
double clamp_d4(double A) {
  return 2.0 * ((A * A * A + 3.0 * A) * density(A) + (3.0 - A * A * A * A) * tail_Q(A));
}
double a_h(double h, double kappa) { return std::sqrt(2.0 * kappa * std::abs(std::log(h))); }

}  // namespace

TEST_CASE("path generation is deterministic and validated") {
  PathSpec spec{1.0, 64, 2, 42, 7};
  const auto a = generate(spec, 3.0);
  const auto b = generate(spec, 3.0);
  CHECK(a.increments == b.increments);
  CHECK(a.truncated == b.truncated);

  PathSpec other = spec;
  other.path_index = 8;
  CHECK(generate(other).increments != a.increments);

  CHECK_THROWS_AS(generate(PathSpec{1.0, 0, 1, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate(PathSpec{0.0, 4, 1, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate(spec, 0.5), std::invalid_argument);
}

TEST_CASE("truncation clamps to sqrt(h) A_h componentwise") {
  PathSpec spec{1.0, 1 << 14, 1, 5, 0};
  const double kappa = 1.0;
  const auto path = generate(spec, kappa);
  const double bound = std::sqrt(path.h) * a_h(path.h, kappa);
  for (std::size_t i = 0; i < path.increments.size(); ++i) {
    const double w = path.increments[i];
    const double expect = w > bound ? bound : (w < -bound ? -bound : w);
    CHECK(path.truncated[i] == expect);
  }
  // At a coarse level the kappa=1 clamp is ~2.4 sigma, so clamping must
  // actually occur.
  PathSpec coarse{1.0, 16, 1, 5, 0};
  int coarse_clamped = 0;
  for (std::uint64_t p = 0; p < 4096; ++p) {
    coarse.path_index = p;
    const auto cp = generate(coarse, 1.0);
    const double cb = std::sqrt(cp.h) * a_h(cp.h, 1.0);
    for (double w : cp.increments)
      if (std::abs(w) > cb) ++coarse_clamped;
  }
  CHECK(coarse_clamped > 0);
}

TEST_CASE("truncation disabled when h >= 1") {
  PathSpec spec{4.0, 4, 1, 9, 0};  // h = 1
  const auto path = generate(spec);
  CHECK(path.truncation_disabled);
  CHECK(path.truncated == path.increments);
}

TEST_CASE("truncated mean stays at zero") {
  // h = 2^-6, kappa = 3: one million draws of zeta.
  PathSpec spec{1.0, 64, 1, 123, 0};
  std::vector<double> zetas;
  zetas.reserve(1000000);
  for (std::uint64_t p = 0; zetas.size() < 1000000; ++p) {
    spec.path_index = p;
    const auto path = generate(spec, 3.0);
    const double sqrt_h = std::sqrt(path.h);
    for (double w : path.truncated) zetas.push_back(w / sqrt_h);
  }
  const auto stats = summarize(zetas);
  CHECK(std::abs(stats.mean) < 4.0 * stats.std_error());
}

TEST_CASE("truncation moment decay: closed-form exponents at kappa = 3") {
  const double kappa = 3.0;
  std::vector<std::pair<double, double>> m2_pts, d2_pts, d4_pts;
  for (int k = 4; k <= 10; ++k) {
    const double h = std::ldexp(1.0, -k);
    const double A = a_h(h, kappa);
    m2_pts.emplace_back(h, clamp_m2(A));
    d2_pts.emplace_back(h, std::abs(clamp_d2(A)));
    d4_pts.emplace_back(h, std::abs(clamp_d4(A)));
  }
  CHECK(fit_slope(m2_pts).slope >= kappa - 0.5);
  CHECK(fit_slope(d2_pts).slope >= kappa - 0.5);
  CHECK(fit_slope(d4_pts).slope >= kappa - 0.5);
}

TEST_CASE("sampled truncation moments match the closed forms where counts allow") {
  // kappa = 1, h = 2^-4 clamps ~1.9% of draws; 2^20 samples give solid
  // signal for both E|xi-zeta|^2 and E(xi^2-zeta^2).
  const double kappa = 1.0;
  PathSpec spec{1.0, 16, 1, 777, 0};
  std::vector<double> sq_diff, second_diff;
  sq_diff.reserve(1 << 20);
  for (std::uint64_t p = 0; sq_diff.size() < (1 << 20); ++p) {
    spec.path_index = p;
    const auto path = generate(spec, kappa);
    const double sqrt_h = std::sqrt(path.h);
    for (std::size_t i = 0; i < path.increments.size(); ++i) {
      const double xi = path.increments[i] / sqrt_h;
      const double zeta = path.truncated[i] / sqrt_h;
      sq_diff.push_back((xi - zeta) * (xi - zeta));
      second_diff.push_back(xi * xi - zeta * zeta);
    }
  }
  const double A = a_h(1.0 / 16, kappa);
  const auto s1 = summarize(sq_diff);
  CHECK(std::abs(s1.mean - clamp_m2(A)) < 4.0 * s1.std_error());
  const auto s2 = summarize(second_diff);
  CHECK(std::abs(s2.mean - clamp_d2(A)) < 4.0 * s2.std_error());
}

TEST_CASE("iterated integrals: closed forms and moments") {
  PathSpec spec{1.0, 4, 1, 31, 2};
  auto path = generate(spec);
  const double h = path.h;
  SUBCASE("identities hold entrywise") {
    for (std::uint64_t n = 0; n < path.steps(); ++n) {
      const double w = path.dW(n);
      CHECK(path.i2[n] == 0.5 * (w * w - h));
      CHECK(path.i3[n] == (w * w * w - 3.0 * h * w) / 6.0);
      CHECK(2.0 * path.i2[n] + h == doctest::Approx(w * w).epsilon(1e-12));
      CHECK(6.0 * path.i3[n] + 3.0 * h * w == doctest::Approx(w * w * w).epsilon(1e-12));
    }
  }
  SUBCASE("degenerate increments") {
    path.increments[0] = 0.0;
    path.increments[1] = std::sqrt(h);
    detail::fill_iterated_integrals(path);
    CHECK(path.i2[0] == -h / 2.0);
    CHECK(path.i2[1] == 0.0);
  }
  SUBCASE("moment oracles") {
    PathSpec mspec{1.0, 64, 1, 99, 0};
    std::vector<double> i3s, i2sq, w4;
    i3s.reserve(1000000);
    for (std::uint64_t p = 0; i3s.size() < 1000000; ++p) {
      mspec.path_index = p;
      const auto mp = generate(mspec);
      for (std::uint64_t n = 0; n < mp.steps(); ++n) {
        i3s.push_back(mp.i3[n]);
        i2sq.push_back(mp.i2[n] * mp.i2[n]);
        w4.push_back(std::pow(mp.dW(n), 4));
      }
    }
    const double hh = 1.0 / 64;
    const auto st3 = summarize(i3s);
    CHECK(std::abs(st3.mean) < 4.0 * st3.std_error());
    const auto st2 = summarize(i2sq);
    CHECK(std::abs(st2.mean - hh * hh / 2.0) < 3.0 * st2.std_error());
    // E[dW^4] = 3 h^2 exercises the fourth-moment identity.
    const auto st4 = summarize(w4);
    CHECK(std::abs(st4.mean - 3.0 * hh * hh) < 4.0 * st4.std_error());
  }
  SUBCASE("multidimensional noise has no stored integrals") {
    PathSpec md{1.0, 4, 2, 0, 0};
    const auto mp = generate(md);
    CHECK_THROWS_AS(iterated_integrals(mp), std::invalid_argument);
  }
}

TEST_CASE("refinement couples exactly") {
  SUBCASE("pair sums reproduce the parent bit-exactly") {
    for (std::uint64_t pi = 0; pi < 200; ++pi) {
      PathSpec spec{1.0, 8, 2, 2024, pi};
      const auto parent = generate(spec);
      const auto child = refine(parent);
      for (std::uint64_t n = 0; n < parent.steps(); ++n)
        for (std::uint64_t c = 0; c < 2; ++c)
          CHECK(child.dW(2 * n, c) + child.dW(2 * n + 1, c) == parent.dW(n, c));
    }
  }
  SUBCASE("factor-10 splits reproduce the parent bit-exactly") {
    for (std::uint64_t pi = 0; pi < 100; ++pi) {
      PathSpec spec{0.5, 4, 1, 11, pi};
      const auto parent = generate(spec);
      const auto child = refine(parent, 10);
      for (std::uint64_t n = 0; n < parent.steps(); ++n) {
        double acc = 0.0;
        for (std::uint64_t j = 0; j < 10; ++j) acc += child.dW(10 * n + j);
        CHECK(acc == parent.dW(n));
      }
    }
  }
  SUBCASE("refine twice telescopes through the intermediate level") {
    PathSpec spec{1.0, 4, 1, 3, 9};
    const auto p0 = generate(spec);
    const auto p1 = refine(p0);
    const auto p2 = refine(p1);
    CHECK(p2.steps() == 16);
    for (std::uint64_t n = 0; n < p1.steps(); ++n) CHECK(p2.dW(2 * n) + p2.dW(2 * n + 1) == p1.dW(n));
    for (std::uint64_t n = 0; n < p0.steps(); ++n) CHECK(p1.dW(2 * n) + p1.dW(2 * n + 1) == p0.dW(n));
  }
  SUBCASE("coupled fine increments have variance h/2") {
    // The coarsen coupling preserves the increment law exactly: fine
    // increments are N(0, h/2) and pairwise-sum to the coarse ones.
    std::vector<double> fines;
    fines.reserve(100000);
    for (std::uint64_t pi = 0; pi < 50000; ++pi) {
      PathSpec spec{1.0, 2, 1, 512, pi};
      const auto fine = generate(spec);
      const auto coarse = coarsen(fine, 2);
      CHECK(fine.dW(0) + fine.dW(1) == coarse.dW(0));
      fines.push_back(fine.dW(0));
      fines.push_back(fine.dW(1));
    }
    const auto stats = summarize(fines);
    const double se_var = stats.variance * std::sqrt(2.0 / static_cast<double>(fines.size() - 1));
    // parent h = 1, so the fine increments carry variance h/2
    CHECK(std::abs(stats.variance - 0.5) < 3.0 * se_var);
    CHECK(std::abs(stats.mean) < 4.0 * stats.std_error());
  }
  SUBCASE("bridge-refined increments stay near variance h/2") {
    // Exact closure relocates the split point when the bridge draw dwarfs
    // the parent increment, which thins the tails; the variance stays within
    // ~10% of h/2 but is not exact. coarsen() is the unbiased coupling.
    std::vector<double> firsts;
    firsts.reserve(100000);
    for (std::uint64_t pi = 0; pi < 50000; ++pi) {
      PathSpec spec{1.0, 1, 1, 512, pi};
      const auto child = refine(generate(spec));
      firsts.push_back(child.dW(0));
      firsts.push_back(child.dW(1));
    }
    const auto stats = summarize(firsts);
    CHECK(stats.variance > 0.38);
    CHECK(stats.variance < 0.55);
    CHECK(std::abs(stats.mean) < 4.0 * stats.std_error());
  }
  SUBCASE("argument validation") {
    PathSpec spec{1.0, 4, 1, 0, 0};
    const auto p = generate(spec);
    CHECK_THROWS_AS(refine(p, 1), std::invalid_argument);
    CHECK_THROWS_AS(refine_to(p, 6), std::invalid_argument);
    CHECK(refine_to(p, 16).steps() == 16);
  }
}

TEST_CASE("close_split closes bridge splits exactly") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> mantissa(-1.0, 1.0);
  std::uniform_int_distribution<int> base_expo(-30, 30);
  std::uniform_int_distribution<int> rel_expo(-10, 10);
  for (int i = 0; i < 100000; ++i) {
    const int e = base_expo(gen);
    const double total = std::ldexp(mantissa(gen), e);
    const double partial = std::ldexp(mantissa(gen), e + rel_expo(gen));
    const double draw = std::ldexp(mantissa(gen), e + rel_expo(gen));
    double d_a = draw, d_b = 0.0;
    detail::close_split(total, partial, d_a, d_b);
    const double q = partial + d_a;
    CHECK(q + d_b == total);
    // in the same-sign Sterbenz interval the draw itself closes the sum
    const double q0 = partial + draw;
    if (q0 * total > 0 && std::abs(q0) >= 0.5 * std::abs(total) && std::abs(q0) <= 2.0 * std::abs(total))
      CHECK(d_a == draw);
  }
}

TEST_CASE("coarsen aggregates exactly onto coarser grids") {
  for (std::uint64_t pi = 0; pi < 50; ++pi) {
    PathSpec spec{1.0, 40, 2, 606, pi};
    const auto fine = generate(spec);
    for (std::uint64_t factor : {2ull, 5ull, 10ull}) {
      const auto coarse = coarsen(fine, factor);
      CHECK(coarse.steps() == 40 / factor);
      CHECK(coarse.h == doctest::Approx(fine.h * static_cast<double>(factor)));
      for (std::uint64_t n = 0; n < coarse.steps(); ++n)
        for (std::uint64_t c = 0; c < 2; ++c) {
          double acc = 0.0;
          for (std::uint64_t j = 0; j < factor; ++j) acc += fine.dW(n * factor + j, c);
          CHECK(acc == coarse.dW(n, c));
        }
    }
  }
  PathSpec spec{1.0, 40, 1, 0, 0};
  const auto fine = generate(spec);
  CHECK_THROWS_AS(coarsen(fine, 3), std::invalid_argument);
  CHECK_THROWS_AS(coarsen(fine, 1), std::invalid_argument);
  // coarsening then comparing against the scalar-noise integrals of the
  // coarse grid keeps the closed forms intact
  const auto coarse = coarsen(fine, 4);
  for (std::uint64_t n = 0; n < coarse.steps(); ++n) {
    const double w = coarse.dW(n);
    CHECK(coarse.i2[n] == 0.5 * (w * w - coarse.h));
  }
}

TEST_CASE("auxiliary streams are uncorrelated with the primary path") {
  std::vector<double> prods;
  prods.reserve(200000);
  for (std::uint64_t pi = 0; pi < 1563; ++pi) {
    PathSpec spec{1.0, 64, 1, 5150, pi};
    const auto w = generate(spec);
    const auto wt = generate_auxiliary(spec, 1);
    const auto wt2 = generate_auxiliary(spec, 1, 1);
    for (std::uint64_t n = 0; n < 64; ++n) {
      prods.push_back(w.dW(n) * wt.dW(n) / w.h);
      prods.push_back(wt.dW(n) * wt2.dW(n) / w.h);
    }
  }
  const auto stats = summarize(prods);
  CHECK(std::abs(stats.mean) < 4.0 * stats.std_error());
}

TEST_CASE("philox normals have unit variance") {
  std::vector<double> zs;
  zs.reserve(1 << 20);
  for (std::uint64_t i = 0; zs.size() < (1 << 20); ++i)
    zs.push_back(standard_normal({99, i}, noise_counter(0, DrawKind::base, 0, i, 0)));
  const auto stats = summarize(zs);
  CHECK(std::abs(stats.mean) < 4.0 * stats.std_error());
  const double se_var = stats.variance * std::sqrt(2.0 / static_cast<double>(zs.size() - 1));
  CHECK(std::abs(stats.variance - 1.0) < 4.0 * se_var);
}
