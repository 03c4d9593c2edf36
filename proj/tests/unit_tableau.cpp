#include <random>
#include <sstream>

#include "doctest.h"
#include "srk/tableau.hpp"

using namespace srk;

namespace {

Rational rat(long num, long den = 1) { return Rational(num, den); }

Tableau random_tableau(std::mt19937& gen) {
  std::uniform_int_distribution<int> num(-3, 3);
  std::uniform_int_distribution<int> den(1, 4);
  auto draw = [&] { return Rational(num(gen), den(gen)); };
  Tableau t;
  t.s0 = 3;
  t.A = RationalMatrix(3);
  t.B = RationalMatrix(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      t.A(i, j) = draw();
      t.B(i, j) = draw();
    }
  t.alpha = {draw(), draw(), draw()};
  t.beta = {draw(), draw(), draw()};
  t.name = "random";
  return t;
}

}  // namespace

TEST_CASE("hadamard and componentwise power") {
  RationalVector a{rat(1), rat(2)}, b{rat(3), rat(4)};
  CHECK(hadamard(a, b) == RationalVector{rat(3), rat(8)});
  CHECK(cpow(a, 2) == RationalVector{rat(1), rat(4)});
  const auto e = ones(4);
  CHECK(hadamard(e, e) == e);
  CHECK_THROWS_AS(hadamard(a, ones(3)), std::invalid_argument);
  CHECK_THROWS_AS(cpow(a, 0), std::invalid_argument);
}

TEST_CASE("strong order one conditions") {
  SUBCASE("implicit midpoint satisfies all three") {
    const auto rep = check_strong1(implicit_midpoint_tableau());
    for (const auto& entry : rep.consistency) CHECK(entry.value == 0);
    CHECK(rep.consistent());
  }
  SUBCASE("alpha = (1,0) two-stage variant") {
    Tableau t;
    t.s0 = 2;
    t.A = RationalMatrix(2, rat(0));
    t.B = RationalMatrix::from_rows({{rat(1, 2), rat(0)}, {rat(1, 2), rat(0)}});
    t.alpha = {rat(1), rat(0)};
    t.beta = {rat(1, 2), rat(1, 2)};
    const auto rep = check_strong1(t);
    CHECK(rep.residual("alpha_e_minus_1") == 0);
    CHECK(rep.residual("beta_e_minus_1") == 0);
    CHECK(rep.residual("beta_Be_minus_half") == 0);
  }
  SUBCASE("all-zero tableau") {
    Tableau t;
    t.s0 = 2;
    t.A = RationalMatrix(2);
    t.B = RationalMatrix(2);
    t.alpha = RationalVector(2, rat(0));
    t.beta = RationalVector(2, rat(0));
    const auto rep = check_strong1(t);
    CHECK(rep.residual("alpha_e_minus_1") == rat(-1));
    CHECK(rep.residual("beta_e_minus_1") == rat(-1));
    CHECK(rep.residual("beta_Be_minus_half") == rat(-1, 2));
  }
}

TEST_CASE("eta1 of the implicit midpoint") {
  // Independent scalar evaluation of the fourteen residuals for
  // A = B = [1/2], alpha = beta = [1].
  const Rational a(1, 2), b(1, 2), al(1), be(1);
  const Rational terms[14] = {
      al * a - rat(1, 2),          al * (b * b) - rat(1, 4),      al * (b * b) - rat(1, 2),
      be * (a * b),                be * (b * b * b) - rat(1, 12), be * (b * a) - rat(1, 4),
      be * (b * b * b) - rat(1, 24), be * (a * b) - rat(1, 4),    be * (b * b * b) - rat(1, 8),
      be * (b * b * b) - rat(1, 4),  al * b - rat(1, 2),          be * a - rat(1, 2),
      be * (b * b) - rat(1, 6),      be * (b * b) - rat(1, 3),
  };
  Rational expected(0);
  for (const auto& r : terms) expected += r * r;
  CHECK(expected == rat(47, 288));

  const auto rep = eta1(implicit_midpoint_tableau());
  CHECK(rep.eta == rat(47, 288));
  CHECK(rep.eta > 0);
  REQUIRE(rep.weak2.size() == 14);
  for (std::size_t i = 0; i < 14; ++i) CHECK(rep.weak2[i].value == terms[i]);

  // Exactly these seven residuals vanish for the midpoint coefficients.
  for (const char* key : {"alpha_Ae", "alpha_BBe", "beta_BAe", "beta_Ae_h_Be", "beta_Be_h_BBe", "alpha_Be", "beta_Ae"})
    CHECK(rep.residual(key) == 0);
  for (const char* key : {"alpha_Be_sq", "beta_ABe", "beta_B_Be_sq", "beta_BBBe", "beta_Be_cube", "beta_BBe",
                          "beta_Be_sq"})
    CHECK(rep.residual(key) != 0);
}

TEST_CASE("eta1 is a nonnegative sum of squares, zero iff all residuals vanish") {
  std::mt19937 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rep = eta1(random_tableau(gen));
    CHECK(rep.eta >= 0);
    const bool all_zero = std::all_of(rep.weak2.begin(), rep.weak2.end(),
                                      [](const ResidualEntry& e) { return e.value == 0; });
    CHECK((rep.eta == 0) == all_zero);
  }
}

TEST_CASE("eta1 runs on inconsistent tableaux and reports the scaled coefficients") {
  Tableau t = implicit_midpoint_tableau();
  t.beta = {rat(2)};  // beta -> 2 beta
  const auto rep = eta1(t);
  CHECK(rep.residual("beta_e_minus_1") == rat(1));
  CHECK(rep.residual("beta_BBe") == rat(1, 3));  // 2 * (1/4) - 1/6
  CHECK(rep.eta > 0);
}

TEST_CASE("eta1 is invariant under simultaneous stage relabeling") {
  std::mt19937 gen(11);
  std::array<std::size_t, 3> perms[5] = {{1, 0, 2}, {2, 1, 0}, {0, 2, 1}, {1, 2, 0}, {2, 0, 1}};
  for (int trial = 0; trial < 20; ++trial) {
    const Tableau t = random_tableau(gen);
    const auto& p = perms[trial % 5];
    Tableau tp = t;
    for (std::size_t i = 0; i < 3; ++i) {
      tp.alpha[i] = t.alpha[p[i]];
      tp.beta[i] = t.beta[p[i]];
      for (std::size_t j = 0; j < 3; ++j) {
        tp.A(i, j) = t.A(p[i], p[j]);
        tp.B(i, j) = t.B(p[i], p[j]);
      }
    }
    CHECK(eta1(t).eta == eta1(tp).eta);
  }
}

TEST_CASE("eta2 reproduces the reference values exactly") {
  CHECK(eta2(trapezoid_tableau()).eta == 0);
  CHECK(eta2(builtin_additive("midpoint")).eta == rat(1, 16));
  CHECK(eta2(builtin_additive("implicit_euler")).eta == rat(3, 4));
  CHECK(eta2(builtin_additive("theta:1")).eta == rat(3, 4));

  const auto rep = eta2(theta_tableau(0.7071067811865476));
  CHECK(rep.inexact);
  const double eta = rep.eta.convert_to<double>();
  const double expected = (3.0 - 2.0 * std::sqrt(2.0)) / 2.0;
  CHECK(std::abs(eta - expected) < 1e-9);
}

TEST_CASE("theta-method eta2 matches the closed form for random rational theta") {
  std::mt19937 gen(3);
  std::uniform_int_distribution<int> num(-8, 8);
  std::uniform_int_distribution<int> den(1, 9);
  for (int trial = 0; trial < 10; ++trial) {
    const Rational theta(num(gen), den(gen));
    const auto rep = eta2(theta_tableau(theta));
    const Rational half(1, 2);
    const Rational expected =
        (theta - half) * (theta - half) + (theta * theta - half) * (theta * theta - half) + (theta - half) * (theta - half);
    CHECK(rep.eta == expected);
    CHECK(rep.residual("alphabar_e_minus_1") == 0);
  }
}

TEST_CASE("builtin catalog") {
  const auto trap = builtin_additive("trapezoid");
  CHECK(trap.s0 == 2);
  CHECK(trap.Abar(0, 0) == 0);
  CHECK(trap.Abar(1, 0) == rat(1, 2));
  CHECK(trap.Abar(1, 1) == rat(1, 2));
  CHECK(trap.bbar == RationalVector{rat(0), rat(1)});
  CHECK(trap.alphabar == RationalVector{rat(1, 2), rat(1, 2)});

  CHECK(builtin_additive("theta:1/3").Abar(0, 0) == rat(1, 3));
  CHECK(builtin_multiplicative("implicit_midpoint").alpha == RationalVector{rat(1)});
  CHECK_THROWS_AS(builtin_additive("nope"), std::invalid_argument);
  CHECK_THROWS_AS(builtin_multiplicative("nope"), std::invalid_argument);
}

TEST_CASE("tableau file round trip and errors") {
  SUBCASE("additive file") {
    std::istringstream in(
        "name = trap\n"
        "s0 = 2\n"
        "# comment line\n"
        "Abar = 0 0 1/2 1/2\n"
        "bbar = 0 1\n"
        "alphabar = 1/2 1/2\n");
    const auto file = load_tableau_file(in, "trap.tab");
    REQUIRE(file.additive.has_value());
    CHECK(!file.multiplicative.has_value());
    CHECK(file.additive->name == "trap");
    CHECK(eta2(*file.additive).eta == 0);
  }
  SUBCASE("multiplicative file") {
    std::istringstream in("s0 = 1\nA = 1/2\nB = 1/2\nalpha = 1\nbeta = 1\n");
    const auto file = load_tableau_file(in, "mid.tab");
    REQUIRE(file.multiplicative.has_value());
    CHECK(eta1(*file.multiplicative).eta == rat(47, 288));
  }
  SUBCASE("bad rational reports the line") {
    std::istringstream in("s0 = 1\nA = x\nB = 0\nalpha = 1\nbeta = 1\n");
    CHECK_THROWS_WITH_AS(load_tableau_file(in, "bad.tab"), doctest::Contains("bad.tab:2"), std::runtime_error);
  }
  SUBCASE("empty file") {
    std::istringstream in("");
    CHECK_THROWS_AS(load_tableau_file(in, "empty.tab"), std::runtime_error);
  }
  SUBCASE("unknown key rejected") {
    std::istringstream in("s0 = 1\nA = 0\nB = 0\nalpha = 1\nbeta = 1\nbogus = 3\n");
    CHECK_THROWS_WITH_AS(load_tableau_file(in, "t.tab"), doctest::Contains("bogus"), std::runtime_error);
  }
  SUBCASE("wrong entry count reports the line") {
    std::istringstream in("s0 = 2\nAbar = 0 0 1/2\nbbar = 0 1\nalphabar = 1/2 1/2\n");
    CHECK_THROWS_WITH_AS(load_tableau_file(in, "t.tab"), doctest::Contains("t.tab:2"), std::runtime_error);
  }
}

TEST_CASE("report CSV serialization") {
  const auto rep = eta2(trapezoid_tableau());
  const std::string csv = report_to_csv(rep);
  CHECK(csv.find("condition,residual_num,residual_den") == 0);
  CHECK(csv.find("alphabar_Abar_e,0,1") != std::string::npos);
  CHECK(csv.find("eta,0,1") != std::string::npos);
}

TEST_CASE("rational parsing") {
  CHECK(parse_rational("3/4") == rat(3, 4));
  CHECK(parse_rational(" -7 ") == rat(-7));
  CHECK(parse_rational("-2/6") == rat(-1, 3));
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("a/b"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
  CHECK(format_rational(rat(-3, 7)) == "-3/7");
  CHECK(format_rational(rat(5)) == "5");
}
