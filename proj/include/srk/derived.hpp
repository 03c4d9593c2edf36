// Coefficient functions derived from a problem and a tableau: the Ito drift
// correction fbar, the expansion coefficients F1..F4 of the one-step map, the
// limit-equation fields G1, G2, and the residual-weighted forcings H1..H3.
//
// Everything depends on the tableau only through fourteen scalar
// contractions, so the evaluators can also be built from a raw contraction
// set (used by the limit simulators and by tests that scale residuals).
#pragma once

#include <array>
#include <cmath>

#include "srk/problem.hpp"
#include "srk/tableau.hpp"

namespace srk {

struct TableauContractions {
  double alpha_Ae = 0, alpha_BBe = 0, alpha_Be_sq = 0, beta_ABe = 0, beta_B_Be_sq = 0, beta_BAe = 0, beta_BBBe = 0,
         beta_Ae_h_Be = 0, beta_Be_h_BBe = 0, beta_Be_cube = 0, alpha_Be = 0, beta_Ae = 0, beta_BBe = 0,
         beta_Be_sq = 0;

  static constexpr std::array<double, 14> targets() {
    return {0.5, 0.25, 0.5, 0.0, 1.0 / 12, 0.25, 1.0 / 24, 0.25, 0.125, 0.25, 0.5, 0.5, 1.0 / 6, 1.0 / 3};
  }

  std::array<double, 14> values() const {
    return {alpha_Ae,     alpha_BBe,     alpha_Be_sq,  beta_ABe, beta_B_Be_sq, beta_BAe, beta_BBBe,
            beta_Ae_h_Be, beta_Be_h_BBe, beta_Be_cube, alpha_Be, beta_Ae,      beta_BBe, beta_Be_sq};
  }

  std::array<double, 14> residuals() const {
    auto v = values();
    const auto t = targets();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= t[i];
    return v;
  }

  static TableauContractions from_tableau(const Tableau& tab) {
    const auto terms = eta1_terms(tab);
    TableauContractions c;
    double* slots[14] = {&c.alpha_Ae,     &c.alpha_BBe,     &c.alpha_Be_sq,  &c.beta_ABe, &c.beta_B_Be_sq,
                         &c.beta_BAe,     &c.beta_BBBe,     &c.beta_Ae_h_Be, &c.beta_Be_h_BBe,
                         &c.beta_Be_cube, &c.alpha_Be,      &c.beta_Ae,      &c.beta_BBe, &c.beta_Be_sq};
    for (std::size_t i = 0; i < terms.size(); ++i) *slots[i] = terms[i].value.convert_to<double>();
    return c;
  }

  // Contractions sitting exactly on the weak-order-2 targets (all residuals
  // zero); with these the H forcings vanish identically.
  static TableauContractions weak2_exact() {
    TableauContractions c;
    double* slots[14] = {&c.alpha_Ae,     &c.alpha_BBe,     &c.alpha_Be_sq,  &c.beta_ABe, &c.beta_B_Be_sq,
                         &c.beta_BAe,     &c.beta_BBBe,     &c.beta_Ae_h_Be, &c.beta_Be_h_BBe,
                         &c.beta_Be_cube, &c.alpha_Be,      &c.beta_Ae,      &c.beta_BBe, &c.beta_Be_sq};
    const auto t = targets();
    for (std::size_t i = 0; i < t.size(); ++i) *slots[i] = t[i];
    return c;
  }

  // Targets shifted by the given residual vector (test hook: H is linear in
  // the residuals, so scaling the vector scales the forcings).
  static TableauContractions from_residuals(const std::array<double, 14>& r) {
    TableauContractions c = weak2_exact();
    double* slots[14] = {&c.alpha_Ae,     &c.alpha_BBe,     &c.alpha_Be_sq,  &c.beta_ABe, &c.beta_B_Be_sq,
                         &c.beta_BAe,     &c.beta_BBBe,     &c.beta_Ae_h_Be, &c.beta_Be_h_BBe,
                         &c.beta_Be_cube, &c.alpha_Be,      &c.beta_Ae,      &c.beta_BBe, &c.beta_Be_sq};
    for (std::size_t i = 0; i < r.size(); ++i) *slots[i] += r[i];
    return c;
  }
};

class DerivedCoefficients {
 public:
  DerivedCoefficients(SdeProblem problem, TableauContractions contractions)
      : p_(std::move(problem)), c_(contractions), r_(c_.residuals()) {}

  const SdeProblem& problem() const { return p_; }
  const TableauContractions& contractions() const { return c_; }
  const std::array<double, 14>& residuals() const { return r_; }

  // fbar = f + (1/2) (grad g) g
  State fbar(const State& y) const { return p_.f(y) + 0.5 * p_.dg(y, p_.g(y)); }

  // d fbar(y) v = df(y, v) + (1/2)[ d2g(y)(g, v) + dg(y, dg(y, v)) ]
  State dfbar(const State& y, const State& v) const {
    return p_.df(y, v) + 0.5 * (p_.d2g(y, p_.g(y), v) + p_.dg(y, p_.dg(y, v)));
  }

  State F1(const State& y) const {
    const State g = p_.g(y);
    const State f = p_.f(y);
    return c_.alpha_Be * p_.df(y, g) + c_.beta_Ae * p_.dg(y, f);
  }

  State F2(const State& y) const {
    const State g = p_.g(y);
    return c_.beta_BBe * p_.dg(y, p_.dg(y, g)) + 0.5 * c_.beta_Be_sq * p_.d2g(y, g, g);
  }

  State F3(const State& y) const {
    const State g = p_.g(y);
    const State f = p_.f(y);
    return c_.alpha_BBe * p_.df(y, p_.dg(y, g)) + c_.beta_ABe * p_.dg(y, p_.df(y, g)) +
           c_.beta_BAe * p_.dg(y, p_.dg(y, f)) + 0.5 * c_.alpha_Be_sq * p_.d2f(y, g, g) +
           c_.beta_Ae_h_Be * p_.d2g(y, f, g);
  }

  State F4(const State& y) const {
    const State g = p_.g(y);
    const State dgg = p_.dg(y, g);
    return c_.beta_BBBe * p_.dg(y, p_.dg(y, dgg)) + 0.5 * c_.beta_B_Be_sq * p_.dg(y, p_.d2g(y, g, g)) +
           c_.beta_Be_h_BBe * p_.d2g(y, g, dgg) + (1.0 / 6.0) * c_.beta_Be_cube * p_.d3g(y, g, g, g);
  }

  // G1 = (grad fbar) g - (grad g) fbar - (1/2) D^2 g(g, g); collapses to
  // (grad f) g - (grad g) f once fbar is expanded.
  State G1(const State& y) const {
    const State g = p_.g(y);
    return dfbar(y, g) - p_.dg(y, fbar(y)) - 0.5 * p_.d2g(y, g, g);
  }

  State G2(const State& y) const {
    const State g = p_.g(y);
    return 6.0 * F2(y) - p_.dg(y, p_.dg(y, g)) - p_.d2g(y, g, g);
  }

  State H1(const State& y) const {
    const State g = p_.g(y);
    const State f = p_.f(y);
    const State dgg = p_.dg(y, g);
    return r_[0] * p_.df(y, f) + r_[1] * p_.df(y, dgg) + 0.5 * r_[2] * p_.d2f(y, g, g) +
           r_[3] * p_.dg(y, p_.df(y, g)) + 1.5 * r_[4] * p_.dg(y, p_.d2g(y, g, g)) + r_[5] * p_.dg(y, p_.dg(y, f)) +
           3.0 * r_[6] * p_.dg(y, p_.dg(y, dgg)) + r_[7] * p_.d2g(y, f, g) + 3.0 * r_[8] * p_.d2g(y, g, dgg) +
           0.5 * r_[9] * p_.d3g(y, g, g, g);
  }

  State H2(const State& y) const {
    const State g = p_.g(y);
    return r_[10] * p_.df(y, g) + r_[11] * p_.dg(y, p_.f(y)) + 3.0 * r_[12] * p_.dg(y, p_.dg(y, g)) +
           1.5 * r_[13] * p_.d2g(y, g, g);
  }

  State H3(const State& y) const {
    const State g = p_.g(y);
    return 6.0 * r_[12] * p_.dg(y, p_.dg(y, g)) + 3.0 * r_[13] * p_.d2g(y, g, g);
  }

  // Integrand of the unified limit equation, (grad f) g - (grad g) f.
  State commutator(const State& y) const {
    const State g = p_.g(y);
    const State f = p_.f(y);
    return p_.df(y, g) - p_.dg(y, f);
  }

 private:
  SdeProblem p_;
  TableauContractions c_;
  std::array<double, 14> r_;
};

inline DerivedCoefficients make_derived(const SdeProblem& problem, const Tableau& tab) {
  return DerivedCoefficients(problem, TableauContractions::from_tableau(tab));
}

inline DerivedCoefficients make_derived(const SdeProblem& problem, const TableauContractions& contractions) {
  return DerivedCoefficients(problem, contractions);
}

// Additive-side contractions (three scalars plus consistency weight).
struct AdditiveContractions {
  double alphabar_Abar_e = 0.5;
  double alphabar_bbar_sq = 0.5;
  double alphabar_bbar = 0.5;

  static AdditiveContractions from_tableau(const AdditiveTableau& tab) {
    const auto rep = eta2(tab);
    AdditiveContractions c;
    c.alphabar_Abar_e = 0.5 + rep.weak2[0].value.convert_to<double>();
    c.alphabar_bbar_sq = 0.5 + rep.weak2[1].value.convert_to<double>();
    c.alphabar_bbar = 0.5 + rep.weak2[2].value.convert_to<double>();
    return c;
  }

  std::array<double, 3> residuals() const {
    return {alphabar_Abar_e - 0.5, alphabar_bbar_sq - 0.5, alphabar_bbar - 0.5};
  }
};

}  // namespace srk
