// Butcher tableaux for stochastic Runge-Kutta schemes, their consistency and
// weak-order-2 residuals, and the growth parameters eta1 (multiplicative
// noise) and eta2 (additive noise).
//
// All residuals are exact rationals. A tableau built from a double-valued
// theta keeps exact arithmetic on the dyadic rational the double represents,
// and the resulting reports carry an `inexact` flag.
#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srk/rational.hpp"

namespace srk {

struct Tableau {
  std::size_t s0 = 0;
  RationalMatrix A;
  RationalMatrix B;
  RationalVector alpha;
  RationalVector beta;
  std::string name;
  bool inexact = false;  // coefficients approximate irrational targets

  void validate() const {
    if (s0 == 0) throw std::invalid_argument("tableau: s0 must be positive");
    if (A.size() != s0 || B.size() != s0 || alpha.size() != s0 || beta.size() != s0)
      throw std::invalid_argument("tableau '" + name + "': inconsistent dimensions");
  }
};

struct AdditiveTableau {
  std::size_t s0 = 0;
  RationalMatrix Abar;
  RationalVector bbar;
  RationalVector alphabar;
  std::string name;
  bool inexact = false;

  void validate() const {
    if (s0 == 0) throw std::invalid_argument("tableau: s0 must be positive");
    if (Abar.size() != s0 || bbar.size() != s0 || alphabar.size() != s0)
      throw std::invalid_argument("tableau '" + name + "': inconsistent dimensions");
  }
};

struct ResidualEntry {
  std::string key;
  Rational value;
};

// Residual report for one tableau: consistency conditions plus the squared
// residuals that sum to eta. eta == 0 exactly when every weak2 residual is 0.
struct ConditionReport {
  std::string tableau_name;
  bool inexact = false;
  std::vector<ResidualEntry> consistency;
  std::vector<ResidualEntry> weak2;
  Rational eta = Rational(0);

  bool consistent() const {
    return std::all_of(consistency.begin(), consistency.end(),
                       [](const ResidualEntry& e) { return e.value == 0; });
  }
  bool weak2_exact() const { return eta == 0; }

  const Rational& residual(const std::string& key) const {
    for (const auto& e : consistency)
      if (e.key == key) return e.value;
    for (const auto& e : weak2)
      if (e.key == key) return e.value;
    throw std::out_of_range("no residual named '" + key + "'");
  }
};

// The fourteen tableau contractions entering eta1, in the order the residuals
// are listed. Each pairs with a target value; eta1 sums the squared
// deviations. The same contractions (as doubles) parameterize the derived
// coefficient functions of the limit equation.
struct Eta1Term {
  const char* key;
  Rational value;
  Rational target;
  Rational residual() const { return value - target; }
};

inline std::array<Eta1Term, 14> eta1_terms(const Tableau& tab) {
  tab.validate();
  const auto e = ones(tab.s0);
  const auto Ae = tab.A.apply(e);
  const auto Be = tab.B.apply(e);
  const auto BBe = tab.B.apply(Be);
  const auto& a = tab.alpha;
  const auto& b = tab.beta;
  return {{
      {"alpha_Ae", dot(a, Ae), Rational(1, 2)},
      {"alpha_BBe", dot(a, BBe), Rational(1, 4)},
      {"alpha_Be_sq", dot(a, cpow(Be, 2)), Rational(1, 2)},
      {"beta_ABe", dot(b, tab.A.apply(Be)), Rational(0)},
      {"beta_B_Be_sq", dot(b, tab.B.apply(cpow(Be, 2))), Rational(1, 12)},
      {"beta_BAe", dot(b, tab.B.apply(Ae)), Rational(1, 4)},
      {"beta_BBBe", dot(b, tab.B.apply(BBe)), Rational(1, 24)},
      {"beta_Ae_h_Be", dot(b, hadamard(Ae, Be)), Rational(1, 4)},
      {"beta_Be_h_BBe", dot(b, hadamard(Be, BBe)), Rational(1, 8)},
      {"beta_Be_cube", dot(b, cpow(Be, 3)), Rational(1, 4)},
      {"alpha_Be", dot(a, Be), Rational(1, 2)},
      {"beta_Ae", dot(b, Ae), Rational(1, 2)},
      {"beta_BBe", dot(b, BBe), Rational(1, 6)},
      {"beta_Be_sq", dot(b, cpow(Be, 2)), Rational(1, 3)},
  }};
}

// Strong-order-1 conditions: alpha'e = beta'e = 1, beta'(Be) = 1/2.
inline ConditionReport check_strong1(const Tableau& tab) {
  tab.validate();
  const auto e = ones(tab.s0);
  ConditionReport rep;
  rep.tableau_name = tab.name;
  rep.inexact = tab.inexact;
  rep.consistency = {
      {"alpha_e_minus_1", dot(tab.alpha, e) - 1},
      {"beta_e_minus_1", dot(tab.beta, e) - 1},
      {"beta_Be_minus_half", dot(tab.beta, tab.B.apply(e)) - Rational(1, 2)},
  };
  return rep;
}

inline ConditionReport eta1(const Tableau& tab) {
  ConditionReport rep = check_strong1(tab);
  for (const auto& term : eta1_terms(tab)) {
    const Rational r = term.residual();
    rep.weak2.push_back({term.key, r});
    rep.eta += r * r;
  }
  return rep;
}

inline ConditionReport eta2(const AdditiveTableau& tab) {
  tab.validate();
  const auto e = ones(tab.s0);
  ConditionReport rep;
  rep.tableau_name = tab.name;
  rep.inexact = tab.inexact;
  rep.consistency = {{"alphabar_e_minus_1", dot(tab.alphabar, e) - 1}};
  const Rational half(1, 2);
  rep.weak2 = {
      {"alphabar_Abar_e", dot(tab.alphabar, tab.Abar.apply(e)) - half},
      {"alphabar_bbar_sq", dot(tab.alphabar, cpow(tab.bbar, 2)) - half},
      {"alphabar_bbar", dot(tab.alphabar, tab.bbar) - half},
  };
  for (const auto& entry : rep.weak2) rep.eta += entry.value * entry.value;
  return rep;
}

// ---------------------------------------------------------------------------
// Builtin catalog

inline AdditiveTableau trapezoid_tableau() {
  AdditiveTableau t;
  t.s0 = 2;
  t.Abar = RationalMatrix::from_rows({{Rational(0), Rational(0)}, {Rational(1, 2), Rational(1, 2)}});
  t.bbar = {Rational(0), Rational(1)};
  t.alphabar = {Rational(1, 2), Rational(1, 2)};
  t.name = "trapezoid";
  return t;
}

inline AdditiveTableau theta_tableau(const Rational& theta, std::string name = "") {
  AdditiveTableau t;
  t.s0 = 1;
  t.Abar = RationalMatrix(1, theta);
  t.bbar = {theta};
  t.alphabar = {Rational(1)};
  t.name = name.empty() ? "theta(" + format_rational(theta) + ")" : std::move(name);
  return t;
}

// A double theta is converted to the dyadic rational it represents exactly;
// the tableau is flagged inexact because that rational only approximates the
// intended (possibly irrational) parameter.
inline AdditiveTableau theta_tableau(double theta, std::string name = "") {
  std::ostringstream label;
  label.precision(17);
  label << "theta(" << theta << ")";
  AdditiveTableau t = theta_tableau(Rational(theta), name.empty() ? label.str() : std::move(name));
  t.inexact = true;
  return t;
}

inline Tableau implicit_midpoint_tableau() {
  Tableau t;
  t.s0 = 1;
  t.A = RationalMatrix(1, Rational(1, 2));
  t.B = RationalMatrix(1, Rational(1, 2));
  t.alpha = {Rational(1)};
  t.beta = {Rational(1)};
  t.name = "implicit_midpoint";
  return t;
}

// Resolves catalog names: "trapezoid", "midpoint" (= theta(1/2)),
// "implicit_euler" (= theta(1)), "theta:<value>" with a rational or decimal
// parameter. Multiplicative side: "implicit_midpoint".
inline AdditiveTableau builtin_additive(const std::string& name) {
  if (name == "trapezoid") return trapezoid_tableau();
  if (name == "midpoint") return theta_tableau(Rational(1, 2), "midpoint");
  if (name == "implicit_euler") return theta_tableau(Rational(1), "implicit_euler");
  if (name.rfind("theta:", 0) == 0) {
    const std::string arg = name.substr(6);
    if (arg.find('.') != std::string::npos || arg.find('e') != std::string::npos)
      return theta_tableau(std::stod(arg));
    return theta_tableau(parse_rational(arg));
  }
  throw std::invalid_argument("unknown additive tableau '" + name + "'");
}

inline Tableau builtin_multiplicative(const std::string& name) {
  if (name == "implicit_midpoint") return implicit_midpoint_tableau();
  throw std::invalid_argument("unknown multiplicative tableau '" + name + "'");
}

// ---------------------------------------------------------------------------
// File format: one `key = value` per line, '#' comments. Matrices are listed
// row-major, entries are rational literals. Keys: s0, A, B, alpha, beta for
// the multiplicative form; s0, Abar, bbar, alphabar for the additive form.

struct TableauFile {
  std::optional<Tableau> multiplicative;
  std::optional<AdditiveTableau> additive;
};

inline TableauFile load_tableau_file(std::istream& in, const std::string& origin = "<stream>") {
  std::map<std::string, std::pair<int, std::vector<std::string>>> fields;
  std::string line;
  std::string name = "from " + origin;
  int lineno = 0;
  int last_line = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    last_line = lineno;
    std::string eq;
    if (!(ls >> eq) || eq != "=")
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected 'key = values'");
    std::vector<std::string> values;
    std::string tok;
    while (ls >> tok) values.push_back(tok);
    if (key == "name") {
      if (values.empty()) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty name");
      name = values.front();
      continue;
    }
    if (values.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": no values for key '" + key + "'");
    if (!fields.emplace(key, std::make_pair(lineno, values)).second)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  if (fields.empty()) throw std::runtime_error(origin + ":" + std::to_string(std::max(last_line, 1)) + ": no tableau data");

  auto take = [&](const char* key) -> std::pair<int, std::vector<std::string>> {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error(origin + ": missing key '" + std::string(key) + "'");
    auto out = it->second;
    fields.erase(it);
    return out;
  };
  auto parse_all = [&](const std::pair<int, std::vector<std::string>>& field, std::size_t expect) {
    RationalVector out;
    for (const auto& tok : field.second) {
      try {
        out.push_back(parse_rational(tok));
      } catch (const std::exception& e) {
        throw std::runtime_error(origin + ":" + std::to_string(field.first) + ": " + e.what());
      }
    }
    if (out.size() != expect)
      throw std::runtime_error(origin + ":" + std::to_string(field.first) + ": expected " + std::to_string(expect) +
                               " entries, got " + std::to_string(out.size()));
    return out;
  };

  const auto s0_field = take("s0");
  std::size_t s0 = 0;
  try {
    const Rational r = parse_rational(s0_field.second.at(0));
    if (denominator(r) != 1 || r <= 0) throw std::invalid_argument("s0 must be a positive integer");
    s0 = static_cast<std::size_t>(numerator(r).convert_to<long long>());
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ":" + std::to_string(s0_field.first) + ": " + e.what());
  }

  auto to_matrix = [&](const RationalVector& flat) {
    RationalMatrix m(s0);
    for (std::size_t i = 0; i < s0; ++i)
      for (std::size_t j = 0; j < s0; ++j) m(i, j) = flat[i * s0 + j];
    return m;
  };

  TableauFile out;
  if (fields.count("Abar")) {
    AdditiveTableau t;
    t.s0 = s0;
    t.Abar = to_matrix(parse_all(take("Abar"), s0 * s0));
    t.bbar = parse_all(take("bbar"), s0);
    t.alphabar = parse_all(take("alphabar"), s0);
    t.name = name;
    t.validate();
    out.additive = std::move(t);
  } else {
    Tableau t;
    t.s0 = s0;
    t.A = to_matrix(parse_all(take("A"), s0 * s0));
    t.B = to_matrix(parse_all(take("B"), s0 * s0));
    t.alpha = parse_all(take("alpha"), s0);
    t.beta = parse_all(take("beta"), s0);
    t.name = name;
    t.validate();
    out.multiplicative = std::move(t);
  }
  if (!fields.empty())
    throw std::runtime_error(origin + ":" + std::to_string(fields.begin()->second.first) + ": unknown key '" +
                             fields.begin()->first + "'");
  return out;
}

inline TableauFile load_tableau_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tableau file '" + path + "'");
  return load_tableau_file(in, path);
}

// CSV rows: condition,residual_num,residual_den
inline std::string report_to_csv(const ConditionReport& rep) {
  std::ostringstream out;
  out << "condition,residual_num,residual_den\n";
  auto emit = [&](const std::vector<ResidualEntry>& entries) {
    for (const auto& e : entries)
      out << e.key << "," << numerator(e.value).str() << "," << denominator(e.value).str() << "\n";
  };
  emit(rep.consistency);
  emit(rep.weak2);
  out << "eta," << numerator(rep.eta).str() << "," << denominator(rep.eta).str() << "\n";
  return out.str();
}

}  // namespace srk
