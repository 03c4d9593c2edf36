// Exact rational arithmetic for order-condition checks.
//
// Order conditions are polynomial equalities in the tableau coefficients, so
// every residual is computed over arbitrary-precision rationals and compared
// against zero exactly. Floating point enters only at the simulation layer.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srk {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Parses "p", "-p", "p/q" with optional surrounding whitespace.
inline Rational parse_rational(std::string_view text) {
  auto strip = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view s = strip(text);
  if (s.empty()) throw std::invalid_argument("empty rational literal");

  auto parse_int = [&](std::string_view v) -> BigInt {
    bool neg = false;
    if (!v.empty() && (v.front() == '+' || v.front() == '-')) {
      neg = v.front() == '-';
      v.remove_prefix(1);
    }
    if (v.empty()) throw std::invalid_argument("bad integer in rational literal: '" + std::string(text) + "'");
    BigInt out = 0;
    for (char c : v) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw std::invalid_argument("bad rational literal: '" + std::string(text) + "'");
      out = out * 10 + (c - '0');
    }
    return neg ? BigInt(-out) : out;
  };

  const auto slash = s.find('/');
  if (slash == std::string_view::npos) return Rational(parse_int(s));
  const BigInt num = parse_int(strip(s.substr(0, slash)));
  const BigInt den = parse_int(strip(s.substr(slash + 1)));
  if (den == 0) throw std::invalid_argument("zero denominator in rational literal: '" + std::string(text) + "'");
  return Rational(num, den);
}

inline std::string format_rational(const Rational& r) {
  std::string s = numerator(r).str();
  if (denominator(r) != 1) s += "/" + denominator(r).str();
  return s;
}

using RationalVector = std::vector<Rational>;

// Row-major square matrix over rationals; just enough linear algebra for
// tableau contractions.
class RationalMatrix {
 public:
  RationalMatrix() = default;
  RationalMatrix(std::size_t n, const Rational& fill = Rational(0)) : n_(n), data_(n * n, fill) {}

  static RationalMatrix from_rows(std::initializer_list<std::initializer_list<Rational>> rows) {
    RationalMatrix m(rows.size());
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != m.n_) throw std::invalid_argument("ragged matrix initializer");
      std::size_t j = 0;
      for (const auto& v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t size() const { return n_; }
  Rational& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  const Rational& operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  RationalVector apply(const RationalVector& v) const {
    if (v.size() != n_) throw std::invalid_argument("matrix/vector dimension mismatch");
    RationalVector out(n_, Rational(0));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out[i] += data_[i * n_ + j] * v[j];
    return out;
  }

  bool operator==(const RationalMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<Rational> data_;
};

inline Rational dot(const RationalVector& a, const RationalVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  Rational out(0);
  for (std::size_t i = 0; i < a.size(); ++i) out += a[i] * b[i];
  return out;
}

// Componentwise product, (a*b)_i = a_i b_i.
inline RationalVector hadamard(const RationalVector& a, const RationalVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hadamard: dimension mismatch");
  RationalVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

// Componentwise power, (a^m)_i = a_i^m, m >= 1.
inline RationalVector cpow(const RationalVector& a, unsigned m) {
  if (m == 0) throw std::invalid_argument("cpow: exponent must be positive");
  RationalVector out(a.size(), Rational(1));
  for (unsigned k = 0; k < m; ++k)
    for (std::size_t i = 0; i < a.size(); ++i) out[i] *= a[i];
  return out;
}

inline RationalVector ones(std::size_t n) { return RationalVector(n, Rational(1)); }

}  // namespace srk
