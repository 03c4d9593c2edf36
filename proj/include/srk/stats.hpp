#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace srk {

// Compensated (Kahan) summation in the order the values are stored; campaigns
// reduce per-path slots with this so aggregation is scheduling-independent.
inline double compensated_sum(std::span<const double> values) {
  double sum = 0.0, carry = 0.0;
  for (double v : values) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased

  double std_error() const { return n > 1 ? std::sqrt(variance / static_cast<double>(n)) : 0.0; }
};

inline SampleStats summarize(std::span<const double> values) {
  SampleStats s;
  s.n = values.size();
  if (s.n == 0) return s;
  s.mean = compensated_sum(values) / static_cast<double>(s.n);
  if (s.n > 1) {
    double acc = 0.0, carry = 0.0;
    for (double v : values) {
      const double d = (v - s.mean) * (v - s.mean) - carry;
      const double t = acc + d;
      carry = (t - acc) - d;
      acc = t;
    }
    s.variance = acc / static_cast<double>(s.n - 1);
  }
  return s;
}

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
  double intercept = 0.0;
};

// Ordinary least squares of ln(err) against ln(h). Requires at least two
// points and strictly positive errors.
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& h_err) {
  if (h_err.size() < 2) throw std::invalid_argument("fit_slope: need at least two points");
  std::vector<double> x, y;
  for (const auto& [h, err] : h_err) {
    if (!(h > 0)) throw std::invalid_argument("fit_slope: step sizes must be positive");
    if (!(err > 0)) throw std::invalid_argument("fit_slope: error values must be positive");
    x.push_back(std::log(h));
    y.push_back(std::log(err));
  }
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("fit_slope: degenerate abscissae");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      rss += r * r;
    }
    fit.std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

}  // namespace srk
