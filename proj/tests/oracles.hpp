#pragma once

// Closed-form flows, densities and generators shared by the unit tests.

#include <cmath>
#include <random>

#include "rlf/flow.hpp"
#include "rlf/vectorfield.hpp"

namespace oracle {

using rlf::Vec;
using rlf::vec2;

inline rlf::VectorField field(const std::string& name, std::map<std::string, double> params = {}) {
  rlf::FieldSpec spec;
  spec.name = name;
  spec.params = std::move(params);
  return rlf::catalog(spec);
}

inline Vec rotate(const Vec& y, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return vec2(c * y[0] - s * y[1], s * y[0] + c * y[1]);
}

/// b = omega (-x2, x1): X(t, 0, y) = rotation of y by omega t.
inline Vec rotation_flow(double omega, double t, const Vec& y) { return rotate(y, omega * t); }

/// b = diag(1, 2) x: X(t, 0, y) = (e^t y1, e^{2t} y2), div b = 3.
inline Vec linear_flow(double t, const Vec& y) { return vec2(std::exp(t) * y[0], std::exp(2.0 * t) * y[1]); }

/// b = (1 + a) |x|^(a - 1) (-x2, x1): |x| is conserved and the angular
/// speed is (1 + a) |x|^(a - 1).
inline Vec swirl_flow(double a, double t, const Vec& y) {
  const double r = rlf::norm(y);
  if (r == 0.0) return y;
  return rotate(y, (1.0 + a) * std::pow(r, a - 1.0) * t);
}

/// Exact transported density for b = diag(1, 2) x: u0(X(0, t, x)) e^{-3t}.
template <class F>
double linear_density(const F& u0, double t, const Vec& x) {
  return u0(vec2(std::exp(-t) * x[0], std::exp(-2.0 * t) * x[1])) * std::exp(-3.0 * t);
}

/// Uniform point in the closed disc of the given radius.
inline Vec disc_point(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  for (;;) {
    const Vec y = vec2(u(rng), u(rng));
    if (rlf::norm(y) <= radius) return y;
  }
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<double> unit_times(int n) {
  std::vector<double> t(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) t[static_cast<std::size_t>(j)] = j == n ? 1.0 : static_cast<double>(j) / n;
  return t;
}

}  // namespace oracle
