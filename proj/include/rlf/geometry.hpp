#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rlf {

inline constexpr int kMaxDim = 3;

/// Point or vector in R^n, n <= 3. Components beyond the active dimension
/// are kept at zero so norms and dot products need no dimension argument.
struct Vec {
  std::array<double, kMaxDim> c{};

  constexpr double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  constexpr double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

  constexpr Vec& operator+=(const Vec& o) {
    for (int i = 0; i < kMaxDim; ++i) c[i] += o.c[i];
    return *this;
  }
  constexpr Vec& operator-=(const Vec& o) {
    for (int i = 0; i < kMaxDim; ++i) c[i] -= o.c[i];
    return *this;
  }
  constexpr Vec& operator*=(double s) {
    for (auto& v : c) v *= s;
    return *this;
  }
  friend constexpr Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend constexpr Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend constexpr Vec operator*(Vec a, double s) { return a *= s; }
  friend constexpr Vec operator*(double s, Vec a) { return a *= s; }
  friend constexpr bool operator==(const Vec&, const Vec&) = default;
};

constexpr Vec vec2(double x, double y) { return Vec{{x, y, 0.0}}; }

constexpr double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (int i = 0; i < kMaxDim; ++i) s += a[i] * b[i];
  return s;
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec& a, const Vec& b) { return norm(a - b); }

/// Axis-aligned box in R^n.
struct Box {
  int dim = 2;
  Vec lo;
  Vec hi;

  bool contains(const Vec& x, double slack = 0.0) const {
    for (int d = 0; d < dim; ++d)
      if (x[d] < lo[d] - slack || x[d] > hi[d] + slack) return false;
    return true;
  }
  bool contains(const Box& other) const { return contains(other.lo, 1e-12) && contains(other.hi, 1e-12); }
  static Box cube(int dim, double half_width) {
    Box b{dim, {}, {}};
    for (int d = 0; d < dim; ++d) {
      b.lo[d] = -half_width;
      b.hi[d] = half_width;
    }
    return b;
  }
  static Box unbounded(int dim) { return cube(dim, HUGE_VAL); }
};

/// Regular node lattice origin + spacing * k, k in [0, counts) per axis.
/// Flat indices are row-major with the last active axis fastest.
class Lattice {
 public:
  Lattice() = default;
  Lattice(int dim, Vec origin, double spacing, std::array<int, kMaxDim> counts);

  /// Smallest lattice of the given spacing whose nodes cover `box`, nodes
  /// anchored at `anchor + k * spacing`.
  static Lattice covering(const Box& box, double spacing, const Vec& anchor = {});

  int dim() const { return dim_; }
  double spacing() const { return spacing_; }
  const Vec& origin() const { return origin_; }
  int count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return std::pow(spacing_, dim_); }

  Vec point(std::size_t flat) const;
  std::array<int, kMaxDim> multi(std::size_t flat) const;
  std::size_t flat(const std::array<int, kMaxDim>& m) const;
  bool in_range(const std::array<int, kMaxDim>& m) const;
  /// Index of the node nearest to x (clamped into range).
  std::array<int, kMaxDim> nearest(const Vec& x) const;
  Box bounds() const;

  /// Multilinear interpolation of node values; zero outside the node hull
  /// by more than half a cell, clamped to the hull within that margin.
  double interpolate(const std::vector<double>& values, const Vec& x) const;

 private:
  int dim_ = 0;
  Vec origin_{};
  double spacing_ = 1.0;
  std::array<int, kMaxDim> counts_{1, 1, 1};
  std::size_t size_ = 0;
};

}  // namespace rlf
