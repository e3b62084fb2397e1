#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "rlf/geometry.hpp"

namespace rlf {

/// Nearest-point lookup over a fixed cloud (uniform bucket grid).
class NearestIndex {
 public:
  NearestIndex() = default;
  NearestIndex(int dim, const std::vector<Vec>& points);

  /// Index of the nearest indexed point, or npos when the cloud is empty.
  std::size_t nearest(const Vec& x) const;
  /// All indexed points within `radius` of x.
  std::vector<std::size_t> within(const Vec& x, double radius) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::array<int, kMaxDim> cell_of(const Vec& x) const;
  std::size_t bucket_flat(const std::array<int, kMaxDim>& c) const;

  int dim_ = 0;
  std::vector<Vec> points_;
  Vec lo_{};
  double cell_ = 1.0;
  std::array<int, kMaxDim> counts_{1, 1, 1};
  std::vector<std::size_t> start_;  // CSR bucket offsets
  std::vector<std::size_t> items_;
};

enum class DensityKind { lattice, scattered, analytic };

/// Scalar field u(t, x) sampled on time slices {t_j}: u, rho, U, R, Psi.
///
/// lattice   - values on one Lattice per slice, multilinear interpolation.
/// scattered - (point, value) samples per slice, nearest-sample interpolation.
/// analytic  - an evaluable closure (used for exact-solution oracles).
///
/// Outside `support()` every kind evaluates to zero.
class DensityField {
 public:
  using Closure = std::function<double(double, const Vec&)>;

  static DensityField on_lattice(Lattice lattice, std::vector<double> times,
                                 std::vector<std::vector<double>> values);
  static DensityField scattered(int dim, std::vector<double> times, std::vector<std::vector<Vec>> points,
                                std::vector<std::vector<double>> values, Box support);
  static DensityField analytic(int dim, Closure closure, Box support);

  DensityKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Box& support() const { return support_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t num_times() const { return times_.size(); }

  std::size_t num_samples(std::size_t j) const;
  Vec point(std::size_t j, std::size_t k) const;
  double value(std::size_t j, std::size_t k) const { return values_[j][k]; }
  const std::vector<double>& values(std::size_t j) const { return values_[j]; }
  const Lattice& lattice() const { return lattice_; }

  /// Interpolated value on slice j.
  double at(std::size_t j, const Vec& x) const;
  /// Value at an arbitrary time: exact for analytic fields, otherwise
  /// linear in time between the bracketing slices (clamped at the ends).
  double at(double t, const Vec& x) const;
  /// Slice index whose time equals t to 1e-12, if any.
  std::optional<std::size_t> slice_of(double t) const;

  /// Initial datum u0 when known; falls back to the first slice otherwise.
  double initial(const Vec& x) const;
  void set_initial_datum(Closure u0) { initial_ = std::move(u0); }
  bool has_initial_datum() const { return static_cast<bool>(initial_); }

 private:
  DensityKind kind_ = DensityKind::analytic;
  int dim_ = 2;
  Box support_;
  std::vector<double> times_;
  Lattice lattice_;
  std::vector<std::vector<Vec>> points_;
  std::vector<std::vector<double>> values_;
  std::vector<std::shared_ptr<const NearestIndex>> index_;
  Closure closure_;
  Closure initial_;
};

/// DensityField CSV: `# key=value` metadata lines, then `t,x0..,value` rows
/// at full round-trip precision. Analytic fields cannot be written.
void write_density_csv(std::ostream& out, const DensityField& field);
DensityField read_density_csv(std::istream& in);

}  // namespace rlf
