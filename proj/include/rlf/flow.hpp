#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "rlf/density.hpp"
#include "rlf/geometry.hpp"
#include "rlf/vectorfield.hpp"

namespace rlf {

inline constexpr double kDefaultEscapeRadius = 1e3;

/// RK4 solution of dX/dtau = b(tau, X), X(s) = x0, evaluated at tau = t
/// (backward when t < s). The interval is split into ceil(|t - s| / step)
/// equal substeps. Throws EscapeError when |X| exceeds `escape_radius`.
Vec integrate_flow(const VectorField& field, double s, double t, const Vec& x0, double step,
                   double escape_radius = kDefaultEscapeRadius);

/// X(0, t, x): the point at time 0 whose trajectory reaches x at time t.
Vec inverse_flow(const VectorField& field, double t, const Vec& x, double step,
                 double escape_radius = kDefaultEscapeRadius);

struct FlowSample {
  Vec position;
  double div_integral = 0.0;  ///< int_s^t div b along the trajectory
};

/// Position plus trapezoidal accumulation of div b along the RK4 path.
FlowSample integrate_with_divergence(const VectorField& field, double s, double t, const Vec& x0, double step,
                                     double escape_radius = kDefaultEscapeRadius);

/// Trajectory ensemble X(t_j, 0, y_i) over the lattice points y_i = k * dy
/// inside the closed ball B_R, with D[j][i] = int_0^{t_j} div b(X) dtau.
///
/// Immutable once built. Trajectories that escape the safety ball are kept
/// with `escaped[i] = 1` and NaN samples from the escape time on.
struct FlowGrid {
  int dim = 2;
  double radius = 1.0;
  double spacing = 0.1;
  double step = 1e-3;
  double escape_radius = kDefaultEscapeRadius;
  std::vector<double> times;
  std::vector<Vec> base_points;
  std::vector<std::array<int, kMaxDim>> lattice_index;
  std::vector<Vec> forward;            ///< [j * num_points() + i]
  std::vector<double> div_integrals;   ///< [j * num_points() + i]
  std::vector<std::uint8_t> escaped;

  std::size_t num_points() const { return base_points.size(); }
  std::size_t num_times() const { return times.size(); }
  std::size_t flat(std::size_t j, std::size_t i) const { return j * num_points() + i; }
  const Vec& position(std::size_t j, std::size_t i) const { return forward[flat(j, i)]; }
  double div_integral(std::size_t j, std::size_t i) const { return div_integrals[flat(j, i)]; }
  /// R(t_j, y_i) = rho(t_j, X(t_j, 0, y_i)) = exp(-D[j][i]).
  double density_ratio(std::size_t j, std::size_t i) const;
  bool active(std::size_t i) const { return escaped[i] == 0; }
  std::size_t active_count() const;
  /// Lebesgue weight of one base point, dy^n.
  double cell_volume() const;
  /// Index of the base point with the given integer lattice coordinates.
  std::optional<std::size_t> index_of(const std::array<int, kMaxDim>& k) const;
  /// Axis-neighbour base points (+-1 in one coordinate).
  std::vector<std::size_t> neighbors(std::size_t i) const;
  /// Bounding box of all finite trajectory samples.
  Box trajectory_bounds() const;

  // dense lookup cube for index_of
  int half_extent = 0;
  std::vector<std::int64_t> cube;
};

/// Base-point lattice of a FlowGrid without integrating anything.
FlowGrid make_flow_lattice(int dim, double radius, double spacing, std::vector<double> times, double step,
                           double escape_radius = kDefaultEscapeRadius);

/// Integrates every trajectory of the lattice (OpenMP over base points).
FlowGrid build_flow_grid(const VectorField& field, double radius, double spacing, const std::vector<double>& times,
                         double step, double escape_radius = kDefaultEscapeRadius);
/// Same integration without threads.
FlowGrid build_flow_grid_serial(const VectorField& field, double radius, double spacing,
                                const std::vector<double>& times, double step,
                                double escape_radius = kDefaultEscapeRadius);

/// rho(t_j, .) as scattered samples exp(-D[j][i]) at X[j][i], nearest-trajectory interpolation.
DensityField pushforward_density(const FlowGrid& grid, std::size_t j);

/// max over samples of max(exp(D), exp(-D)).
double estimate_compressibility(const FlowGrid& grid);

struct LusinSet {
  double epsilon = 0.0;
  double threshold = 0.0;              ///< selected badness threshold
  std::vector<std::size_t> members;    ///< base-point indices, ascending
  std::vector<double> scores;          ///< badness score per base point
  double lip_constant = 0.0;
  std::size_t witness_a = 0;           ///< pair attaining lip_constant
  std::size_t witness_b = 0;
  std::size_t witness_time = 0;
  double complement_measure = 0.0;
};

/// Default badness thresholds: 0 and a geometric ladder 1e-10 .. 1e2, 20 per decade.
std::vector<double> default_lusin_thresholds();

/// Badness score per base point: max over times and lattice neighbours of
/// |log(|X_j(y) - X_j(y')| / |y - y'|)|; +inf for escaped trajectories.
std::vector<double> stretching_scores(const FlowGrid& grid);

/// Sublevel set of the stretching score at the smallest threshold whose
/// excluded measure is <= epsilon, with its measured Lipschitz constant.
/// Throws InfeasibleError when no threshold meets the budget.
LusinSet lusin_lipschitz_set(const FlowGrid& grid, double epsilon, const std::vector<double>& thresholds);

/// Largest |X_j(y) - X_j(y')| / |y - y'| over member pairs and all times.
double measured_flow_lipschitz(const FlowGrid& grid, const std::vector<std::size_t>& members,
                               std::size_t* witness_a = nullptr, std::size_t* witness_b = nullptr,
                               std::size_t* witness_time = nullptr);

/// One row per (j, i): t, y..., X..., D, escaped.
void write_flow_grid_csv(std::ostream& out, const FlowGrid& grid);
/// Member indices followed by a summary row.
void write_lusin_csv(std::ostream& out, const FlowGrid& grid, const LusinSet& set);

}  // namespace rlf
