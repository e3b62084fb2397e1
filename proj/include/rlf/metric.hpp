#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include "rlf/density.hpp"
#include "rlf/flow.hpp"
#include "rlf/geometry.hpp"

namespace rlf {

/// Edge weights and path lengths are integers in units of kTick so that
/// symmetry, the triangle inequality and monotonicity in lambda hold
/// exactly rather than up to rounding.
using Ticks = std::int64_t;
inline constexpr double kTick = 1e-12;
inline constexpr Ticks kUnreachable = std::numeric_limits<Ticks>::max();

/// Weight of a length-`len` edge, rounded to ticks (monotone in len).
Ticks to_ticks(double len);
inline double from_ticks(Ticks t) { return static_cast<double>(t) * kTick; }

/// Space-time point (t, x).
struct SpaceTimePoint {
  double t = 0.0;
  Vec x{};
};

class SpaceTimeGraph;

/// Builds the graph. The background lattice has spacing `lattice_dx`, is
/// anchored at the origin and covers the trajectory bounding box plus one
/// cell. `with_lattice = false` keeps flow edges only (d_0 on the tube).
SpaceTimeGraph build_graph(const FlowGrid& grid, double lattice_dx, double lambda, bool with_lattice = true);

/// Graph realisation of the penalised distance d_lambda on the flow tube.
///
/// Nodes: trajectory nodes (t_j, X[j][i]) with id j * N + i, followed by one
/// background lattice per time slice. Edges (undirected):
///   flow        (t_j, X[j][i]) - (t_{j+1}, X[j+1][i])   |t_{j+1} - t_j|
///   transverse  lattice neighbours in one slice          |dx| / lambda
///   snap        trajectory node - nearest lattice node   snap / lambda (>= 1 tick)
/// Only flow edges change time, so every path between slices j and k costs
/// at least the flow-edge ticks between them, and a trajectory path costs
/// exactly that.
class SpaceTimeGraph {
 public:
  SpaceTimeGraph() = default;

  double lambda() const { return lambda_; }
  double lattice_dx() const { return lattice_dx_; }
  int dim() const { return dim_; }
  std::size_t num_nodes() const { return time_index_.size(); }
  std::size_t num_trajectories() const { return num_points_; }
  std::size_t num_times() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const Lattice& lattice() const { return lattice_; }

  std::size_t trajectory_node(std::size_t j, std::size_t i) const { return j * num_points_ + i; }
  bool is_trajectory_node(std::size_t v) const { return v < num_points_ * times_.size(); }
  std::size_t lattice_node(std::size_t j, std::size_t k) const {
    return num_points_ * times_.size() + j * lattice_.size() + k;
  }
  /// Nodes that exist in the graph (escaped trajectories are isolated and inactive).
  bool active(std::size_t v) const { return active_[v] != 0; }

  double time(std::size_t v) const { return times_[time_index_[v]]; }
  std::size_t slice(std::size_t v) const { return time_index_[v]; }
  const Vec& position(std::size_t v) const { return position_[v]; }
  SpaceTimePoint point(std::size_t v) const { return {time(v), position(v)}; }

  /// Ticks of the flow edges between slices j and k (the trajectory path length).
  Ticks time_ticks(std::size_t j, std::size_t k) const;

  /// Largest snap distance of any trajectory node (and half the lattice
  /// diagonal bound for query points).
  double max_snap() const { return max_snap_; }
  double snap_distance(std::size_t traj_node) const { return snap_dist_[traj_node]; }
  std::size_t snap_target(std::size_t traj_node) const { return snap_target_[traj_node]; }

  /// Nearest active node to (t, x): nearest slice in time, then nearest node in that slice.
  std::size_t snap(const SpaceTimePoint& p) const;

  std::size_t flow_edges() const { return flow_edges_; }
  std::size_t transverse_edges() const { return transverse_edges_; }
  std::size_t snap_edges() const { return snap_edges_; }
  std::size_t num_edges() const { return flow_edges_ + transverse_edges_ + snap_edges_; }

  // CSR adjacency
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::uint32_t>& targets() const { return targets_; }
  const std::vector<Ticks>& weights() const { return weights_; }

  friend SpaceTimeGraph build_graph(const FlowGrid& grid, double lattice_dx, double lambda, bool with_lattice);

 private:
  double lambda_ = 1.0;
  double lattice_dx_ = 0.1;
  int dim_ = 2;
  std::size_t num_points_ = 0;
  std::vector<double> times_;
  std::vector<Ticks> step_ticks_;  // flow-edge weight between slice j and j+1
  std::vector<Ticks> cumulative_;  // prefix sums of step_ticks_
  Lattice lattice_;
  std::vector<std::uint32_t> time_index_;
  std::vector<Vec> position_;
  std::vector<std::uint8_t> active_;
  std::vector<double> snap_dist_;
  std::vector<std::size_t> snap_target_;
  double max_snap_ = 0.0;
  std::size_t flow_edges_ = 0, transverse_edges_ = 0, snap_edges_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> targets_;
  std::vector<Ticks> weights_;
  std::vector<std::shared_ptr<const NearestIndex>> slice_index_;
  std::vector<std::vector<std::size_t>> slice_nodes_;
};

/// Single-source shortest paths in ticks (kUnreachable where not reached).
/// Stops early once every node of `stop_after` (if non-empty) is settled,
/// or once the settled distance exceeds `limit`. After an early stop only
/// settled entries are final.
std::vector<Ticks> shortest_paths(const SpaceTimeGraph& g, std::size_t source,
                                  const std::vector<std::size_t>& stop_after = {}, Ticks limit = kUnreachable);

/// d_lambda between snapped nodes, in ticks. Throws InternalError if unreachable.
Ticks distance_ticks(const SpaceTimeGraph& g, std::size_t a, std::size_t b);
/// d_lambda(p, q) with p, q snapped to the nearest nodes.
double distance(const SpaceTimeGraph& g, const SpaceTimePoint& p, const SpaceTimePoint& q);

/// Value of the degenerate distance d_0: finite |t - t'| or +infinity.
class D0 {
 public:
  static D0 finite(double v) { return D0(v, true); }
  static D0 infinity() { return D0(0.0, false); }
  bool is_finite() const { return finite_; }
  /// Throws InternalError when infinite.
  double value() const;
  friend bool operator==(const D0&, const D0&) = default;

 private:
  D0(double v, bool f) : value_(v), finite_(f) {}
  double value_;
  bool finite_;
};

/// d_0 on a FlowGrid: points are matched to the nearest time slice and to
/// every trajectory passing within tube_tol; finite iff p and q share one.
class D0Metric {
 public:
  explicit D0Metric(const FlowGrid& grid);
  D0 operator()(const SpaceTimePoint& p, const SpaceTimePoint& q, double tube_tol) const;

 private:
  std::vector<std::size_t> trajectories_near(const SpaceTimePoint& p, double tol) const;
  const FlowGrid* grid_;
  std::vector<std::shared_ptr<const NearestIndex>> index_;
};

D0 d0_distance(const FlowGrid& grid, const SpaceTimePoint& p, const SpaceTimePoint& q, double tube_tol);

/// Function values on a subset of graph nodes (the tube).
struct NodeValues {
  std::vector<std::size_t> nodes;
  std::vector<double> values;
};

struct LipschitzEstimate {
  double constant = 0.0;
  std::size_t witness_a = 0;  ///< node ids attaining the constant
  std::size_t witness_b = 0;
  bool exhaustive = true;
  std::size_t pairs = 0;      ///< pairs examined
};

inline constexpr std::size_t kDefaultPairBudget = 2'000'000;

/// max |f(p) - f(q)| / d_lambda(p, q) over node pairs of S. All pairs when
/// |S|^2 <= pair_budget; otherwise stratified random sources (all targets
/// each) plus every same-trajectory pair. Same-trajectory pairs are scanned
/// first and each source sweep stops at the distance beyond which no
/// target can beat the running maximum, so `pairs` counts examined pairs.
LipschitzEstimate lipschitz_constant(const NodeValues& f, const SpaceTimeGraph& g,
                                     std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 1);
/// Same pair scan, one source at a time without threads.
LipschitzEstimate lipschitz_constant_serial(const NodeValues& f, const SpaceTimeGraph& g,
                                            std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 1);

/// max |f(p) - f(q)| / |t - t'| over pairs on a common trajectory: the
/// Lipschitz constant under d_0. Nodes must be trajectory nodes.
double directional_constant(const NodeValues& f, const SpaceTimeGraph& g);

struct ConvergenceRow {
  double lambda = 0.0;
  double L_lambda = 0.0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double L = 0.0;           ///< directional constant under d_0
  bool monotone = true;     ///< L_lambda nonincreasing along the list
};

/// Builds one graph per lambda (list must be decreasing) and evaluates
/// L_lambda of the trajectory-node function `values_of(j, i)` on members.
ConvergenceTable convergence_scan(const FlowGrid& grid, const std::vector<std::size_t>& members,
                                  const std::vector<double>& tube_values, const std::vector<double>& lambdas,
                                  double lattice_dx, std::size_t pair_budget = kDefaultPairBudget,
                                  std::uint64_t seed = 1);

/// Tube node ids (j, members[m]) in the order of `tube_values` ([j * |members| + m]).
std::vector<std::size_t> tube_nodes(const SpaceTimeGraph& g, const std::vector<std::size_t>& members);

struct Equivalence {
  double c1 = 0.0;     ///< min d_lambda / d_1 over sampled pairs
  double c2 = 0.0;     ///< max d_lambda / (d_1 + slack)
  double slack = 0.0;  ///< lattice spacing
  std::size_t pairs = 0;
};

/// Empirical constants in c1 d_1 <= d_lambda <= c2 (d_1 + slack), d_1 the
/// Euclidean space-time distance, from `sources` random source nodes.
Equivalence equivalence_constants(const SpaceTimeGraph& g, std::size_t sources, std::uint64_t seed = 1);

/// Picks the largest lambda with L_lambda <= factor * L, else the smallest.
double select_lambda(const ConvergenceTable& table, double factor = 1.1);

void write_graph_stats_csv(std::ostream& out, const SpaceTimeGraph& g);
void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);

}  // namespace rlf
