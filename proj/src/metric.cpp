#include "rlf/metric.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <tuple>

#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

Ticks to_ticks(double len) {
  if (!(len >= 0.0) || !(len < 9e6)) throw InternalError("edge length out of tick range: " + format_double(len));
  return static_cast<Ticks>(std::llround(len / kTick));
}

Ticks SpaceTimeGraph::time_ticks(std::size_t j, std::size_t k) const {
  if (j > k) std::swap(j, k);
  return cumulative_[k] - cumulative_[j];
}

std::size_t SpaceTimeGraph::snap(const SpaceTimePoint& p) const {
  if (times_.empty()) throw ConfigError("snap on an empty graph");
  const auto it = std::lower_bound(times_.begin(), times_.end(), p.t);
  std::size_t j = static_cast<std::size_t>(it - times_.begin());
  if (j == times_.size() || (j > 0 && p.t - times_[j - 1] <= times_[j] - p.t)) j = j == 0 ? 0 : j - 1;
  const std::size_t k = slice_index_[j]->nearest(p.x);
  if (k == NearestIndex::npos) throw ConfigError("snap: time slice has no nodes");
  return slice_nodes_[j][k];
}

SpaceTimeGraph build_graph(const FlowGrid& grid, double lattice_dx, double lambda, bool with_lattice) {
  if (grid.num_points() == 0 || grid.num_times() == 0) throw ConfigError("build_graph: empty flow grid");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("build_graph: lambda must lie in (0, 1]");
  if (with_lattice && !(lattice_dx > 0.0)) throw ConfigError("build_graph: lattice spacing must be positive");

  SpaceTimeGraph g;
  g.lambda_ = lambda;
  g.lattice_dx_ = lattice_dx;
  g.dim_ = grid.dim;
  g.num_points_ = grid.num_points();
  g.times_ = grid.times;
  const std::size_t nt = grid.num_times();
  const std::size_t np = grid.num_points();

  g.step_ticks_.resize(nt > 0 ? nt - 1 : 0);
  g.cumulative_.assign(nt, 0);
  for (std::size_t j = 0; j + 1 < nt; ++j) {
    g.step_ticks_[j] = std::max<Ticks>(1, to_ticks(grid.times[j + 1] - grid.times[j]));
    g.cumulative_[j + 1] = g.cumulative_[j] + g.step_ticks_[j];
  }

  if (with_lattice) {
    Box box = grid.trajectory_bounds();
    for (int d = 0; d < box.dim; ++d) {
      box.lo[d] -= lattice_dx;
      box.hi[d] += lattice_dx;
    }
    g.lattice_ = Lattice::covering(box, lattice_dx);
  }
  const std::size_t nl = with_lattice ? g.lattice_.size() : 0;
  const std::size_t n_traj = nt * np;
  const std::size_t total = n_traj + nt * nl;
  if (total >= std::numeric_limits<std::uint32_t>::max()) throw ConfigError("build_graph: too many nodes");

  g.time_index_.resize(total);
  g.position_.resize(total);
  g.active_.assign(total, 1);
  g.snap_dist_.assign(n_traj, 0.0);
  g.snap_target_.assign(n_traj, 0);
  for (std::size_t j = 0; j < nt; ++j) {
    for (std::size_t i = 0; i < np; ++i) {
      const std::size_t v = g.trajectory_node(j, i);
      g.time_index_[v] = static_cast<std::uint32_t>(j);
      g.position_[v] = grid.position(j, i);
      g.active_[v] = grid.active(i) ? 1 : 0;
    }
    for (std::size_t k = 0; k < nl; ++k) {
      const std::size_t v = g.lattice_node(j, k);
      g.time_index_[v] = static_cast<std::uint32_t>(j);
      g.position_[v] = g.lattice_.point(k);
    }
  }

  struct Edge {
    std::uint32_t a, b;
    Ticks w;
  };
  std::vector<Edge> edges;

  for (std::size_t i = 0; i < np; ++i) {
    if (!grid.active(i)) continue;
    for (std::size_t j = 0; j + 1 < nt; ++j) {
      edges.push_back({static_cast<std::uint32_t>(g.trajectory_node(j, i)),
                       static_cast<std::uint32_t>(g.trajectory_node(j + 1, i)), g.step_ticks_[j]});
      ++g.flow_edges_;
    }
  }

  if (with_lattice) {
    const Ticks transverse = std::max<Ticks>(1, to_ticks(lattice_dx / lambda));
    for (std::size_t j = 0; j < nt; ++j) {
      for (std::size_t k = 0; k < nl; ++k) {
        const auto m = g.lattice_.multi(k);
        for (int d = 0; d < g.dim_; ++d) {
          auto up = m;
          up[d] += 1;
          if (!g.lattice_.in_range(up)) continue;
          edges.push_back({static_cast<std::uint32_t>(g.lattice_node(j, k)),
                           static_cast<std::uint32_t>(g.lattice_node(j, g.lattice_.flat(up))), transverse});
          ++g.transverse_edges_;
        }
      }
      for (std::size_t i = 0; i < np; ++i) {
        if (!grid.active(i)) continue;
        const std::size_t v = g.trajectory_node(j, i);
        const std::size_t k = g.lattice_.flat(g.lattice_.nearest(g.position_[v]));
        const std::size_t target = g.lattice_node(j, k);
        const double s = distance(g.position_[v], g.position_[target]);
        g.snap_dist_[v] = s;
        g.snap_target_[v] = target;
        g.max_snap_ = std::max(g.max_snap_, s);
        edges.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(target),
                         std::max<Ticks>(1, to_ticks(s / lambda))});
        ++g.snap_edges_;
      }
    }
  }

  g.offsets_.assign(total + 1, 0);
  for (const Edge& e : edges) {
    ++g.offsets_[e.a + 1];
    ++g.offsets_[e.b + 1];
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  g.targets_.resize(2 * edges.size());
  g.weights_.resize(2 * edges.size());
  std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const Edge& e : edges) {
    g.targets_[fill[e.a]] = e.b;
    g.weights_[fill[e.a]++] = e.w;
    g.targets_[fill[e.b]] = e.a;
    g.weights_[fill[e.b]++] = e.w;
  }

  g.slice_index_.resize(nt);
  g.slice_nodes_.resize(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < np; ++i) {
      const std::size_t v = g.trajectory_node(j, i);
      if (!g.active_[v]) continue;
      g.slice_nodes_[j].push_back(v);
      pts.push_back(g.position_[v]);
    }
    for (std::size_t k = 0; k < nl; ++k) {
      g.slice_nodes_[j].push_back(g.lattice_node(j, k));
      pts.push_back(g.position_[g.lattice_node(j, k)]);
    }
    g.slice_index_[j] = std::make_shared<const NearestIndex>(g.dim_, pts);
  }
  return g;
}

std::vector<Ticks> shortest_paths(const SpaceTimeGraph& g, std::size_t source, const std::vector<std::size_t>& stop_after,
                                  Ticks limit) {
  const std::size_t V = g.num_nodes();
  if (source >= V) throw ConfigError("shortest_paths: source out of range");
  std::vector<Ticks> dist(V, kUnreachable);
  std::vector<std::uint8_t> want;
  std::size_t remaining = 0;
  if (!stop_after.empty()) {
    want.assign(V, 0);
    for (const std::size_t v : stop_after)
      if (!want[v]) {
        want[v] = 1;
        ++remaining;
      }
  }
  using Item = std::pair<Ticks, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0;
  heap.push({0, static_cast<std::uint32_t>(source)});
  const auto& off = g.offsets();
  const auto& tgt = g.targets();
  const auto& wgt = g.weights();
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d != dist[v]) continue;
    if (d > limit) break;
    if (!want.empty() && want[v]) {
      want[v] = 0;
      if (--remaining == 0) break;
    }
    for (std::size_t e = off[v]; e < off[v + 1]; ++e) {
      const Ticks nd = d + wgt[e];
      if (nd < dist[tgt[e]]) {
        dist[tgt[e]] = nd;
        heap.push({nd, tgt[e]});
      }
    }
  }
  return dist;
}

Ticks distance_ticks(const SpaceTimeGraph& g, std::size_t a, std::size_t b) {
  if (a == b) return 0;
  const Ticks d = shortest_paths(g, a, {b})[b];
  if (d == kUnreachable) throw InternalError("d_lambda: target node unreachable");
  return d;
}

double distance(const SpaceTimeGraph& g, const SpaceTimePoint& p, const SpaceTimePoint& q) {
  return from_ticks(distance_ticks(g, g.snap(p), g.snap(q)));
}

// ---------------------------------------------------------------------------
// d_0

double D0::value() const {
  if (!finite_) throw InternalError("d_0 is infinite here");
  return value_;
}

D0Metric::D0Metric(const FlowGrid& grid) : grid_(&grid) {
  for (std::size_t j = 0; j < grid.num_times(); ++j) {
    std::vector<Vec> pts(grid.num_points());
    for (std::size_t i = 0; i < grid.num_points(); ++i) pts[i] = grid.position(j, i);
    index_.push_back(std::make_shared<const NearestIndex>(grid.dim, pts));
  }
}

std::vector<std::size_t> D0Metric::trajectories_near(const SpaceTimePoint& p, double tol) const {
  const auto& times = grid_->times;
  const auto it = std::lower_bound(times.begin(), times.end(), p.t - 1e-9);
  if (it == times.end() || std::abs(*it - p.t) > 1e-9) return {};
  return index_[static_cast<std::size_t>(it - times.begin())]->within(p.x, tol);
}

D0 D0Metric::operator()(const SpaceTimePoint& p, const SpaceTimePoint& q, double tube_tol) const {
  const auto a = trajectories_near(p, tube_tol);
  const auto b = trajectories_near(q, tube_tol);
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  for (const std::size_t i : common)
    if (grid_->active(i)) return D0::finite(std::abs(p.t - q.t));
  return D0::infinity();
}

D0 d0_distance(const FlowGrid& grid, const SpaceTimePoint& p, const SpaceTimePoint& q, double tube_tol) {
  return D0Metric(grid)(p, q, tube_tol);
}

// ---------------------------------------------------------------------------
// Lipschitz constants

namespace {

struct Best {
  double ratio = 0.0;
  std::size_t a = 0, b = 0;
  void offer(double r, std::size_t p, std::size_t q) {
    if (p > q) std::swap(p, q);
    if (r > ratio || (r == ratio && r > 0.0 && std::tie(p, q) < std::tie(a, b))) {
      ratio = r;
      a = p;
      b = q;
    }
  }
  void merge(const Best& o) {
    if (o.ratio > 0.0) offer(o.ratio, o.a, o.b);
  }
};

void validate_nodes(const NodeValues& f, const SpaceTimeGraph& g) {
  if (f.nodes.size() != f.values.size()) throw ConfigError("node values: size mismatch");
  if (f.nodes.size() < 2) throw DegenerateError("Lipschitz constant needs at least two nodes");
  for (const std::size_t v : f.nodes) {
    if (v >= g.num_nodes()) throw ConfigError("node values: node id out of range");
    if (!g.active(v)) throw ConfigError("node values: node " + std::to_string(v) + " is inactive");
  }
}

std::vector<std::size_t> pick_sources(std::size_t s, std::size_t budget, std::uint64_t seed, bool& exhaustive) {
  std::vector<std::size_t> sources;
  exhaustive = s * s <= budget;
  if (exhaustive) {
    sources.resize(s);
    std::iota(sources.begin(), sources.end(), 0);
    return sources;
  }
  const std::size_t k = std::clamp<std::size_t>(budget / s, 1, s);
  std::mt19937_64 rng(seed);
  for (std::size_t m = 0; m < k; ++m) {
    const std::size_t lo = m * s / k;
    const std::size_t hi = (m + 1) * s / k;
    std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
    sources.push_back(pick(rng));
  }
  return sources;
}

// Targets farther than gap_max / floor cannot reach the lower bound
// `floor`, so the sweep stops there (with a relative margin so ties are
// still examined). The floor is shared by all sources, which keeps the
// examined pairs independent of scheduling.
void scan_source(const NodeValues& f, const SpaceTimeGraph& g, std::size_t a, bool exhaustive, double lo, double hi,
                 double floor, Best& best, std::size_t& pairs) {
  Ticks limit = kUnreachable;
  if (floor > 0.0) {
    const double gap = std::max(f.values[a] - lo, hi - f.values[a]);
    const double reach = gap * (1.0 + 1e-9) / floor / kTick;
    if (reach < 1e18) limit = static_cast<Ticks>(std::ceil(reach));
  }
  const std::vector<Ticks> dist = shortest_paths(g, f.nodes[a], f.nodes, limit);
  const std::size_t first = exhaustive ? a + 1 : 0;
  for (std::size_t b = first; b < f.nodes.size(); ++b) {
    if (f.nodes[b] == f.nodes[a]) continue;
    const Ticks d = dist[f.nodes[b]];
    if (d == kUnreachable) {
      if (limit == kUnreachable) throw InternalError("d_lambda: tube node unreachable");
      continue;
    }
    if (d > limit) continue;
    best.offer(std::abs(f.values[a] - f.values[b]) / from_ticks(d), f.nodes[a], f.nodes[b]);
    ++pairs;
  }
}

// every same-trajectory pair, distance = flow-edge ticks between the slices
void scan_trajectories(const NodeValues& f, const SpaceTimeGraph& g, Best& best, std::size_t& pairs) {
  std::vector<std::size_t> order(f.nodes.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t np = g.num_trajectories();
  std::vector<std::size_t> traj;
  for (std::size_t k = 0; k < order.size(); ++k)
    traj.push_back(g.is_trajectory_node(f.nodes[k]) ? f.nodes[k] % np : static_cast<std::size_t>(-1));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return traj[x] < traj[y]; });
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    while (hi < order.size() && traj[order[hi]] == traj[order[lo]]) ++hi;
    if (traj[order[lo]] != static_cast<std::size_t>(-1)) {
      for (std::size_t x = lo; x < hi; ++x)
        for (std::size_t y = x + 1; y < hi; ++y) {
          const std::size_t p = order[x], q = order[y];
          if (f.nodes[p] == f.nodes[q]) continue;
          const Ticks d = g.time_ticks(g.slice(f.nodes[p]), g.slice(f.nodes[q]));
          best.offer(std::abs(f.values[p] - f.values[q]) / from_ticks(d), f.nodes[p], f.nodes[q]);
          ++pairs;
        }
    }
    lo = hi;
  }
}

template <bool Parallel>
LipschitzEstimate lipschitz_impl(const NodeValues& f, const SpaceTimeGraph& g, std::size_t budget,
                                 std::uint64_t seed) {
  validate_nodes(f, g);
  LipschitzEstimate out;
  const std::vector<std::size_t> sources = pick_sources(f.nodes.size(), budget, seed, out.exhaustive);
  // same-trajectory pairs first: exact, cheap, and a lower bound that lets
  // every source sweep stop early
  Best seed_best;
  std::size_t pairs = 0;
  scan_trajectories(f, g, seed_best, pairs);
  const auto [lo_it, hi_it] = std::minmax_element(f.values.begin(), f.values.end());
  const double lo = *lo_it, hi = *hi_it;
  Best best = seed_best;
  if constexpr (Parallel) {
    std::exception_ptr failure;
#pragma omp parallel
    {
      Best local = seed_best;
      std::size_t local_pairs = 0;
#pragma omp for schedule(dynamic, 1)
      for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(sources.size()); ++s) {
        try {
          scan_source(f, g, sources[static_cast<std::size_t>(s)], out.exhaustive, lo, hi, seed_best.ratio, local,
                      local_pairs);
        } catch (...) {
#pragma omp critical
          failure = std::current_exception();
        }
      }
#pragma omp critical
      {
        best.merge(local);
        pairs += local_pairs;
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (const std::size_t a : sources) scan_source(f, g, a, out.exhaustive, lo, hi, seed_best.ratio, best, pairs);
  }
  out.constant = best.ratio;
  out.witness_a = best.a;
  out.witness_b = best.b;
  out.pairs = pairs;
  return out;
}

}  // namespace

LipschitzEstimate lipschitz_constant(const NodeValues& f, const SpaceTimeGraph& g, std::size_t pair_budget,
                                     std::uint64_t seed) {
  return lipschitz_impl<true>(f, g, pair_budget, seed);
}

LipschitzEstimate lipschitz_constant_serial(const NodeValues& f, const SpaceTimeGraph& g, std::size_t pair_budget,
                                            std::uint64_t seed) {
  return lipschitz_impl<false>(f, g, pair_budget, seed);
}

double directional_constant(const NodeValues& f, const SpaceTimeGraph& g) {
  if (f.nodes.size() != f.values.size()) throw ConfigError("node values: size mismatch");
  const std::size_t np = g.num_trajectories();
  std::vector<std::vector<std::size_t>> by_traj(np);
  for (std::size_t k = 0; k < f.nodes.size(); ++k) {
    if (!g.is_trajectory_node(f.nodes[k])) throw ConfigError("directional_constant: not a trajectory node");
    by_traj[f.nodes[k] % np].push_back(k);
  }
  double L = 0.0;
  for (const auto& ks : by_traj)
    for (std::size_t x = 0; x < ks.size(); ++x)
      for (std::size_t y = x + 1; y < ks.size(); ++y) {
        const double dt = std::abs(g.time(f.nodes[ks[x]]) - g.time(f.nodes[ks[y]]));
        if (dt == 0.0) continue;
        L = std::max(L, std::abs(f.values[ks[x]] - f.values[ks[y]]) / dt);
      }
  return L;
}

std::vector<std::size_t> tube_nodes(const SpaceTimeGraph& g, const std::vector<std::size_t>& members) {
  std::vector<std::size_t> nodes;
  nodes.reserve(members.size() * g.num_times());
  for (std::size_t j = 0; j < g.num_times(); ++j)
    for (const std::size_t i : members) nodes.push_back(g.trajectory_node(j, i));
  return nodes;
}

ConvergenceTable convergence_scan(const FlowGrid& grid, const std::vector<std::size_t>& members,
                                  const std::vector<double>& tube_values, const std::vector<double>& lambdas,
                                  double lattice_dx, std::size_t pair_budget, std::uint64_t seed) {
  if (lambdas.empty()) throw ConfigError("convergence_scan: empty lambda list");
  for (std::size_t k = 0; k + 1 < lambdas.size(); ++k)
    if (!(lambdas[k + 1] < lambdas[k])) throw ConfigError("convergence_scan: lambda list must be decreasing");
  ConvergenceTable table;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const SpaceTimeGraph g = build_graph(grid, lattice_dx, lambdas[k]);
    const NodeValues f{tube_nodes(g, members), tube_values};
    if (k == 0) table.L = directional_constant(f, g);
    const LipschitzEstimate est = lipschitz_constant(f, g, pair_budget, seed);
    table.rows.push_back({lambdas[k], est.constant, g.num_nodes(), g.num_edges()});
    if (k > 0 && est.constant > table.rows[k - 1].L_lambda) table.monotone = false;
  }
  return table;
}

Equivalence equivalence_constants(const SpaceTimeGraph& g, std::size_t sources, std::uint64_t seed) {
  std::vector<std::size_t> active;
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (g.active(v)) active.push_back(v);
  if (active.size() < 2) throw DegenerateError("equivalence_constants: fewer than two nodes");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < std::max<std::size_t>(1, sources); ++k) chosen.push_back(active[pick(rng)]);

  Equivalence eq;
  eq.slack = g.lattice_dx();
  std::vector<double> c1(chosen.size(), HUGE_VAL), c2(chosen.size(), 0.0);
  std::vector<std::size_t> pairs(chosen.size(), 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(chosen.size()); ++s) {
    const auto k = static_cast<std::size_t>(s);
    const std::size_t a = chosen[k];
    const std::vector<Ticks> dist = shortest_paths(g, a);
    for (const std::size_t b : active) {
      if (b == a || dist[b] == kUnreachable) continue;
      const double dt = g.time(a) - g.time(b);
      const Vec dx = g.position(a) - g.position(b);
      const double d1 = std::sqrt(dt * dt + dot(dx, dx));
      const double d = from_ticks(dist[b]);
      if (d1 > 0.0) c1[k] = std::min(c1[k], d / d1);
      c2[k] = std::max(c2[k], d / (d1 + eq.slack));
      ++pairs[k];
    }
  }
  eq.c1 = *std::min_element(c1.begin(), c1.end());
  eq.c2 = *std::max_element(c2.begin(), c2.end());
  for (const std::size_t p : pairs) eq.pairs += p;
  return eq;
}

double select_lambda(const ConvergenceTable& table, double factor) {
  if (table.rows.empty()) throw ConfigError("select_lambda: empty table");
  for (const auto& row : table.rows)
    if (row.L_lambda <= factor * table.L) return row.lambda;
  return table.rows.back().lambda;
}

void write_graph_stats_csv(std::ostream& out, const SpaceTimeGraph& g) {
  out << "lambda,lattice_dx,nodes,edges,flow_edges,transverse_edges,snap_edges,max_snap\n";
  out << format_double(g.lambda()) << ',' << format_double(g.lattice_dx()) << ',' << g.num_nodes() << ','
      << g.num_edges() << ',' << g.flow_edges() << ',' << g.transverse_edges() << ',' << g.snap_edges() << ','
      << format_double(g.max_snap()) << '\n';
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
  out << "# L_directional," << format_double(table.L) << '\n';
  out << "# monotone," << (table.monotone ? 1 : 0) << '\n';
  out << "lambda,L_lambda,nodes,edges\n";
  for (const auto& r : table.rows)
    out << format_double(r.lambda) << ',' << format_double(r.L_lambda) << ',' << r.nodes << ',' << r.edges << '\n';
}

}  // namespace rlf
