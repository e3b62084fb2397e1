#include "rlf/extension.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <queue>
#include <random>

#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSlopeInflation = 1e-12;
// Distinct nodes closer than this are one point for the Euclidean ratio;
// their value gap is a few ticks of d_lambda and the quotient is roundoff.
constexpr double kMinSeparation = 1e-9;

std::vector<std::size_t> stratified(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> out;
  std::mt19937_64 rng(seed);
  k = std::clamp<std::size_t>(k, 1, n);
  for (std::size_t m = 0; m < k; ++m) {
    std::uniform_int_distribution<std::size_t> pick(m * n / k, (m + 1) * n / k - 1);
    out.push_back(pick(rng));
  }
  return out;
}

double spacetime_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
  const double dt = a.t - b.t;
  const Vec dx = a.x - b.x;
  return std::sqrt(dt * dt + dot(dx, dx));
}

std::vector<SpaceTimePoint> tube_points(const FlowGrid& grid, const std::vector<std::size_t>& members) {
  std::vector<SpaceTimePoint> pts;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (const std::size_t i : members) pts.push_back({grid.times[j], grid.position(j, i)});
  return pts;
}

std::vector<std::size_t> active_members(const FlowGrid& grid, const std::vector<std::size_t>& members) {
  std::vector<std::size_t> out;
  for (const std::size_t i : members) {
    if (i >= grid.num_points()) throw ConfigError("tube member out of range");
    if (grid.active(i)) out.push_back(i);
  }
  if (out.empty()) throw DegenerateError("the tube has no active trajectories");
  return out;
}

}  // namespace

double euclidean_lipschitz(const std::vector<SpaceTimePoint>& points, const std::vector<double>& values,
                           std::size_t pair_budget, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (n != values.size()) throw ConfigError("euclidean_lipschitz: size mismatch");
  if (n < 2) throw DegenerateError("euclidean_lipschitz needs at least two points");
  const bool exhaustive = n * n <= pair_budget;
  std::vector<std::size_t> sources;
  if (exhaustive) {
    for (std::size_t a = 0; a < n; ++a) sources.push_back(a);
  } else {
    sources = stratified(n, pair_budget / n, seed);
  }
  std::vector<double> best(sources.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(sources.size()); ++s) {
    const std::size_t a = sources[static_cast<std::size_t>(s)];
    double m = 0.0;
    for (std::size_t b = exhaustive ? a + 1 : 0; b < n; ++b) {
      const double d = spacetime_distance(points[a], points[b]);
      if (d < kMinSeparation) continue;
      m = std::max(m, std::abs(values[a] - values[b]) / d);
    }
    best[static_cast<std::size_t>(s)] = m;
  }
  return *std::max_element(best.begin(), best.end());
}

TubeFunction build_tube_function(const TestFunction& Psi, const FlowGrid& grid, const LusinSet& K,
                                 std::size_t pair_budget, std::uint64_t seed) {
  if (K.members.empty()) throw DegenerateError("build_tube_function: the Lusin set is empty");
  TubeFunction tube;
  tube.members = active_members(grid, K.members);
  tube.times = grid.times;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (const std::size_t i : tube.members) tube.values.push_back(Psi(grid.times[j], grid.base_points[i]));
  tube.directional_lip = Psi.lip();
  if (tube.values.size() >= 2)
    tube.euclid_lip = euclidean_lipschitz(tube_points(grid, tube.members), tube.values, pair_budget, seed);
  return tube;
}

TubeFunction tube_from_closure(const FlowGrid& grid, const std::vector<std::size_t>& members,
                               const std::function<double(double, const Vec&)>& f, std::size_t pair_budget,
                               std::uint64_t seed) {
  if (members.empty()) throw DegenerateError("tube_from_closure: no members");
  TubeFunction tube;
  tube.members = active_members(grid, members);
  tube.times = grid.times;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (const std::size_t i : tube.members) tube.values.push_back(f(grid.times[j], grid.position(j, i)));
  const std::size_t m = tube.members.size();
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < grid.num_times(); ++a)
      for (std::size_t b = a + 1; b < grid.num_times(); ++b)
        tube.directional_lip = std::max(tube.directional_lip, std::abs(tube.value(a, k) - tube.value(b, k)) /
                                                                  (grid.times[b] - grid.times[a]));
  if (tube.values.size() >= 2)
    tube.euclid_lip = euclidean_lipschitz(tube_points(grid, tube.members), tube.values, pair_budget, seed);
  return tube;
}

// ---------------------------------------------------------------------------
// McShane

namespace {

struct Prepared {
  std::vector<std::size_t> nodes;
  ExtendedFunction f;
};

Prepared prepare(const TubeFunction& tube, const SpaceTimeGraph& g, bool parallel) {
  if (tube.times.size() != g.num_times()) throw ConfigError("mcshane_extend: tube and graph times differ");
  for (std::size_t j = 0; j < g.num_times(); ++j)
    if (tube.times[j] != g.times()[j]) throw ConfigError("mcshane_extend: tube and graph times differ");
  Prepared p;
  p.nodes = tube_nodes(g, tube.members);
  for (const std::size_t v : p.nodes)
    if (v >= g.num_nodes() || !g.is_trajectory_node(v) || !g.active(v))
      throw ConfigError("mcshane_extend: tube node " + std::to_string(v) + " is not an active graph node");
  ExtendedFunction& f = p.f;
  f.lambda = g.lambda();
  f.lo = *std::min_element(tube.values.begin(), tube.values.end());
  f.hi = *std::max_element(tube.values.begin(), tube.values.end());
  if (p.nodes.size() >= 2) {
    const NodeValues nv{p.nodes, tube.values};
    const std::size_t all = std::numeric_limits<std::size_t>::max();
    f.L_lambda = parallel ? lipschitz_constant(nv, g, all).constant : lipschitz_constant_serial(nv, g, all).constant;
    f.L = directional_constant(nv, g);
  }
  f.slope = f.L_lambda * (1.0 + kSlopeInflation);
  f.on_tube.assign(g.num_nodes(), 0);
  for (const std::size_t v : p.nodes) f.on_tube[v] = 1;
  return p;
}

void relax_from(const SpaceTimeGraph& g, std::size_t source, double value, double slope, std::vector<double>& best) {
  const std::vector<Ticks> dist = shortest_paths(g, source);
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] == kUnreachable) continue;
    const double c = value + slope * from_ticks(dist[v]);
    if (c < best[v]) best[v] = c;
  }
}

void finish(ExtendedFunction& f, const SpaceTimeGraph& g, bool clamp) {
  f.clamped = clamp;
  for (std::size_t v = 0; v < f.values.size(); ++v) {
    if (!g.active(v) || std::isinf(f.values[v])) {
      f.values[v] = kNaN;
      continue;
    }
    if (clamp) f.values[v] = std::clamp(f.values[v], f.lo, f.hi);
  }
}

}  // namespace

ExtendedFunction mcshane_extend(const TubeFunction& tube, const SpaceTimeGraph& g, bool clamp) {
  Prepared p = prepare(tube, g, true);
  const std::size_t V = g.num_nodes();
  std::vector<double> best(V, HUGE_VAL);
  std::exception_ptr failure;
#pragma omp parallel
  {
    std::vector<double> local(V, HUGE_VAL);
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(p.nodes.size()); ++q) {
      try {
        const auto k = static_cast<std::size_t>(q);
        relax_from(g, p.nodes[k], tube.values[k], p.f.slope, local);
      } catch (...) {
#pragma omp critical
        failure = std::current_exception();
      }
    }
#pragma omp critical
    for (std::size_t v = 0; v < V; ++v) best[v] = std::min(best[v], local[v]);
  }
  if (failure) std::rethrow_exception(failure);
  p.f.values = std::move(best);
  finish(p.f, g, clamp);
  return p.f;
}

ExtendedFunction mcshane_extend_serial(const TubeFunction& tube, const SpaceTimeGraph& g, bool clamp) {
  Prepared p = prepare(tube, g, false);
  std::vector<double> best(g.num_nodes(), HUGE_VAL);
  for (std::size_t k = 0; k < p.nodes.size(); ++k) relax_from(g, p.nodes[k], tube.values[k], p.f.slope, best);
  p.f.values = std::move(best);
  finish(p.f, g, clamp);
  return p.f;
}

std::vector<double> mcshane_multisource(const TubeFunction& tube, const SpaceTimeGraph& g, double slope) {
  const std::vector<std::size_t> nodes = tube_nodes(g, tube.members);
  const double base = *std::min_element(tube.values.begin(), tube.values.end());
  std::vector<double> dist(g.num_nodes(), HUGE_VAL);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double d0 = tube.values[k] - base;
    if (d0 < dist[nodes[k]]) {
      dist[nodes[k]] = d0;
      heap.push({d0, static_cast<std::uint32_t>(nodes[k])});
    }
  }
  const auto& off = g.offsets();
  const auto& tgt = g.targets();
  const auto& wgt = g.weights();
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d != dist[v]) continue;
    for (std::size_t e = off[v]; e < off[v + 1]; ++e) {
      const double nd = d + slope * from_ticks(wgt[e]);
      if (nd < dist[tgt[e]]) {
        dist[tgt[e]] = nd;
        heap.push({nd, tgt[e]});
      }
    }
  }
  for (std::size_t v = 0; v < dist.size(); ++v) dist[v] = g.active(v) ? dist[v] + base : kNaN;
  return dist;
}

double verify_directional_lipschitz(const ExtendedFunction& f, const SpaceTimeGraph& g) {
  const std::size_t nt = g.num_times();
  double L = 0.0;
  for (std::size_t i = 0; i < g.num_trajectories(); ++i) {
    if (!g.active(g.trajectory_node(0, i))) continue;
    for (std::size_t a = 0; a < nt; ++a)
      for (std::size_t b = a + 1; b < nt; ++b) {
        const double df = f.values[g.trajectory_node(a, i)] - f.values[g.trajectory_node(b, i)];
        L = std::max(L, std::abs(df) / (g.times()[b] - g.times()[a]));
      }
  }
  return L;
}

DensityField pullback_extension(const ExtendedFunction& f, const SpaceTimeGraph& g, const FlowGrid& grid) {
  if (g.num_trajectories() != grid.num_points() || g.num_times() != grid.num_times())
    throw ConfigError("pullback_extension: graph does not belong to this grid");
  const std::size_t nt = grid.num_times();
  std::vector<std::vector<double>> values(nt, std::vector<double>(grid.num_points(), 0.0));
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i)
      if (grid.active(i)) values[j][i] = f.values[g.trajectory_node(j, i)];
  return DensityField::scattered(grid.dim, grid.times, std::vector<std::vector<Vec>>(nt, grid.base_points),
                                 std::move(values), Box::unbounded(grid.dim));
}

Certificate certify_extension(const TubeFunction& tube, const ExtendedFunction& f, const SpaceTimeGraph& g,
                              std::size_t pair_budget, std::uint64_t seed) {
  Certificate c;
  c.lambda = f.lambda;
  c.L = f.L;
  c.L_lambda = f.L_lambda;
  c.L_prime = verify_directional_lipschitz(f, g);

  const std::vector<std::size_t> nodes = tube_nodes(g, tube.members);
  c.exact_on_tube = true;
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (!(f.values[nodes[k]] == tube.values[k])) c.exact_on_tube = false;

  std::vector<std::size_t> active;
  for (std::size_t v = 0; v < g.num_nodes(); ++v)
    if (g.active(v)) active.push_back(v);
  for (const std::size_t v : active)
    if (f.values[v] < f.lo || f.values[v] > f.hi) c.within_bounds = false;

  // Lip under d_lambda from sampled sources against every node; each sweep
  // stops where no farther node can exceed the same-trajectory floor.
  double vlo = HUGE_VAL, vhi = -HUGE_VAL;
  for (const std::size_t v : active) {
    vlo = std::min(vlo, f.values[v]);
    vhi = std::max(vhi, f.values[v]);
  }
  // Stored values carry relative rounding, which dominates the quotient on
  // 1-tick snap edges; that allowance is taken off every value gap.
  const double resolution = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(vlo), std::abs(vhi));
  // Same-trajectory pairs under the tick metric: a lower bound for the
  // sweeps below (L' divides by exact time gaps, not ticks).
  double floor_ticks = 0.0;
  for (std::size_t i = 0; i < g.num_trajectories(); ++i) {
    if (!g.active(g.trajectory_node(0, i))) continue;
    for (std::size_t a = 0; a < g.num_times(); ++a)
      for (std::size_t b = a + 1; b < g.num_times(); ++b) {
        const double df = std::abs(f.values[g.trajectory_node(a, i)] - f.values[g.trajectory_node(b, i)]);
        floor_ticks = std::max(floor_ticks, std::max(0.0, df - resolution) / from_ticks(g.time_ticks(a, b)));
      }
  }
  const std::size_t n = active.size();
  const std::vector<std::size_t> sources = stratified(n, std::max<std::size_t>(1, pair_budget / n), seed);
  std::vector<double> best(sources.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(sources.size()); ++s) {
    const std::size_t a = active[sources[static_cast<std::size_t>(s)]];
    const double gap = std::max(f.values[a] - vlo, vhi - f.values[a]);
    const double reach = floor_ticks > 0.0 ? gap * (1.0 + 1e-9) / floor_ticks / kTick : HUGE_VAL;
    const Ticks limit = reach < 1e18 ? static_cast<Ticks>(std::ceil(reach)) : kUnreachable;
    const std::vector<Ticks> dist = shortest_paths(g, a, {}, limit);
    double m = 0.0;
    for (const std::size_t b : active) {
      if (b == a || dist[b] > limit) continue;
      m = std::max(m, std::max(0.0, std::abs(f.values[a] - f.values[b]) - resolution) / from_ticks(dist[b]));
    }
    best[static_cast<std::size_t>(s)] = m;
  }
  c.lip_d_lambda = std::max(floor_ticks, *std::max_element(best.begin(), best.end()));
  c.pairs = sources.size() * (n - 1);

  std::vector<SpaceTimePoint> pts;
  std::vector<double> vals;
  for (const std::size_t v : active) {
    pts.push_back(g.point(v));
    vals.push_back(f.values[v]);
  }
  c.euclid_constant = euclidean_lipschitz(pts, vals, pair_budget, seed);
  return c;
}

double inverse_flow_lipschitz(const FlowGrid& grid, const std::vector<std::size_t>& members) {
  double best = 0.0;
  for (std::size_t p = 0; p < members.size(); ++p)
    for (std::size_t q = p + 1; q < members.size(); ++q) {
      const std::size_t a = members[p], b = members[q];
      if (!grid.active(a) || !grid.active(b)) continue;
      const double base = distance(grid.base_points[a], grid.base_points[b]);
      for (std::size_t j = 0; j < grid.num_times(); ++j)
        best = std::max(best, base / distance(grid.position(j, a), grid.position(j, b)));
    }
  return best;
}

double field_sup_on_tube(const VectorField& field, const FlowGrid& grid, const std::vector<std::size_t>& members) {
  double s = 0.0;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (const std::size_t i : members)
      if (grid.active(i)) s = std::max(s, norm(field(grid.times[j], grid.position(j, i))));
  return s;
}

double lemma_bound(double lip_Psi, double lip_inverse_flow, double b_sup, double L) {
  const double a = lip_Psi * lip_inverse_flow;
  return std::hypot(a, a * b_sup + L);
}

TestFunction extension_test_function(const ExtendedFunction& f, const SpaceTimeGraph& g, double lip) {
  const Lattice lat = g.lattice();
  if (lat.size() == 0) throw ConfigError("extension_test_function: graph has no background lattice");
  auto slices = std::make_shared<std::vector<std::vector<double>>>(g.num_times(), std::vector<double>(lat.size()));
  for (std::size_t j = 0; j < g.num_times(); ++j)
    for (std::size_t k = 0; k < lat.size(); ++k) (*slices)[j][k] = f.values[g.lattice_node(j, k)];
  const std::vector<double> times = g.times();
  auto eval = [slices, times, lat](double t, const Vec& x) {
    if (times.size() == 1) return lat.interpolate((*slices)[0], x);
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t j = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    j = std::min(j, times.size() - 2);
    const double s = std::clamp((t - times[j]) / (times[j + 1] - times[j]), 0.0, 1.0);
    return (1.0 - s) * lat.interpolate((*slices)[j], x) + s * lat.interpolate((*slices)[j + 1], x);
  };
  return TestFunction::from_closure(g.dim(), eval, lip, 0.0, times.back(), lat.bounds());
}

// ---------------------------------------------------------------------------
// Step 4

Step4Row step4_bound(const FlowGrid& grid, const TestFunction& Psi, const LusinSet& K, const ExtendedFunction& ext,
                     const SpaceTimeGraph& g, const SpatialFunction& weight, double compressibility) {
  const std::size_t nt = grid.num_times();
  const std::size_t np = grid.num_points();
  std::vector<std::uint8_t> in_tube(np, 0);
  for (const std::size_t i : K.members) in_tube[i] = 1;

  std::vector<std::vector<double>> u(nt, std::vector<double>(np, 0.0));
  std::vector<std::vector<double>> diff(nt, std::vector<double>(np, 0.0));
  const DensityField Psi_eps = pullback_extension(ext, g, grid);
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t i = 0; i < np; ++i) {
      if (!grid.active(i)) continue;
      if (!in_tube[i]) u[j][i] = grid.density_ratio(j, i) * weight(grid.base_points[i]);
      diff[j][i] = Psi(grid.times[j], grid.base_points[i]) - Psi_eps.value(j, i);
    }
  const auto on_grid = [&](std::vector<std::vector<double>> v) {
    return DensityField::scattered(grid.dim, grid.times, std::vector<std::vector<Vec>>(nt, grid.base_points),
                                   std::move(v), Box::unbounded(grid.dim));
  };
  const DensityField U = on_grid(u);
  const DensityField R = density_ratio_field(grid);

  Step4Row row;
  row.epsilon = K.epsilon;
  row.complement_measure = K.complement_measure;
  row.C = compressibility;
  row.L = Psi.lip();
  row.L_prime = verify_directional_lipschitz(ext, g);
  row.lhs = std::abs(lagrangian_residual(U, R, Psi, grid, compressibility).interior);
  row.split_term = lagrangian_residual(U, R, on_grid(diff), grid, compressibility).interior;

  double mass = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    if (!grid.active(i) || in_tube[i]) continue;
    for (std::size_t j = 0; j + 1 < nt; ++j)
      mass += 0.5 * (std::abs(u[j][i]) + std::abs(u[j + 1][i])) * (grid.times[j + 1] - grid.times[j]);
  }
  row.mass_off_tube = mass * grid.cell_volume();
  row.rhs = row.C * (row.L + row.L_prime) * row.mass_off_tube;
  return row;
}

EpsilonStudy run_epsilon_study(const FlowGrid& grid, const TestFunction& Psi, double epsilon,
                               const SpatialFunction& weight, const StudyOptions& options) {
  EpsilonStudy study;
  study.epsilon = epsilon;
  study.K = lusin_lipschitz_set(grid, epsilon, default_lusin_thresholds());
  const TubeFunction tube = build_tube_function(Psi, grid, study.K, options.pair_budget, options.seed);
  study.scan = convergence_scan(grid, tube.members, tube.values, options.lambdas, options.lattice_dx,
                                options.pair_budget, options.seed);
  study.lambda_bar = select_lambda(study.scan);
  study.graph = build_graph(grid, options.lattice_dx, study.lambda_bar);
  const SpaceTimeGraph& g = study.graph;
  study.extension = mcshane_extend(tube, g, false);
  ExtendedFunction clamped = study.extension;
  finish(clamped, g, true);
  study.plain = certify_extension(tube, study.extension, g, options.pair_budget, options.seed);
  study.clamped = certify_extension(tube, clamped, g, options.pair_budget, options.seed);
  study.step4 = step4_bound(grid, Psi, study.K, study.extension, g, weight, estimate_compressibility(grid));
  return study;
}

void write_extension_csv(std::ostream& out, const ExtendedFunction& f, const SpaceTimeGraph& g) {
  out << "t";
  for (int d = 0; d < g.dim(); ++d) out << ",x" << d;
  out << ",value,on_tube\n";
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (!g.active(v)) continue;
    out << format_double(g.time(v));
    for (int d = 0; d < g.dim(); ++d) out << ',' << format_double(g.position(v)[d]);
    out << ',' << format_double(f.values[v]) << ',' << int(f.on_tube[v]) << '\n';
  }
}

void write_certificate_header(std::ostream& out) {
  out << "epsilon,lambda,L,L_lambda,L_prime,lip_d_lambda,euclid_constant,exact_on_tube,within_bounds\n";
}

void write_certificate_row(std::ostream& out, double epsilon, const Certificate& c) {
  out << format_double(epsilon) << ',' << format_double(c.lambda) << ',' << format_double(c.L) << ','
      << format_double(c.L_lambda) << ',' << format_double(c.L_prime) << ',' << format_double(c.lip_d_lambda) << ','
      << format_double(c.euclid_constant) << ',' << (c.exact_on_tube ? 1 : 0) << ',' << (c.within_bounds ? 1 : 0)
      << '\n';
}

}  // namespace rlf
