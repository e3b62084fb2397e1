// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "rlf/extension.hpp"
#include "rlf/transport.hpp"
#include "rlf/weakform.hpp"

using namespace rlf;

namespace {

VectorField make_field(const std::string& name) {
  FieldSpec spec;
  spec.name = name;
  return catalog(spec);
}

std::vector<double> unit_times(int n) {
  std::vector<double> t;
  for (int k = 0; k <= n; ++k) t.push_back(static_cast<double>(k) / n);
  return t;
}

const VectorField& swirl() {
  static const VectorField b = make_field("swirl_power");
  return b;
}

const FlowGrid& swirl_grid() {
  static const FlowGrid g = build_flow_grid(swirl(), 1.0, 0.1, unit_times(10), 1e-3);
  return g;
}

TestFunction ripple() {
  BumpSpec s;
  s.x_radius = 0.9;
  s.t_center = 0.5;
  s.t_radius = 0.45;
  s.wavenumber = 20.94;
  return tensor_bump(s, 1.0);
}

struct TubeSetup {
  SpaceTimeGraph graph;
  TubeFunction tube;
  NodeValues values;
};

const TubeSetup& tube_setup() {
  static const TubeSetup s = [] {
    TubeSetup t;
    const FlowGrid& grid = swirl_grid();
    t.graph = build_graph(grid, 0.1, 0.1);
    t.tube = build_tube_function(ripple(), grid, lusin_lipschitz_set(grid, 0.1 * M_PI, default_lusin_thresholds()));
    t.values.nodes = tube_nodes(t.graph, t.tube.members);
    t.values.values = t.tube.values;
    return t;
  }();
  return s;
}

void flow_grid(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_flow_grid(swirl(), 1.0, 0.05, unit_times(10), 1e-3));
}
void flow_grid_serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_flow_grid_serial(swirl(), 1.0, 0.05, unit_times(10), 1e-3));
}

struct ResidualSetup {
  VectorField field = make_field("rotation");
  DensityField u = eulerian_view(field, gaussian(vec2(0.3, 0.1), 0.2), 0.01, Box::cube(2, 1.0));
  TestFunction phi = [] {
    BumpSpec b;
    b.x_center = vec2(0.2, 0.1);
    return tensor_bump(b, 1.0);
  }();
};
const ResidualSetup& residual_setup() {
  static const ResidualSetup s;
  return s;
}

void residual(benchmark::State& state) {
  const auto& s = residual_setup();
  for (auto _ : state) benchmark::DoNotOptimize(eulerian_residual(s.u, s.field, s.phi, 0.05));
}
void residual_serial(benchmark::State& state) {
  const auto& s = residual_setup();
  for (auto _ : state) benchmark::DoNotOptimize(eulerian_residual_serial(s.u, s.field, s.phi, 0.05));
}

void finite_volumes(benchmark::State& state) {
  const VectorField rot = make_field("rotation");
  for (auto _ : state)
    benchmark::DoNotOptimize(fv_solve(rot, gaussian(vec2(0.5, 0), 0.15), Box::cube(2, 1.2), 0.02, 0.005, 0.25));
}
void finite_volumes_serial(benchmark::State& state) {
  const VectorField rot = make_field("rotation");
  for (auto _ : state)
    benchmark::DoNotOptimize(fv_solve_serial(rot, gaussian(vec2(0.5, 0), 0.15), Box::cube(2, 1.2), 0.02, 0.005, 0.25));
}

void lipschitz(benchmark::State& state) {
  const auto& s = tube_setup();
  for (auto _ : state) benchmark::DoNotOptimize(lipschitz_constant(s.values, s.graph, 200'000));
}
void lipschitz_serial(benchmark::State& state) {
  const auto& s = tube_setup();
  for (auto _ : state) benchmark::DoNotOptimize(lipschitz_constant_serial(s.values, s.graph, 200'000));
}

void mcshane(benchmark::State& state) {
  const auto& s = tube_setup();
  for (auto _ : state) benchmark::DoNotOptimize(mcshane_extend(s.tube, s.graph, false));
}
void mcshane_serial(benchmark::State& state) {
  const auto& s = tube_setup();
  for (auto _ : state) benchmark::DoNotOptimize(mcshane_extend_serial(s.tube, s.graph, false));
}

}  // namespace

BENCHMARK(flow_grid)->Unit(benchmark::kMillisecond);
BENCHMARK(flow_grid_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(residual)->Unit(benchmark::kMillisecond);
BENCHMARK(residual_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(finite_volumes)->Unit(benchmark::kMillisecond);
BENCHMARK(finite_volumes_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(lipschitz)->Unit(benchmark::kMillisecond);
BENCHMARK(lipschitz_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(mcshane)->Unit(benchmark::kMillisecond);
BENCHMARK(mcshane_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
