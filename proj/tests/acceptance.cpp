// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "rlf/extension.hpp"
#include "rlf/metric.hpp"
#include "rlf/transport.hpp"
#include "rlf/weakform.hpp"

using namespace rlf;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* const kCatalog[] = {"zero", "constant", "rotation", "linear", "shear", "swirl_power"};

FlowGrid unit_grid(const VectorField& b, double dy = 0.1) {
  return build_flow_grid(b, 1.0, dy, oracle::unit_times(10), 1e-3);
}

std::vector<double> grid_times(double step) {
  const auto n = static_cast<int>(std::llround(1.0 / step));
  return oracle::unit_times(n);
}

TestFunction residual_phi() {
  BumpSpec s;
  s.x_center = vec2(0.2, 0.1);
  s.x_radius = 0.5;
  s.t_center = 0.5;
  s.t_radius = 0.4;
  return tensor_bump(s, 1.0);
}

TestFunction ripple_Psi() {
  BumpSpec s;
  s.x_radius = 0.9;
  s.t_center = 0.5;
  s.t_radius = 0.45;
  s.wavenumber = 20.94;
  return tensor_bump(s, 1.0);
}

// (quad, step) refinement levels shared by the residual criteria
const double kQuad[] = {0.1, 0.05, 0.025};
const double kStep[] = {0.02, 0.01, 0.005};

void flow_oracle(Outcome& o) {
  std::mt19937_64 rng(101);
  const double omega = 1.0;
  struct Case {
    const char* name;
    std::function<Vec(double, const Vec&)> exact;
    double tol;
  };
  const Case cases[] = {
      {"rotation", [&](double t, const Vec& y) { return oracle::rotation_flow(omega, t, y); }, 1e-6},
      {"linear", oracle::linear_flow, 1e-6},
      {"constant", [](double t, const Vec& y) { return y + t * vec2(1.0, 0.5); }, 1e-6},
      {"swirl_power", [](double t, const Vec& y) { return oracle::swirl_flow(0.75, t, y); }, 1e-5},
  };
  for (const auto& c : cases) {
    const VectorField b = oracle::field(c.name);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
      Vec y = oracle::disc_point(rng, 1.0);
      if (norm(y) < 0.1) y = y * (0.1 / std::max(norm(y), 1e-3));
      const double t = oracle::uniform(rng, 0, 1);
      worst = std::max(worst, distance(integrate_flow(b, 0, t, y, 1e-3), c.exact(t, y)));
    }
    o.detail << ' ' << c.name << '=' << g6(worst);
    o.require(worst <= c.tol, c.name);
  }
}

void round_trip(Outcome& o) {
  std::mt19937_64 rng(102);
  for (const char* name : {"rotation", "linear", "constant", "swirl_power"}) {
    const VectorField b = oracle::field(name);
    double rt = 0.0, sg = 0.0;
    for (int k = 0; k < 200; ++k) {
      const Vec y = oracle::disc_point(rng, 1.0);
      const double t = oracle::uniform(rng, 0, 1), s = oracle::uniform(rng, 0, t);
      const Vec x = integrate_flow(b, 0, t, y, 1e-3);
      rt = std::max(rt, distance(integrate_flow(b, t, 0, x, 1e-3), y));
      sg = std::max(sg, distance(integrate_flow(b, s, t, integrate_flow(b, 0, s, y, 1e-3), 1e-3), x));
    }
    o.detail << ' ' << name << "=(" << g6(rt) << ',' << g6(sg) << ')';
    o.require(rt <= 1e-6 && sg <= 1e-6, name);
  }
}

void density_bounds(Outcome& o) {
  for (const char* name : kCatalog) {
    const VectorField b = oracle::field(name);
    const FlowGrid g = unit_grid(b);
    const double div_sup = check_assumptions(b, 2.0, 11, 21).div_sup;
    // C^-1 <= exp(-D) <= C with C = exp(div_sup), compared as |D| <= div_sup
    double worst = 0.0;
    for (std::size_t j = 0; j < g.num_times(); ++j)
      for (std::size_t i = 0; i < g.num_points(); ++i) worst = std::max(worst, std::abs(g.div_integral(j, i)));
    o.detail << ' ' << name << "=" << g6(worst) << "/" << g6(div_sup);
    o.require(worst <= div_sup, name);
  }
}

void lusin_certificate(Outcome& o) {
  const FlowGrid g = unit_grid(oracle::field("swirl_power"));
  double previous = HUGE_VAL;
  for (const double frac : {0.05, 0.1, 0.2}) {
    const double eps = frac * M_PI;
    const LusinSet K = lusin_lipschitz_set(g, eps, default_lusin_thresholds());
    const double witnessed = distance(g.position(K.witness_time, K.witness_a), g.position(K.witness_time, K.witness_b)) /
                             distance(g.base_points[K.witness_a], g.base_points[K.witness_b]);
    o.detail << " eps=" << frac << ":lip=" << g6(K.lip_constant) << ",off=" << g6(K.complement_measure);
    o.require(K.complement_measure <= eps, "complement measure");
    o.require(std::isfinite(K.lip_constant) && witnessed == K.lip_constant, "witness");
    o.require(K.lip_constant <= previous, "monotone in epsilon");
    previous = K.lip_constant;
  }
}

void lagrangian_property(Outcome& o) {
  const SpatialFunction u0 = gaussian(vec2(0.3, 0.1), 0.2);
  double worst = 0.0;
  for (const char* name : kCatalog) {
    const VectorField b = oracle::field(name);
    const FlowGrid g = unit_grid(b);
    worst = std::max(worst, check_lagrangian_property(pullback_along_flow(lagrangian_solution(b, g, u0), g), g));
  }
  o.detail << " solutions=" << g6(worst);
  o.require(worst <= 1e-12, "solutions");

  const FlowGrid g = unit_grid(oracle::field("zero"));
  const SpatialFunction phi = gaussian(vec2(0, 0), 0.3);
  std::vector<std::vector<double>> vals(g.num_times());
  double phi_max = 0.0;
  for (std::size_t j = 0; j < g.num_times(); ++j)
    for (const Vec& y : g.base_points) {
      vals[j].push_back(g.times[j] * phi(y));
      phi_max = std::max(phi_max, phi(y));
    }
  const DensityField U = DensityField::scattered(2, g.times, std::vector<std::vector<Vec>>(g.num_times(), g.base_points),
                                                 vals, Box::cube(2, 2.0));
  const double defect = check_lagrangian_property(U, g);
  o.detail << " t*phi=" << g6(defect) << " (>" << g6(0.1 * phi_max) << ")";
  o.require(defect > 0.1 * phi_max, "non-solution");
}

void residual_refinement(Outcome& o) {
  const VectorField rot = oracle::field("rotation");
  const TestFunction phi = residual_phi();
  double previous = HUGE_VAL;
  o.detail << " eulerian=";
  for (int k = 0; k < 3; ++k) {
    // the exact solution is sampled with the level's time step
    const DensityField uk = eulerian_view(rot, gaussian(vec2(0.3, 0.1), 0.2), kStep[k], Box::cube(2, 1.0));
    const double r = std::abs(eulerian_residual(uk, rot, phi, kQuad[k]).value);
    o.detail << (k ? "," : "") << g6(r);
    if (k > 0) o.require(previous >= 1.5 * r, "eulerian ratio at level " + std::to_string(k));
    previous = r;
  }
  double worst = 0.0;
  for (const char* name : kCatalog) {
    const VectorField b = oracle::field(name);
    const FlowGrid g = unit_grid(b);
    const DensityField U = pullback_along_flow(lagrangian_solution(b, g, [](const Vec&) { return 0.0; }), g);
    worst = std::max(worst, std::abs(lagrangian_residual(U, density_ratio_field(g), phi, g).value));
  }
  o.detail << " lagrangian(u0=0)=" << g6(worst);
  o.require(worst <= 1e-10, "lagrangian residual of zero data");
}

void change_of_variables(Outcome& o) {
  const SpatialFunction u0 = gaussian(vec2(0.3, 0.1), 0.2);
  const TestFunction psi = residual_phi();
  for (const char* name : {"zero", "rotation", "linear"}) {
    const VectorField b = oracle::field(name);
    double previous = HUGE_VAL;
    o.detail << ' ' << name << '=';
    for (int k = 0; k < 3; ++k) {
      const FlowGrid g = build_flow_grid(b, 1.0, kQuad[k], grid_times(kStep[k]), std::min(kStep[k], 1e-3));
      const DensityField u = eulerian_view(b, u0, kStep[k], Box::cube(2, 3.0));
      const double gap = change_of_variables_check(u, b, g, psi, pullback_test_function(psi, g), kQuad[k]).gap;
      o.detail << (k ? "," : "") << g6(gap);
      if (std::string(name) == "zero") {
        o.require(gap <= 1e-8, "zero field gap");
      } else if (k > 0) {
        o.require(previous >= 1.5 * gap, std::string(name) + " ratio at level " + std::to_string(k));
      }
      previous = gap;
    }
  }
}

void metric_family(Outcome& o) {
  const FlowGrid grid = unit_grid(oracle::field("swirl_power"));
  const std::vector<double> lambdas{0.4, 0.2, 0.1, 0.05, 0.025};
  std::vector<SpaceTimeGraph> graphs;
  for (const double l : lambdas) graphs.push_back(build_graph(grid, 0.1, l));
  const std::size_t n = graphs[0].num_nodes();
  for (const auto& g : graphs) o.require(g.num_nodes() == n, "node sets differ across lambda");

  // sampled sources: full rows for symmetry, triangle and monotonicity
  std::mt19937_64 rng(108);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> src;
  while (src.size() < 24) {
    const std::size_t v = pick(rng);
    if (graphs[0].active(v)) src.push_back(v);
  }
  std::size_t checked = 0;
  std::vector<std::vector<Ticks>> prev;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    std::vector<std::vector<Ticks>> rows;
    for (const std::size_t s : src) rows.push_back(shortest_paths(graphs[k], s));
    for (std::size_t a = 0; a < src.size(); ++a) {
      for (std::size_t b = 0; b < src.size(); ++b) {
        o.require(rows[a][src[b]] == rows[b][src[a]], "symmetry");
        for (std::size_t v = 0; v < n; ++v)
          if (graphs[k].active(v)) o.require(rows[a][v] <= rows[a][src[b]] + rows[b][v], "triangle");
        checked += n;
      }
      if (!prev.empty())
        for (std::size_t v = 0; v < n; ++v) o.require(rows[a][v] >= prev[a][v], "monotone in lambda");
    }
    prev = std::move(rows);
  }

  // same-trajectory pairs: d_lambda <= d_0 + 2 snap / lambda
  const D0Metric d0(grid);
  std::size_t same = 0;
  double slack_min = HUGE_VAL;
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    const SpaceTimeGraph& g = graphs[k];
    for (std::size_t i = 0; i < grid.num_points(); ++i) {
      std::vector<std::size_t> traj;
      for (std::size_t j = 0; j < grid.num_times(); ++j) traj.push_back(g.trajectory_node(j, i));
      for (const std::size_t j : {std::size_t{0}, grid.num_times() / 2}) {
        const auto d = shortest_paths(g, traj[j], traj);
        for (std::size_t m = 0; m < grid.num_times(); ++m) {
          const D0 z = d0(g.point(traj[j]), g.point(traj[m]), 1e-9);
          const double bound = z.value() + 2.0 * g.max_snap() / lambdas[k];
          slack_min = std::min(slack_min, bound - from_ticks(d[traj[m]]));
          o.require(from_ticks(d[traj[m]]) <= bound, "same-trajectory bound");
          ++same;
        }
      }
    }
  }
  o.detail << " triangle/symmetry checks=" << checked << " same-trajectory pairs=" << same
           << " min slack=" << g6(slack_min);
}

void convergence(Outcome& o) {
  const TestFunction Psi = ripple_Psi();
  for (const char* name : {"rotation", "swirl_power"}) {
    const FlowGrid grid = unit_grid(oracle::field(name));
    const LusinSet K = lusin_lipschitz_set(grid, 0.1 * M_PI, default_lusin_thresholds());
    const TubeFunction tube = build_tube_function(Psi, grid, K);
    const ConvergenceTable t =
        convergence_scan(grid, tube.members, tube.values, {0.4, 0.2, 0.1, 0.05, 0.025}, 0.1, 20'000'000);
    o.detail << ' ' << name << ":L=" << g6(t.L) << ",L_lambda=";
    for (std::size_t k = 0; k < t.rows.size(); ++k) o.detail << (k ? "," : "") << g6(t.rows[k].L_lambda);
    o.require(t.monotone, std::string(name) + " monotone");
    o.require(std::abs(t.rows.back().L_lambda - t.L) <= 0.1 * t.L, std::string(name) + " terminal within 10%");
  }
}

struct Sweep {
  std::string name;
  std::vector<EpsilonStudy> studies;
};

std::vector<Sweep>& sweeps() {
  static std::vector<Sweep> cache;
  if (cache.empty()) {
    StudyOptions opt;
    for (const char* name : {"rotation", "swirl_power"}) {
      const FlowGrid grid = unit_grid(oracle::field(name));
      Sweep s{name, {}};
      for (const double frac : {0.2, 0.1, 0.05})
        s.studies.push_back(run_epsilon_study(grid, ripple_Psi(), frac * M_PI, [](const Vec&) { return 1.0; }, opt));
      cache.push_back(std::move(s));
    }
  }
  return cache;
}

void extension_certificate(Outcome& o) {
  for (const Sweep& s : sweeps()) {
    double lp_min = HUGE_VAL, lp_max = 0.0;
    o.detail << ' ' << s.name << ':';
    for (const EpsilonStudy& st : s.studies) {
      o.require(st.plain.exact_on_tube && st.clamped.exact_on_tube, "exact on tube");
      // the inf-convolution slope is L_lambda (1 + 1e-12); see the README
      const double cap = st.extension.slope;
      o.require(st.plain.lip_d_lambda <= cap && st.clamped.lip_d_lambda <= cap, "Lip under d_lambda_bar");
      o.require(st.clamped.within_bounds, "clamped bounds");
      lp_min = std::min(lp_min, st.plain.L_prime);
      lp_max = std::max(lp_max, st.plain.L_prime);
      o.detail << " lambda_bar=" << st.lambda_bar << ",lip=" << g17(std::max(st.plain.lip_d_lambda, st.clamped.lip_d_lambda))
               << "<=slope=" << g17(cap)
               << ",L'=" << g6(st.plain.L_prime);
    }
    o.detail << " L'max/min=" << g6(lp_max / lp_min);
    o.require(lp_max / lp_min <= 1.5, "L' ratio");
  }
}

void step4(Outcome& o) {
  for (const Sweep& s : sweeps()) {
    o.detail << ' ' << s.name << ':';
    double previous = HUGE_VAL;
    bool strictly = true;
    for (const EpsilonStudy& st : s.studies) {
      const Step4Row& r = st.step4;
      o.detail << " eps=" << g6(r.epsilon / M_PI) << "|lhs|=" << g6(r.lhs) << ",|split|=" << g6(std::abs(r.split_term))
               << ",rhs=" << g6(r.rhs);
      o.require(r.lhs <= r.rhs && std::abs(r.split_term) <= r.rhs, s.name + " bound");
      o.require(r.rhs <= previous, s.name + " rhs nonincreasing as epsilon decreases");
      strictly = strictly && r.rhs < previous;
      previous = r.rhs;
    }
    // rotation has an empty complement (every point is in the tube), so both sides vanish
    if (s.name == "swirl_power") o.require(strictly, "swirl rhs strictly decreasing");
  }
}

void uniqueness(Outcome& o) {
  struct Case {
    const char* name;
    Vec center;
    double sigma;
    double box;
  };
  const Case cases[] = {{"rotation", vec2(0.5, 0), 0.15, 1.2},
                        {"linear", vec2(0.1, 0.05), 0.1, 3.0},
                        {"swirl_power", vec2(0.5, 0), 0.15, 1.2}};
  for (const auto& c : cases) {
    const VectorField b = oracle::field(c.name);
    const SpatialFunction u0 = gaussian(c.center, c.sigma);
    const Box box = Box::cube(2, c.box);
    const DensityField exact = eulerian_view(b, u0, 1e-3, box);
    double previous = HUGE_VAL;
    o.detail << ' ' << c.name << '=';
    for (const double dx : {0.04, 0.02, 0.01}) {
      const FvSolution fv = fv_solve(b, u0, box, dx, dx / 12.0, 1.0);
      const double l1 = l1_distance(fv.density, 1, exact, 1.0);
      o.detail << (dx < 0.04 ? "," : "") << g6(l1);
      o.require(l1 < previous, std::string(c.name) + " decreasing");
      previous = l1;
    }
  }
}

}  // namespace

int main() {
  struct Criterion {
    const char* title;
    void (*run)(Outcome&);
  };
  const Criterion criteria[] = {
      {"flow oracle agreement", flow_oracle},
      {"round trip and semigroup", round_trip},
      {"density bounds", density_bounds},
      {"Lusin certificate", lusin_certificate},
      {"Lagrangian property", lagrangian_property},
      {"residual refinement", residual_refinement},
      {"change of variables", change_of_variables},
      {"metric family", metric_family},
      {"convergence of L_lambda", convergence},
      {"extension certificate", extension_certificate},
      {"Step-4 error bound", step4},
      {"desk-scale uniqueness", uniqueness},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [threw: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s: %s (%.1f s)%s\n", index, o.pass ? "PASS" : "FAIL", c.title, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
