#include "rlf/runners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "rlf/csv.hpp"
#include "rlf/density.hpp"
#include "rlf/extension.hpp"
#include "rlf/flow.hpp"
#include "rlf/metric.hpp"
#include "rlf/svg.hpp"
#include "rlf/transport.hpp"
#include "rlf/weakform.hpp"

namespace fs = std::filesystem;

namespace rlf {

namespace {

using Tolerances = std::map<std::string, double>;

class Writer {
 public:
  Writer(const Scenario& s, fs::path dir, RunReport& report) : s_(s), dir_(std::move(dir)), report_(report) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  /// Opens a table with the preamble line already written.
  std::ofstream table(const std::string& name, const Tolerances& tol) {
    std::ofstream out = open(name);
    write_table_preamble(out, s_, tol);
    return out;
  }
  std::ofstream open(const std::string& name) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    report_.files.push_back(p);
    return out;
  }
  void chart(const std::string& name, const std::vector<Series>& series, const ChartOptions& options) {
    std::ofstream out = open(name);
    write_line_chart(out, series, options);
  }
  void say(const std::string& line) { report_.summary.push_back(line); }

 private:
  const Scenario& s_;
  fs::path dir_;
  RunReport& report_;
};

std::string fmt(double v) { return format_double(v); }

VectorField field_of(const Scenario& s) { return catalog(s.field); }

FlowGrid grid_of(const Scenario& s, const VectorField& field) {
  return build_flow_grid(field, s.radius, s.dy, s.times(), s.step, s.escape_radius);
}

Tolerances flow_tolerances(const Scenario& s) {
  return {{"rk4_step", s.step}, {"escape_radius", s.escape_radius}};
}

// Invariant failures are collected so every table is still written.
struct Violations {
  std::vector<std::string> items;
  void check(bool ok, const std::string& what) {
    if (!ok) items.push_back(what);
  }
  void raise() const {
    if (items.empty()) return;
    std::string msg = "invariant violated: " + items.front();
    if (items.size() > 1) msg += " (+" + std::to_string(items.size() - 1) + " more)";
    throw InternalError(msg);
  }
};

void lusin_tables(const Scenario& s, const FlowGrid& grid, Writer& w) {
  std::ofstream table = w.table("lusin.csv", flow_tolerances(s));
  write_csv_row(table, {"epsilon_fraction", "epsilon", "threshold", "members", "complement_measure", "lip_constant",
                        "witness_a", "witness_b", "witness_time"});
  Series curve{"lip_constant", {}, {}};
  const auto eps = s.epsilon_measures();
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const LusinSet K = lusin_lipschitz_set(grid, eps[k], default_lusin_thresholds());
    write_csv_row(table, {fmt(s.epsilon[k]), fmt(eps[k]), fmt(K.threshold), std::to_string(K.members.size()),
                          fmt(K.complement_measure), fmt(K.lip_constant), std::to_string(K.witness_a),
                          std::to_string(K.witness_b), std::to_string(K.witness_time)});
    std::ofstream members = w.table("lusin_members_" + std::to_string(k) + ".csv", flow_tolerances(s));
    write_lusin_csv(members, grid, K);
    curve.x.push_back(s.epsilon[k]);
    curve.y.push_back(K.lip_constant);
    w.say("epsilon " + fmt(s.epsilon[k]) + " |B_R|: " + std::to_string(K.members.size()) + " members, Lip " +
          fmt(K.lip_constant));
  }
  w.chart("lusin.svg", {curve}, {"Lusin set Lipschitz constant", "epsilon / |B_R|", "lip_constant"});
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::infeasible: return 3;
    case ErrorKind::invariant: return 4;
  }
  return 4;
}

RunReport run_flow(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  Violations bad;
  const VectorField field = field_of(s);
  const FlowGrid grid = grid_of(s, field);

  {
    std::ofstream t = w.table("flow_grid.csv", flow_tolerances(s));
    write_flow_grid_csv(t, grid);
  }

  const AssumptionReport assumptions = check_assumptions(field, s.radius + 1.0, 11, 21);
  {
    std::ofstream t = w.table("assumptions.csv", flow_tolerances(s));
    write_assumption_report(t, assumptions);
  }

  // C^-1 <= exp(-D) <= C with C = exp(int sup |div b|), checked as |D| <= log C
  // so no rounding of exp or of the reciprocal enters the comparison
  const double C = std::exp(assumptions.div_sup);
  double r_min = HUGE_VAL, r_max = 0.0, d_abs = 0.0;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i)
      if (grid.active(i)) {
        r_min = std::min(r_min, grid.density_ratio(j, i));
        r_max = std::max(r_max, grid.density_ratio(j, i));
        d_abs = std::max(d_abs, std::abs(grid.div_integral(j, i)));
      }
  const bool bounded = assumptions.divergence_unbounded || d_abs <= assumptions.div_sup;
  bad.check(bounded, "density ratio outside [1/C, C]");
  {
    std::ofstream t = w.table("compressibility.csv", flow_tolerances(s));
    write_csv_row(t, {"quantity", "value"});
    write_csv_row(t, {"points", std::to_string(grid.num_points())});
    write_csv_row(t, {"escaped", std::to_string(grid.num_points() - grid.active_count())});
    write_csv_row(t, {"div_sup", fmt(assumptions.div_sup)});
    write_csv_row(t, {"C", fmt(C)});
    write_csv_row(t, {"C_measured", fmt(estimate_compressibility(grid))});
    write_csv_row(t, {"max_abs_D", fmt(d_abs)});
    write_csv_row(t, {"R_min", fmt(r_min)});
    write_csv_row(t, {"R_max", fmt(r_max)});
    write_csv_row(t, {"bounds_hold", bounded ? "1" : "0"});
  }

  // round trip X(0,t,X(t,0,y)) = y and semigroup X(t,s,X(s,0,y)) = X(t,0,y)
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::ofstream rt = w.table("roundtrip.csv", flow_tolerances(s));
  std::vector<std::string> head{"sample", "t", "s"};
  for (int d = 0; d < field.dim(); ++d) head.push_back("y" + std::to_string(d));
  head.insert(head.end(), {"roundtrip_error", "semigroup_error"});
  write_csv_row(rt, head);
  double worst_rt = 0.0, worst_sg = 0.0;
  for (int k = 0; k < s.samples; ++k) {
    Vec y{};
    do {
      for (int d = 0; d < field.dim(); ++d) y[d] = s.radius * (2.0 * unit(rng) - 1.0);
    } while (norm(y) > s.radius);
    const double t = s.horizon() * unit(rng);
    const double mid = t * unit(rng);
    std::vector<std::string> row{std::to_string(k), fmt(t), fmt(mid)};
    for (int d = 0; d < field.dim(); ++d) row.push_back(fmt(y[d]));
    try {
      const Vec x = integrate_flow(field, 0.0, t, y, s.step, s.escape_radius);
      const double e_rt = distance(integrate_flow(field, t, 0.0, x, s.step, s.escape_radius), y);
      const Vec z = integrate_flow(field, mid, t, integrate_flow(field, 0.0, mid, y, s.step, s.escape_radius),
                                   s.step, s.escape_radius);
      const double e_sg = distance(z, x);
      worst_rt = std::max(worst_rt, e_rt);
      worst_sg = std::max(worst_sg, e_sg);
      row.push_back(fmt(e_rt));
      row.push_back(fmt(e_sg));
    } catch (const EscapeError&) {
      row.push_back("escaped");
      row.push_back("escaped");
    }
    write_csv_row(rt, row);
  }
  rt.close();
  w.say("points " + std::to_string(grid.num_points()) + ", escaped " +
        std::to_string(grid.num_points() - grid.active_count()));
  w.say("density ratio in [" + fmt(r_min) + ", " + fmt(r_max) + "], C = " + fmt(C));
  w.say("round trip " + fmt(worst_rt) + ", semigroup " + fmt(worst_sg));

  lusin_tables(s, grid, w);
  bad.raise();
  return report;
}

RunReport run_lusin(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  const VectorField field = field_of(s);
  const FlowGrid grid = grid_of(s, field);
  lusin_tables(s, grid, w);
  return report;
}

RunReport run_transport(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  Violations bad;
  const VectorField field = field_of(s);
  const FlowGrid grid = grid_of(s, field);
  const SpatialFunction u0 = s.initial_datum();
  const DensityField u = lagrangian_solution(field, grid, u0);
  const DensityField U = pullback_along_flow(u, grid);
  const DensityField R = density_ratio_field(grid);
  const double defect = check_lagrangian_property(U, grid);
  bad.check(defect <= 1e-12, "U/R varies along a trajectory by " + fmt(defect));
  const Tolerances tol{{"rk4_step", s.step}, {"lagrangian_property", 1e-12}};

  {
    std::ofstream t = w.table("lagrangian_solution.csv", tol);
    write_density_csv(t, u);
  }
  {
    std::ofstream t = w.table("pullback.csv", tol);
    write_density_csv(t, U);
  }
  std::ofstream t = w.table("transport.csv", tol);
  write_csv_row(t, {"t", "R_min", "R_max", "max_abs_U_over_R_minus_u0", "mass"});
  Series rmin{"min R", {}, {}}, rmax{"max R", {}, {}};
  for (std::size_t j = 0; j < grid.num_times(); ++j) {
    double lo = HUGE_VAL, hi = 0.0, dev = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < grid.num_points(); ++i) {
      if (!grid.active(i)) continue;
      const double r = R.value(j, i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      dev = std::max(dev, std::abs(U.value(j, i) / r - u0(grid.base_points[i])));
      mass += U.value(j, i) / r;
    }
    mass *= grid.cell_volume();
    write_csv_row(t, {fmt(grid.times[j]), fmt(lo), fmt(hi), fmt(dev), fmt(mass)});
    rmin.x.push_back(grid.times[j]);
    rmin.y.push_back(lo);
    rmax.x.push_back(grid.times[j]);
    rmax.y.push_back(hi);
  }
  t.close();
  w.chart("density_ratio.svg", {rmin, rmax}, {"Density ratio R along the flow", "t", "R"});
  w.say("Lagrangian property defect " + fmt(defect));
  bad.raise();
  return report;
}

RunReport run_residual(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  const VectorField field = field_of(s);
  const SpatialFunction u0 = s.initial_datum();
  const TestFunction phi = s.test_function();
  const Box support = Box::cube(field.dim(), s.support);
  const Tolerances tol{{"rk4_step", s.step}};

  std::ofstream res = w.table("residual.csv", tol);
  write_residual_header(res);
  std::ofstream cov = w.table("change_of_variables.csv", tol);
  write_csv_row(cov, {"quad", "step", "lagrangian", "eulerian", "gap"});
  Series eul{"|Eulerian residual|", {}, {}}, gap{"change-of-variables gap", {}, {}};

  for (std::size_t k = 0; k < s.quad.size(); ++k) {
    const double q = s.quad[k], st = s.residual_step[k];
    const auto n = static_cast<std::size_t>(std::llround(s.horizon() / st));
    if (std::abs(static_cast<double>(n) * st - s.horizon()) > 1e-9 * s.horizon())
      throw ConfigError("residual step " + fmt(st) + " must divide the horizon");
    std::vector<double> times(n + 1);
    for (std::size_t j = 0; j <= n; ++j) times[j] = j == n ? s.horizon() : static_cast<double>(j) * st;

    const DensityField u = eulerian_view(field, u0, st, support);
    const Residual re = eulerian_residual(u, field, phi, q);
    write_residual_row(res, s.name + "/eulerian", q, q, st, re);

    const FlowGrid grid = build_flow_grid(field, s.radius, q, times, std::min(st, s.step), s.escape_radius);
    const DensityField U = pullback_along_flow(lagrangian_solution(field, grid, u0), grid);
    const DensityField R = density_ratio_field(grid);
    const Residual rl = lagrangian_residual(U, R, phi, grid);
    write_residual_row(res, s.name + "/lagrangian", q, q, st, rl);

    const ChangeOfVariables c = change_of_variables_check(u, field, grid, phi, pullback_test_function(phi, grid), q);
    write_csv_row(cov, {fmt(q), fmt(st), fmt(c.lagrangian.interior), fmt(c.eulerian.interior), fmt(c.gap)});
    eul.x.push_back(q);
    eul.y.push_back(std::abs(re.value));
    gap.x.push_back(q);
    gap.y.push_back(c.gap);
    w.say("quad " + fmt(q) + ": Eulerian " + fmt(re.value) + ", Lagrangian " + fmt(rl.value) + ", gap " + fmt(c.gap));
  }
  res.close();
  cov.close();
  ChartOptions o{"Residual refinement", "quad", "value", true, true};
  w.chart("residual.svg", {eul, gap}, o);
  return report;
}

RunReport run_metric_scan(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  const VectorField field = field_of(s);
  const FlowGrid grid = grid_of(s, field);
  const TestFunction Psi = s.test_function();
  const Tolerances tol{{"rk4_step", s.step}, {"pair_budget", static_cast<double>(s.pair_budget)}, {"tick", kTick}};

  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < grid.num_points(); ++i)
    if (grid.active(i)) members.push_back(i);
  std::vector<double> values;
  for (std::size_t j = 0; j < grid.num_times(); ++j)
    for (const std::size_t i : members) values.push_back(Psi(grid.times[j], grid.base_points[i]));

  const ConvergenceTable table = convergence_scan(grid, members, values, s.lambda, s.lattice_dx, s.pair_budget, s.seed);
  {
    std::ofstream t = w.table("convergence.csv", tol);
    write_convergence_csv(t, table);
  }

  std::ofstream stats = w.table("graph_stats.csv", tol);
  write_csv_row(stats, {"lambda", "lattice_dx", "nodes", "edges", "flow_edges", "transverse_edges", "snap_edges",
                        "max_snap", "c1", "c2", "slack", "equivalence_pairs"});
  std::vector<SpaceTimeGraph> graphs;
  for (const double lam : s.lambda) {
    graphs.push_back(build_graph(grid, s.lattice_dx, lam));
    const SpaceTimeGraph& g = graphs.back();
    const Equivalence eq = equivalence_constants(g, s.equivalence_sources, s.seed);
    write_csv_row(stats, {fmt(lam), fmt(g.lattice_dx()), std::to_string(g.num_nodes()), std::to_string(g.num_edges()),
                          std::to_string(g.flow_edges()), std::to_string(g.transverse_edges()),
                          std::to_string(g.snap_edges()), fmt(g.max_snap()), fmt(eq.c1), fmt(eq.c2), fmt(eq.slack),
                          std::to_string(eq.pairs)});
  }
  stats.close();

  // sample distances: half of the pairs share a trajectory
  std::ofstream dist = w.table("distances.csv", tol);
  std::vector<std::string> head{"pair", "t_a", "t_b"};
  for (int d = 0; d < field.dim(); ++d) head.push_back("xa" + std::to_string(d));
  for (int d = 0; d < field.dim(); ++d) head.push_back("xb" + std::to_string(d));
  head.insert(head.end(), {"d1", "d0"});
  for (const double lam : s.lambda) head.push_back("d_lambda_" + fmt(lam));
  write_csv_row(dist, head);
  std::mt19937_64 rng(s.seed);
  std::uniform_int_distribution<std::size_t> pick_i(0, members.size() - 1), pick_j(0, grid.num_times() - 1);
  const D0Metric d0(grid);
  for (int k = 0; k < 20; ++k) {
    const std::size_t ia = members[pick_i(rng)];
    const std::size_t ib = k % 2 == 0 ? ia : members[pick_i(rng)];
    const std::size_t ja = pick_j(rng), jb = pick_j(rng);
    const SpaceTimePoint a{grid.times[ja], grid.position(ja, ia)}, b{grid.times[jb], grid.position(jb, ib)};
    std::vector<std::string> row{std::to_string(k), fmt(a.t), fmt(b.t)};
    for (int d = 0; d < field.dim(); ++d) row.push_back(fmt(a.x[d]));
    for (int d = 0; d < field.dim(); ++d) row.push_back(fmt(b.x[d]));
    const Vec dx = a.x - b.x;
    row.push_back(fmt(std::sqrt((a.t - b.t) * (a.t - b.t) + dot(dx, dx))));
    const D0 z = d0(a, b, 1e-9);
    row.push_back(z.is_finite() ? fmt(z.value()) : "inf");
    for (const auto& g : graphs)
      row.push_back(fmt(from_ticks(distance_ticks(g, g.trajectory_node(ja, ia), g.trajectory_node(jb, ib)))));
    write_csv_row(dist, row);
  }
  dist.close();

  Series scan{"L_lambda", {}, {}}, limit{"L (d_0)", {}, {}};
  for (const auto& r : table.rows) {
    scan.x.push_back(r.lambda);
    scan.y.push_back(r.L_lambda);
    limit.x.push_back(r.lambda);
    limit.y.push_back(table.L);
  }
  w.chart("convergence.svg", {scan, limit}, {"Lipschitz constant under d_lambda", "lambda", "L_lambda", true, false});
  w.say("L = " + fmt(table.L) + ", L_lambda at smallest lambda = " + fmt(table.rows.back().L_lambda) +
        (table.monotone ? ", nonincreasing" : ", NOT monotone"));
  return report;
}

RunReport run_extension(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  Violations bad;
  const VectorField field = field_of(s);
  const FlowGrid grid = grid_of(s, field);
  const TestFunction Psi = s.test_function();
  const SpatialFunction u0 = s.initial_datum();
  const SpatialFunction weight = s.weight == "data" ? u0 : SpatialFunction([](const Vec&) { return 1.0; });
  const Tolerances tol{{"rk4_step", s.step},
                       {"pair_budget", static_cast<double>(s.pair_budget)},
                       {"slope_inflation", 1e-12},
                       {"lip_slack", 1e-11},
                       {"lambda_factor", 1.1}};

  StudyOptions opt;
  opt.lambdas = s.lambda;
  opt.lattice_dx = s.lattice_dx;
  opt.pair_budget = s.pair_budget;
  opt.seed = s.seed;

  std::ofstream plain = w.table("certificates_plain.csv", tol);
  write_certificate_header(plain);
  std::ofstream clamped = w.table("certificates_clamped.csv", tol);
  write_certificate_header(clamped);
  std::ofstream step4 = w.table("step4.csv", tol);
  write_csv_row(step4, {"epsilon", "complement_measure", "lhs", "split_term", "rhs", "C", "L", "L_prime",
                        "mass_off_tube"});
  std::ofstream cov = w.table("change_of_variables.csv", tol);
  write_csv_row(cov, {"epsilon", "lambda", "lagrangian", "eulerian", "gap"});

  std::vector<Series> scans;
  Series rhs{"C (L + L') mass off tube", {}, {}}, split{"|split term|", {}, {}}, lhs{"|LHS|", {}, {}};
  const auto eps = s.epsilon_measures();
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const EpsilonStudy st = run_epsilon_study(grid, Psi, eps[k], weight, opt);
    {
      std::ofstream t = w.table("convergence_" + std::to_string(k) + ".csv", tol);
      write_convergence_csv(t, st.scan);
    }
    {
      std::ofstream t = w.table("extension_" + std::to_string(k) + ".csv", tol);
      write_extension_csv(t, st.extension, st.graph);
    }
    write_certificate_row(plain, eps[k], st.plain);
    write_certificate_row(clamped, eps[k], st.clamped);
    const Step4Row& r = st.step4;
    write_csv_row(step4, {fmt(r.epsilon), fmt(r.complement_measure), fmt(r.lhs), fmt(r.split_term), fmt(r.rhs),
                          fmt(r.C), fmt(r.L), fmt(r.L_prime), fmt(r.mass_off_tube)});

    const TestFunction psi_eps = extension_test_function(st.extension, st.graph, st.plain.euclid_constant);
    const DensityField u = eulerian_view(field, u0, s.step, Box::cube(field.dim(), s.support));
    const ChangeOfVariables c =
        change_of_variables_check(u, field, grid, psi_eps, pullback_extension(st.extension, st.graph, grid), s.dy);
    write_csv_row(cov, {fmt(eps[k]), fmt(st.lambda_bar), fmt(c.lagrangian.interior), fmt(c.eulerian.interior),
                        fmt(c.gap)});

    Series sc{"epsilon " + fmt(s.epsilon[k]) + " |B_R|", {}, {}};
    for (const auto& row : st.scan.rows) {
      sc.x.push_back(row.lambda);
      sc.y.push_back(row.L_lambda);
    }
    scans.push_back(sc);
    rhs.x.push_back(s.epsilon[k]);
    rhs.y.push_back(r.rhs);
    split.x.push_back(s.epsilon[k]);
    split.y.push_back(std::abs(r.split_term));
    lhs.x.push_back(s.epsilon[k]);
    lhs.y.push_back(r.lhs);

    bad.check(st.plain.exact_on_tube && st.clamped.exact_on_tube, "extension differs from the tube values");
    bad.check(st.clamped.within_bounds, "clamped extension leaves [min psi, max psi]");
    bad.check(r.lhs <= r.rhs && std::abs(r.split_term) <= r.rhs, "Step-4 bound fails at epsilon " + fmt(eps[k]));
    w.say("epsilon " + fmt(s.epsilon[k]) + " |B_R|: lambda_bar " + fmt(st.lambda_bar) + ", L " + fmt(st.plain.L) +
          ", L_lambda " + fmt(st.plain.L_lambda) + ", L' " + fmt(st.plain.L_prime) + ", Step-4 " + fmt(r.lhs) +
          " / " + fmt(std::abs(r.split_term)) + " <= " + fmt(r.rhs));
  }
  plain.close();
  clamped.close();
  step4.close();
  cov.close();
  w.chart("convergence.svg", scans, {"L_lambda across the epsilon sweep", "lambda", "L_lambda", true, false});
  w.chart("step4.svg", {rhs, split, lhs}, {"Step-4 error bound", "epsilon / |B_R|", "value"});
  bad.raise();
  return report;
}

RunReport run_uniqueness(const Scenario& s, const fs::path& out) {
  RunReport report;
  Writer w(s, out, report);
  Violations bad;
  const VectorField field = field_of(s);
  const SpatialFunction u0 = s.initial_datum();
  const TestFunction phi = s.test_function();
  const Box box = Box::cube(field.dim(), s.box);
  const double T = s.horizon();
  const Tolerances tol{{"rk4_step", s.step}, {"cfl", s.cfl}, {"conservation", 1e-10}};

  // sup ||b||_1 over the face lattice of the finest level, all slices
  auto speed = [&](double dx) {
    const Lattice nodes = Lattice::covering(box, dx, box.lo);
    double v = 0.0;
    for (const double t : s.times())
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const Vec b = field(t, nodes.point(k));
        double l1 = 0.0;
        for (int d = 0; d < field.dim(); ++d) l1 += std::abs(b[d]);
        v = std::max(v, l1);
      }
    return v;
  };

  const DensityField exact = eulerian_view(field, u0, s.step, box);
  std::ofstream t = w.table("uniqueness.csv", tol);
  write_csv_row(t, {"dx", "dt", "steps", "courant", "l1_distance", "max_conservation_defect", "mass_initial",
                    "mass_final"});
  std::ofstream res = w.table("residuals.csv", tol);
  write_residual_header(res);
  Series curve{"L1(fv, Lagrangian)", {}, {}};
  const int snapshots = static_cast<int>(std::llround(T / s.dt));
  for (std::size_t k = 0; k < s.dx.size(); ++k) {
    const double dx = s.dx[k];
    const double v = speed(dx);
    const double dt = v > 0.0 ? s.cfl * dx / v : dx;
    const FvSolution fv = fv_solve(field, u0, box, dx, dt, T, snapshots);
    const double l1 = l1_distance(fv.density, fv.density.num_times() - 1, exact, T);
    const double defect = *std::max_element(fv.conservation_defect.begin(), fv.conservation_defect.end());
    const auto& first = fv.density.values(0);
    const auto& last = fv.density.values(fv.density.num_times() - 1);
    const double w0 = fv.density.lattice().cell_volume();
    double m0 = 0.0, m1 = 0.0;
    for (const double a : first) m0 += a * w0;
    for (const double a : last) m1 += a * w0;
    write_csv_row(t, {fmt(dx), fmt(fv.dt), std::to_string(fv.steps), fmt(fv.courant), fmt(l1), fmt(defect), fmt(m0),
                      fmt(m1)});
    bad.check(defect <= 1e-10, "finite-volume conservation defect " + fmt(defect));
    curve.x.push_back(dx);
    curve.y.push_back(l1);

    // Eulerian residual of the finite-volume solution, Lagrangian residual
    // of the flow solution on a grid of the same spacing
    write_residual_row(res, s.name + "/fv", dx, dx, fv.dt, eulerian_residual(fv.density, field, phi, dx));
    const FlowGrid grid = build_flow_grid(field, s.radius, dx, s.times(), s.step, s.escape_radius);
    const DensityField U = pullback_along_flow(lagrangian_solution(field, grid, u0), grid);
    write_residual_row(res, s.name + "/lagrangian", dx, dx, s.dt,
                       lagrangian_residual(U, density_ratio_field(grid), phi, grid));
    if (k + 1 == s.dx.size()) {
      std::ofstream f = w.table("fv_solution.csv", tol);
      write_density_csv(f, fv.density);
    }
    w.say("dx " + fmt(dx) + ": L1 distance " + fmt(l1) + ", Courant " + fmt(fv.courant));
  }
  t.close();
  res.close();
  w.chart("uniqueness.svg", {curve}, {"Finite volumes against the Lagrangian solution", "dx", "L1 at t = T", true, true});
  bad.raise();
  return report;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"flow", "transport", "residual", "lusin", "metric-scan", "extend",
                                              "uniqueness"};
  return names;
}

RunReport run_subcommand(const std::string& name, const Scenario& s, const fs::path& out) {
  if (name == "flow") return run_flow(s, out);
  if (name == "transport") return run_transport(s, out);
  if (name == "residual") return run_residual(s, out);
  if (name == "lusin") return run_lusin(s, out);
  if (name == "metric-scan") return run_metric_scan(s, out);
  if (name == "extend") return run_extension(s, out);
  if (name == "uniqueness") return run_uniqueness(s, out);
  throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace rlf
