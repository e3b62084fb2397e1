#include "rlf/weakform.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <tuple>

#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

double bump(double s) {
  const double a = 1.0 - s * s;
  return a > 0.0 ? a * a * a : 0.0;
}

double bump_derivative(double s) {
  const double a = 1.0 - s * s;
  return a > 0.0 ? -6.0 * s * a * a : 0.0;
}

// ---------------------------------------------------------------------------
// TestFunction

TestFunction::TestFunction(int dim, Eval eval, Eval time_derivative, Gradient gradient, double lip, double t_lo,
                           double t_hi, Box space)
    : dim_(dim),
      eval_(std::move(eval)),
      dt_(std::move(time_derivative)),
      grad_(std::move(gradient)),
      lip_(lip),
      t_lo_(t_lo),
      t_hi_(t_hi),
      space_(space) {
  if (dim_ < 1 || dim_ > kMaxDim) throw ConfigError("test function dimension must be in 1..3");
  if (!(t_lo_ >= 0.0) || !(t_hi_ >= t_lo_)) throw ConfigError("test function time support must satisfy 0 <= lo <= hi");
  if (!(lip_ >= 0.0)) throw ConfigError("test function Lipschitz constant must be nonnegative");
}

TestFunction TestFunction::from_closure(int dim, Eval eval, double lip, double t_lo, double t_hi, Box space,
                                        double h) {
  if (!(h > 0.0)) throw ConfigError("difference step must be positive");
  auto dt = [eval, h](double t, const Vec& x) { return (eval(t + h, x) - eval(t - h, x)) / (2.0 * h); };
  auto grad = [eval, h, dim](double t, const Vec& x) {
    Vec g{};
    for (int d = 0; d < dim; ++d) {
      Vec p = x;
      Vec m = x;
      p[d] += h;
      m[d] -= h;
      g[d] = (eval(t, p) - eval(t, m)) / (2.0 * h);
    }
    return g;
  };
  return TestFunction(dim, eval, dt, grad, lip, t_lo, t_hi, space);
}

bool TestFunction::in_support(double t, const Vec& x) const {
  return t >= t_lo_ && t <= t_hi_ && space_.contains(x);
}

double TestFunction::operator()(double t, const Vec& x) const { return in_support(t, x) ? eval_(t, x) : 0.0; }

double TestFunction::time_derivative(double t, const Vec& x) const {
  return in_support(t, x) ? dt_(t, x) : 0.0;
}

Vec TestFunction::gradient(double t, const Vec& x) const { return in_support(t, x) ? grad_(t, x) : Vec{}; }

namespace {

void check_radii(double r, const char* what) {
  if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError(std::string(what) + " must be positive");
}

Box space_box(int dim, const Vec& c, double r) {
  Box b{dim, {}, {}};
  for (int d = 0; d < dim; ++d) {
    b.lo[d] = c[d] - r;
    b.hi[d] = c[d] + r;
  }
  return b;
}

double radial(const Vec& x, const Vec& c, double r) { return bump(distance(x, c) / r); }

Vec radial_gradient(const Vec& x, const Vec& c, double r) {
  const Vec d = x - c;
  const double rho = norm(d);
  if (rho == 0.0) return Vec{};
  return d * (bump_derivative(rho / r) / (r * rho));
}

}  // namespace

TestFunction tensor_bump(const BumpSpec& s, double horizon) {
  check_radii(s.t_radius, "time radius");
  check_radii(s.x_radius, "space radius");
  if (s.t_center < 0.0) throw ConfigError("time centre must be nonnegative");
  const double t_lo = std::max(0.0, s.t_center - s.t_radius);
  const double t_hi = s.t_center + s.t_radius;
  if (!(t_hi < horizon))
    throw ConfigError("test function support [" + format_double(t_lo) + ", " + format_double(t_hi) +
                      "] must end before T = " + format_double(horizon));

  const double A = s.amplitude;
  const double tc = s.t_center, tr = s.t_radius, xr = s.x_radius, k = s.wavenumber;
  const Vec xc = s.x_center;
  auto spatial = [=](const Vec& x) { return radial(x, xc, xr) * std::cos(k * (x[0] - xc[0])); };
  auto eval = [=](double t, const Vec& x) { return A * bump((t - tc) / tr) * spatial(x); };
  auto dt = [=](double t, const Vec& x) { return A * bump_derivative((t - tc) / tr) / tr * spatial(x); };
  auto grad = [=](double t, const Vec& x) {
    const double c = std::cos(k * (x[0] - xc[0]));
    Vec g = radial_gradient(x, xc, xr) * c;
    g[0] -= radial(x, xc, xr) * k * std::sin(k * (x[0] - xc[0]));
    return g * (A * bump((t - tc) / tr));
  };
  const double lip = std::abs(A) * std::hypot(kBumpLip / tr, kBumpLip / xr + std::abs(k));

  TestFunction f(s.dim, eval, dt, grad, lip, t_lo, t_hi, space_box(s.dim, xc, xr));
  TestFunction::Tensor parts;
  parts.psi1 = [=](double t) { return t < 0.0 ? 0.0 : A * bump((t - tc) / tr); };
  parts.psi2 = spatial;
  parts.lip1 = std::abs(A) * kBumpLip / tr;
  parts.sup2 = 1.0;
  f.set_tensor(parts);
  return f;
}

TestFunction static_bump(int dim, const Vec& x_center, double x_radius, double amplitude, double horizon) {
  check_radii(x_radius, "space radius");
  const double A = amplitude;
  auto eval = [=](double, const Vec& x) { return A * radial(x, x_center, x_radius); };
  auto dt = [](double, const Vec&) { return 0.0; };
  auto grad = [=](double, const Vec& x) { return radial_gradient(x, x_center, x_radius) * A; };
  TestFunction f(dim, eval, dt, grad, std::abs(A) * kBumpLip / x_radius, 0.0, horizon,
                 space_box(dim, x_center, x_radius));
  TestFunction::Tensor parts;
  parts.psi1 = [](double) { return 1.0; };
  parts.psi2 = [=](const Vec& x) { return A * radial(x, x_center, x_radius); };
  parts.lip1 = 0.0;
  parts.sup2 = std::abs(A);
  f.set_tensor(parts);
  return f;
}

// ---------------------------------------------------------------------------
// Eulerian residual

namespace {

struct EulerianPlan {
  Lattice cells;
  std::vector<double> times;  // N + 1 cell endpoints on [0, t_hi]
  double dt = 0.0;
};

EulerianPlan plan_eulerian(const DensityField& u, const VectorField& field, const TestFunction& phi, double quad) {
  if (!(quad > 0.0)) throw ConfigError("quadrature spacing must be positive");
  const int n = field.dim();
  if (u.dim() != n || phi.dim() != n) throw ConfigError("eulerian_residual: dimension mismatch");
  const Box& S = phi.space();
  if (!u.support().contains(S))
    throw CoverageError("test function support exceeds the data box of the solution");
  if (phi.t_hi() > field.horizon() + 1e-12)
    throw CoverageError("test function time support exceeds the field horizon");
  if (u.kind() != DensityKind::analytic && u.times().back() < phi.t_hi() - 1e-12)
    throw CoverageError("solution slices end before the test function support does");

  EulerianPlan plan;
  const double t_hi = phi.t_hi();
  const int N = std::max(1, static_cast<int>(std::ceil(t_hi / quad - 1e-9)));
  plan.dt = t_hi / N;
  plan.times.resize(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) plan.times[k] = t_hi * k / N;
  plan.times.back() = t_hi;

  Vec origin{};
  std::array<int, kMaxDim> counts{1, 1, 1};
  for (int d = 0; d < n; ++d) {
    const auto k_lo = static_cast<long>(std::floor(S.lo[d] / quad + 0.5));
    const auto k_hi = static_cast<long>(std::ceil(S.hi[d] / quad - 0.5));
    origin[d] = static_cast<double>(k_lo) * quad;
    counts[d] = static_cast<int>(std::max(1L, k_hi - k_lo + 1));
  }
  plan.cells = Lattice(n, origin, quad, counts);
  return plan;
}

// interior and initial contributions of one spatial cell (before the dx^n weight)
std::pair<double, double> eulerian_cell(const DensityField& u, const VectorField& field, const TestFunction& phi,
                                        const EulerianPlan& plan, const Vec& x) {
  if (!phi.space().contains(x)) return {0.0, 0.0};
  double interior = 0.0;
  double prev = phi(plan.times[0], x);
  const double phi0 = prev;
  for (std::size_t k = 0; k + 1 < plan.times.size(); ++k) {
    const double t1 = plan.times[k + 1];
    const double tm = 0.5 * (plan.times[k] + t1);
    const double next = phi(t1, x);
    const double drift = dot(field(tm, x), phi.gradient(tm, x));
    const double slope = (next - prev) + plan.dt * drift;
    if (slope != 0.0) interior += u.at(tm, x) * slope;
    prev = next;
  }
  const double initial = phi0 != 0.0 ? u.initial(x) * phi0 : 0.0;
  return {interior, initial};
}

Residual finish_eulerian(const EulerianPlan& plan, const std::vector<double>& interior,
                         const std::vector<double>& initial) {
  Residual r;
  const double w = plan.cells.cell_volume();
  for (double v : interior) r.interior += v;
  for (double v : initial) r.initial += v;
  r.interior *= w;
  r.initial *= w;
  r.value = r.interior + r.initial;
  r.dt = plan.dt;
  r.dx = plan.cells.spacing();
  return r;
}

}  // namespace

Residual eulerian_residual(const DensityField& u, const VectorField& field, const TestFunction& phi, double quad) {
  const EulerianPlan plan = plan_eulerian(u, field, phi, quad);
  const std::size_t m = plan.cells.size();
  std::vector<double> interior(m, 0.0), initial(m, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(m); ++c) {
    const auto k = static_cast<std::size_t>(c);
    std::tie(interior[k], initial[k]) = eulerian_cell(u, field, phi, plan, plan.cells.point(k));
  }
  return finish_eulerian(plan, interior, initial);
}

Residual eulerian_residual_serial(const DensityField& u, const VectorField& field, const TestFunction& phi,
                                  double quad) {
  const EulerianPlan plan = plan_eulerian(u, field, phi, quad);
  std::vector<double> interior, initial;
  for (std::size_t k = 0; k < plan.cells.size(); ++k) {
    const auto [a, b] = eulerian_cell(u, field, phi, plan, plan.cells.point(k));
    interior.push_back(a);
    initial.push_back(b);
  }
  return finish_eulerian(plan, interior, initial);
}

// ---------------------------------------------------------------------------
// Lagrangian residual

namespace {

void require_on_grid(const DensityField& f, const FlowGrid& grid, const char* what) {
  if (f.num_times() != grid.num_times())
    throw ConfigError(std::string("lagrangian_residual: ") + what + " is not on the grid times");
  for (std::size_t j = 0; j < f.num_times(); ++j)
    if (f.num_samples(j) != grid.num_points())
      throw ConfigError(std::string("lagrangian_residual: ") + what + " is not on the grid lattice");
}

}  // namespace

Residual lagrangian_residual(const DensityField& U, const DensityField& R, const DensityField& Psi,
                             const FlowGrid& grid, std::optional<double> compressibility) {
  require_on_grid(U, grid, "U");
  require_on_grid(R, grid, "R");
  require_on_grid(Psi, grid, "Psi");
  const std::size_t nt = grid.num_times();
  const std::size_t np = grid.num_points();
  const double floor = compressibility ? 1.0 / *compressibility : 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    if (!grid.active(i)) continue;
    for (std::size_t j = 0; j < nt; ++j) {
      const double r = R.value(j, i);
      if (!(r > 0.0) || r < floor)
        throw DensityBoundError("density ratio R = " + format_double(r) + " at (t = " + format_double(grid.times[j]) +
                                ", point " + std::to_string(i) + ") violates the floor " + format_double(floor));
    }
  }

  std::vector<double> interior(np, 0.0), initial(np, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(np); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    if (!grid.active(i)) continue;
    double q_prev = U.value(0, i) / R.value(0, i);
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < nt; ++j) {
      const double q_next = U.value(j + 1, i) / R.value(j + 1, i);
      acc += 0.5 * (q_prev + q_next) * (Psi.value(j + 1, i) - Psi.value(j, i));
      q_prev = q_next;
    }
    interior[i] = acc;
    initial[i] = U.value(0, i) / R.value(0, i) * Psi.value(0, i);
  }

  Residual r;
  const double w = grid.cell_volume();
  for (double v : interior) r.interior += v;
  for (double v : initial) r.initial += v;
  r.interior *= w;
  r.initial *= w;
  r.value = r.interior + r.initial;
  for (std::size_t j = 0; j + 1 < nt; ++j) r.dt = std::max(r.dt, grid.times[j + 1] - grid.times[j]);
  r.dx = grid.spacing;
  return r;
}

Residual lagrangian_residual(const DensityField& U, const DensityField& R, const TestFunction& Psi,
                             const FlowGrid& grid, std::optional<double> compressibility) {
  const std::size_t nt = grid.num_times();
  std::vector<std::vector<double>> values(nt, std::vector<double>(grid.num_points()));
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i) values[j][i] = Psi(grid.times[j], grid.base_points[i]);
  const DensityField sampled =
      DensityField::scattered(grid.dim, grid.times, std::vector<std::vector<Vec>>(nt, grid.base_points),
                              std::move(values), Box::unbounded(grid.dim));
  return lagrangian_residual(U, R, sampled, grid, compressibility);
}

DensityField pullback_test_function(const TestFunction& psi, const FlowGrid& grid) {
  const std::size_t nt = grid.num_times();
  std::vector<std::vector<double>> values(nt, std::vector<double>(grid.num_points(), 0.0));
  for (std::size_t j = 0; j < nt; ++j)
    for (std::size_t i = 0; i < grid.num_points(); ++i)
      if (grid.active(i)) values[j][i] = psi(grid.times[j], grid.position(j, i));
  return DensityField::scattered(grid.dim, grid.times, std::vector<std::vector<Vec>>(nt, grid.base_points),
                                 std::move(values), Box::unbounded(grid.dim));
}

ChangeOfVariables change_of_variables_check(const DensityField& u, const VectorField& field, const FlowGrid& grid,
                                            const TestFunction& psi, const DensityField& Psi, double quad) {
  ChangeOfVariables out;
  const DensityField U = pullback_along_flow(u, grid);
  const DensityField R = density_ratio_field(grid);
  out.lagrangian = lagrangian_residual(U, R, Psi, grid);
  out.eulerian = eulerian_residual(u, field, psi, quad);
  out.gap = std::abs(out.lagrangian.interior - out.eulerian.interior);
  return out;
}

// ---------------------------------------------------------------------------
// Finite volumes

namespace {

struct FvSetup {
  Lattice cells;
  int steps = 0;
  double h = 0.0;
};

FvSetup plan_fv(const VectorField& field, const Box& box, double dx, double dt, double t_end, int snapshots) {
  if (!(dx > 0.0) || !(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("fv_solve: dx, dt and t_end must be positive");
  if (snapshots < 1) throw ConfigError("fv_solve: snapshots must be at least 1");
  const int n = field.dim();
  if (box.dim != n) throw ConfigError("fv_solve: box and field dimensions differ");
  std::array<int, kMaxDim> counts{1, 1, 1};
  Vec origin{};
  for (int d = 0; d < n; ++d) {
    const double width = box.hi[d] - box.lo[d];
    const double cells = std::round(width / dx);
    if (!(cells >= 1.0) || std::abs(cells * dx - width) > 1e-9 * std::max(1.0, width))
      throw ConfigError("fv_solve: box width " + format_double(width) + " is not a multiple of dx = " +
                        format_double(dx));
    counts[d] = static_cast<int>(cells);
    origin[d] = box.lo[d] + 0.5 * dx;
  }
  FvSetup s;
  s.cells = Lattice(n, origin, dx, counts);
  s.steps = std::max(1, static_cast<int>(std::ceil(t_end / dt - 1e-9)));
  s.steps = (s.steps + snapshots - 1) / snapshots * snapshots;
  s.h = t_end / s.steps;
  return s;
}

// Normal velocity b_d on the lower face (side 0) and upper face (side 1) of
// every cell. Face points are computed from the face index so neighbouring
// cells see bitwise identical velocities.
struct FaceVelocities {
  std::vector<double> v;  // [(c * n + d) * 2 + side]
  double courant_rate = 0.0;  // max_c sum_d max(|v_lo|, |v_hi|)
};

Vec face_point(const Lattice& cells, const Vec& lo, const std::array<int, kMaxDim>& m, int d, int side) {
  Vec x{};
  const double dx = cells.spacing();
  for (int e = 0; e < cells.dim(); ++e) x[e] = cells.origin()[e] + m[e] * dx;
  x[d] = lo[d] + (m[d] + side) * dx;
  return x;
}

void fill_faces(const VectorField& field, const Lattice& cells, const Vec& lo, double t, FaceVelocities& f) {
  const int n = cells.dim();
  const std::size_t m = cells.size();
  f.v.assign(m * n * 2, 0.0);
  std::vector<double> rate(m, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cc = 0; cc < static_cast<std::ptrdiff_t>(m); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    const auto mi = cells.multi(c);
    double r = 0.0;
    for (int d = 0; d < n; ++d) {
      const double a = field(t, face_point(cells, lo, mi, d, 0))[d];
      const double b = field(t, face_point(cells, lo, mi, d, 1))[d];
      f.v[(c * n + d) * 2] = a;
      f.v[(c * n + d) * 2 + 1] = b;
      r += std::max(std::abs(a), std::abs(b));
    }
    rate[c] = r;
  }
  f.courant_rate = 0.0;
  for (double r : rate) f.courant_rate = std::max(f.courant_rate, r);
}

double upwind(double v, double left, double right) { return v > 0.0 ? v * left : v * right; }

void check_courant(double h, double dx, const FaceVelocities& f, double& courant) {
  const double c = h * f.courant_rate / dx;
  courant = std::max(courant, c);
  if (c > 0.9)
    throw InfeasibleError("CFL violated: dt * sup ||b||_1 / dx = " + format_double(c) + " > 0.9");
}

double mass(const std::vector<double>& u, double w) {
  double s = 0.0;
  for (double v : u) s += v;
  return s * w;
}

template <bool Parallel>
FvSolution run_fv(const VectorField& field, const SpatialFunction& u0, const Box& box, double dx, double dt,
                  double t_end, int snapshots) {
  const FvSetup s = plan_fv(field, box, dx, dt, t_end, snapshots);
  const Lattice& cells = s.cells;
  const int n = cells.dim();
  const std::size_t m = cells.size();
  const double w = cells.cell_volume();
  const double face_area = std::pow(dx, n - 1);
  const double ratio = s.h / dx;

  std::vector<double> u(m);
  for (std::size_t c = 0; c < m; ++c) u[c] = u0(cells.point(c));
  std::vector<double> times{0.0};
  std::vector<std::vector<double>> slices{u};
  const int every = s.steps / snapshots;

  // neighbour offsets in flat index space
  std::array<std::size_t, kMaxDim> stride{};
  {
    std::size_t acc = 1;
    for (int d = n - 1; d >= 0; --d) {
      stride[d] = acc;
      acc *= static_cast<std::size_t>(cells.count(d));
    }
  }

  FvSolution out;
  out.steps = s.steps;
  out.dt = s.h;
  FaceVelocities faces;
  std::vector<double> next(m);
  std::vector<double> outflow(m);

  for (int step = 0; step < s.steps; ++step) {
    const double t = step * s.h;
    if (step == 0 || !field.autonomous()) {
      fill_faces(field, cells, box.lo, t, faces);
      check_courant(s.h, dx, faces, out.courant);
    }

    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t cc = 0; cc < static_cast<std::ptrdiff_t>(m); ++cc) {
        const auto c = static_cast<std::size_t>(cc);
        const auto mi = cells.multi(c);
        double div = 0.0;
        double out_c = 0.0;
        for (int d = 0; d < n; ++d) {
          const bool first = mi[d] == 0;
          const bool last = mi[d] == cells.count(d) - 1;
          const double below = first ? 0.0 : u[c - stride[d]];
          const double above = last ? 0.0 : u[c + stride[d]];
          const double f_lo = upwind(faces.v[(c * n + d) * 2], below, u[c]);
          const double f_hi = upwind(faces.v[(c * n + d) * 2 + 1], u[c], above);
          div += f_hi - f_lo;
          if (first) out_c -= f_lo;
          if (last) out_c += f_hi;
        }
        next[c] = u[c] - ratio * div;
        outflow[c] = out_c;
      }
    } else {
      // face by face: each flux is computed once and scattered to both cells
      next = u;
      std::fill(outflow.begin(), outflow.end(), 0.0);
      for (int d = 0; d < n; ++d) {
        for (std::size_t c = 0; c < m; ++c) {
          const auto mi = cells.multi(c);
          if (mi[d] == 0) {
            const double f = upwind(faces.v[(c * n + d) * 2], 0.0, u[c]);
            next[c] += ratio * f;
            outflow[c] -= f;
          }
          const bool last = mi[d] == cells.count(d) - 1;
          const double above = last ? 0.0 : u[c + stride[d]];
          const double f = upwind(faces.v[(c * n + d) * 2 + 1], u[c], above);
          next[c] -= ratio * f;
          if (last)
            outflow[c] += f;
          else
            next[c + stride[d]] += ratio * f;
        }
      }
    }

    double boundary = 0.0;
    for (double v : outflow) boundary += v;
    const double before = mass(u, w);
    u.swap(next);
    const double after = mass(u, w);
    out.conservation_defect.push_back(std::abs(after - before + boundary * s.h * face_area));
    if ((step + 1) % every == 0) {
      times.push_back((step + 1) == s.steps ? t_end : (step + 1) * s.h);
      slices.push_back(u);
    }
  }

  out.density = DensityField::on_lattice(cells, std::move(times), std::move(slices));
  out.density.set_initial_datum([u0](double, const Vec& x) { return u0(x); });
  return out;
}

}  // namespace

FvSolution fv_solve(const VectorField& field, const SpatialFunction& u0, const Box& box, double dx, double dt,
                    double t_end, int snapshots) {
  return run_fv<true>(field, u0, box, dx, dt, t_end, snapshots);
}

FvSolution fv_solve_serial(const VectorField& field, const SpatialFunction& u0, const Box& box, double dx,
                           double dt, double t_end, int snapshots) {
  return run_fv<false>(field, u0, box, dx, dt, t_end, snapshots);
}

double l1_distance(const DensityField& lattice_field, std::size_t slice, const DensityField& other, double t) {
  if (lattice_field.kind() != DensityKind::lattice) throw ConfigError("l1_distance: first field must be a lattice");
  if (slice >= lattice_field.num_times()) throw ConfigError("l1_distance: slice out of range");
  const Lattice& lat = lattice_field.lattice();
  std::vector<double> diff(lat.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(lat.size()); ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    diff[k] = std::abs(lattice_field.value(slice, k) - other.at(t, lat.point(k)));
  }
  double s = 0.0;
  for (double v : diff) s += v;
  return s * lat.cell_volume();
}

void write_residual_header(std::ostream& out) { out << "scenario,quad,dy,step,value,interior,initial\n"; }

void write_residual_row(std::ostream& out, const std::string& scenario, double quad, double dy, double step,
                        const Residual& r) {
  write_csv_row(out, {scenario, format_double(quad), format_double(dy), format_double(step), format_double(r.value),
                      format_double(r.interior), format_double(r.initial)});
}

}  // namespace rlf
