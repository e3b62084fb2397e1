#include "rlf/vectorfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "rlf/compensated.hpp"
#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double param(const FieldSpec& spec, const std::string& key, double fallback) {
  const auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

void require_params(const FieldSpec& spec, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : spec.params) {
    if (!allowed.count(key))
      throw ConfigError("field '" + spec.name + "' does not take parameter '" + key + "'");
    if (!std::isfinite(value))
      throw ConfigError("field parameter '" + key + "' must be finite");
  }
}

void require_dim(const FieldSpec& spec, int lo, int hi) {
  if (spec.dim < lo || spec.dim > hi)
    throw ConfigError("field '" + spec.name + "' requires dimension in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got " + std::to_string(spec.dim));
}

std::string axis_key(const char* prefix, int i) { return prefix + std::to_string(i); }

}  // namespace

VectorField::VectorField(std::string name, int dim, double horizon, Eval eval,
                         std::optional<Divergence> divergence, double sobolev_p, bool lipschitz, bool autonomous)
    : name_(std::move(name)),
      dim_(dim),
      horizon_(horizon),
      eval_(std::move(eval)),
      divergence_(std::move(divergence)),
      sobolev_p_(sobolev_p),
      lipschitz_(lipschitz),
      autonomous_(autonomous) {
  if (dim_ < 1 || dim_ > kMaxDim) throw ConfigError("field dimension must be in 1..3");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ConfigError("field horizon T must be positive");
  if (!(sobolev_p_ > 1.0)) throw ConfigError("Sobolev exponent p must exceed 1");
}

double VectorField::divergence(double t, const Vec& x) const {
  if (divergence_) return (*divergence_)(t, x);
  return estimate_divergence(*this, t, x);
}

double estimate_divergence(const VectorField& field, double t, const Vec& x, double h) {
  if (!(h > 0.0)) throw ConfigError("divergence step must be positive");
  double sum = 0.0;
  for (int i = 0; i < field.dim(); ++i) {
    Vec plus = x;
    Vec minus = x;
    plus[i] += h;
    minus[i] -= h;
    sum += (field(t, plus)[i] - field(t, minus)[i]) / (2.0 * h);
  }
  return sum;
}

double estimate_divergence(const VectorField& field, double t, const Vec& x) {
  return estimate_divergence(field, t, x, 1e-4 * (1.0 + norm(x)));
}

std::vector<std::string> catalog_names() {
  return {"zero", "constant", "rotation", "linear", "shear", "swirl_power"};
}

VectorField catalog(const FieldSpec& spec) {
  const int n = spec.dim;
  const double T = spec.horizon;
  const auto zero_div = VectorField::Divergence([](double, const Vec&) { return 0.0; });

  if (spec.name == "zero") {
    require_dim(spec, 1, 3);
    require_params(spec, {});
    return VectorField("zero", n, T, [](double, const Vec&) { return Vec{}; }, zero_div, kInf, true, true);
  }
  if (spec.name == "constant") {
    require_dim(spec, 1, 3);
    require_params(spec, {"c0", "c1", "c2"});
    Vec c{};
    const double defaults[kMaxDim] = {1.0, 0.5, 0.25};
    for (int i = 0; i < n; ++i) c[i] = param(spec, axis_key("c", i), defaults[i]);
    return VectorField("constant", n, T, [c](double, const Vec&) { return c; }, zero_div, kInf, true, true);
  }
  if (spec.name == "rotation") {
    require_dim(spec, 2, 2);
    require_params(spec, {"omega"});
    const double w = param(spec, "omega", 1.0);
    return VectorField(
        "rotation", n, T, [w](double, const Vec& x) { return vec2(-w * x[1], w * x[0]); }, zero_div, kInf,
        true, true);
  }
  if (spec.name == "linear") {
    require_dim(spec, 1, 3);
    std::set<std::string> allowed;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) allowed.insert("a" + std::to_string(i) + std::to_string(j));
    require_params(spec, allowed);
    std::array<std::array<double, kMaxDim>, kMaxDim> a{};
    double trace = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j)
        a[i][j] = param(spec, "a" + std::to_string(i) + std::to_string(j), i == j ? i + 1.0 : 0.0);
      trace += a[i][i];
    }
    return VectorField(
        "linear", n, T,
        [a, n](double, const Vec& x) {
          Vec y{};
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) y[i] += a[i][j] * x[j];
          return y;
        },
        VectorField::Divergence([trace](double, const Vec&) { return trace; }), kInf, true, true);
  }
  if (spec.name == "shear") {
    require_dim(spec, 2, 2);
    require_params(spec, {"s"});
    const double s = param(spec, "s", 1.0);
    return VectorField(
        "shear", n, T, [s](double, const Vec& x) { return vec2(s * x[1], 0.0); }, zero_div, kInf, true, true);
  }
  if (spec.name == "swirl_power") {
    require_dim(spec, 2, 2);
    require_params(spec, {"alpha"});
    const double alpha = param(spec, "alpha", 0.75);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("swirl_power requires alpha in (0, 1)");
    // W^{1,p}_loc exactly for p < n / (1 - alpha); declare the midpoint of (n, n / (1 - alpha)).
    const double p = 0.5 * (n + n / (1.0 - alpha));
    return VectorField(
        "swirl_power", n, T,
        [alpha](double, const Vec& x) {
          const double r = std::hypot(x[0], x[1]);
          if (r == 0.0) return Vec{};
          const double k = (1.0 + alpha) * std::pow(r, alpha - 1.0);
          return vec2(-k * x[1], k * x[0]);
        },
        zero_div, p, false, true);
  }
  throw ConfigError("unknown catalog field '" + spec.name + "'");
}

AssumptionReport check_assumptions(const VectorField& field, double box_radius, int t_samples,
                                   int x_samples, const AssumptionOptions& options) {
  if (t_samples < 2 || x_samples < 2) throw ConfigError("check_assumptions needs at least 2 samples per axis");
  if (!(box_radius > 0.0)) throw ConfigError("box radius must be positive");

  const int n = field.dim();
  const double T = field.horizon();
  const double h = 2.0 * box_radius / (x_samples - 1);
  const Lattice cloud(n, Box::cube(n, box_radius).lo, h, {x_samples, x_samples, x_samples});

  std::vector<Vec> points;
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const Vec p = cloud.point(k);
    if (norm(p) <= box_radius * (1.0 + 1e-12)) points.push_back(p);
  }
  const std::size_t np = points.size();

  std::vector<double> times(static_cast<std::size_t>(t_samples));
  for (int k = 0; k < t_samples; ++k) times[k] = T * k / (t_samples - 1);

  AssumptionReport report;
  report.pair_resolution = h;

  // b on the sample cloud, reused by the modulus pair scan.
  std::vector<Vec> values(times.size() * np);
  std::vector<double> div_per_time(times.size(), 0.0);
  std::vector<double> sobolev_per_time(times.size(), 0.0);
  const double p = field.sobolev_p();
  const double cell = cloud.cell_volume();

  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    double div_max = 0.0;
    double grad_acc = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      const Vec& x = points[i];
      const Vec b = field(t, x);
      values[k * np + i] = b;
      report.growth_sup = std::max(report.growth_sup, norm(b) / (1.0 + norm(x)));
      div_max = std::max(div_max, std::abs(field.divergence(t, x)));

      const double hd = 1e-4 * (1.0 + norm(x));
      double frob2 = 0.0;
      for (int j = 0; j < n; ++j) {
        Vec plus = x;
        Vec minus = x;
        plus[j] += hd;
        minus[j] -= hd;
        const Vec col = (field(t, plus) - field(t, minus)) * (1.0 / (2.0 * hd));
        frob2 += dot(col, col);
      }
      const double frob = std::sqrt(frob2);
      grad_acc = std::isinf(p) ? std::max(grad_acc, frob) : grad_acc + std::pow(frob, p) * cell;
    }
    div_per_time[k] = div_max;
    sobolev_per_time[k] = std::isinf(p) ? grad_acc : std::pow(grad_acc, 1.0 / p);
  }
  CompensatedSum div_sum, sobolev_sum;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    div_sum.add(0.5 * dt * (div_per_time[k] + div_per_time[k + 1]));
    sobolev_sum.add(0.5 * dt * (sobolev_per_time[k] + sobolev_per_time[k + 1]));
  }
  report.div_sup = div_sum.value();
  report.sobolev_seminorm = sobolev_sum.value();
  report.divergence_unbounded = report.div_sup > options.divergence_cap;

  // Modulus of continuity by pair sampling: omega(delta) = max over sampled
  // times and pairs |x - x'| <= delta of |b(t,x) - b(t,x')|.
  const std::vector<double> radii = {0.25 * box_radius, 0.5 * box_radius, box_radius};
  std::vector<double> deltas;
  for (double d = h; d < 2.0 * box_radius; d *= 2.0) deltas.push_back(d);
  deltas.push_back(2.0 * box_radius);

  const std::size_t nr = radii.size();
  const std::size_t nd = deltas.size();
  std::vector<double> bucket(nr * nd, 0.0);

#pragma omp parallel
  {
    std::vector<double> local(nr * nd, 0.0);
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(np); ++a) {
      for (std::size_t b = static_cast<std::size_t>(a) + 1; b < np; ++b) {
        const double d = distance(points[a], points[b]);
        const auto slot = static_cast<std::size_t>(
            std::lower_bound(deltas.begin(), deltas.end(), d * (1.0 - 1e-12)) - deltas.begin());
        if (slot >= nd) continue;
        double diff = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k)
          diff = std::max(diff, distance(values[k * np + a], values[k * np + b]));
        const double rmax = std::max(norm(points[a]), norm(points[b]));
        for (std::size_t m = 0; m < nr; ++m)
          if (rmax <= radii[m] * (1.0 + 1e-12)) local[m * nd + slot] = std::max(local[m * nd + slot], diff);
      }
    }
#pragma omp critical
    for (std::size_t s = 0; s < bucket.size(); ++s) bucket[s] = std::max(bucket[s], local[s]);
  }

  for (std::size_t m = 0; m < nr; ++m) {
    double running = 0.0;
    for (std::size_t k = 0; k < nd; ++k) {
      running = std::max(running, bucket[m * nd + k]);
      report.modulus_table.push_back({radii[m], deltas[k], running});
    }
  }
  return report;
}

void write_assumption_report(std::ostream& out, const AssumptionReport& report) {
  out << "# div_sup," << format_double(report.div_sup) << '\n';
  out << "# growth_sup," << format_double(report.growth_sup) << '\n';
  out << "# sobolev_seminorm," << format_double(report.sobolev_seminorm) << '\n';
  out << "# pair_resolution," << format_double(report.pair_resolution) << '\n';
  out << "# divergence_unbounded," << (report.divergence_unbounded ? 1 : 0) << '\n';
  out << "radius,delta,omega\n";
  for (const auto& e : report.modulus_table)
    out << format_double(e.radius) << ',' << format_double(e.delta) << ',' << format_double(e.omega) << '\n';
}

}  // namespace rlf
