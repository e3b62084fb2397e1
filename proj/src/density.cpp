#include "rlf/density.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

// ---------------------------------------------------------------------------
// NearestIndex

NearestIndex::NearestIndex(int dim, const std::vector<Vec>& points) : dim_(dim), points_(points) {
  std::vector<std::size_t> valid;
  Vec hi{};
  for (int d = 0; d < dim_; ++d) {
    lo_[d] = HUGE_VAL;
    hi[d] = -HUGE_VAL;
  }
  for (std::size_t k = 0; k < points_.size(); ++k) {
    bool finite = true;
    for (int d = 0; d < dim_; ++d) finite = finite && std::isfinite(points_[k][d]);
    if (!finite) continue;
    valid.push_back(k);
    for (int d = 0; d < dim_; ++d) {
      lo_[d] = std::min(lo_[d], points_[k][d]);
      hi[d] = std::max(hi[d], points_[k][d]);
    }
  }
  if (valid.empty()) return;

  double volume = 1.0;
  double max_extent = 0.0;
  for (int d = 0; d < dim_; ++d) max_extent = std::max(max_extent, hi[d] - lo_[d]);
  if (max_extent == 0.0) max_extent = 1.0;
  for (int d = 0; d < dim_; ++d) volume *= std::max(hi[d] - lo_[d], 1e-3 * max_extent);
  cell_ = std::pow(2.0 * volume / static_cast<double>(valid.size()), 1.0 / dim_);
  if (!(cell_ > 0.0)) cell_ = 1.0;

  std::size_t total = 1;
  for (int d = 0; d < dim_; ++d) {
    counts_[d] = static_cast<int>(std::floor((hi[d] - lo_[d]) / cell_)) + 1;
    total *= static_cast<std::size_t>(counts_[d]);
  }
  std::vector<std::size_t> bucket_of(valid.size());
  start_.assign(total + 1, 0);
  for (std::size_t v = 0; v < valid.size(); ++v) {
    bucket_of[v] = bucket_flat(cell_of(points_[valid[v]]));
    ++start_[bucket_of[v] + 1];
  }
  for (std::size_t b = 0; b < total; ++b) start_[b + 1] += start_[b];
  items_.resize(valid.size());
  std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
  for (std::size_t v = 0; v < valid.size(); ++v) items_[fill[bucket_of[v]]++] = valid[v];
}

std::array<int, kMaxDim> NearestIndex::cell_of(const Vec& x) const {
  std::array<int, kMaxDim> c{0, 0, 0};
  for (int d = 0; d < dim_; ++d) {
    const double s = std::floor((x[d] - lo_[d]) / cell_);
    c[d] = static_cast<int>(std::clamp(s, 0.0, static_cast<double>(counts_[d] - 1)));
  }
  return c;
}

std::size_t NearestIndex::bucket_flat(const std::array<int, kMaxDim>& c) const {
  std::size_t f = 0;
  for (int d = 0; d < dim_; ++d) f = f * static_cast<std::size_t>(counts_[d]) + static_cast<std::size_t>(c[d]);
  return f;
}

std::size_t NearestIndex::nearest(const Vec& x) const {
  if (items_.empty()) return npos;
  const auto center = cell_of(x);
  std::size_t best = npos;
  double best_d = HUGE_VAL;
  int max_shell = 0;
  for (int d = 0; d < dim_; ++d) max_shell = std::max(max_shell, counts_[d]);

  const int last = dim_ - 1;
  auto scan = [&](const std::array<int, kMaxDim>& c) {
    const std::size_t b = bucket_flat(c);
    for (std::size_t s = start_[b]; s < start_[b + 1]; ++s) {
      const double dd = distance(points_[items_[s]], x);
      if (dd < best_d || (dd == best_d && items_[s] < best)) {
        best_d = dd;
        best = items_[s];
      }
    }
  };
  for (int r = 0; r <= max_shell; ++r) {
    std::array<int, kMaxDim> lo{0, 0, 0};
    std::array<int, kMaxDim> hi{0, 0, 0};
    for (int d = 0; d < dim_; ++d) {
      lo[d] = std::max(center[d] - r, 0);
      hi[d] = std::min(center[d] + r, counts_[d] - 1);
    }
    // Odometer over the leading axes; the last axis visits only the shell surface.
    std::array<int, kMaxDim> c = lo;
    while (true) {
      int cheb = 0;
      for (int d = 0; d < last; ++d) cheb = std::max(cheb, std::abs(c[d] - center[d]));
      if (cheb == r) {
        for (c[last] = lo[last]; c[last] <= hi[last]; ++c[last]) scan(c);
      } else {
        if (center[last] - r >= 0) {
          c[last] = center[last] - r;
          scan(c);
        }
        if (r > 0 && center[last] + r < counts_[last]) {
          c[last] = center[last] + r;
          scan(c);
        }
      }
      c[last] = lo[last];
      int d = last - 1;
      while (d >= 0 && c[d] == hi[d]) {
        c[d] = lo[d];
        --d;
      }
      if (d < 0) break;
      ++c[d];
    }
    // Cells beyond shell r lie at least r * cell away from the projection of x.
    if (best != npos && best_d <= r * cell_) break;
  }
  return best;
}

std::vector<std::size_t> NearestIndex::within(const Vec& x, double radius) const {
  std::vector<std::size_t> out;
  if (items_.empty()) return out;
  Vec a = x;
  Vec b = x;
  for (int d = 0; d < dim_; ++d) {
    a[d] -= radius;
    b[d] += radius;
  }
  const auto lo = cell_of(a);
  const auto hi = cell_of(b);
  std::array<int, kMaxDim> c = lo;
  while (true) {
    const std::size_t bk = bucket_flat(c);
    for (std::size_t s = start_[bk]; s < start_[bk + 1]; ++s)
      if (distance(points_[items_[s]], x) <= radius) out.push_back(items_[s]);
    int d = dim_ - 1;
    while (d >= 0 && c[d] == hi[d]) {
      c[d] = lo[d];
      --d;
    }
    if (d < 0) break;
    ++c[d];
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// DensityField

DensityField DensityField::on_lattice(Lattice lattice, std::vector<double> times,
                                      std::vector<std::vector<double>> values) {
  if (times.size() != values.size()) throw ConfigError("lattice density: one value slice per time required");
  for (const auto& slice : values)
    if (slice.size() != lattice.size()) throw ConfigError("lattice density: slice size does not match lattice");
  DensityField f;
  f.kind_ = DensityKind::lattice;
  f.dim_ = lattice.dim();
  f.support_ = lattice.bounds();
  for (int d = 0; d < f.dim_; ++d) {
    f.support_.lo[d] -= 0.5 * lattice.spacing();
    f.support_.hi[d] += 0.5 * lattice.spacing();
  }
  f.lattice_ = std::move(lattice);
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  return f;
}

DensityField DensityField::scattered(int dim, std::vector<double> times, std::vector<std::vector<Vec>> points,
                                     std::vector<std::vector<double>> values, Box support) {
  if (times.size() != points.size() || times.size() != values.size())
    throw ConfigError("scattered density: points and values per time slice required");
  DensityField f;
  f.kind_ = DensityKind::scattered;
  f.dim_ = dim;
  f.support_ = support;
  f.times_ = std::move(times);
  f.points_ = std::move(points);
  f.values_ = std::move(values);
  for (std::size_t j = 0; j < f.times_.size(); ++j) {
    if (f.points_[j].size() != f.values_[j].size())
      throw ConfigError("scattered density: point/value count mismatch");
    // Slices sharing the same point cloud share one index.
    if (j > 0 && f.points_[j] == f.points_[j - 1]) {
      f.index_.push_back(f.index_.back());
    } else {
      f.index_.push_back(std::make_shared<const NearestIndex>(dim, f.points_[j]));
    }
  }
  return f;
}

DensityField DensityField::analytic(int dim, Closure closure, Box support) {
  DensityField f;
  f.kind_ = DensityKind::analytic;
  f.dim_ = dim;
  f.support_ = support;
  f.closure_ = std::move(closure);
  return f;
}

std::size_t DensityField::num_samples(std::size_t j) const {
  if (kind_ == DensityKind::analytic) return 0;
  return values_[j].size();
}

Vec DensityField::point(std::size_t j, std::size_t k) const {
  if (kind_ == DensityKind::lattice) return lattice_.point(k);
  if (kind_ == DensityKind::scattered) return points_[j][k];
  throw ConfigError("analytic density has no sample points");
}

double DensityField::at(std::size_t j, const Vec& x) const {
  if (!support_.contains(x)) return 0.0;
  switch (kind_) {
    case DensityKind::analytic:
      return closure_(times_.empty() ? 0.0 : times_[j], x);
    case DensityKind::lattice:
      return lattice_.interpolate(values_[j], x);
    case DensityKind::scattered: {
      const std::size_t k = index_[j]->nearest(x);
      return k == NearestIndex::npos ? 0.0 : values_[j][k];
    }
  }
  return 0.0;
}

double DensityField::at(double t, const Vec& x) const {
  if (!support_.contains(x)) return 0.0;
  if (kind_ == DensityKind::analytic) return closure_(t, x);
  if (times_.empty()) return 0.0;
  if (t <= times_.front()) return at(std::size_t{0}, x);
  if (t >= times_.back()) return at(times_.size() - 1, x);
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto j1 = static_cast<std::size_t>(it - times_.begin());
  const std::size_t j0 = j1 - 1;
  const double w = (t - times_[j0]) / (times_[j1] - times_[j0]);
  if (w == 0.0) return at(j0, x);
  return (1.0 - w) * at(j0, x) + w * at(j1, x);
}

std::optional<std::size_t> DensityField::slice_of(double t) const {
  for (std::size_t j = 0; j < times_.size(); ++j)
    if (std::abs(times_[j] - t) <= 1e-12 * (1.0 + std::abs(t))) return j;
  return std::nullopt;
}

double DensityField::initial(const Vec& x) const {
  if (initial_) return support_.contains(x) ? initial_(0.0, x) : 0.0;
  return at(0.0, x);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string join_vec(const Vec& v, int dim) {
  std::string s;
  for (int d = 0; d < dim; ++d) {
    if (d) s += ';';
    s += format_double(v[d]);
  }
  return s;
}

Vec split_vec(const std::string& text, int dim) {
  Vec v{};
  std::stringstream ss(text);
  std::string part;
  int d = 0;
  while (std::getline(ss, part, ';')) {
    if (d >= dim) throw ConfigError("density CSV: too many components in '" + text + "'");
    v[d++] = parse_double(part);
  }
  if (d != dim) throw ConfigError("density CSV: expected " + std::to_string(dim) + " components in '" + text + "'");
  return v;
}

}  // namespace

void write_density_csv(std::ostream& out, const DensityField& field) {
  if (field.kind() == DensityKind::analytic) throw ConfigError("analytic density fields have no CSV form");
  const int n = field.dim();
  out << "# kind=" << (field.kind() == DensityKind::lattice ? "lattice" : "scattered") << '\n';
  out << "# dim=" << n << '\n';
  out << "# support_lo=" << join_vec(field.support().lo, n) << '\n';
  out << "# support_hi=" << join_vec(field.support().hi, n) << '\n';
  if (field.kind() == DensityKind::lattice) {
    const Lattice& lat = field.lattice();
    out << "# origin=" << join_vec(lat.origin(), n) << '\n';
    out << "# spacing=" << format_double(lat.spacing()) << '\n';
    std::string counts;
    for (int d = 0; d < n; ++d) counts += (d ? ";" : "") + std::to_string(lat.count(d));
    out << "# counts=" << counts << '\n';
  }
  out << 't';
  for (int d = 0; d < n; ++d) out << ",x" << d;
  out << ",value\n";
  for (std::size_t j = 0; j < field.num_times(); ++j) {
    const std::string t = format_double(field.times()[j]);
    for (std::size_t k = 0; k < field.num_samples(j); ++k) {
      const Vec p = field.point(j, k);
      out << t;
      for (int d = 0; d < n; ++d) out << ',' << format_double(p[d]);
      out << ',' << format_double(field.value(j, k)) << '\n';
    }
  }
}

DensityField read_density_csv(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<double> times;
  std::vector<std::vector<Vec>> points;
  std::vector<std::vector<double>> values;
  int n = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (!meta.count("dim")) throw ConfigError("density CSV line " + std::to_string(line_no) + ": missing '# dim='");
      n = std::stoi(meta["dim"]);
      if (n < 1 || n > kMaxDim) throw ConfigError("density CSV: dimension must be 1..3");
      continue;
    }
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != n + 2)
      throw ConfigError("density CSV line " + std::to_string(line_no) + ": expected " + std::to_string(n + 2) +
                        " fields");
    try {
      const double t = parse_double(fields[0]);
      Vec p{};
      for (int d = 0; d < n; ++d) p[d] = parse_double(fields[static_cast<std::size_t>(d) + 1]);
      const double v = parse_double(fields.back());
      if (times.empty() || t != times.back()) {
        times.push_back(t);
        points.emplace_back();
        values.emplace_back();
      }
      points.back().push_back(p);
      values.back().push_back(v);
    } catch (const ConfigError& e) {
      throw ConfigError("density CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw ConfigError("density CSV: no header row");

  const std::string kind = meta.count("kind") ? meta["kind"] : "scattered";
  if (kind == "lattice") {
    std::array<int, kMaxDim> counts{1, 1, 1};
    std::stringstream ss(meta.at("counts"));
    std::string part;
    for (int d = 0; d < n && std::getline(ss, part, ';'); ++d) counts[d] = std::stoi(part);
    Lattice lat(n, split_vec(meta.at("origin"), n), parse_double(meta.at("spacing")), counts);
    for (const auto& slice : values)
      if (slice.size() != lat.size()) throw ConfigError("density CSV: lattice slice has wrong sample count");
    return DensityField::on_lattice(std::move(lat), std::move(times), std::move(values));
  }
  if (kind != "scattered") throw ConfigError("density CSV: unknown kind '" + kind + "'");
  Box support{n, {}, {}};
  if (meta.count("support_lo") && meta.count("support_hi")) {
    support.lo = split_vec(meta["support_lo"], n);
    support.hi = split_vec(meta["support_hi"], n);
  } else {
    support = Box::unbounded(n);
  }
  return DensityField::scattered(n, std::move(times), std::move(points), std::move(values), support);
}

}  // namespace rlf
