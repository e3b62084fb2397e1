#include "rlf/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "rlf/csv.hpp"
#include "rlf/errors.hpp"

namespace rlf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

class Parser {
 public:
  Parser(const std::string& text, const std::string& source) : source_(source) {
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto cut = raw.find_first_of("#;");
      const std::string body = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']') fail(line, "unterminated section header");
        section = trim(body.substr(1, body.size() - 2));
        if (!kSections.count(section)) fail(line, "unknown section [" + section + "]");
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) fail(line, "expected 'key = value'");
      if (section.empty()) fail(line, "key outside of any section");
      const std::string key = trim(body.substr(0, eq));
      const std::string value = trim(body.substr(eq + 1));
      if (key.empty()) fail(line, "empty key");
      if (value.empty()) fail(line, "empty value for '" + key + "'");
      auto& sec = entries_[section];
      if (sec.count(key)) fail(line, "duplicate key '" + key + "' (first on line " + std::to_string(sec[key].line) + ")");
      sec[key] = {value, line};
    }
  }

  [[noreturn]] void fail(int line, const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + what);
  }

  bool has(const std::string& sec, const std::string& key) const {
    const auto it = entries_.find(sec);
    return it != entries_.end() && it->second.count(key);
  }
  const Entry& entry(const std::string& sec, const std::string& key) const { return entries_.at(sec).at(key); }
  int line_of(const std::string& sec, const std::string& key) const { return has(sec, key) ? entry(sec, key).line : 0; }

  double number(const Entry& e, const std::string& key) const {
    double v = 0.0;
    try {
      v = parse_double(e.value);
    } catch (const ConfigError&) {
      fail(e.line, "'" + key + "' expects a number, got '" + e.value + "'");
    }
    if (!std::isfinite(v)) fail(e.line, "'" + key + "' must be finite");
    return v;
  }

  std::vector<double> numbers(const Entry& e, const std::string& key) const {
    std::istringstream in(e.value);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(number({tok, e.line}, key));
    if (out.empty()) fail(e.line, "'" + key + "' expects at least one number");
    return out;
  }

  void get(const std::string& sec, const std::string& key, double& out, bool positive = false) {
    if (!has(sec, key)) return;
    mark(sec, key);
    const Entry& e = entry(sec, key);
    out = number(e, key);
    if (positive && !(out > 0.0)) fail(e.line, "'" + key + "' must be positive");
  }
  void get(const std::string& sec, const std::string& key, std::vector<double>& out, bool positive = true) {
    if (!has(sec, key)) return;
    mark(sec, key);
    const Entry& e = entry(sec, key);
    out = numbers(e, key);
    for (const double v : out)
      if (positive && !(v > 0.0)) fail(e.line, "every value of '" + key + "' must be positive");
  }
  void get(const std::string& sec, const std::string& key, std::string& out,
           const std::set<std::string>& allowed = {}) {
    if (!has(sec, key)) return;
    mark(sec, key);
    const Entry& e = entry(sec, key);
    if (!allowed.empty() && !allowed.count(e.value)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(e.line, "'" + key + "' must be one of: " + list);
    }
    out = e.value;
  }
  template <typename Int>
  void get_count(const std::string& sec, const std::string& key, Int& out, double lo) {
    if (!has(sec, key)) return;
    mark(sec, key);
    const Entry& e = entry(sec, key);
    const double v = number(e, key);
    if (v != std::floor(v) || v < lo || v > 9e15) fail(e.line, "'" + key + "' must be an integer >= " + format_double(lo));
    out = static_cast<Int>(v);
  }
  void get_vec(const std::string& sec, const std::string& key, Vec& out, int dim) {
    if (!has(sec, key)) return;
    mark(sec, key);
    const Entry& e = entry(sec, key);
    const std::vector<double> v = numbers(e, key);
    if (static_cast<int>(v.size()) != dim)
      fail(e.line, "'" + key + "' needs " + std::to_string(dim) + " coordinates, got " + std::to_string(v.size()));
    out = {};
    for (int d = 0; d < dim; ++d) out[static_cast<std::size_t>(d)] = v[static_cast<std::size_t>(d)];
  }

  /// Remaining keys of a section (used for free field parameters).
  std::vector<std::pair<std::string, Entry>> unread(const std::string& sec) const {
    std::vector<std::pair<std::string, Entry>> out;
    const auto it = entries_.find(sec);
    if (it == entries_.end()) return out;
    for (const auto& [k, e] : it->second)
      if (!read_.count(sec + "." + k)) out.emplace_back(k, e);
    return out;
  }
  void mark(const std::string& sec, const std::string& key) { read_.insert(sec + "." + key); }

  void reject_unread() const {
    int first = 0;
    std::string which;
    for (const auto& [sec, keys] : entries_)
      for (const auto& [k, e] : keys)
        if (!read_.count(sec + "." + k) && (first == 0 || e.line < first)) {
          first = e.line;
          which = "unknown key '" + k + "' in [" + sec + "]";
        }
    if (first) fail(first, which);
  }

 private:
  inline static const std::set<std::string> kSections{"scenario", "field",  "grid",   "data",      "test_function",
                                                      "residual", "lusin",  "metric", "extension", "uniqueness",
                                                      "flow"};
  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> entries_;
  std::set<std::string> read_;
};

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> Scenario::times() const {
  const auto n = static_cast<std::size_t>(std::llround(horizon() / dt));
  std::vector<double> t(n + 1);
  for (std::size_t j = 0; j <= n; ++j) t[j] = j == n ? horizon() : static_cast<double>(j) * dt;
  return t;
}

double Scenario::ball_volume() const {
  const int n = field.dim;
  return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0) * std::pow(radius, n);
}

std::vector<double> Scenario::epsilon_measures() const {
  std::vector<double> out;
  for (const double f : epsilon) out.push_back(f * ball_volume());
  return out;
}

SpatialFunction Scenario::initial_datum() const {
  if (data.kind == "zero") return [](const Vec&) { return 0.0; };
  if (data.kind == "constant") return [a = data.amplitude](const Vec&) { return a; };
  return gaussian(data.center, data.sigma, data.amplitude);
}

TestFunction Scenario::test_function() const {
  const int dim = field.dim;
  if (test.kind == "static") return static_bump(dim, test.bump.x_center, test.bump.x_radius, test.bump.amplitude, horizon());
  if (test.kind == "constant") {
    const double a = test.bump.amplitude;
    return TestFunction(
        dim, [a](double, const Vec&) { return a; }, [](double, const Vec&) { return 0.0; },
        [](double, const Vec&) { return Vec{}; }, 0.0, 0.0, horizon(), Box::unbounded(dim));
  }
  BumpSpec b = test.bump;
  b.dim = dim;
  return tensor_bump(b, horizon());
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  Parser p(text, source);
  Scenario s;
  s.source = source;
  s.hash = fnv1a(text);

  p.get("scenario", "name", s.name);
  p.get_count("scenario", "seed", s.seed, 0);

  p.get("field", "name", s.field.name);
  p.get_count("field", "dim", s.field.dim, 1);
  p.get("field", "horizon", s.field.horizon, true);
  for (const auto& [key, e] : p.unread("field")) {
    s.field.params[key] = p.number(e, key);
    p.mark("field", key);
  }
  try {
    (void)catalog(s.field);
  } catch (const ConfigError& err) {
    p.fail(p.line_of("field", "name"), err.what());
  }
  const int dim = s.field.dim;

  p.get("grid", "radius", s.radius, true);
  p.get("grid", "dy", s.dy, true);
  p.get("grid", "dt", s.dt, true);
  p.get("grid", "step", s.step, true);
  p.get("grid", "escape_radius", s.escape_radius, true);
  if (p.has("grid", "dt")) {
    const double n = s.horizon() / s.dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
      p.fail(p.line_of("grid", "dt"), "dt must divide the horizon T = " + format_double(s.horizon()));
  }

  p.get("data", "u0", s.data.kind, {"gaussian", "zero", "constant"});
  p.get_vec("data", "center", s.data.center, dim);
  p.get("data", "sigma", s.data.sigma, true);
  p.get("data", "amplitude", s.data.amplitude);

  p.get("test_function", "kind", s.test.kind, {"bump", "static", "constant"});
  p.get("test_function", "t_center", s.test.bump.t_center);
  p.get("test_function", "t_radius", s.test.bump.t_radius, true);
  p.get_vec("test_function", "center", s.test.bump.x_center, dim);
  p.get("test_function", "radius", s.test.bump.x_radius, true);
  p.get("test_function", "amplitude", s.test.bump.amplitude);
  p.get("test_function", "wavenumber", s.test.bump.wavenumber);
  try {
    (void)s.test_function();
  } catch (const ConfigError& err) {
    p.fail(std::max(p.line_of("test_function", "kind"), p.line_of("test_function", "t_radius")), err.what());
  }

  p.get("residual", "quad", s.quad);
  p.get("residual", "step", s.residual_step);
  p.get("residual", "support", s.support, true);
  if (s.quad.size() != s.residual_step.size())
    p.fail(std::max(p.line_of("residual", "quad"), p.line_of("residual", "step")),
           "'quad' and 'step' need the same number of levels");

  p.get("lusin", "epsilon", s.epsilon);
  for (const double e : s.epsilon)
    if (e >= 1.0) p.fail(p.line_of("lusin", "epsilon"), "epsilon is a fraction of |B_R| and must be below 1");

  p.get("metric", "lambda", s.lambda);
  p.get("metric", "lattice_dx", s.lattice_dx, true);
  p.get_count("metric", "pair_budget", s.pair_budget, 1);
  p.get_count("metric", "equivalence_sources", s.equivalence_sources, 1);
  for (std::size_t k = 1; k < s.lambda.size(); ++k)
    if (!(s.lambda[k] < s.lambda[k - 1])) p.fail(p.line_of("metric", "lambda"), "lambda list must be strictly decreasing");

  p.get("extension", "weight", s.weight, {"one", "data"});

  p.get("uniqueness", "box", s.box, true);
  p.get("uniqueness", "dx", s.dx);
  p.get("uniqueness", "cfl", s.cfl, true);

  p.get_count("flow", "samples", s.samples, 1);

  p.reject_unread();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read scenario file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.filename().string());
}

void write_table_preamble(std::ostream& out, const Scenario& s, const std::map<std::string, double>& tolerances) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(s.hash));
  out << "# scenario=" << s.name << " hash=" << hex << " version=" << kVersion << " seed=" << s.seed;
  out << " tolerances=";
  bool first = true;
  for (const auto& [k, v] : tolerances) {
    out << (first ? "" : ";") << k << ':' << format_double(v);
    first = false;
  }
  out << '\n';
}

}  // namespace rlf
