#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rlf/csv.hpp"
#include "rlf/density.hpp"
#include "rlf/errors.hpp"
#include "rlf/geometry.hpp"
#include "rlf/vectorfield.hpp"

using namespace rlf;

TEST_CASE("format_double round-trips random doubles") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int k = 0; k < 2000; ++k) {
    std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(HUGE_VAL) == "inf");
  CHECK(parse_double("-inf") == -HUGE_VAL);
  CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
  CHECK_THROWS_AS(parse_double(""), ConfigError);
}

TEST_CASE("csv rows escape and split back") {
  const std::vector<std::string> fields{"a", "b,c", "say \"hi\"", " pad", ""};
  std::ostringstream out;
  write_csv_row(out, fields);
  std::string line = out.str();
  REQUIRE(line.back() == '\n');
  line.pop_back();
  CHECK(split_csv_line(line) == fields);
}

TEST_CASE("lattice indexing and interpolation") {
  const Lattice lat(2, vec2(-1, -1), 0.5, {5, 5, 1});
  CHECK(lat.size() == 25);
  for (std::size_t k = 0; k < lat.size(); ++k) CHECK(lat.flat(lat.multi(k)) == k);
  CHECK(lat.point(0) == vec2(-1, -1));
  CHECK(lat.point(24) == vec2(1, 1));

  // multilinear interpolation reproduces affine functions exactly
  std::vector<double> v(lat.size());
  for (std::size_t k = 0; k < lat.size(); ++k) v[k] = 2.0 * lat.point(k)[0] - 3.0 * lat.point(k)[1] + 0.5;
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const Vec x = vec2(oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1));
    CHECK(lat.interpolate(v, x) == doctest::Approx(2.0 * x[0] - 3.0 * x[1] + 0.5).epsilon(1e-12));
  }
  CHECK(lat.interpolate(v, vec2(5, 5)) == 0.0);

  const Lattice cover = Lattice::covering(Box::cube(2, 0.33), 0.1);
  CHECK(cover.bounds().contains(Box::cube(2, 0.33)));
  CHECK(cover.spacing() == 0.1);
}

TEST_CASE("nearest index agrees with brute force") {
  std::mt19937_64 rng(11);
  std::vector<Vec> pts;
  for (int k = 0; k < 300; ++k) pts.push_back(oracle::disc_point(rng, 2.0));
  const NearestIndex index(2, pts);
  for (int k = 0; k < 200; ++k) {
    const Vec q = oracle::disc_point(rng, 2.5);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (distance(pts[i], q) < distance(pts[best], q)) best = i;
    CHECK(distance(pts[index.nearest(q)], q) == distance(pts[best], q));
    std::size_t brute = 0;
    for (const auto& p : pts) brute += distance(p, q) <= 0.3;
    CHECK(index.within(q, 0.3).size() == brute);
  }
  CHECK(NearestIndex(2, {}).nearest(vec2(0, 0)) == NearestIndex::npos);
}

TEST_CASE("density field kinds") {
  const Box box = Box::cube(2, 1.0);
  const auto f = DensityField::analytic(2, [](double t, const Vec& x) { return t + x[0]; }, box);
  CHECK(f.at(0.5, vec2(0.25, 0)) == 0.75);
  CHECK(f.at(0.5, vec2(2, 0)) == 0.0);

  const Lattice lat(2, vec2(-1, -1), 1.0, {3, 3, 1});
  std::vector<double> s0(9, 1.0), s1(9, 3.0);
  const auto g = DensityField::on_lattice(lat, {0.0, 1.0}, {s0, s1});
  CHECK(g.at(0.25, vec2(0.3, -0.2)) == doctest::Approx(1.5));
  CHECK(g.slice_of(1.0) == std::optional<std::size_t>(1));
  CHECK(!g.slice_of(0.5));

  const auto h = DensityField::scattered(2, {0.0}, {{vec2(0, 0), vec2(1, 0)}}, {{2.0, 5.0}}, box);
  CHECK(h.at(std::size_t{0}, vec2(0.8, 0.1)) == 5.0);
  CHECK(h.at(std::size_t{0}, vec2(0.2, 0.1)) == 2.0);
}

TEST_CASE("density csv round trip") {
  const Lattice lat(2, vec2(-0.5, -0.5), 0.25, {5, 5, 1});
  std::mt19937_64 rng(5);
  std::vector<std::vector<double>> v(3, std::vector<double>(lat.size()));
  for (auto& s : v)
    for (auto& a : s) a = oracle::uniform(rng, -1, 1);
  const auto f = DensityField::on_lattice(lat, {0.0, 0.5, 1.0}, v);
  std::stringstream io;
  write_density_csv(io, f);
  const DensityField g = read_density_csv(io);
  REQUIRE(g.num_times() == 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(g.values(j) == f.values(j));
  CHECK_THROWS(write_density_csv(io, DensityField::analytic(2, [](double, const Vec&) { return 0.0; }, lat.bounds())));
}

TEST_CASE("catalog fields and divergence") {
  const VectorField rot = oracle::field("rotation", {{"omega", 2.0}});
  CHECK(rot(0.3, vec2(1, 0)) == vec2(0, 2));
  const VectorField lin = oracle::field("linear");
  CHECK(lin(0.0, vec2(1, 1)) == vec2(1, 2));
  CHECK(lin.divergence(0.0, vec2(0.3, 0.2)) == doctest::Approx(3.0));
  CHECK(oracle::field("zero")(0.5, vec2(3, 4)) == Vec{});
  CHECK(oracle::field("shear", {{"s", 0.5}})(0.0, vec2(0, 2)) == vec2(1, 0));

  const VectorField sw = oracle::field("swirl_power");
  CHECK(!sw.lipschitz());
  CHECK(sw(0.0, Vec{}) == Vec{});
  // analytic divergence against central differences away from the origin
  std::mt19937_64 rng(9);
  for (const auto& name : catalog_names()) {
    const VectorField b = oracle::field(name);
    for (int k = 0; k < 50; ++k) {
      Vec x = oracle::disc_point(rng, 1.0);
      if (norm(x) < 0.1) continue;
      CHECK(b.divergence(0.2, x) == doctest::Approx(estimate_divergence(b, 0.2, x)).epsilon(1e-6).scale(1.0));
    }
  }
  CHECK_THROWS_AS(oracle::field("nope"), ConfigError);
  CHECK_THROWS_AS(oracle::field("rotation", {{"alpha", 1.0}}), ConfigError);
  CHECK_THROWS_AS(oracle::field("swirl_power", {{"alpha", 1.5}}), ConfigError);
}

TEST_CASE("assumption report") {
  const AssumptionReport rot = check_assumptions(oracle::field("rotation"), 1.0, 5, 11);
  CHECK(rot.div_sup == 0.0);
  CHECK(rot.growth_sup <= 1.0 + 1e-12);
  const AssumptionReport lin = check_assumptions(oracle::field("linear"), 1.0, 5, 11);
  CHECK(lin.div_sup == doctest::Approx(3.0));
  CHECK(!lin.divergence_unbounded);
  // modulus is nondecreasing in delta for each radius
  for (std::size_t k = 1; k < lin.modulus_table.size(); ++k)
    if (lin.modulus_table[k].radius == lin.modulus_table[k - 1].radius)
      CHECK(lin.modulus_table[k].omega >= lin.modulus_table[k - 1].omega);
  std::ostringstream out;
  write_assumption_report(out, lin);
  CHECK(out.str().find("radius,delta,omega") != std::string::npos);
  CHECK_THROWS_AS(check_assumptions(oracle::field("zero"), 1.0, 1, 11), ConfigError);
}
