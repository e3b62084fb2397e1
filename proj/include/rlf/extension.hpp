#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "rlf/density.hpp"
#include "rlf/flow.hpp"
#include "rlf/metric.hpp"
#include "rlf/transport.hpp"
#include "rlf/weakform.hpp"

namespace rlf {

/// psi(t_j, X[j][i]) = Psi(t_j, y_i) on the trajectory nodes of the members.
struct TubeFunction {
  std::vector<std::size_t> members;  ///< base-point indices, ascending
  std::vector<double> times;
  std::vector<double> values;        ///< [j * members.size() + m]
  double directional_lip = 0.0;      ///< L, the Lipschitz constant of the generating Psi
  double euclid_lip = 0.0;           ///< measured over tube-node pairs, Euclidean space-time
  double value(std::size_t j, std::size_t m) const { return values[j * members.size() + m]; }
};

/// Tube values from a (t, y) test function. Throws DegenerateError on an empty set.
TubeFunction build_tube_function(const TestFunction& Psi, const FlowGrid& grid, const LusinSet& K,
                                 std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 1);

/// Tube values f(t_j, X[j][i]) of an Eulerian function; directional_lip is
/// measured along the member trajectories.
TubeFunction tube_from_closure(const FlowGrid& grid, const std::vector<std::size_t>& members,
                               const std::function<double(double, const Vec&)>& f,
                               std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 1);

/// max |f(p) - f(q)| / |p - q| over space-time point pairs; exhaustive when
/// n^2 <= pair_budget, else stratified random sources against all targets.
/// Pairs closer than 1e-9 are skipped.
double euclidean_lipschitz(const std::vector<SpaceTimePoint>& points, const std::vector<double>& values,
                           std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 1);

struct ExtendedFunction {
  double lambda = 0.0;
  std::vector<double> values;         ///< per graph node (NaN on inactive nodes)
  std::vector<std::uint8_t> on_tube;
  bool clamped = false;
  double lo = 0.0, hi = 0.0;          ///< min / max of the tube values
  double L = 0.0;                     ///< directional constant of the tube function
  double L_lambda = 0.0;              ///< Lip of the tube values under d_lambda
  double slope = 0.0;                 ///< L_lambda (1 + 1e-12), the inf-convolution slope
};

/// psi_eps(p) = min over tube nodes q of psi(q) + slope d_lambda(p, q), for
/// every graph node, by one shortest-path sweep per tube node. The slope
/// exceeds L_lambda by a relative 1e-12 so the tube values are reproduced
/// exactly in floating point. L_lambda is computed over all tube pairs
/// (a sampled value could undercut it and break the reproduction).
/// With `clamp`, values are clipped to [lo, hi].
ExtendedFunction mcshane_extend(const TubeFunction& tube, const SpaceTimeGraph& g, bool clamp);
/// Same sweep without threads.
ExtendedFunction mcshane_extend_serial(const TubeFunction& tube, const SpaceTimeGraph& g, bool clamp);

/// Independent evaluation of the same inf-convolution by one multi-source
/// Dijkstra seeded with the potentials psi(q) - min psi (floating point).
std::vector<double> mcshane_multisource(const TubeFunction& tube, const SpaceTimeGraph& g, double slope);

/// L' = max over active trajectories and slice pairs of |f(t_j) - f(t_k)| / |t_j - t_k|.
double verify_directional_lipschitz(const ExtendedFunction& f, const SpaceTimeGraph& g);

/// Psi_eps(t_j, y_i) = psi_eps(t_j, X[j][i]) on the (t_j, y_i) lattice.
DensityField pullback_extension(const ExtendedFunction& f, const SpaceTimeGraph& g, const FlowGrid& grid);

struct Certificate {
  double lambda = 0.0;
  double L = 0.0;
  double L_lambda = 0.0;
  double L_prime = 0.0;
  double lip_d_lambda = 0.0;     ///< measured Lip(psi_eps; d_lambda) on sampled pairs, value gaps less 4 ulp
  double euclid_constant = 0.0;  ///< measured Lip(psi_eps; d_1) on sampled pairs
  bool exact_on_tube = false;    ///< bitwise agreement on tube nodes
  bool within_bounds = true;     ///< lo <= value <= hi (meaningful when clamped)
  std::size_t pairs = 0;
};

Certificate certify_extension(const TubeFunction& tube, const ExtendedFunction& f, const SpaceTimeGraph& g,
                              std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 1);

/// max over members, pairs and times of |y_a - y_b| / |X_j(a) - X_j(b)|:
/// the Lipschitz constant of X(0, t, .) on the image of the tube.
double inverse_flow_lipschitz(const FlowGrid& grid, const std::vector<std::size_t>& members);

/// sup |b| over the tube nodes.
double field_sup_on_tube(const VectorField& field, const FlowGrid& grid, const std::vector<std::size_t>& members);

/// Euclidean Lipschitz bound sqrt((A X)^2 + (A X B + L)^2) with A = Lip(Psi),
/// X = Lip(X(0,t,.)) on the tube, B = sup |b|, L the directional constant.
double lemma_bound(double lip_Psi, double lip_inverse_flow, double b_sup, double L);

/// Space-time interpolant of an extension on the background lattice
/// (multilinear in x per slice, linear in t), as a test function.
TestFunction extension_test_function(const ExtendedFunction& f, const SpaceTimeGraph& g, double lip);

/// Error-bound experiment for one tube. U = R w(y) off the tube and 0 on it
/// (U/R constant in time, so U is Lagrangian).
struct Step4Row {
  double epsilon = 0.0;
  double complement_measure = 0.0;
  double lhs = 0.0;          ///< |int int (U/R) d_t Psi|
  double split_term = 0.0;   ///< int int (U/R) d_t (Psi - Psi_eps)
  double rhs = 0.0;          ///< C (L + L') int int_{B_R \ K} |U|
  double C = 0.0;
  double L = 0.0;
  double L_prime = 0.0;
  double mass_off_tube = 0.0;
};

Step4Row step4_bound(const FlowGrid& grid, const TestFunction& Psi, const LusinSet& K, const ExtendedFunction& ext,
                     const SpaceTimeGraph& g, const SpatialFunction& weight, double compressibility);

/// Everything certified for one epsilon of a sweep.
struct EpsilonStudy {
  double epsilon = 0.0;
  LusinSet K;
  ConvergenceTable scan;
  double lambda_bar = 0.0;
  Certificate clamped;
  Certificate plain;
  Step4Row step4;
  SpaceTimeGraph graph;        ///< built at lambda_bar
  ExtendedFunction extension;  ///< unclamped
};

struct StudyOptions {
  std::vector<double> lambdas{0.4, 0.2, 0.1, 0.05, 0.025};
  double lattice_dx = 0.1;
  std::size_t pair_budget = 20'000'000;
  std::uint64_t seed = 1;
};

EpsilonStudy run_epsilon_study(const FlowGrid& grid, const TestFunction& Psi, double epsilon,
                               const SpatialFunction& weight, const StudyOptions& options);

/// Rows t, x..., value, on_tube for every active node.
void write_extension_csv(std::ostream& out, const ExtendedFunction& f, const SpaceTimeGraph& g);
/// lambda,L,L_lambda,L_prime,euclid_constant header and one row.
void write_certificate_header(std::ostream& out);
void write_certificate_row(std::ostream& out, double epsilon, const Certificate& c);

}  // namespace rlf
