#pragma once

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rlf/geometry.hpp"

namespace rlf {

/// Evaluable vector field b(t, x) on [0, T] x R^n.
///
/// Immutable after construction; every member function is safe to call
/// from concurrent workers.
class VectorField {
 public:
  using Eval = std::function<Vec(double, const Vec&)>;
  using Divergence = std::function<double(double, const Vec&)>;

  VectorField(std::string name, int dim, double horizon, Eval eval,
              std::optional<Divergence> divergence, double sobolev_p, bool lipschitz, bool autonomous = false);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  double horizon() const { return horizon_; }
  double sobolev_p() const { return sobolev_p_; }
  bool lipschitz() const { return lipschitz_; }
  bool has_analytic_divergence() const { return divergence_.has_value(); }
  /// b does not depend on t.
  bool autonomous() const { return autonomous_; }

  Vec operator()(double t, const Vec& x) const { return eval_(t, x); }
  /// Analytic divergence when known, else the central-difference estimate
  /// with the default step.
  double divergence(double t, const Vec& x) const;

 private:
  std::string name_;
  int dim_;
  double horizon_;
  Eval eval_;
  std::optional<Divergence> divergence_;
  double sobolev_p_;
  bool lipschitz_;
  bool autonomous_;
};

/// Catalog selector: a field name plus numeric parameters.
///
///   zero                      b = 0
///   constant  c0 c1 c2        b = c
///   rotation  omega           b = omega (-x2, x1)
///   linear    a00 a01 ...     b = A x (default A = diag(1, 2))
///   shear     s               b = (s x2, 0)
///   swirl_power alpha         b = (1+alpha) |x|^(alpha-1) (-x2, x1)
struct FieldSpec {
  std::string name = "zero";
  int dim = 2;
  double horizon = 1.0;
  std::map<std::string, double> params;
};

VectorField catalog(const FieldSpec& spec);
std::vector<std::string> catalog_names();

/// Central-difference divergence sum_i [b_i(x + h e_i) - b_i(x - h e_i)] / (2h).
double estimate_divergence(const VectorField& field, double t, const Vec& x, double h);
/// Same with the default step h = 1e-4 (1 + |x|).
double estimate_divergence(const VectorField& field, double t, const Vec& x);

struct ModulusEntry {
  double radius;
  double delta;
  double omega;
};

struct AssumptionReport {
  double div_sup = 0.0;          ///< int_0^T sup_x |div b| dt
  double growth_sup = 0.0;       ///< sup |b(t,x)| / (1 + |x|)
  std::vector<ModulusEntry> modulus_table;
  double sobolev_seminorm = 0.0; ///< int_0^T ||Db(t)||_{L^p(B_r)} dt
  double pair_resolution = 0.0;  ///< spacing of the sampled point cloud
  bool divergence_unbounded = false;
};

struct AssumptionOptions {
  double divergence_cap = 1e6;
};

AssumptionReport check_assumptions(const VectorField& field, double box_radius, int t_samples,
                                   int x_samples, const AssumptionOptions& options = {});

/// Summary block followed by one `radius,delta,omega` row per table entry.
void write_assumption_report(std::ostream& out, const AssumptionReport& report);

}  // namespace rlf
