#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rlf/density.hpp"
#include "rlf/flow.hpp"
#include "rlf/geometry.hpp"
#include "rlf/transport.hpp"
#include "rlf/vectorfield.hpp"

namespace rlf {

/// Lipschitz constant of s -> (1 - s^2)^3 on [-1, 1]: 96 / (25 sqrt 5).
inline const double kBumpLip = 96.0 / (25.0 * std::sqrt(5.0));

/// (1 - s^2)^3 for |s| < 1, else 0.
double bump(double s);
/// d/ds of bump.
double bump_derivative(double s);

/// Lipschitz test function phi(t, x) supported in [t_lo, t_hi] x space.
///
/// Built-ins carry analytic derivatives; closures wrapped with
/// `from_closure` use central differences.
class TestFunction {
 public:
  using Eval = std::function<double(double, const Vec&)>;
  using Gradient = std::function<Vec(double, const Vec&)>;

  /// Separable factors phi = psi1(t) psi2(x).
  struct Tensor {
    std::function<double(double)> psi1;
    std::function<double(const Vec&)> psi2;
    double lip1 = 0.0;   ///< Lip(psi1)
    double sup2 = 0.0;   ///< max |psi2|
  };

  TestFunction(int dim, Eval eval, Eval time_derivative, Gradient gradient, double lip, double t_lo, double t_hi,
               Box space);

  /// Derivatives by central differences with step h.
  static TestFunction from_closure(int dim, Eval eval, double lip, double t_lo, double t_hi, Box space,
                                   double h = 1e-6);

  int dim() const { return dim_; }
  double lip() const { return lip_; }
  double t_lo() const { return t_lo_; }
  double t_hi() const { return t_hi_; }
  const Box& space() const { return space_; }
  bool in_support(double t, const Vec& x) const;

  double operator()(double t, const Vec& x) const;
  double time_derivative(double t, const Vec& x) const;
  Vec gradient(double t, const Vec& x) const;

  const std::optional<Tensor>& tensor() const { return tensor_; }
  void set_tensor(Tensor parts) { tensor_ = std::move(parts); }

 private:
  int dim_;
  Eval eval_;
  Eval dt_;
  Gradient grad_;
  double lip_;
  double t_lo_;
  double t_hi_;
  Box space_;
  std::optional<Tensor> tensor_;
};

/// amplitude * bump((t - t_center) / t_radius) * bump(|x - x_center| / x_radius)
/// * cos(wavenumber (x0 - x_center0)), restricted to t >= 0. Support must end
/// before `horizon`.
struct BumpSpec {
  int dim = 2;
  double t_center = 0.5;
  double t_radius = 0.4;
  Vec x_center{};
  double x_radius = 0.5;
  double amplitude = 1.0;
  double wavenumber = 0.0;
};
TestFunction tensor_bump(const BumpSpec& spec, double horizon);

/// amplitude * bump(|x - x_center| / x_radius), constant in t on [0, horizon].
TestFunction static_bump(int dim, const Vec& x_center, double x_radius, double amplitude, double horizon);

struct Residual {
  double value = 0.0;     ///< interior + initial
  double interior = 0.0;
  double initial = 0.0;
  double dt = 0.0;        ///< time quadrature step
  double dx = 0.0;        ///< space quadrature step
};

/// int_0^T int u (d_t phi + b . grad phi) dx dt + int u0 phi(0, .) dx by the
/// tensor midpoint rule. Space cells are centred on the multiples of `quad`
/// so the nodes coincide with a FlowGrid lattice of the same spacing; time
/// cells split [0, t_hi] evenly. d_t phi on a time cell is the difference
/// quotient of its endpoint values.
Residual eulerian_residual(const DensityField& u, const VectorField& field, const TestFunction& phi, double quad);

/// Serial evaluation of the same quadrature (reference for the OpenMP path).
Residual eulerian_residual_serial(const DensityField& u, const VectorField& field, const TestFunction& phi,
                                  double quad);

/// int_0^T int (U/R) d_t Psi dt dy on the grid's native times:
/// sum_i dy^n sum_j avg(U/R) (Psi_{j+1} - Psi_j), plus the initial term
/// sum_i dy^n (U/R)(0) Psi(0). U, R and Psi are sampled on the (t_j, y_i)
/// lattice. With `compressibility` C, any R < 1/C raises DensityBoundError;
/// R <= 0 always does.
Residual lagrangian_residual(const DensityField& U, const DensityField& R, const DensityField& Psi,
                             const FlowGrid& grid, std::optional<double> compressibility = std::nullopt);
/// Same with Psi evaluated at (t_j, y_i).
Residual lagrangian_residual(const DensityField& U, const DensityField& R, const TestFunction& Psi,
                             const FlowGrid& grid, std::optional<double> compressibility = std::nullopt);

/// Psi(t_j, y_i) = psi(t_j, X[j][i]) on the grid lattice.
DensityField pullback_test_function(const TestFunction& psi, const FlowGrid& grid);

struct ChangeOfVariables {
  Residual lagrangian;
  Residual eulerian;
  double gap = 0.0;  ///< |lagrangian.interior - eulerian.interior|
};

/// Both sides of the change-of-variables identity
///   int int (U/R) d_t Psi dt dy = int int u (d_t psi + b . grad psi) dx dt
/// with U the pullback of u and Psi(t, y) = psi(t, X(t,0,y)) given on the grid.
ChangeOfVariables change_of_variables_check(const DensityField& u, const VectorField& field, const FlowGrid& grid,
                                            const TestFunction& psi, const DensityField& Psi, double quad);

struct FvSolution {
  DensityField density;                    ///< cell centres, times {0, t_end / snapshots, ..., t_end}
  std::vector<double> conservation_defect; ///< |mass change + outflow| per step
  int steps = 0;
  double dt = 0.0;
  double courant = 0.0;                    ///< dt * sup ||b||_1 / dx over faces
};

/// First-order donor-cell upwind finite volumes for d_t u + div(b u) = 0 on
/// the cells of `box` (side dx), outflow boundary, zero inflow. The step
/// count is ceil(t_end / dt) rounded up to a multiple of `snapshots`, and
/// the solution is recorded at `snapshots` equally spaced times after 0.
/// Throws InfeasibleError when the Courant number dt * sup ||b||_1 / dx
/// exceeds 0.9.
FvSolution fv_solve(const VectorField& field, const SpatialFunction& u0, const Box& box, double dx, double dt,
                    double t_end, int snapshots = 1);
/// Face-by-face serial reference of the same scheme.
FvSolution fv_solve_serial(const VectorField& field, const SpatialFunction& u0, const Box& box, double dx,
                           double dt, double t_end, int snapshots = 1);

/// sum_k |a_k - u(t, x_k)| dx^n over the nodes of a lattice density slice.
double l1_distance(const DensityField& lattice_field, std::size_t slice, const DensityField& other, double t);

/// scenario,quad,dy,step,value,interior,initial
void write_residual_header(std::ostream& out);
void write_residual_row(std::ostream& out, const std::string& scenario, double quad, double dy, double step,
                        const Residual& r);

}  // namespace rlf
