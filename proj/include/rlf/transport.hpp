#pragma once

#include <functional>

#include "rlf/density.hpp"
#include "rlf/flow.hpp"
#include "rlf/vectorfield.hpp"

namespace rlf {

/// Evaluable scalar function of space (initial data u0).
using SpatialFunction = std::function<double(const Vec&)>;

/// u(t_j, X[j][i]) = u0(y_i) exp(-D[j][i]) as scattered samples on the
/// trajectories: the push-forward X(t,0,.)_# (u0 L^n) sampled along the flow.
DensityField lagrangian_solution(const VectorField& field, const FlowGrid& grid, const SpatialFunction& u0);

/// U(t_j, y_i) = u(t_j, X[j][i]) on the (t_j, y_i) lattice. Trajectory
/// points outside u's support give 0. Requires u to carry every grid time
/// (analytic fields are evaluated directly).
DensityField pullback_along_flow(const DensityField& u, const FlowGrid& grid);

/// R(t_j, y_i) = exp(-D[j][i]) on the (t_j, y_i) lattice.
DensityField density_ratio_field(const FlowGrid& grid);

/// max_i (max_j - min_j) of U[j][i] / R[j][i]: zero iff U/R is constant
/// along every trajectory.
double check_lagrangian_property(const DensityField& U, const FlowGrid& grid);

/// Eulerian view of the Lagrangian solution by inverse-flow sampling:
/// u(t, x) = u0(X(0,t,x)) * exp(-int_0^t div b along the trajectory).
/// Every evaluation integrates backward from (t, x) with the given step.
DensityField eulerian_view(const VectorField& field, SpatialFunction u0, double step, Box support);

/// Samples a field at time t on the nodes of a lattice (OpenMP over nodes).
std::vector<double> sample_on_lattice(const DensityField& u, double t, const Lattice& lattice);

/// Isotropic Gaussian amplitude * exp(-|x - center|^2 / (2 sigma^2)).
SpatialFunction gaussian(const Vec& center, double sigma, double amplitude = 1.0);

}  // namespace rlf
