#pragma once

// Per-item kernels shared by the OpenMP drivers and the serial references.

#include <cstddef>

#include "rlf/flow.hpp"
#include "rlf/vectorfield.hpp"

namespace rlf {

/// Fills forward / div_integrals / escaped for base point i.
void integrate_trajectory(const VectorField& field, FlowGrid& grid, std::size_t i);

}  // namespace rlf
