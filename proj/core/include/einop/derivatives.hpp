#pragma once

#include <span>

#include "einop/fields.hpp"
#include "einop/grid.hpp"

namespace einop {

/// 4th-order central finite differences with periodic wraparound.
///
/// First derivative:   (-u_{+2} + 8 u_{+1} - 8 u_{-1} + u_{-2}) / (12 h)
/// Second derivative:  (-u_{+2} + 16 u_{+1} - 30 u_0 + 16 u_{-1} - u_{-2}) / (12 h^2)
///
/// Mixed second derivatives compose the two first-derivative stencils.  The
/// repeated-axis second derivative uses the direct stencil: the composed one
/// annihilates the Nyquist mode, which would pollute kernel detection.
/// All stencils are exact on constants.

void partial_derivative(const GridSpec& grid, std::span<const double> in,
                        std::span<double> out, int axis);

void second_partial(const GridSpec& grid, std::span<const double> in,
                    std::span<double> out, int axis_a, int axis_b);

/// Componentwise derivative of any field type.
template <class F>
F partial_derivative(const F& u, int axis) {
  if (axis < 0 || axis >= u.grid().dim)
    throw Error("partial_derivative: axis out of range");
  F out = u;
  for (int c = 0; c < u.components(); ++c)
    partial_derivative(u.grid(), u.comp(c), out.comp(c), axis);
  return out;
}

template <class F>
F second_partial(const F& u, int axis_a, int axis_b) {
  F out = u;
  for (int c = 0; c < u.components(); ++c)
    second_partial(u.grid(), u.comp(c), out.comp(c), axis_a, axis_b);
  return out;
}

}  // namespace einop
