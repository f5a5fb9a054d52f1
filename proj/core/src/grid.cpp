#include "einop/grid.hpp"

#include <sstream>

namespace einop {

GridSpec GridSpec::make(int dim, const std::array<int, 3>& npts,
                        const std::array<double, 3>& length) {
  if (dim != 2 && dim != 3)
    throw Error("GridSpec: dimension must be 2 or 3, got " + std::to_string(dim));
  GridSpec g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    if (npts[a] < 8)
      throw Error("GridSpec: need at least 8 points per axis, axis " +
                  std::to_string(a) + " has " + std::to_string(npts[a]));
    if (!(length[a] > 0.0))
      throw Error("GridSpec: period on axis " + std::to_string(a) +
                  " must be positive");
    g.npts[a] = npts[a];
    g.length[a] = length[a];
  }
  for (int a = dim; a < 3; ++a) {
    g.npts[a] = 1;
    g.length[a] = 1.0;
  }
  return g;
}

GridSpec GridSpec::make_uniform(int dim, int n_per_axis, double length_per_axis) {
  std::array<int, 3> n{n_per_axis, n_per_axis, n_per_axis};
  std::array<double, 3> l{length_per_axis, length_per_axis, length_per_axis};
  return make(dim, n, l);
}

std::string GridSpec::describe() const {
  std::ostringstream os;
  os << dim << "d grid ";
  for (int a = 0; a < dim; ++a) os << (a ? "x" : "") << npts[a];
  os << ", periods (";
  for (int a = 0; a < dim; ++a) os << (a ? ", " : "") << length[a];
  os << ")";
  return os.str();
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* where) {
  if (a != b)
    throw Error(std::string(where) + ": grid mismatch (" + a.describe() +
                " vs " + b.describe() + ")");
}

}  // namespace einop
