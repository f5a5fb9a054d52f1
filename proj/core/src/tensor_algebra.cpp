#include "einop/tensor_algebra.hpp"

#include <cmath>

namespace einop {

ScalarField trace(const MetricField& g, const SymTensorField& u) {
  require_same_grid(g.grid(), u.grid(), "trace");
  const int n = g.grid().dim;
  ScalarField t(g.grid());
  for (long p = 0; p < g.grid().num_points(); ++p) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += g.up(i, j, p) * u.at(i, j, p);
    t.at(p) = s;
  }
  return t;
}

TraceSplit trace_and_split(const MetricField& g, const SymTensorField& u) {
  TraceSplit out;
  out.trace = trace(g, u);
  ScalarField scaled = out.trace;
  scaled.scale(1.0 / g.grid().dim);
  out.conformal_part = scalar_times_metric(scaled, g);
  out.tracefree_part = u - out.conformal_part;
  return out;
}

FourTensorField kulkarni_nomizu(const SymTensorField& u, const SymTensorField& v) {
  require_same_grid(u.grid(), v.grid(), "kulkarni_nomizu");
  const GridSpec& grid = u.grid();
  const int n = grid.dim;
  FourTensorField w(grid);
  const long np = grid.num_points();
#pragma omp parallel for schedule(static)
  for (long p = 0; p < np; ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            w.at(i, j, k, l, p) = u.at(i, k, p) * v.at(j, l, p) +
                                  u.at(j, l, p) * v.at(i, k, p) -
                                  u.at(i, l, p) * v.at(j, k, p) -
                                  u.at(j, k, p) * v.at(i, l, p);
  return w;
}

SymTensorField trace_four(const MetricField& g, const FourTensorField& f) {
  require_same_grid(g.grid(), f.grid(), "trace_four");
  const int n = g.grid().dim;
  SymTensorField t(g.grid());
  for (long p = 0; p < g.grid().num_points(); ++p)
    for (int j = 0; j < n; ++j)
      for (int l = j; l < n; ++l) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < n; ++k) s += g.up(i, k, p) * f.at(i, j, k, l, p);
        t.at(j, l, p) = s;
      }
  return t;
}

double volume_element(const MetricField& g, long p) {
  double w = g.sqrt_det().at(p);
  for (int a = 0; a < g.grid().dim; ++a) w *= g.grid().spacing(a);
  return w;
}

double l2_inner(const MetricField& g, const ScalarField& u, const ScalarField& v) {
  require_same_grid(g.grid(), u.grid(), "l2_inner");
  require_same_grid(u.grid(), v.grid(), "l2_inner");
  double s = 0.0;
  for (long p = 0; p < g.grid().num_points(); ++p)
    s += u.at(p) * v.at(p) * volume_element(g, p);
  return s;
}

double l2_inner(const MetricField& g, const OneFormField& u, const OneFormField& v) {
  require_same_grid(g.grid(), u.grid(), "l2_inner");
  require_same_grid(u.grid(), v.grid(), "l2_inner");
  const int n = g.grid().dim;
  double s = 0.0;
  for (long p = 0; p < g.grid().num_points(); ++p) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dot += g.up(i, j, p) * u.at(i, p) * v.at(j, p);
    s += dot * volume_element(g, p);
  }
  return s;
}

double l2_inner(const MetricField& g, const SymTensorField& u, const SymTensorField& v) {
  require_same_grid(g.grid(), u.grid(), "l2_inner");
  require_same_grid(u.grid(), v.grid(), "l2_inner");
  const int n = g.grid().dim;
  double s = 0.0;
  for (long p = 0; p < g.grid().num_points(); ++p) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            dot += g.up(i, k, p) * g.up(j, l, p) * u.at(i, j, p) * v.at(k, l, p);
    s += dot * volume_element(g, p);
  }
  return s;
}

SymTensorField scalar_times_metric(const ScalarField& u, const MetricField& g) {
  return scalar_times_sym(u, g.tensor());
}

SymTensorField scalar_times_sym(const ScalarField& u, const SymTensorField& s) {
  require_same_grid(u.grid(), s.grid(), "scalar_times_sym");
  SymTensorField out = s;
  const long np = s.grid().num_points();
  for (int c = 0; c < s.components(); ++c) {
    auto sc = s.comp(c);
    auto oc = out.comp(c);
    auto uc = u.comp(0);
    for (long p = 0; p < np; ++p) oc[p] = uc[p] * sc[p];
  }
  return out;
}

SymTensorField constant_sym(const GridSpec& grid, const std::vector<double>& entries) {
  const int n = grid.dim;
  if (entries.size() != static_cast<size_t>(n) * n)
    throw Error("constant_sym: need n x n entries");
  SymTensorField out(grid);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      if (entries[i * n + j] != entries[j * n + i])
        throw Error("constant_sym: entries not symmetric");
      auto c = out.comp(sym_index(n, i, j));
      for (long p = 0; p < grid.num_points(); ++p) c[p] = entries[i * n + j];
    }
  return out;
}

Tensor2Field raise_second(const MetricField& g, const SymTensorField& u) {
  require_same_grid(g.grid(), u.grid(), "raise_second");
  const int n = g.grid().dim;
  Tensor2Field out(g.grid());
  for (long p = 0; p < g.grid().num_points(); ++p)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += u.at(i, k, p) * g.up(k, j, p);
        out.at(i, j, p) = s;
      }
  return out;
}

}  // namespace einop
