#pragma once

#include <algorithm>
#include <cmath>

#include "einop/fields.hpp"

namespace einop {

/// Tr_g u = g^{ij} u_ij.
ScalarField trace(const MetricField& g, const SymTensorField& u);

struct TraceSplit {
  ScalarField trace;             // g^{ij} u_ij
  SymTensorField conformal_part; // (trace/n) g
  SymTensorField tracefree_part; // u - conformal_part
};

/// Splits S_2 into its conformal line and trace-free complement; the returned
/// trace-free part has pointwise trace below 1e-13 * scale by construction.
TraceSplit trace_and_split(const MetricField& g, const SymTensorField& u);

/// Kulkarni-Nomizu product
/// (u ^o v)_ijkl = u_ik v_jl + u_jl v_ik - u_il v_jk - u_jk v_il,
/// antisymmetric in (i,j) and (k,l), symmetric under pair exchange.
FourTensorField kulkarni_nomizu(const SymTensorField& u, const SymTensorField& v);

/// Ricci-type contraction over the 1st and 3rd slots: (tr F)_jl = g^{ik} F_ijkl.
SymTensorField trace_four(const MetricField& g, const FourTensorField& f);

// ---- weighted L2 inner products ---------------------------------------------
// <u,v> = sum_points <u,v>_g sqrt(det g) prod_a h_a, with full metric
// contractions on all slots.

double l2_inner(const MetricField& g, const ScalarField& u, const ScalarField& v);
double l2_inner(const MetricField& g, const OneFormField& u, const OneFormField& v);
double l2_inner(const MetricField& g, const SymTensorField& u, const SymTensorField& v);

template <class F>
double l2_norm(const MetricField& g, const F& u) {
  return std::sqrt(std::max(0.0, l2_inner(g, u, u)));
}

/// Cell volume weight sqrt(det g)(p) * prod_a h_a.
double volume_element(const MetricField& g, long p);

// ---- small pointwise products ------------------------------------------------

/// u * g as a symmetric tensor field.
SymTensorField scalar_times_metric(const ScalarField& u, const MetricField& g);
SymTensorField scalar_times_sym(const ScalarField& u, const SymTensorField& s);

/// Constant symmetric tensor field from row-major n x n entries.
SymTensorField constant_sym(const GridSpec& grid, const std::vector<double>& entries);

/// Mixed form u_i^j = u_ik g^{kj}.
Tensor2Field raise_second(const MetricField& g, const SymTensorField& u);

}  // namespace einop
