#pragma once

#include <string>

#include "einop/fields.hpp"

namespace einop {

// Flat binary field container (little-endian, version 1):
//   u32 magic 'EOPF', u32 version, u32 rank, u32 dim,
//   u32 N[dim], f64 L[dim], u32 ncomp,
//   f64 values[ncomp][npoints]   (points in row-major order, last axis fastest)
// Symmetric tensors store the upper triangle (ncomp = n(n+1)/2), rank-4
// tensors the full n^4 block.

struct RawField {
  int rank = 0;
  GridSpec grid;
  int ncomp = 0;
  std::vector<double> values;
};

void write_field(const std::string& path, const FieldBase& f, int rank);
RawField read_field(const std::string& path);

inline void write_field(const std::string& path, const ScalarField& f) { write_field(path, f, 0); }
inline void write_field(const std::string& path, const OneFormField& f) { write_field(path, f, 1); }
inline void write_field(const std::string& path, const SymTensorField& f) { write_field(path, f, 2); }
inline void write_field(const std::string& path, const FourTensorField& f) { write_field(path, f, 4); }

ScalarField read_scalar_field(const std::string& path);
OneFormField read_one_form_field(const std::string& path);
SymTensorField read_sym_field(const std::string& path);

/// CSV for plotting: header row, then one line per point with coordinates
/// followed by every component (17 significant digits).
void write_csv(const std::string& path, const FieldBase& f);

}  // namespace einop
