#include "einop/field_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace einop {

namespace {

constexpr std::uint32_t kMagic = 0x45'4F'50'46;  // "EOPF"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void write_field(const std::string& path, const FieldBase& f, int rank) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("write_field: cannot open " + path);
  const GridSpec& g = f.grid();
  put_u32(os, kMagic);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(rank));
  put_u32(os, static_cast<std::uint32_t>(g.dim));
  for (int a = 0; a < g.dim; ++a) put_u32(os, static_cast<std::uint32_t>(g.npts[a]));
  for (int a = 0; a < g.dim; ++a) put_f64(os, g.length[a]);
  put_u32(os, static_cast<std::uint32_t>(f.components()));
  os.write(reinterpret_cast<const char*>(f.raw()),
           static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!os) throw Error("write_field: short write to " + path);
}

RawField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("read_field: cannot open " + path);
  if (get_u32(is) != kMagic) throw Error("read_field: bad magic in " + path);
  if (get_u32(is) != kVersion) throw Error("read_field: unsupported version in " + path);
  RawField r;
  r.rank = static_cast<int>(get_u32(is));
  const int dim = static_cast<int>(get_u32(is));
  std::array<int, 3> n{1, 1, 1};
  std::array<double, 3> l{1.0, 1.0, 1.0};
  for (int a = 0; a < dim; ++a) n[a] = static_cast<int>(get_u32(is));
  for (int a = 0; a < dim; ++a) l[a] = get_f64(is);
  r.grid = GridSpec::make(dim, n, l);
  r.ncomp = static_cast<int>(get_u32(is));
  r.values.resize(static_cast<size_t>(r.ncomp) * r.grid.num_points());
  is.read(reinterpret_cast<char*>(r.values.data()),
          static_cast<std::streamsize>(r.values.size() * sizeof(double)));
  if (!is) throw Error("read_field: truncated file " + path);
  return r;
}

namespace {

template <class F>
F typed_from_raw(const RawField& r, int expect_rank, int expect_ncomp,
                 const std::string& path) {
  if (r.rank != expect_rank || r.ncomp != expect_ncomp)
    throw Error("read_field: " + path + " holds rank " + std::to_string(r.rank) +
                " / " + std::to_string(r.ncomp) + " components, expected rank " +
                std::to_string(expect_rank));
  F f(r.grid);
  std::memcpy(f.raw(), r.values.data(), r.values.size() * sizeof(double));
  return f;
}

}  // namespace

ScalarField read_scalar_field(const std::string& path) {
  RawField r = read_field(path);
  return typed_from_raw<ScalarField>(r, 0, 1, path);
}

OneFormField read_one_form_field(const std::string& path) {
  RawField r = read_field(path);
  return typed_from_raw<OneFormField>(r, 1, r.grid.dim, path);
}

SymTensorField read_sym_field(const std::string& path) {
  RawField r = read_field(path);
  return typed_from_raw<SymTensorField>(r, 2, r.grid.sym_components(), path);
}

void write_csv(const std::string& path, const FieldBase& f) {
  std::ofstream os(path);
  if (!os) throw Error("write_csv: cannot open " + path);
  const GridSpec& g = f.grid();
  os << "# einop field csv v1\n";
  for (int a = 0; a < g.dim; ++a) os << "x" << a + 1 << ",";
  for (int c = 0; c < f.components(); ++c)
    os << "c" << c << (c + 1 < f.components() ? "," : "\n");
  char buf[32];
  for (long p = 0; p < g.num_points(); ++p) {
    auto idx = g.unflatten(p);
    for (int a = 0; a < g.dim; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", g.coord(a, idx[a]));
      os << buf << ",";
    }
    for (int c = 0; c < f.components(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", f.value(c, p));
      os << buf << (c + 1 < f.components() ? "," : "\n");
    }
  }
}

}  // namespace einop
