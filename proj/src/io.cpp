#include "polaron/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace polaron::io {
namespace {

static_assert(std::endian::native == std::endian::little, "binary field format assumes a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("field file truncated");
  return v;
}

}  // namespace

void write_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const Grid& g = *f.grid;
  put<std::int32_t>(os, g.dim());
  for (int v : g.shape()) put<std::int32_t>(os, v);
  for (double L : g.cell().lengths()) put<double>(os, L);
  os.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(sizeof(double) * g.size()));
}

ScalarField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  const int d = get<std::int32_t>(is);
  if (d < 1 || d > 3) throw std::runtime_error("field file: bad dimension");
  std::vector<int> n(d);
  for (auto& v : n) v = get<std::int32_t>(is);
  std::vector<double> L(d);
  for (auto& v : L) v = get<double>(is);
  auto grid = make_grid(LatticeCell::box(L), n);
  Eigen::VectorXd vals(static_cast<Eigen::Index>(grid->size()));
  is.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(sizeof(double) * grid->size()));
  if (!is) throw std::runtime_error("field file truncated");
  return ScalarField(grid, std::move(vals));
}

void write_field_csv(const std::string& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const Grid& g = *f.grid;
  const char* names[] = {"x", "y", "z"};
  for (int a = 0; a < g.dim(); ++a) os << names[a] << ',';
  os << "value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto r = g.point(i);
    for (int a = 0; a < g.dim(); ++a) os << r[a] << ',';
    os << f.values[static_cast<Eigen::Index>(i)] << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n' << std::setprecision(17);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

}  // namespace polaron::io
