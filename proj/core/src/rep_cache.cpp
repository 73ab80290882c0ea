#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dirfmm/error.hpp"
#include "dirfmm/lowrank.hpp"

namespace dirfmm {
namespace {

constexpr char kMagic[8] = {'D', 'F', 'M', 'M', 'R', 'E', 'P', '\0'};

template <class T>
void put(std::ostream &os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char *>(b), sizeof(T));
}

template <class T>
T get(std::istream &is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char *>(b), sizeof(T))) throw CacheError("rep cache truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void save_rep_table(const RepTable &table, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CacheError("cannot open rep cache for writing: " + path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kRepCacheVersion);
  put<double>(os, table.K());
  put<double>(os, table.eps());
  put<std::uint64_t>(os, table.seed());
  put<std::uint8_t>(os, table.rotation_reuse() ? 1 : 0);
  put<std::uint8_t>(os, table.geometry() == RepGeometry::fmm ? 1 : 0);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(table.built().size()));
  for (const SeparatedRep &r : table.built()) {
    put<double>(os, r.width);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.direction));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.a_points.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.b_points.size()));
    put<double>(os, r.eps);
    put<double>(os, r.residual);
    put<double>(os, r.residual_p99);
    put<double>(os, r.dir_vec.x);
    put<double>(os, r.dir_vec.y);
    for (const Point2 &p : r.a_points) {
      put<double>(os, p.x);
      put<double>(os, p.y);
    }
    for (const Point2 &p : r.b_points) {
      put<double>(os, p.x);
      put<double>(os, p.y);
    }
    for (Eigen::Index q = 0; q < r.D.rows(); ++q)
      for (Eigen::Index p = 0; p < r.D.cols(); ++p) {
        put<double>(os, r.D(q, p).real());
        put<double>(os, r.D(q, p).imag());
      }
  }
  if (!os) throw CacheError("failed writing rep cache: " + path);
}

RepTable load_rep_table(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CacheError("cannot open rep cache: " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CacheError("not a rep cache file: " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != kRepCacheVersion)
    throw CacheError("rep cache version " + std::to_string(version) + " not supported (expected " +
                     std::to_string(kRepCacheVersion) + ")");
  const double K = get<double>(is);
  const double eps = get<double>(is);
  const auto seed = get<std::uint64_t>(is);
  const bool reuse = get<std::uint8_t>(is) != 0;
  const RepGeometry geometry = get<std::uint8_t>(is) ? RepGeometry::fmm : RepGeometry::cone;
  const auto count = get<std::uint32_t>(is);
  std::vector<SeparatedRep> built(count);
  for (SeparatedRep &r : built) {
    r.width = get<double>(is);
    r.direction = static_cast<int>(get<std::uint32_t>(is));
    const auto na = get<std::uint32_t>(is), nb = get<std::uint32_t>(is);
    if (na > 100000 || nb > 100000) throw CacheError("rep cache corrupted (point counts)");
    r.eps = get<double>(is);
    r.residual = get<double>(is);
    r.residual_p99 = get<double>(is);
    r.dir_vec.x = get<double>(is);
    r.dir_vec.y = get<double>(is);
    r.a_points.resize(na);
    r.b_points.resize(nb);
    for (Point2 &p : r.a_points) p = {get<double>(is), get<double>(is)};
    for (Point2 &p : r.b_points) p = {get<double>(is), get<double>(is)};
    r.D.resize(nb, na);
    for (std::uint32_t q = 0; q < nb; ++q)
      for (std::uint32_t p = 0; p < na; ++p) {
        const double re = get<double>(is);
        const double im = get<double>(is);
        r.D(q, p) = Complex(re, im);
      }
  }
  return RepTable::from_built(K, eps, seed, reuse, geometry, std::move(built));
}

}  // namespace dirfmm
