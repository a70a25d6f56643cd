#include "bdgkit/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "bdgkit/errors.hpp"

namespace bdgkit {

static_assert(std::endian::native == std::endian::little,
              "BDG1 writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'B', 'D', 'G', '1'};

template <class T>
void put(std::ofstream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) fail(Error::Kind::io, "truncated field file: " + path.string());
  return value;
}

}  // namespace

void write_field_file(const std::filesystem::path& path, std::span<const ScalarField> components) {
  if (components.empty()) fail(Error::Kind::shape, "no components to write");
  const SpectralGrid& grid = components[0].grid();
  const FieldKind kind = components[0].kind();
  for (const auto& c : components) {
    if (!(c.grid() == grid)) fail(Error::Kind::shape, "components live on different grids");
    if (c.kind() != kind) fail(Error::Kind::shape, "components mix real and complex samples");
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(Error::Kind::io, "cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.dim()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.points_per_dim()));
  put<double>(os, grid.half_width());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(components.size()));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(kind));
  for (const auto& c : components) {
    if (kind == FieldKind::real) {
      const auto v = c.real_values();
      os.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
    } else {
      const auto v = c.complex_values();
      os.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(complex)));
    }
  }
  if (!os) fail(Error::Kind::io, "write failed: " + path.string());
}

void write_field_file(const std::filesystem::path& path, const Field2& field) {
  const std::vector<ScalarField> comps{field[0], field[1]};
  write_field_file(path, comps);
}

FieldFile read_field_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Error::Kind::io, "cannot open field file: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    fail(Error::Kind::io, "not a BDG1 field file: " + path.string());
  }
  const auto dim = get<std::uint32_t>(is, path);
  const auto n = get<std::uint32_t>(is, path);
  const auto half_width = get<double>(is, path);
  const auto ncomp = get<std::uint32_t>(is, path);
  const auto kind = get<std::uint8_t>(is, path);
  if (kind > 1) fail(Error::Kind::io, "unknown sample kind in " + path.string());
  if (ncomp == 0 || ncomp > 1024) fail(Error::Kind::io, "bad component count in " + path.string());

  FieldFile out{make_grid(static_cast<int>(dim), half_width, static_cast<int>(n)), {}};
  const std::size_t nt = out.grid.total_points();
  for (std::uint32_t c = 0; c < ncomp; ++c) {
    if (kind == 0) {
      std::vector<double> v(nt);
      is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(nt * sizeof(double)));
      if (!is) fail(Error::Kind::io, "truncated field file: " + path.string());
      out.components.emplace_back(out.grid, std::move(v));
    } else {
      std::vector<complex> v(nt);
      is.read(reinterpret_cast<char*>(v.data()),
              static_cast<std::streamsize>(nt * sizeof(complex)));
      if (!is) fail(Error::Kind::io, "truncated field file: " + path.string());
      out.components.emplace_back(out.grid, std::move(v));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    fail(Error::Kind::io, "trailing bytes in field file: " + path.string());
  }
  return out;
}

Field2 read_field2_file(const std::filesystem::path& path) {
  auto file = read_field_file(path);
  if (file.components.size() != 2) {
    fail(Error::Kind::io, "expected a two-component field in " + path.string());
  }
  return {std::move(file.components[0]), std::move(file.components[1])};
}

}  // namespace bdgkit
