#pragma once

// "BDG1" binary field files.
//
//   bytes 0..3   magic "BDG1"
//   u32          dim
//   u32          N
//   f64          L
//   u32          ncomponents
//   u8           kind (0 real, 1 complex)
//   payload      ncomponents * N^d f64 values (real) or (re, im) pairs,
//                component-major, x fastest
//
// All integers and floats are little-endian.

#include <filesystem>
#include <vector>

#include "bdgkit/spectral.hpp"

namespace bdgkit {

struct FieldFile {
  SpectralGrid grid;
  std::vector<ScalarField> components;
};

// All components must share one grid and one kind.
void write_field_file(const std::filesystem::path& path, std::span<const ScalarField> components);
void write_field_file(const std::filesystem::path& path, const Field2& field);

FieldFile read_field_file(const std::filesystem::path& path);
// Reads a two-component file and checks it is exactly that.
Field2 read_field2_file(const std::filesystem::path& path);

}  // namespace bdgkit
