#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include "psr/grid.hpp"
#include "psr/isosurface.hpp"
#include "psr/solver.hpp"

namespace psr {

struct PointCloudData {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty when the file has no normals

  bool has_normals() const { return !normals.empty(); }
};

/// Reads .xyz (ASCII "x y z [nx ny nz]", '#' comments) or .ply (ascii or
/// binary_little_endian; properties x,y,z and optional nx,ny,nz as float32
/// or float64). Normals are returned only when present for every point.
PointCloudData read_point_cloud(const std::filesystem::path& path);

/// Writes .obj ("v x y z" / "f i j k", 1-based) or .ply
/// (binary_little_endian, float32 vertices, int32 triangle lists).
void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Reads .obj or .ply meshes. A .ply without a face element yields a mesh
/// with vertices only. Normals are recomputed from the geometry.
TriangleMesh read_mesh(const std::filesystem::path& path);

/// Raw grid dump, shared binary format: little-endian, 16-byte header
/// (magic "SAPG", u32 resolution, u32 dtype 0=f32/1=f64, u32 channel
/// count) followed by channel-major x-fastest voxel data. Round trips are
/// bit-exact at the stored dtype.
void write_grid(const std::filesystem::path& path, const ScalarGrid& grid,
                Precision dtype = Precision::f64);
void write_grid(const std::filesystem::path& path, const VectorGrid& grid,
                Precision dtype = Precision::f64);

struct GridFile {
  std::variant<ScalarGrid, VectorGrid> grid;
  Precision dtype = Precision::f64;
};

GridFile read_grid(const std::filesystem::path& path);

}  // namespace psr
