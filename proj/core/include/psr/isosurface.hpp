#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "psr/grid.hpp"

namespace psr {

/// Indexed triangle mesh in domain coordinates. Triangles wind
/// counterclockwise seen from the positive side of the field they were
/// extracted from, so face normals point toward chi > 0 (outside).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> face_normals;    // unit, derived
  std::vector<Vec3> vertex_normals;  // unit, area-weighted, derived

  bool empty() const { return triangles.empty(); }
  double area() const;
  /// Recomputes face_normals and vertex_normals from the geometry.
  void update_normals();
};

struct MeshTopology {
  std::int64_t vertex_count = 0;
  std::int64_t edge_count = 0;  // undirected
  std::int64_t triangle_count = 0;
  std::int64_t boundary_edge_count = 0;      // edges with exactly 1 triangle
  std::int64_t non_manifold_edge_count = 0;  // edges with more than 2
  std::int64_t component_count = 0;          // via shared-edge adjacency
  bool consistently_oriented = false;

  std::int64_t euler_characteristic() const {
    return vertex_count - edge_count + triangle_count;
  }
  bool watertight() const {
    return boundary_edge_count == 0 && non_manifold_edge_count == 0;
  }
};

MeshTopology analyze_topology(const TriangleMesh& mesh);

/// Extracts the iso level set of the grid with marching cubes over the
/// (r-1)^3 cell lattice (the periodic seam is not stitched; shapes are kept
/// away from it by input normalization). Vertices lie on cell edges by
/// linear interpolation. Grid values exactly equal to iso are perturbed by
/// +1e-12 so every node has a definite side. Face connectivity inside each
/// cell follows a fixed sign rule shared by neighboring cells, so closed
/// level sets come out watertight and consistently oriented. An all-positive
/// or all-negative grid yields an empty mesh.
TriangleMesh marching_cubes(const ScalarGrid& chi, double iso = 0.0);

/// Connected component (triangle adjacency via shared edges) with the
/// largest total surface area. Empty in, empty out.
TriangleMesh largest_component(const TriangleMesh& mesh);

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit face normal of the owning triangle
  std::vector<int> triangle;  // owning triangle index per sample
};

/// Area-uniform surface sampling: triangles are chosen with probability
/// proportional to area, positions uniformly by barycentric sampling.
/// Deterministic per seed. Throws on an empty mesh.
SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t count,
                              std::uint64_t seed);

/// Bridges a loss gradient at sampled surface points back to the indicator
/// grid: per sample the scalar dL/dp . (-n) is scattered onto the grid with
/// the trilinear weights of the sample position.
ScalarGrid mesh_grad_to_grid(const SurfaceSamples& samples,
                             std::span<const Vec3> dl_dpoints,
                             const GridSpec& spec);

}  // namespace psr
