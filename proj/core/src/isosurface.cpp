#include "psr/isosurface.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Geometry>

#include "psr/rng.hpp"

namespace psr {

namespace {

// Cube corners are numbered by their local offset bits, id = bx | by<<1 |
// bz<<2. Cube edges run along one axis with the other two offsets fixed:
//
//   x edges: id =     by + 2*bz      y edges: id = 4 + bx + 2*bz
//   z edges: id = 8 + bx + 2*by
constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z
}};

int edge_id(int axis, const std::array<int, 3>& bits) {
  switch (axis) {
    case 0: return bits[1] + 2 * bits[2];
    case 1: return 4 + bits[0] + 2 * bits[2];
    default: return 8 + bits[0] + 2 * bits[1];
  }
}

// Directed contour segments of one cell face, as (from, to) pairs over the
// face-local edges {B=0, R=1, T=2, L=3}. Directions keep the negative
// (inside) region on the left in a frame whose in-plane axes cross to the
// outward face normal; ambiguous faces always separate the negative
// corners. The rule depends only on corner signs, so the two cells sharing
// a face produce the same undirected segments with opposite directions.
struct FaceSegments {
  int count = 0;
  std::array<std::array<int, 2>, 2> seg{};
};

FaceSegments face_segments(bool i00, bool i10, bool i11, bool i01) {
  const int mask = (i00 ? 1 : 0) | (i10 ? 2 : 0) | (i11 ? 4 : 0) | (i01 ? 8 : 0);
  constexpr int B = 0, R = 1, T = 2, L = 3;
  FaceSegments out;
  auto add = [&out](int a, int b) {
    out.seg[static_cast<std::size_t>(out.count++)] = {a, b};
  };
  switch (mask) {
    case 1: add(B, L); break;
    case 2: add(R, B); break;
    case 4: add(T, R); break;
    case 8: add(L, T); break;
    case 3: add(R, L); break;
    case 6: add(T, B); break;
    case 12: add(L, R); break;
    case 9: add(B, T); break;
    case 5: add(B, L); add(T, R); break;
    case 10: add(R, B); add(L, T); break;
    case 7: add(T, L); break;
    case 11: add(R, T); break;
    case 13: add(B, R); break;
    case 14: add(L, B); break;
    default: break;  // 0, 15
  }
  return out;
}

// Faces incident to a cube edge: an x edge with offsets (by, bz) lies on
// faces (y, by) and (z, bz), and so on. Face key = axis * 2 + side.
std::array<int, 2> faces_of_edge(int e) {
  const int axis = e / 4;
  const int b1 = e % 4 % 2;
  const int b2 = e % 4 / 2;
  switch (axis) {
    case 0: return {1 * 2 + b1, 2 * 2 + b2};  // x edge: faces (y,b1), (z,b2)
    case 1: return {0 * 2 + b1, 2 * 2 + b2};  // y edge: faces (x,b1), (z,b2)
    default: return {0 * 2 + b1, 1 * 2 + b2}; // z edge: faces (x,b1), (y,b2)
  }
}

bool edges_share_face(int e1, int e2) {
  const auto f1 = faces_of_edge(e1);
  const auto f2 = faces_of_edge(e2);
  return f1[0] == f2[0] || f1[0] == f2[1] || f1[1] == f2[0] || f1[1] == f2[1];
}

// Triangulates an oriented loop of cube edges, avoiding interior chords
// whose endpoints lie on a common cube face. Such chords sit in the face
// plane where the neighboring cell could emit the identical pair, which
// would create a non-manifold edge; chord-free-of-faces triangulations keep
// every interior edge private to one cell. Interval DP, deterministic.
void triangulate_loop(const std::vector<int>& loop,
                      std::vector<std::array<int, 3>>& out) {
  const int n = static_cast<int>(loop.size());
  if (n == 3) {
    out.push_back({loop[0], loop[1], loop[2]});
    return;
  }

  const auto chord_cost = [&](int i, int j) {
    if (j == i + 1 || (i == 0 && j == n - 1)) return 0;  // polygon side
    return edges_share_face(loop[static_cast<std::size_t>(i)],
                            loop[static_cast<std::size_t>(j)])
               ? 1
               : 0;
  };

  constexpr int kInf = 1 << 20;
  std::vector<std::vector<int>> cost(static_cast<std::size_t>(n),
                                     std::vector<int>(static_cast<std::size_t>(n), 0));
  std::vector<std::vector<int>> split(static_cast<std::size_t>(n),
                                      std::vector<int>(static_cast<std::size_t>(n), -1));
  for (int span = 2; span < n; ++span) {
    for (int i = 0; i + span < n; ++i) {
      const int j = i + span;
      int best = kInf, best_k = -1;
      for (int k = i + 1; k < j; ++k) {
        const int c = cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                      cost[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] +
                      chord_cost(i, k) + chord_cost(k, j);
        if (c < best) {
          best = c;
          best_k = k;
        }
      }
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = best;
      split[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = best_k;
    }
  }
  // Every marching-cubes loop admits a face-chord-free triangulation; this
  // runs once at table build, so fail loudly if the premise ever breaks.
  if (cost[0][static_cast<std::size_t>(n - 1)] != 0) {
    throw std::logic_error("marching cubes: no face-chord-free triangulation");
  }

  const std::function<void(int, int)> emit = [&](int i, int j) {
    if (j - i < 2) return;
    const int k = split[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    out.push_back({loop[static_cast<std::size_t>(i)],
                   loop[static_cast<std::size_t>(k)],
                   loop[static_cast<std::size_t>(j)]});
    emit(i, k);
    emit(k, j);
  };
  emit(0, n - 1);
}

// Per-case triangulation as triples of cube edge ids, built once by tracing
// the face contour segments into closed loops and triangulating each loop.
struct CaseTable {
  std::array<std::vector<std::array<int, 3>>, 256> triangles;
};

CaseTable build_case_table() {
  // Face list: axis a, side s, with in-plane axes (p, q) chosen so that
  // p cross q equals the outward normal.
  struct Face {
    int a, s, p, q;
  };
  constexpr std::array<Face, 6> faces = {{
      {0, 1, 1, 2},  // +x: (y, z)
      {0, 0, 2, 1},  // -x: (z, y)
      {1, 1, 2, 0},  // +y: (z, x)
      {1, 0, 0, 2},  // -y: (x, z)
      {2, 1, 0, 1},  // +z: (x, y)
      {2, 0, 1, 0},  // -z: (y, x)
  }};

  CaseTable table;
  for (int mask = 0; mask < 256; ++mask) {
    const auto inside = [mask](int corner) {
      return (mask >> corner) & 1;
    };

    // Each cut edge is the head of exactly one directed segment and the
    // tail of exactly one.
    std::array<int, 12> next;
    next.fill(-1);
    int segment_count = 0;
    for (const Face& f : faces) {
      const auto corner_at = [&f](int P, int Q) {
        std::array<int, 3> bits{};
        bits[static_cast<std::size_t>(f.a)] = f.s;
        bits[static_cast<std::size_t>(f.p)] = P;
        bits[static_cast<std::size_t>(f.q)] = Q;
        return bits[0] | bits[1] << 1 | bits[2] << 2;
      };
      const auto face_edge = [&f](int local) {
        std::array<int, 3> bits{};
        bits[static_cast<std::size_t>(f.a)] = f.s;
        switch (local) {
          case 0: bits[static_cast<std::size_t>(f.q)] = 0; return edge_id(f.p, bits);
          case 2: bits[static_cast<std::size_t>(f.q)] = 1; return edge_id(f.p, bits);
          case 3: bits[static_cast<std::size_t>(f.p)] = 0; return edge_id(f.q, bits);
          default: bits[static_cast<std::size_t>(f.p)] = 1; return edge_id(f.q, bits);
        }
      };

      const FaceSegments segs =
          face_segments(inside(corner_at(0, 0)) != 0, inside(corner_at(1, 0)) != 0,
                        inside(corner_at(1, 1)) != 0, inside(corner_at(0, 1)) != 0);
      for (int k = 0; k < segs.count; ++k) {
        const int from = face_edge(segs.seg[static_cast<std::size_t>(k)][0]);
        const int to = face_edge(segs.seg[static_cast<std::size_t>(k)][1]);
        assert(next[static_cast<std::size_t>(from)] == -1);
        next[static_cast<std::size_t>(from)] = to;
        ++segment_count;
      }
    }

    // Trace loops; reverse them so triangle normals point toward the
    // positive side, then triangulate chord-safely.
    std::array<bool, 12> used{};
    int consumed = 0;
    for (int start = 0; start < 12; ++start) {
      if (next[static_cast<std::size_t>(start)] < 0 ||
          used[static_cast<std::size_t>(start)]) {
        continue;
      }
      std::vector<int> loop;
      int e = start;
      do {
        loop.push_back(e);
        used[static_cast<std::size_t>(e)] = true;
        e = next[static_cast<std::size_t>(e)];
        assert(e >= 0);
      } while (e != start);
      consumed += static_cast<int>(loop.size());

      std::reverse(loop.begin(), loop.end());
      triangulate_loop(loop, table.triangles[static_cast<std::size_t>(mask)]);
    }
    assert(consumed == segment_count);
    (void)segment_count;
    (void)consumed;
  }
  return table;
}

const CaseTable& case_table() {
  static const CaseTable table = build_case_table();
  return table;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

std::uint64_t undirected_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (hi << 32) | lo;
}

struct DisjointSet {
  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

}  // namespace

double TriangleMesh::area() const {
  double total = 0.0;
  for (const auto& t : triangles) {
    total += triangle_area(vertices[static_cast<std::size_t>(t[0])],
                           vertices[static_cast<std::size_t>(t[1])],
                           vertices[static_cast<std::size_t>(t[2])]);
  }
  return total;
}

void TriangleMesh::update_normals() {
  face_normals.assign(triangles.size(), Vec3::Zero());
  vertex_normals.assign(vertices.size(), Vec3::Zero());
  for (std::size_t f = 0; f < triangles.size(); ++f) {
    const auto& t = triangles[f];
    const Vec3& a = vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = vertices[static_cast<std::size_t>(t[2])];
    const Vec3 weighted = (b - a).cross(c - a);  // 2 * area * unit normal
    const double len = weighted.norm();
    face_normals[f] = len > 0.0 ? Vec3(weighted / len) : Vec3::UnitZ();
    for (int k = 0; k < 3; ++k) {
      vertex_normals[static_cast<std::size_t>(t[k])] += weighted;
    }
  }
  for (Vec3& n : vertex_normals) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
}

MeshTopology analyze_topology(const TriangleMesh& mesh) {
  MeshTopology topo;
  topo.vertex_count = static_cast<std::int64_t>(mesh.vertices.size());
  topo.triangle_count = static_cast<std::int64_t>(mesh.triangles.size());

  struct EdgeInfo {
    int forward = 0;   // traversed (lo, hi)
    int backward = 0;  // traversed (hi, lo)
    int first_triangle = -1;
  };
  std::unordered_map<std::uint64_t, EdgeInfo> edges;
  edges.reserve(mesh.triangles.size() * 3);

  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      const int a = t[static_cast<std::size_t>(k)];
      const int b = t[static_cast<std::size_t>((k + 1) % 3)];
      EdgeInfo& info = edges[undirected_key(a, b)];
      if (a < b) {
        ++info.forward;
      } else {
        ++info.backward;
      }
      if (info.first_triangle < 0) info.first_triangle = static_cast<int>(f);
    }
  }

  topo.edge_count = static_cast<std::int64_t>(edges.size());
  bool oriented = !mesh.triangles.empty();
  DisjointSet dsu(mesh.triangles.size());
  std::unordered_map<std::uint64_t, int> last_triangle;
  last_triangle.reserve(edges.size());
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      const std::uint64_t key =
          undirected_key(t[static_cast<std::size_t>(k)],
                         t[static_cast<std::size_t>((k + 1) % 3)]);
      auto [it, fresh] = last_triangle.try_emplace(key, static_cast<int>(f));
      if (!fresh) dsu.unite(static_cast<std::size_t>(it->second), f);
    }
  }
  for (const auto& [key, info] : edges) {
    const int total = info.forward + info.backward;
    if (total == 1) ++topo.boundary_edge_count;
    if (total > 2) ++topo.non_manifold_edge_count;
    if (total == 2 && (info.forward != 1 || info.backward != 1)) {
      oriented = false;
    }
  }
  topo.consistently_oriented =
      oriented && topo.non_manifold_edge_count == 0;

  std::vector<std::size_t> roots;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    roots.push_back(dsu.find(f));
  }
  std::sort(roots.begin(), roots.end());
  topo.component_count = static_cast<std::int64_t>(
      std::unique(roots.begin(), roots.end()) - roots.begin());
  return topo;
}

TriangleMesh marching_cubes(const ScalarGrid& chi, double iso) {
  const int r = chi.spec.resolution();
  const double s = chi.spec.voxel_size();
  const CaseTable& table = case_table();

  // Signed value with exact-zero perturbation: every node gets a side.
  const auto node_value = [&chi, iso](int x, int y, int z) {
    const double d = chi.at(x, y, z) - iso;
    return d == 0.0 ? 1e-12 : d;
  };

  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of_edge;

  const auto weld = [&](int cx, int cy, int cz, int e) {
    const int axis = e / 4;
    const int lo = e % 4;
    std::array<int, 3> bits{};
    switch (axis) {
      case 0: bits = {0, lo & 1, lo >> 1}; break;
      case 1: bits = {lo & 1, 0, lo >> 1}; break;
      default: bits = {lo & 1, lo >> 1, 0}; break;
    }
    const int nx = cx + bits[0], ny = cy + bits[1], nz = cz + bits[2];
    const std::uint64_t key =
        static_cast<std::uint64_t>(chi.spec.linear_index(nx, ny, nz)) * 3 +
        static_cast<std::uint64_t>(axis);
    const auto [it, fresh] =
        vertex_of_edge.try_emplace(key, static_cast<int>(mesh.vertices.size()));
    if (fresh) {
      const int ux = nx + (axis == 0), uy = ny + (axis == 1),
                uz = nz + (axis == 2);
      const double va = node_value(nx, ny, nz);
      const double vb = node_value(ux, uy, uz);
      const double t = va / (va - vb);
      Vec3 pos(nx * s, ny * s, nz * s);
      pos[axis] += t * s;
      mesh.vertices.push_back(pos);
    }
    return it->second;
  };

  for (int cz = 0; cz < r - 1; ++cz) {
    for (int cy = 0; cy < r - 1; ++cy) {
      for (int cx = 0; cx < r - 1; ++cx) {
        int mask = 0;
        for (int corner = 0; corner < 8; ++corner) {
          const int x = cx + (corner & 1);
          const int y = cy + ((corner >> 1) & 1);
          const int z = cz + ((corner >> 2) & 1);
          if (node_value(x, y, z) < 0.0) mask |= 1 << corner;
        }
        const auto& tris = table.triangles[static_cast<std::size_t>(mask)];
        for (const auto& t : tris) {
          const int v0 = weld(cx, cy, cz, t[0]);
          const int v1 = weld(cx, cy, cz, t[1]);
          const int v2 = weld(cx, cy, cz, t[2]);
          mesh.triangles.push_back({v0, v1, v2});
        }
      }
    }
  }

  mesh.update_normals();
  return mesh;
}

TriangleMesh largest_component(const TriangleMesh& mesh) {
  if (mesh.empty()) return {};

  DisjointSet dsu(mesh.triangles.size());
  std::unordered_map<std::uint64_t, int> last_triangle;
  last_triangle.reserve(mesh.triangles.size() * 3);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      const std::uint64_t key =
          undirected_key(t[static_cast<std::size_t>(k)],
                         t[static_cast<std::size_t>((k + 1) % 3)]);
      auto [it, fresh] = last_triangle.try_emplace(key, static_cast<int>(f));
      if (!fresh) dsu.unite(static_cast<std::size_t>(it->second), f);
    }
  }

  std::unordered_map<std::size_t, double> component_area;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    component_area[dsu.find(f)] +=
        triangle_area(mesh.vertices[static_cast<std::size_t>(t[0])],
                      mesh.vertices[static_cast<std::size_t>(t[1])],
                      mesh.vertices[static_cast<std::size_t>(t[2])]);
  }
  std::size_t best_root = 0;
  double best_area = -1.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const std::size_t root = dsu.find(f);
    const double area = component_area[root];
    if (area > best_area || (area == best_area && root < best_root)) {
      best_area = area;
      best_root = root;
    }
  }

  TriangleMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    if (dsu.find(f) != best_root) continue;
    std::array<int, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.triangles[f][static_cast<std::size_t>(k)];
      if (remap[static_cast<std::size_t>(v)] < 0) {
        remap[static_cast<std::size_t>(v)] =
            static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
      }
      tri[static_cast<std::size_t>(k)] = remap[static_cast<std::size_t>(v)];
    }
    out.triangles.push_back(tri);
  }
  out.update_normals();
  return out;
}

SurfaceSamples sample_surface(const TriangleMesh& mesh, std::size_t count,
                              std::uint64_t seed) {
  if (mesh.empty()) {
    throw Error("sample_surface: empty mesh");
  }
  if (count == 0) {
    throw Error("sample_surface: sample count must be >= 1");
  }

  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    const auto& t = mesh.triangles[f];
    total += triangle_area(mesh.vertices[static_cast<std::size_t>(t[0])],
                           mesh.vertices[static_cast<std::size_t>(t[1])],
                           mesh.vertices[static_cast<std::size_t>(t[2])]);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) {
    throw Error("sample_surface: mesh has zero total area");
  }

  const bool cached_normals = mesh.face_normals.size() == mesh.triangles.size();
  SurfaceSamples out;
  out.points.reserve(count);
  out.normals.reserve(count);
  out.triangle.reserve(count);

  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = rng.uniform() * total;
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t f = std::min(
        static_cast<std::size_t>(it - cumulative.begin()),
        mesh.triangles.size() - 1);

    const auto& t = mesh.triangles[f];
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];

    double u = rng.uniform();
    double v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    out.points.push_back(a + u * (b - a) + v * (c - a));
    if (cached_normals) {
      out.normals.push_back(mesh.face_normals[f]);
    } else {
      const Vec3 n = (b - a).cross(c - a);
      const double len = n.norm();
      out.normals.push_back(len > 0.0 ? Vec3(n / len) : Vec3::UnitZ());
    }
    out.triangle.push_back(static_cast<int>(f));
  }
  return out;
}

ScalarGrid mesh_grad_to_grid(const SurfaceSamples& samples,
                             std::span<const Vec3> dl_dpoints,
                             const GridSpec& spec) {
  if (dl_dpoints.size() != samples.points.size()) {
    throw Error("mesh_grad_to_grid: gradient and sample counts differ");
  }
  ScalarGrid grid(spec);
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const double g = dl_dpoints[i].dot(-samples.normals[i]);
    const TrilinearStencil st = trilinear_weights(samples.points[i], spec);
    for (int k = 0; k < 8; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      grid.values[static_cast<std::size_t>(st.corner[ks])] +=
          g * st.weight[ks];
    }
  }
  return grid;
}

}  // namespace psr
