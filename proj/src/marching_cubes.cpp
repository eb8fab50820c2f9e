#include <array>
#include <cstdint>
#include <vector>

#include "lf/meshops.hpp"

namespace lf {

namespace {

// Corner numbering follows Lorensen:
// 0 (0,0,0) 1 (1,0,0) 2 (1,1,0) 3 (0,1,0) 4 (0,0,1) 5 (1,0,1) 6 (1,1,1) 7 (0,1,1).
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Face corners, counter-clockwise seen from outside the cell.
constexpr int kFace[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                             {3, 7, 6, 2}, {0, 4, 7, 3}, {1, 2, 6, 5}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e) {
    if ((kEdge[e][0] == a && kEdge[e][1] == b) || (kEdge[e][0] == b && kEdge[e][1] == a)) return e;
  }
  return -1;
}

using CaseTriangles = std::vector<std::array<int, 3>>;

// Build the 256-entry triangle table. On every cell face the crossing on an
// inside->outside edge is joined to the nearest preceding outside->inside
// crossing, which keeps each inside corner region to the left of its segment
// and separates diagonal inside corners on ambiguous faces. The rule only
// looks at the four corners of a face, so neighbouring cells agree on every
// shared face and the extracted surface has no cracks. Segments chain into
// closed loops around the inside region; each loop is fanned into triangles
// whose normals point toward the outside.
std::array<CaseTriangles, 256> build_table() {
  std::array<CaseTriangles, 256> table;
  for (int cube_case = 0; cube_case < 256; ++cube_case) {
    auto inside = [&](int corner) { return (cube_case >> corner) & 1; };
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& face : kFace) {
      for (int q = 0; q < 4; ++q) {
        const int a = face[q], b = face[(q + 1) % 4];
        if (!(inside(a) && !inside(b))) continue;
        for (int back = 1; back <= 4; ++back) {
          const int r = (q - back + 4) % 4;
          const int c = face[r], d = face[(r + 1) % 4];
          if (!inside(c) && inside(d)) {
            next[edge_between(a, b)] = edge_between(c, d);
            break;
          }
        }
      }
    }
    std::array<bool, 12> visited{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || visited[start]) continue;
      std::vector<int> loop;
      for (int e = start; !visited[e]; e = next[e]) {
        visited[e] = true;
        loop.push_back(e);
      }
      for (std::size_t k = 1; k + 1 < loop.size(); ++k) table[cube_case].push_back({loop[0], loop[k + 1], loop[k]});
    }
  }
  return table;
}

const std::array<CaseTriangles, 256>& triangle_table() {
  static const auto table = build_table();
  return table;
}

}  // namespace

int marching_cubes_case_triangles(int cube_case) {
  return static_cast<int>(triangle_table().at(static_cast<std::size_t>(cube_case)).size());
}

TriMesh marching_cubes(const SdfGrid& grid, double iso) {
  grid.validate();
  const auto& table = triangle_table();
  const int nx = grid.resolution[0], ny = grid.resolution[1], nz = grid.resolution[2];
  TriMesh mesh;
  if (nx < 2 || ny < 2 || nz < 2) return mesh;

  // One welded vertex per crossed grid edge: edge_vertex[axis][node].
  std::array<std::vector<std::int64_t>, 3> edge_vertex;
  for (auto& ev : edge_vertex) ev.assign(grid.node_count(), -1);

  auto vertex_on = [&](int i, int j, int k, int axis) -> std::uint32_t {
    const std::size_t n0 = grid.index(i, j, k);
    auto& slot = edge_vertex[axis][n0];
    if (slot >= 0) return static_cast<std::uint32_t>(slot);
    const int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
    const double v0 = grid.at(i, j, k), v1 = grid.at(i1, j1, k1);
    const double t = (iso - v0) / (v1 - v0);
    const Vec3 p0 = grid.node(i, j, k), p1 = grid.node(i1, j1, k1);
    slot = static_cast<std::int64_t>(mesh.vertices.size());
    mesh.vertices.push_back(p0 + t * (p1 - p0));
    return static_cast<std::uint32_t>(slot);
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        int cube_case = 0;
        for (int c = 0; c < 8; ++c) {
          if (grid.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso) cube_case |= 1 << c;
        }
        const auto& tris = table[cube_case];
        if (tris.empty()) continue;
        std::array<std::int64_t, 12> local;
        local.fill(-1);
        auto local_vertex = [&](int e) {
          if (local[e] < 0) {
            const int a = kEdge[e][0], b = kEdge[e][1];
            // Canonical direction: from the corner with smaller coordinates.
            const int lo = (kCorner[a][0] + kCorner[a][1] + kCorner[a][2] <= kCorner[b][0] + kCorner[b][1] + kCorner[b][2]) ? a : b;
            const int hi = lo == a ? b : a;
            int axis = 0;
            while (kCorner[lo][axis] == kCorner[hi][axis]) ++axis;
            local[e] = vertex_on(i + kCorner[lo][0], j + kCorner[lo][1], k + kCorner[lo][2], axis);
          }
          return static_cast<std::uint32_t>(local[e]);
        };
        for (const auto& t : tris) mesh.triangles.push_back({local_vertex(t[0]), local_vertex(t[1]), local_vertex(t[2])});
      }
    }
  }
  return mesh;
}

}  // namespace lf
