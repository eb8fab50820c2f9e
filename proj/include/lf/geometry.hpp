#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lf {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool empty() const { return (lo.array() > hi.array()).any(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  /// Squared distance from p to the box, zero inside.
  double squared_distance(const Vec3& p) const;
};

/// Thrown for malformed meshes and mesh files.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Indexed triangle surface mesh. Triangles are counter-clockwise when viewed
/// from outside, so face normals point outward.
struct TriMesh {
  using Triangle = std::array<std::uint32_t, 3>;

  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  Aabb bounds() const;

  /// Throws MeshError on out-of-range indices or zero-area triangles.
  void validate() const;

  /// True when every undirected edge is shared by exactly two triangles and
  /// the two uses run in opposite directions.
  bool is_watertight() const;

  /// Number of edges used by exactly one triangle (or by an odd number).
  std::size_t boundary_edge_count() const;

  std::size_t unique_edge_count() const;

  /// V - E + F on the referenced vertices.
  long euler_characteristic() const;

  Vec3 triangle_normal(std::size_t t) const;  // unnormalized, |n| = 2 * area
  double triangle_area(std::size_t t) const;
  double surface_area() const;
};

TriMesh transformed(const TriMesh& mesh, double scale, const Vec3& offset);

/// Split into connected components (triangles sharing a vertex index) and
/// return the one with the most triangles; unused vertices are dropped.
TriMesh largest_component(const TriMesh& mesh);

/// Merge vertices with identical coordinates; used after reading STL.
TriMesh weld_vertices(const TriMesh& mesh);

// Wavefront OBJ (v/f records only). Faces with more than three corners are
// fan-triangulated on read.
void write_obj(const TriMesh& mesh, const std::filesystem::path& path);
TriMesh read_obj(const std::filesystem::path& path);

// Binary STL; read welds vertices so connectivity survives the round trip.
void write_stl(const TriMesh& mesh, const std::filesystem::path& path);
TriMesh read_stl(const std::filesystem::path& path);

/// Dispatches on extension (.obj / .stl).
TriMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace lf
