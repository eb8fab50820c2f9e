#pragma once

// Signed distance queries, SDF sampling, normalization, volume control and
// isosurface extraction.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lf/geometry.hpp"

namespace lf {

struct SdfSample {
  Vec3 point;
  double distance;  // negative inside
};

struct SdfSampleSet {
  std::string shape_id;
  std::vector<SdfSample> samples;
};

struct SdfGrid {
  std::array<int, 3> resolution{};
  Vec3 origin = Vec3::Zero();
  double spacing = 1.0;
  std::vector<double> values;  // x fastest

  SdfGrid() = default;
  SdfGrid(std::array<int, 3> res, const Vec3& origin, double spacing);

  /// Cube [lo, hi]^3 sampled with n nodes per axis.
  static SdfGrid cube(double lo, double hi, int n);

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution[1]) * static_cast<std::size_t>(k));
  }
  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 node(int i, int j, int k) const { return origin + spacing * Vec3(i, j, k); }
  std::size_t node_count() const { return values.size(); }
  Vec3 node(std::size_t flat) const;

  /// Trilinear interpolation; points outside are clamped to the grid box.
  double interpolate(const Vec3& p) const;
  bool contains(const Vec3& p) const;
  Aabb box() const;

  void validate() const;
};

/// Closest-triangle and inside/outside queries against a watertight mesh.
/// Immutable after construction; queries may run concurrently.
class SdfQuery {
 public:
  /// Throws MeshError when the mesh is not watertight.
  explicit SdfQuery(TriMesh mesh);

  const TriMesh& mesh() const { return mesh_; }

  double unsigned_distance(const Vec3& p) const;
  Vec3 closest_point(const Vec3& p) const;

  /// Crossing-count parity along one ray.
  bool ray_parity_inside(const Vec3& p, const Vec3& dir) const;
  /// Majority vote of three fixed, mutually skewed ray directions.
  bool inside(const Vec3& p) const;

  double signed_distance(const Vec3& p) const;

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first primitive; inner: left child
    std::uint32_t count = 0;  // leaf: primitive count; inner: 0
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids);
  int ray_crossings(const Vec3& origin, const Vec3& dir) const;

  TriMesh mesh_;
  std::vector<std::uint32_t> order_;  // primitive permutation referenced by leaves
  std::vector<Aabb> tri_boxes_;
  std::vector<Node> nodes_;
};

/// One-off query; builds the acceleration structure each call.
double signed_distance(const TriMesh& mesh, const Vec3& p);

struct SampleMix {
  double fine_fraction = 0.475;    // surface + N(0, fine_sigma)
  double coarse_fraction = 0.475;  // surface + N(0, coarse_sigma)
  double coarse_sigma = 0.0025;
  double fine_sigma = 0.00025;
  double uniform_radius = 1.1;  // remainder uniform in this ball
};

/// n samples of (point, signed distance); deterministic for a fixed seed.
SdfSampleSet sample_sdf(const TriMesh& mesh, std::size_t n, std::uint64_t seed, const SampleMix& mix = {});
SdfSampleSet sample_sdf(const SdfQuery& query, std::size_t n, std::uint64_t seed, const SampleMix& mix = {});

// Distance evaluation kernels. The OpenMP versions produce bit-identical
// output to the serial references.
void signed_distances(const SdfQuery& query, std::span<const Vec3> points, std::span<double> out);
void signed_distances_serial(const SdfQuery& query, std::span<const Vec3> points, std::span<double> out);

/// Fill grid.values with the mesh SDF at every node.
void fill_grid(const SdfQuery& query, SdfGrid& grid);
void fill_grid_serial(const SdfQuery& query, SdfGrid& grid);

struct Normalization {
  TriMesh mesh;
  double scale = 1.0;          // normalized = scale * (original - center)
  Vec3 offset = Vec3::Zero();  // bounding-box center of the original
};

inline constexpr double kNormalizationPad = 0.03;

/// Center the bounding box at the origin and scale so the farthest vertex has
/// norm 1 - pad. original = normalized / scale + offset.
Normalization normalize_to_unit_sphere(const TriMesh& mesh, double pad = kNormalizationPad);

/// Divergence-theorem volume. Throws MeshError when negative (inverted
/// orientation).
double mesh_volume(const TriMesh& mesh);

/// Uniform scaling about the bounding-box center to hit `target` volume.
TriMesh scale_to_volume(const TriMesh& mesh, double target);

/// Isosurface of the grid at `iso` with outward (toward larger values)
/// orientation. Vertices on shared cell edges are welded, so closed level
/// sets yield watertight meshes.
TriMesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

/// Triangle table entry count for a cube configuration (corner i set when
/// its value is below iso); exposed for tests.
int marching_cubes_case_triangles(int cube_case);

/// Geodesic sphere from a subdivided icosahedron.
TriMesh make_icosphere(double radius, int subdivisions);

/// Axis-aligned box [lo, hi].
TriMesh make_box(const Vec3& lo, const Vec3& hi);

// SDF sample files: "SDF1", u64 count, shape id, count x (x, y, z, d) as f64.
void write_samples(const SdfSampleSet& set, const std::filesystem::path& path);
SdfSampleSet read_samples(const std::filesystem::path& path);

// Grid files: "SDG1", 3 x u64 resolution, origin (3 x f64), spacing f64, values f64.
void write_grid(const SdfGrid& grid, const std::filesystem::path& path);
SdfGrid read_grid(const std::filesystem::path& path);

}  // namespace lf
