#include "lf/meshops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "lf/binio.hpp"

namespace lf {

// ---------------------------------------------------------------- SdfGrid

SdfGrid::SdfGrid(std::array<int, 3> res, const Vec3& origin_, double spacing_)
    : resolution(res), origin(origin_), spacing(spacing_) {
  for (int r : res) {
    if (r < 1) throw std::invalid_argument("SdfGrid: resolution must be positive");
  }
  if (!(spacing > 0.0)) throw std::invalid_argument("SdfGrid: spacing must be positive");
  values.assign(static_cast<std::size_t>(res[0]) * res[1] * res[2], 0.0);
}

SdfGrid SdfGrid::cube(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("SdfGrid::cube: need n >= 2 and hi > lo");
  return SdfGrid({n, n, n}, Vec3::Constant(lo), (hi - lo) / (n - 1));
}

Vec3 SdfGrid::node(std::size_t flat) const {
  const auto nx = static_cast<std::size_t>(resolution[0]);
  const auto ny = static_cast<std::size_t>(resolution[1]);
  const auto i = static_cast<int>(flat % nx);
  const auto j = static_cast<int>((flat / nx) % ny);
  const auto k = static_cast<int>(flat / (nx * ny));
  return node(i, j, k);
}

Aabb SdfGrid::box() const {
  Aabb b;
  b.lo = origin;
  b.hi = origin + spacing * Vec3(resolution[0] - 1, resolution[1] - 1, resolution[2] - 1);
  return b;
}

bool SdfGrid::contains(const Vec3& p) const { return box().contains(p); }

double SdfGrid::interpolate(const Vec3& p) const {
  int base[3];
  double frac[3];
  for (int d = 0; d < 3; ++d) {
    const double g = std::clamp((p[d] - origin[d]) / spacing, 0.0, static_cast<double>(resolution[d] - 1));
    int c = std::min(static_cast<int>(g), std::max(resolution[d] - 2, 0));
    base[d] = c;
    frac[d] = resolution[d] > 1 ? g - c : 0.0;
  }
  auto value = [&](int di, int dj, int dk) {
    const int i = std::min(base[0] + di, resolution[0] - 1);
    const int j = std::min(base[1] + dj, resolution[1] - 1);
    const int k = std::min(base[2] + dk, resolution[2] - 1);
    return at(i, j, k);
  };
  const double c00 = value(0, 0, 0) * (1 - frac[0]) + value(1, 0, 0) * frac[0];
  const double c10 = value(0, 1, 0) * (1 - frac[0]) + value(1, 1, 0) * frac[0];
  const double c01 = value(0, 0, 1) * (1 - frac[0]) + value(1, 0, 1) * frac[0];
  const double c11 = value(0, 1, 1) * (1 - frac[0]) + value(1, 1, 1) * frac[0];
  const double c0 = c00 * (1 - frac[1]) + c10 * frac[1];
  const double c1 = c01 * (1 - frac[1]) + c11 * frac[1];
  return c0 * (1 - frac[2]) + c1 * frac[2];
}

void SdfGrid::validate() const {
  for (int r : resolution) {
    if (r < 1) throw std::invalid_argument("SdfGrid: resolution must be positive");
  }
  if (!(spacing > 0.0)) throw std::invalid_argument("SdfGrid: spacing must be positive");
  if (values.size() != static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2]) {
    throw std::invalid_argument("SdfGrid: value count does not match resolution");
  }
}

// ---------------------------------------------------------------- SdfQuery

namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

// Moller-Trumbore; true for hits with t > 0.
bool ray_hits_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 pv = d.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Vec3 tv = o - a;
  const double u = tv.dot(pv) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = tv.cross(e1);
  const double v = d.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  return e2.dot(qv) * inv > 0.0;
}

bool ray_hits_box(const Vec3& o, const Vec3& inv_d, const Aabb& box) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    double ta = (box.lo[k] - o[k]) * inv_d[k];
    double tb = (box.hi[k] - o[k]) * inv_d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

const std::array<Vec3, 3>& vote_directions() {
  static const std::array<Vec3, 3> dirs = {
      Vec3(1.0, 0.3127, 0.2171).normalized(),
      Vec3(-0.2833, 1.0, 0.1709).normalized(),
      Vec3(0.1931, -0.2417, 1.0).normalized(),
  };
  return dirs;
}

constexpr std::uint32_t kLeafSize = 4;

}  // namespace

SdfQuery::SdfQuery(TriMesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  if (!mesh_.is_watertight()) {
    throw MeshError("signed distance needs a watertight, consistently oriented mesh");
  }
  const auto n = static_cast<std::uint32_t>(mesh_.triangles.size());
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0u);
  tri_boxes_.resize(n);
  std::vector<Vec3> centroids(n);
  for (std::uint32_t t = 0; t < n; ++t) {
    Aabb b;
    for (auto idx : mesh_.triangles[t]) b.extend(mesh_.vertices[idx]);
    tri_boxes_[t] = b;
    centroids[t] = b.center();
  }
  nodes_.reserve(2 * n / kLeafSize + 2);
  build(0, n, centroids);
}

std::uint32_t SdfQuery::build(std::uint32_t first, std::uint32_t count, std::vector<Vec3>& centroids) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, cbox;
  for (std::uint32_t i = first; i < first + count; ++i) {
    box.extend(tri_boxes_[order_[i]]);
    cbox.extend(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  const Vec3 ext = cbox.extent();
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;
  const std::uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
                     return a < b;
                   });
  const auto left = build(first, mid - first, centroids);
  const auto right = build(mid, first + count - mid, centroids);
  nodes_[id].first = left;
  nodes_[id].right = right;
  nodes_[id].count = 0;
  return id;
}

Vec3 SdfQuery::closest_point(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  Vec3 best_point = Vec3::Zero();
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squared_distance(p) >= best) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        const Vec3 q = closest_on_triangle(p, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        const double d = (q - p).squaredNorm();
        if (d < best) {
          best = d;
          best_point = q;
        }
      }
      continue;
    }
    // Visit the nearer child first.
    const double dl = nodes_[node.first].box.squared_distance(p);
    const double dr = nodes_[node.right].box.squared_distance(p);
    if (dl < dr) {
      stack[top++] = node.right;
      stack[top++] = node.first;
    } else {
      stack[top++] = node.first;
      stack[top++] = node.right;
    }
  }
  return best_point;
}

double SdfQuery::unsigned_distance(const Vec3& p) const { return (closest_point(p) - p).norm(); }

int SdfQuery::ray_crossings(const Vec3& origin, const Vec3& dir) const {
  const Vec3 inv_d = dir.cwiseInverse();
  int hits = 0;
  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!ray_hits_box(origin, inv_d, node.box)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& t = mesh_.triangles[order_[i]];
        hits += ray_hits_triangle(origin, dir, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
      }
    } else {
      stack[top++] = node.first;
      stack[top++] = node.right;
    }
  }
  return hits;
}

bool SdfQuery::ray_parity_inside(const Vec3& p, const Vec3& dir) const { return ray_crossings(p, dir) % 2 == 1; }

bool SdfQuery::inside(const Vec3& p) const {
  if (!nodes_[0].box.contains(p)) return false;
  int votes = 0;
  for (const auto& d : vote_directions()) votes += ray_parity_inside(p, d);
  return votes >= 2;
}

double SdfQuery::signed_distance(const Vec3& p) const {
  const double d = unsigned_distance(p);
  return inside(p) ? -d : d;
}

double signed_distance(const TriMesh& mesh, const Vec3& p) { return SdfQuery(mesh).signed_distance(p); }

// ---------------------------------------------------------------- kernels

void signed_distances(const SdfQuery& query, std::span<const Vec3> points, std::span<double> out) {
  if (points.size() != out.size()) throw std::invalid_argument("signed_distances: size mismatch");
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) out[i] = query.signed_distance(points[i]);
}

void signed_distances_serial(const SdfQuery& query, std::span<const Vec3> points, std::span<double> out) {
  if (points.size() != out.size()) throw std::invalid_argument("signed_distances: size mismatch");
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = query.signed_distance(points[i]);
}

void fill_grid(const SdfQuery& query, SdfGrid& grid) {
  grid.validate();
  const auto n = static_cast<std::int64_t>(grid.node_count());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) grid.values[i] = query.signed_distance(grid.node(static_cast<std::size_t>(i)));
}

void fill_grid_serial(const SdfQuery& query, SdfGrid& grid) {
  grid.validate();
  for (std::size_t i = 0; i < grid.node_count(); ++i) grid.values[i] = query.signed_distance(grid.node(i));
}

// ---------------------------------------------------------------- sampling

SdfSampleSet sample_sdf(const TriMesh& mesh, std::size_t n, std::uint64_t seed, const SampleMix& mix) {
  return sample_sdf(SdfQuery(mesh), n, seed, mix);
}

SdfSampleSet sample_sdf(const SdfQuery& query, std::size_t n, std::uint64_t seed, const SampleMix& mix) {
  if (n == 0) throw std::invalid_argument("sample_sdf: sample count must be positive");
  const TriMesh& mesh = query.mesh();

  std::vector<double> cdf(mesh.triangles.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    acc += mesh.triangle_area(t);
    cdf[t] = acc;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto surface_point = [&]() {
    const double r = unit(rng) * acc;
    auto t = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    t = std::min(t, cdf.size() - 1);
    const auto& tri = mesh.triangles[t];
    const double s = std::sqrt(unit(rng));
    const double u = unit(rng);
    return ((1 - s) * mesh.vertices[tri[0]] + s * (1 - u) * mesh.vertices[tri[1]] + s * u * mesh.vertices[tri[2]]).eval();
  };

  const auto n_coarse =
      std::min(n, static_cast<std::size_t>(std::llround(mix.coarse_fraction * static_cast<double>(n))));
  const auto n_fine =
      std::min(n - n_coarse, static_cast<std::size_t>(std::llround(mix.fine_fraction * static_cast<double>(n))));
  const std::size_t n_near = n_coarse + n_fine;

  std::vector<Vec3> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_near) {
      const double sigma = i < n_coarse ? mix.coarse_sigma : mix.fine_sigma;
      Vec3 p = surface_point();
      for (int k = 0; k < 3; ++k) p[k] += sigma * gauss(rng);
      points.push_back(p);
    } else {
      const double r = mix.uniform_radius;
      Vec3 p;
      do {
        for (int k = 0; k < 3; ++k) p[k] = r * (2.0 * unit(rng) - 1.0);
      } while (p.squaredNorm() > r * r);
      points.push_back(p);
    }
  }

  std::vector<double> distances(n);
  signed_distances(query, points, distances);

  SdfSampleSet set;
  set.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) set.samples[i] = {points[i], distances[i]};
  return set;
}

// ---------------------------------------------------------------- normalization / volume

Normalization normalize_to_unit_sphere(const TriMesh& mesh, double pad) {
  if (mesh.vertices.empty()) throw std::invalid_argument("normalize_to_unit_sphere: empty mesh");
  const Vec3 center = mesh.bounds().center();
  double radius = 0.0;
  for (const auto& v : mesh.vertices) radius = std::max(radius, (v - center).norm());
  if (!(radius > 0.0)) throw std::invalid_argument("normalize_to_unit_sphere: mesh has zero extent");
  Normalization out;
  out.scale = (1.0 - pad) / radius;
  out.offset = center;
  out.mesh = mesh;
  for (auto& v : out.mesh.vertices) v = out.scale * (v - center);
  return out;
}

double mesh_volume(const TriMesh& mesh) {
  double six_v = 0.0;
  for (const auto& t : mesh.triangles) {
    six_v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  const double volume = six_v / 6.0;
  if (volume < 0.0) throw MeshError("negative mesh volume: inconsistent (inward) orientation");
  return volume;
}

TriMesh scale_to_volume(const TriMesh& mesh, double target) {
  if (!(target > 0.0)) throw std::invalid_argument("scale_to_volume: target volume must be positive");
  const double current = mesh_volume(mesh);
  if (!(current > 0.0)) throw MeshError("scale_to_volume: mesh volume is not positive");
  const double s = std::cbrt(target / current);
  const Vec3 c = mesh.bounds().center();
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = c + s * (v - c);
  return out;
}

// ---------------------------------------------------------------- primitives

TriMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  for (int k = 0; k < 8; ++k) {
    m.vertices.emplace_back((k & 1) ? hi.x() : lo.x(), (k & 2) ? hi.y() : lo.y(), (k & 4) ? hi.z() : lo.z());
  }
  // Quads as (a, b, c, d) counter-clockwise seen from outside.
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.triangles.push_back({std::uint32_t(q[0]), std::uint32_t(q[1]), std::uint32_t(q[2])});
    m.triangles.push_back({std::uint32_t(q[0]), std::uint32_t(q[2]), std::uint32_t(q[3])});
  }
  return m;
}

TriMesh make_icosphere(double radius, int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const auto id = static_cast<std::uint32_t>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<TriMesh::Triangle> next;
    next.reserve(m.triangles.size() * 4);
    for (const auto& t : m.triangles) {
      const auto ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

// ---------------------------------------------------------------- file formats

void write_samples(const SdfSampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  binio::put_magic(out, "SDF1");
  binio::put<std::uint64_t>(out, set.samples.size());
  binio::put_string(out, set.shape_id);
  for (const auto& s : set.samples) {
    binio::put(out, s.point.x());
    binio::put(out, s.point.y());
    binio::put(out, s.point.z());
    binio::put(out, s.distance);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SdfSampleSet read_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open sample file " + path.string());
  try {
    binio::expect_magic(in, "SDF1", "sample file");
    const auto count = binio::get<std::uint64_t>(in);
    SdfSampleSet set;
    set.shape_id = binio::get_string(in);
    if (count > (std::uint64_t{1} << 34)) throw std::runtime_error("sample count out of range");
    set.samples.resize(count);
    for (auto& s : set.samples) {
      s.point.x() = binio::get<double>(in);
      s.point.y() = binio::get<double>(in);
      s.point.z() = binio::get<double>(in);
      s.distance = binio::get<double>(in);
      if (!std::isfinite(s.distance) || !s.point.allFinite()) throw std::runtime_error("non-finite sample");
    }
    return set;
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("corrupt sample file " + path.string() + ": " + e.what());
  }
}

void write_grid(const SdfGrid& grid, const std::filesystem::path& path) {
  grid.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  binio::put_magic(out, "SDG1");
  for (int r : grid.resolution) binio::put<std::uint64_t>(out, static_cast<std::uint64_t>(r));
  for (int k = 0; k < 3; ++k) binio::put(out, grid.origin[k]);
  binio::put(out, grid.spacing);
  for (double v : grid.values) binio::put(out, v);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SdfGrid read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grid file " + path.string());
  binio::expect_magic(in, "SDG1", "grid file");
  std::array<int, 3> res{};
  for (auto& r : res) {
    const auto v = binio::get<std::uint64_t>(in);
    if (v == 0 || v > 4096) throw std::runtime_error("grid resolution out of range in " + path.string());
    r = static_cast<int>(v);
  }
  Vec3 origin;
  for (int k = 0; k < 3; ++k) origin[k] = binio::get<double>(in);
  const double spacing = binio::get<double>(in);
  SdfGrid grid(res, origin, spacing);
  for (auto& v : grid.values) v = binio::get<double>(in);
  return grid;
}

}  // namespace lf
