#include "lf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "lf/binio.hpp"

namespace lf {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
}

// Signed use count per undirected edge: +1 for a->b with a<b, -1 otherwise.
struct EdgeUse {
  int count = 0;
  int orientation = 0;
};

std::unordered_map<std::uint64_t, EdgeUse> edge_uses(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, EdgeUse> uses;
  uses.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto a = t[k];
      const auto b = t[(k + 1) % 3];
      auto& e = uses[edge_key(a, b)];
      ++e.count;
      e.orientation += a < b ? 1 : -1;
    }
  }
  return uses;
}

struct DisjointSet {
  std::vector<std::uint32_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

double Aabb::squared_distance(const Vec3& p) const {
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec3::Zero());
  return d.squaredNorm();
}

Aabb TriMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

void TriMesh::validate() const {
  const auto n = vertices.size();
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (auto idx : triangles[t]) {
      if (idx >= n) {
        throw MeshError("triangle " + std::to_string(t) + " references vertex " +
                        std::to_string(idx) + " of " + std::to_string(n));
      }
    }
    if (!(triangle_area(t) > 0.0)) {
      throw MeshError("triangle " + std::to_string(t) + " is degenerate (zero area)");
    }
  }
}

bool TriMesh::is_watertight() const {
  if (triangles.empty()) return false;
  for (const auto& [key, use] : edge_uses(*this)) {
    if (use.count != 2 || use.orientation != 0) return false;
  }
  return true;
}

std::size_t TriMesh::boundary_edge_count() const {
  std::size_t n = 0;
  for (const auto& [key, use] : edge_uses(*this)) n += (use.count % 2 != 0);
  return n;
}

std::size_t TriMesh::unique_edge_count() const { return edge_uses(*this).size(); }

long TriMesh::euler_characteristic() const {
  std::vector<bool> used(vertices.size(), false);
  for (const auto& t : triangles) {
    for (auto idx : t) used[idx] = true;
  }
  const long v = std::count(used.begin(), used.end(), true);
  return v - static_cast<long>(unique_edge_count()) + static_cast<long>(triangles.size());
}

Vec3 TriMesh::triangle_normal(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3& a = vertices[tri[0]];
  return (vertices[tri[1]] - a).cross(vertices[tri[2]] - a);
}

double TriMesh::triangle_area(std::size_t t) const { return 0.5 * triangle_normal(t).norm(); }

double TriMesh::surface_area() const {
  double area = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) area += triangle_area(t);
  return area;
}

TriMesh transformed(const TriMesh& mesh, double scale, const Vec3& offset) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = scale * v + offset;
  return out;
}

TriMesh largest_component(const TriMesh& mesh) {
  if (mesh.triangles.empty()) return mesh;
  DisjointSet sets(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    sets.unite(t[0], t[1]);
    sets.unite(t[1], t[2]);
  }
  std::map<std::uint32_t, std::size_t> tri_count;
  for (const auto& t : mesh.triangles) ++tri_count[sets.find(t[0])];
  // Ties go to the component with the smallest root index.
  std::uint32_t best_root = tri_count.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [root, count] : tri_count) {
    if (count > best_count) {
      best_count = count;
      best_root = root;
    }
  }

  TriMesh out;
  std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
  for (const auto& t : mesh.triangles) {
    if (sets.find(t[0]) != best_root) continue;
    TriMesh::Triangle nt{};
    for (int k = 0; k < 3; ++k) {
      auto& r = remap[t[k]];
      if (r < 0) {
        r = static_cast<std::int64_t>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[t[k]]);
      }
      nt[k] = static_cast<std::uint32_t>(r);
    }
    out.triangles.push_back(nt);
  }
  return out;
}

TriMesh weld_vertices(const TriMesh& mesh) {
  auto less = [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  };
  std::map<Vec3, std::uint32_t, decltype(less)> index(less);
  TriMesh out;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    auto [it, inserted] = index.emplace(mesh.vertices[i], static_cast<std::uint32_t>(out.vertices.size()));
    if (inserted) out.vertices.push_back(mesh.vertices[i]);
    remap[i] = it->second;
  }
  out.triangles.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return out;
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open " + path.string() + " for writing");
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw MeshError("write failed: " + path.string());
}

TriMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path.string());
  TriMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw MeshError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::uint32_t> corners;
      std::string tok;
      while (ls >> tok) {
        // Accept "i", "i/t", "i/t/n", "i//n"; negative indices are relative.
        const long idx = std::stol(tok.substr(0, tok.find('/')));
        const long resolved = idx < 0 ? static_cast<long>(mesh.vertices.size()) + idx : idx - 1;
        if (resolved < 0) throw MeshError(path.string() + ":" + std::to_string(line_no) + ": bad face index");
        corners.push_back(static_cast<std::uint32_t>(resolved));
      }
      if (corners.size() < 3) throw MeshError(path.string() + ":" + std::to_string(line_no) + ": face needs 3 corners");
      for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
        mesh.triangles.push_back({corners[0], corners[k], corners[k + 1]});
      }
    }
  }
  for (const auto& t : mesh.triangles) {
    for (auto idx : t) {
      if (idx >= mesh.vertices.size()) throw MeshError(path.string() + ": face index out of range");
    }
  }
  return mesh;
}

void write_stl(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot open " + path.string() + " for writing");
  char header[80] = "latentform binary STL";
  out.write(header, sizeof header);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    Vec3 n = mesh.triangle_normal(t);
    if (n.norm() > 0) n.normalize();
    for (int k = 0; k < 3; ++k) binio::put<float>(out, static_cast<float>(n[k]));
    for (auto idx : mesh.triangles[t]) {
      for (int k = 0; k < 3; ++k) binio::put<float>(out, static_cast<float>(mesh.vertices[idx][k]));
    }
    binio::put<std::uint16_t>(out, 0);
  }
  if (!out) throw MeshError("write failed: " + path.string());
}

TriMesh read_stl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MeshError("cannot open " + path.string());
  char header[80];
  if (!in.read(header, sizeof header)) throw MeshError(path.string() + ": truncated STL header");
  TriMesh soup;
  try {
    const auto count = binio::get<std::uint32_t>(in);
    soup.vertices.reserve(3 * std::size_t{count});
    for (std::uint32_t t = 0; t < count; ++t) {
      for (int k = 0; k < 3; ++k) binio::get<float>(in);
      for (std::uint32_t c = 0; c < 3; ++c) {
        Vec3 v;
        for (int k = 0; k < 3; ++k) v[k] = binio::get<float>(in);
        soup.vertices.push_back(v);
      }
      binio::get<std::uint16_t>(in);
      soup.triangles.push_back({3 * t, 3 * t + 1, 3 * t + 2});
    }
  } catch (const std::runtime_error& e) {
    throw MeshError(path.string() + ": " + e.what());
  }
  return weld_vertices(soup);
}

TriMesh read_mesh(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".stl" || ext == ".STL") return read_stl(path);
  return read_obj(path);
}

void write_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".stl" || ext == ".STL") {
    write_stl(mesh, path);
  } else {
    write_obj(mesh, path);
  }
}

}  // namespace lf
