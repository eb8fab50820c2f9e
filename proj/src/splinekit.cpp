#include "lf/splinekit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace lf::spline {

KnotVector KnotVector::clamped_uniform(int degree, int n_basis, double lo, double hi) {
  if (degree < 0 || n_basis < degree + 1) {
    throw std::invalid_argument("clamped_uniform: need n_basis >= degree + 1");
  }
  KnotVector kv;
  kv.degree = degree;
  const int n_spans = n_basis - degree;
  kv.knots.assign(degree + 1, lo);
  for (int s = 1; s < n_spans; ++s) {
    kv.knots.push_back(lo + (hi - lo) * static_cast<double>(s) / n_spans);
  }
  kv.knots.insert(kv.knots.end(), degree + 1, hi);
  return kv;
}

void KnotVector::validate() const {
  if (degree < 0) throw std::invalid_argument("knot vector: negative degree");
  if (knots.size() < 2 * static_cast<std::size_t>(degree + 1)) {
    throw std::invalid_argument("knot vector: need at least 2(degree+1) knots");
  }
  if (!std::is_sorted(knots.begin(), knots.end())) {
    throw std::invalid_argument("knot vector: knots must be non-decreasing");
  }
  if (!(knots.back() > knots.front())) throw std::invalid_argument("knot vector: empty parameter range");
}

bool KnotVector::is_clamped() const {
  const auto p = static_cast<std::size_t>(degree);
  for (std::size_t i = 1; i <= p; ++i) {
    if (knots[i] != knots.front() || knots[knots.size() - 1 - i] != knots.back()) return false;
  }
  return true;
}

std::vector<double> KnotVector::greville() const {
  std::vector<double> g(basis_count());
  for (int i = 0; i < basis_count(); ++i) {
    if (degree == 0) {
      g[i] = 0.5 * (knots[i] + knots[i + 1]);
      continue;
    }
    double s = 0.0;
    for (int k = 1; k <= degree; ++k) s += knots[i + k];
    g[i] = s / degree;
  }
  return g;
}

namespace {

// Knot span index s with knots[s] <= u < knots[s+1]; the closed right end
// maps to the last nonempty span.
int find_span(const KnotVector& kv, double u) {
  const int n = kv.basis_count();
  if (u >= kv.knots[n]) {
    int s = n - 1;
    while (s > kv.degree && kv.knots[s] == kv.knots[s + 1]) --s;
    return s;
  }
  const auto it = std::upper_bound(kv.knots.begin() + kv.degree, kv.knots.begin() + n + 1, u);
  return static_cast<int>(it - kv.knots.begin()) - 1;
}

void check_domain(const KnotVector& kv, double u) {
  if (!(u >= kv.front() && u <= kv.back())) {
    throw std::domain_error("parameter " + std::to_string(u) + " outside knot range [" +
                            std::to_string(kv.front()) + ", " + std::to_string(kv.back()) + "]");
  }
}

}  // namespace

std::vector<double> basis_functions(const KnotVector& kv, double u) {
  kv.validate();
  check_domain(kv, u);
  const auto& t = kv.knots;
  const int m = static_cast<int>(t.size()) - 1;
  const int span = find_span(kv, u);

  // Degree-0 functions: indicator of the active span (the closed right end
  // belongs to the last nonempty span).
  std::vector<double> n(m, 0.0);
  n[span] = 1.0;
  for (int r = 1; r <= kv.degree; ++r) {
    for (int i = 0; i + r < m; ++i) {
      double value = 0.0;
      const double left = t[i + r] - t[i];
      if (left > 0.0) value += (u - t[i]) / left * n[i];
      const double right = t[i + r + 1] - t[i + 1];
      if (right > 0.0) value += (t[i + r + 1] - u) / right * n[i + 1];
      n[i] = value;
    }
  }
  n.resize(kv.basis_count());
  return n;
}

ActiveBasis active_basis(const KnotVector& kv, double u) {
  check_domain(kv, u);
  const int p = kv.degree;
  const int span = find_span(kv, u);
  const auto& t = kv.knots;
  // Triangular Cox-de Boor on the p+1 functions that are nonzero in span.
  std::vector<double> values(p + 1, 0.0), left(p + 1), right(p + 1);
  values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - t[span + 1 - j];
    right[j] = t[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    values[j] = saved;
  }
  return {span - p, std::move(values)};
}

void ControlLattice::validate() const {
  for (int d = 0; d < 3; ++d) {
    knots[d].validate();
    if (dims[d] < knots[d].degree + 1) {
      throw std::invalid_argument("lattice: direction " + std::to_string(d) + " needs at least degree+1 points");
    }
    if (knots[d].basis_count() != dims[d]) {
      throw std::invalid_argument("lattice: knot vector " + std::to_string(d) + " does not match point count");
    }
  }
  if (points.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]) {
    throw std::invalid_argument("lattice: point table size does not match dims");
  }
}

bool ControlLattice::same_shape(const ControlLattice& other) const {
  return dims == other.dims && knots == other.knots;
}

Vec3 ControlLattice::layer_centroid(int k) const {
  Vec3 c = Vec3::Zero();
  for (int j = 0; j < dims[1]; ++j) {
    for (int i = 0; i < dims[0]; ++i) c += at(i, j, k);
  }
  return c / static_cast<double>(dims[0] * dims[1]);
}

ControlLattice make_box_lattice(const Aabb& box, std::array<int, 3> dims, std::array<int, 3> degrees) {
  ControlLattice lat;
  lat.dims = dims;
  std::array<std::vector<double>, 3> coords;
  for (int d = 0; d < 3; ++d) {
    lat.knots[d] = KnotVector::clamped_uniform(degrees[d], dims[d]);
    coords[d] = lat.knots[d].greville();
    for (auto& g : coords[d]) g = box.lo[d] + g * (box.hi[d] - box.lo[d]);
  }
  lat.points.resize(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) lat.at(i, j, k) = Vec3(coords[0][i], coords[1][j], coords[2][k]);
    }
  }
  lat.validate();
  return lat;
}

ControlLattice make_mesh_lattice(const TriMesh& mesh, std::array<int, 3> dims, std::array<int, 3> degrees,
                                 double inflate) {
  if (mesh.vertices.empty()) throw std::invalid_argument("make_mesh_lattice: empty mesh");
  Aabb box = mesh.bounds();
  const Vec3 pad = inflate * box.extent();
  box.lo -= pad;
  box.hi += pad;
  return make_box_lattice(box, dims, degrees);
}

Vec3 evaluate_volume(const ControlLattice& lat, const Vec3& param) {
  const ActiveBasis bu = active_basis(lat.knots[0], param.x());
  const ActiveBasis bv = active_basis(lat.knots[1], param.y());
  const ActiveBasis bw = active_basis(lat.knots[2], param.z());
  Vec3 out = Vec3::Zero();
  for (std::size_t c = 0; c < bw.values.size(); ++c) {
    for (std::size_t b = 0; b < bv.values.size(); ++b) {
      const double wvb = bw.values[c] * bv.values[b];
      for (std::size_t a = 0; a < bu.values.size(); ++a) {
        out += wvb * bu.values[a] *
               lat.at(bu.first + static_cast<int>(a), bv.first + static_cast<int>(b), bw.first + static_cast<int>(c));
      }
    }
  }
  return out;
}

Vec3 evaluate_surface(const ControlNet& net, double u, double v) {
  const ActiveBasis bu = active_basis(net.knots[0], u);
  const ActiveBasis bv = active_basis(net.knots[1], v);
  Vec3 out = Vec3::Zero();
  for (std::size_t b = 0; b < bv.values.size(); ++b) {
    for (std::size_t a = 0; a < bu.values.size(); ++a) {
      const auto idx = static_cast<std::size_t>(bu.first + a) +
                       static_cast<std::size_t>(net.dims[0]) * static_cast<std::size_t>(bv.first + b);
      out += bu.values[a] * bv.values[b] * net.points.at(idx);
    }
  }
  return out;
}

TriMesh ffd_apply(const ControlLattice& undeformed, const ControlLattice& deformed, const TriMesh& mesh) {
  undeformed.validate();
  deformed.validate();
  if (!undeformed.same_shape(deformed)) {
    throw std::invalid_argument("ffd_apply: lattices differ in dims or knot vectors");
  }
  // The undeformed lattice is axis-aligned: its first and last control
  // points in each direction bound the box.
  const Vec3 lo = undeformed.points.front();
  const Vec3 hi = undeformed.points.back();
  Vec3 t0, t1;
  for (int d = 0; d < 3; ++d) {
    t0[d] = undeformed.knots[d].front();
    t1[d] = undeformed.knots[d].back();
  }

  // Displacement form: x + sum N (B' - B). Same map, since the undeformed
  // lattice reproduces the identity, but an unchanged lattice moves nothing.
  ControlLattice delta = deformed;
  for (std::size_t i = 0; i < delta.points.size(); ++i) delta.points[i] -= undeformed.points[i];

  TriMesh out;
  out.triangles = mesh.triangles;
  out.vertices.resize(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Vec3& x = mesh.vertices[v];
    Vec3 param;
    for (int d = 0; d < 3; ++d) {
      const double s = (x[d] - lo[d]) / (hi[d] - lo[d]);
      if (!(s >= -1e-12 && s <= 1.0 + 1e-12)) {
        throw std::out_of_range("ffd_apply: vertex " + std::to_string(v) + " lies outside the lattice box");
      }
      param[d] = t0[d] + std::clamp(s, 0.0, 1.0) * (t1[d] - t0[d]);
    }
    out.vertices[v] = x + evaluate_volume(delta, param);
  }
  return out;
}

std::string_view recipe_name(Recipe r) {
  switch (r) {
    case Recipe::shrink_x: return "shrink_x";
    case Recipe::translate_top_x: return "translate_top_x";
    case Recipe::translate_top_y: return "translate_top_y";
    case Recipe::expand_middle: return "expand_middle";
    case Recipe::expand_top: return "expand_top";
    case Recipe::twist_top: return "twist_top";
  }
  return "?";
}

Recipe parse_recipe(std::string_view name) {
  for (auto r : kAllRecipes) {
    if (recipe_name(r) == name) return r;
  }
  throw std::invalid_argument("unknown deformation recipe '" + std::string(name) + "'");
}

MagnitudeBounds recipe_bounds(Recipe r) {
  // Each bound keeps control layers from folding over: scale factors stay
  // positive, top-layer shifts stay below the lattice half-extent, twists
  // below a quarter turn per layer step.
  switch (r) {
    case Recipe::shrink_x: return {-1.0, 0.9};
    case Recipe::translate_top_x:
    case Recipe::translate_top_y: return {-0.5, 0.5};
    case Recipe::expand_middle:
    case Recipe::expand_top: return {-0.6, 1.0};
    case Recipe::twist_top: return {-M_PI / 2, M_PI / 2};
  }
  return {0.0, 0.0};
}

namespace {

void scale_layer_radially(ControlLattice& lat, int k, double factor) {
  const Vec3 c = lat.layer_centroid(k);
  for (int j = 0; j < lat.dims[1]; ++j) {
    for (int i = 0; i < lat.dims[0]; ++i) {
      Vec3& p = lat.at(i, j, k);
      p.x() = c.x() + factor * (p.x() - c.x());
      p.y() = c.y() + factor * (p.y() - c.y());
    }
  }
}

}  // namespace

ControlLattice apply_recipe(Recipe recipe, double magnitude, const ControlLattice& lat) {
  lat.validate();
  const auto bounds = recipe_bounds(recipe);
  if (!(magnitude >= bounds.lo && magnitude <= bounds.hi)) {
    throw std::out_of_range("magnitude " + std::to_string(magnitude) + " outside bounds of recipe " +
                            std::string(recipe_name(recipe)));
  }
  ControlLattice out = lat;
  if (magnitude == 0.0) return out;

  const int top = lat.dims[2] - 1;
  Aabb box;
  for (const auto& p : lat.points) box.extend(p);

  switch (recipe) {
    case Recipe::shrink_x: {
      Vec3 c = Vec3::Zero();
      for (const auto& p : lat.points) c += p;
      c /= static_cast<double>(lat.points.size());
      for (auto& p : out.points) p.x() = c.x() + (1.0 - magnitude) * (p.x() - c.x());
      break;
    }
    case Recipe::translate_top_x:
    case Recipe::translate_top_y: {
      const int axis = recipe == Recipe::translate_top_x ? 0 : 1;
      const double shift = magnitude * box.extent()[axis];
      for (int j = 0; j < lat.dims[1]; ++j) {
        for (int i = 0; i < lat.dims[0]; ++i) out.at(i, j, top)[axis] += shift;
      }
      break;
    }
    case Recipe::expand_middle:
      for (int k = 1; k < top; ++k) scale_layer_radially(out, k, 1.0 + magnitude);
      break;
    case Recipe::expand_top:
      scale_layer_radially(out, top, 1.0 + magnitude);
      break;
    case Recipe::twist_top:
      for (int k = 0; k <= top; ++k) {
        const double s = static_cast<double>(k) / top;
        const double angle = magnitude * s * s;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const Vec3 c = lat.layer_centroid(k);
        for (int j = 0; j < lat.dims[1]; ++j) {
          for (int i = 0; i < lat.dims[0]; ++i) {
            Vec3& p = out.at(i, j, k);
            const double dx = p.x() - c.x(), dy = p.y() - c.y();
            p.x() = c.x() + ca * dx - sa * dy;
            p.y() = c.y() + sa * dx + ca * dy;
          }
        }
      }
      break;
  }
  return out;
}

ControlLattice apply_recipe(std::string_view name, double magnitude, const ControlLattice& lat) {
  return apply_recipe(parse_recipe(name), magnitude, lat);
}

void write_lattice(const ControlLattice& lat, std::ostream& out) {
  out.precision(17);
  out << "dims " << lat.dims[0] << ' ' << lat.dims[1] << ' ' << lat.dims[2] << '\n';
  static constexpr const char* names[3] = {"u", "v", "w"};
  for (int d = 0; d < 3; ++d) {
    out << "degree_" << names[d] << ' ' << lat.knots[d].degree << '\n';
    out << "knots_" << names[d];
    for (double t : lat.knots[d].knots) out << ' ' << t;
    out << '\n';
  }
  out << "points\n";
  for (const auto& p : lat.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

ControlLattice read_lattice(std::istream& in) {
  ControlLattice lat;
  std::string line;
  bool have_points = false;
  while (!have_points && std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "dims") {
      ls >> lat.dims[0] >> lat.dims[1] >> lat.dims[2];
    } else if (key.rfind("degree_", 0) == 0 || key.rfind("knots_", 0) == 0) {
      const char axis = key.back();
      const int d = axis == 'u' ? 0 : axis == 'v' ? 1 : axis == 'w' ? 2 : -1;
      if (d < 0) throw std::invalid_argument("lattice: unknown key " + key);
      if (key[0] == 'd') {
        ls >> lat.knots[d].degree;
      } else {
        double t;
        while (ls >> t) lat.knots[d].knots.push_back(t);
      }
    } else if (key == "points") {
      have_points = true;
    } else {
      throw std::invalid_argument("lattice: unknown key " + key);
    }
    if (ls.fail() && !ls.eof()) throw std::invalid_argument("lattice: malformed line '" + line + "'");
  }
  if (!have_points) throw std::invalid_argument("lattice: missing point table");
  const std::size_t n = static_cast<std::size_t>(lat.dims[0]) * lat.dims[1] * lat.dims[2];
  lat.points.resize(n);
  for (auto& p : lat.points) {
    if (!(in >> p.x() >> p.y() >> p.z())) throw std::invalid_argument("lattice: truncated point table");
  }
  lat.validate();
  return lat;
}

void save_lattice(const ControlLattice& lat, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  write_lattice(lat, out);
}

ControlLattice load_lattice(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_lattice(in);
}

}  // namespace lf::spline
