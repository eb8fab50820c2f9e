#pragma once

// B-spline bases, trivariate spline volumes and free-form deformation.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lf/geometry.hpp"

namespace lf::spline {

struct KnotVector {
  int degree = 0;
  std::vector<double> knots;

  /// Clamped knot vector with uniformly spaced interior knots over [lo, hi].
  static KnotVector clamped_uniform(int degree, int n_basis, double lo = 0.0, double hi = 1.0);

  int basis_count() const { return static_cast<int>(knots.size()) - degree - 1; }
  double front() const { return knots.front(); }
  double back() const { return knots.back(); }

  /// Throws std::invalid_argument when the knot vector is not a valid
  /// non-decreasing sequence of length >= 2(degree+1).
  void validate() const;
  bool is_clamped() const;

  /// Greville abscissae: the parameter value associated with each control
  /// point. Control points placed there make the spline reproduce linears.
  std::vector<double> greville() const;

  bool operator==(const KnotVector&) const = default;
};

/// All N_{i,degree}(u), i = 0..basis_count()-1, by the Cox-de Boor recursion.
/// Throws std::domain_error when u is outside [front, back].
std::vector<double> basis_functions(const KnotVector& kv, double u);

/// Index of the first nonzero basis function at u and the degree+1 nonzero
/// values starting there. Same results as basis_functions, without the zeros.
struct ActiveBasis {
  int first = 0;
  std::vector<double> values;
};
ActiveBasis active_basis(const KnotVector& kv, double u);

/// Tensor-product control grid. points are stored with u fastest:
/// index(i, j, k) = i + n_u * (j + n_v * k).
struct ControlLattice {
  std::array<int, 3> dims{};
  std::vector<Vec3> points;
  std::array<KnotVector, 3> knots;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) *
           (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  Vec3& at(int i, int j, int k) { return points[index(i, j, k)]; }
  const Vec3& at(int i, int j, int k) const { return points[index(i, j, k)]; }

  void validate() const;
  bool same_shape(const ControlLattice& other) const;

  /// Centroid of the control points in one w-layer (horizontal slice).
  Vec3 layer_centroid(int k) const;

  bool operator==(const ControlLattice&) const = default;
};

/// Axis-aligned lattice over box [lo, hi] with clamped uniform knots on
/// [0,1]. Control points sit at the Greville abscissae, so evaluating the
/// undeformed lattice is the identity map of the box.
ControlLattice make_box_lattice(const Aabb& box, std::array<int, 3> dims = {4, 4, 4},
                                std::array<int, 3> degrees = {2, 2, 2});

/// Bounding lattice of a mesh: its bounding box inflated by `inflate`
/// (relative, per side) so every vertex is strictly inside.
ControlLattice make_mesh_lattice(const TriMesh& mesh, std::array<int, 3> dims = {4, 4, 4},
                                 std::array<int, 3> degrees = {2, 2, 2}, double inflate = 0.01);

/// Sum_ijk N_i(xi) N_j(eta) N_k(zeta) B_ijk.
Vec3 evaluate_volume(const ControlLattice& lat, const Vec3& param);

/// Bivariate counterpart: a control net of n_u x n_v points (u fastest).
struct ControlNet {
  std::array<int, 2> dims{};
  std::vector<Vec3> points;
  std::array<KnotVector, 2> knots;
};
Vec3 evaluate_surface(const ControlNet& net, double u, double v);

/// Deform `mesh` by the lattice pair. `undeformed` must be the axis-aligned
/// box lattice the mesh is embedded in; vertex parameters come from affine
/// inversion of that box. Connectivity is copied unchanged.
TriMesh ffd_apply(const ControlLattice& undeformed, const ControlLattice& deformed, const TriMesh& mesh);

// Deformation recipes. A magnitude of 0 is the identity for every recipe.
enum class Recipe { shrink_x, translate_top_x, translate_top_y, expand_middle, expand_top, twist_top };

inline constexpr std::array<Recipe, 6> kAllRecipes = {Recipe::shrink_x,      Recipe::translate_top_x,
                                                      Recipe::translate_top_y, Recipe::expand_middle,
                                                      Recipe::expand_top,    Recipe::twist_top};

std::string_view recipe_name(Recipe r);
/// Throws std::invalid_argument for unknown names.
Recipe parse_recipe(std::string_view name);

struct MagnitudeBounds {
  double lo;
  double hi;
};
MagnitudeBounds recipe_bounds(Recipe r);

/// Deformed copy of `lat`. Layers are indexed along w (the vertical axis):
///  - shrink_x(m): x of every control point scaled by (1-m) about the lattice centroid.
///  - translate_top_x/y(m): top layer shifted by m times the lattice extent in x/y.
///  - expand_middle(m): interior layers scaled radially by (1+m) about their centroid.
///  - expand_top(m): top layer scaled radially by (1+m).
///  - twist_top(m): layer k rotated by m*(k/(n_w-1))^2 radians about the vertical
///    centroid axis.
/// Throws std::out_of_range when the magnitude is outside recipe_bounds.
ControlLattice apply_recipe(Recipe recipe, double magnitude, const ControlLattice& lat);
ControlLattice apply_recipe(std::string_view name, double magnitude, const ControlLattice& lat);

// Plain-text lattice format: "key value..." header lines followed by one
// "x y z" row per control point.
void write_lattice(const ControlLattice& lat, std::ostream& out);
ControlLattice read_lattice(std::istream& in);
void save_lattice(const ControlLattice& lat, const std::filesystem::path& path);
ControlLattice load_lattice(const std::filesystem::path& path);

}  // namespace lf::spline
