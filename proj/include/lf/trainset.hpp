#pragma once

// Basis shapes and the FFD-deformed training corpus.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lf/geometry.hpp"
#include "lf/splinekit.hpp"

namespace lf::trainset {

enum class BaseShape { triangle, square, hexagon, cylinder };

inline constexpr std::array<BaseShape, 4> kAllBases = {BaseShape::triangle, BaseShape::square, BaseShape::hexagon,
                                                       BaseShape::cylinder};

std::string_view base_name(BaseShape b);
BaseShape parse_base(std::string_view name);

/// Closed prism of the given height (along z, centered at the origin) over a
/// regular polygon with apothem `radius`: 3, 4 and 6 sides for the polygonal
/// kinds, `facets` sides for the cylinder. Side walls are split into
/// `height_segments` rings so deformations have vertices to act on.
TriMesh make_basis_shape(BaseShape kind, double height, double radius, int facets = 32, int height_segments = 1);

using RecipeStep = std::pair<spline::Recipe, double>;

struct ShapeRecord {
  std::string id;
  BaseShape base = BaseShape::square;
  std::vector<RecipeStep> recipe_chain;
  std::string mesh_path;  // relative to the manifest directory
  std::string sdf_path;

  bool operator==(const ShapeRecord&) const = default;
};

struct CorpusManifest {
  std::vector<ShapeRecord> records;
  std::uint64_t seed = 0;
  std::size_t samples_per_shape = 0;
  std::filesystem::path base_dir;  // directory the relative paths resolve against

  std::filesystem::path mesh_file(const ShapeRecord& r) const { return base_dir / r.mesh_path; }
  std::filesystem::path sdf_file(const ShapeRecord& r) const { return base_dir / r.sdf_path; }
  const ShapeRecord* find(std::string_view id) const;

  bool operator==(const CorpusManifest& o) const {
    return records == o.records && seed == o.seed && samples_per_shape == o.samples_per_shape;
  }
};

struct RecipeGrid {
  spline::Recipe recipe;
  std::vector<double> magnitudes;
};

struct CorpusConfig {
  std::vector<BaseShape> bases{kAllBases.begin(), kAllBases.end()};
  std::vector<RecipeGrid> recipes = default_recipe_grids();
  std::size_t samples_per_shape = 20000;
  std::uint64_t seed = 1;
  std::size_t chains = 0;    // number of sampled multi-recipe records
  std::size_t max_chain = 2;
  double height = 2.0;
  double radius = 1.0;
  int facets = 32;
  int height_segments = 8;
  int lattice_points = 4;
  int lattice_degree = 2;

  static std::vector<RecipeGrid> default_recipe_grids();
  void validate() const;
};

/// Deformed base shape (before normalization) for one record.
TriMesh build_shape(const CorpusConfig& cfg, BaseShape base, const std::vector<RecipeStep>& chain);

/// Enumerate base x recipe x magnitude records (plus undeformed bases and
/// sampled chains), normalize each mesh to the unit sphere, write its OBJ and
/// SDF sample file under out_dir, and write out_dir/manifest.tsv last.
CorpusManifest generate_corpus(const CorpusConfig& cfg, const std::filesystem::path& out_dir);

/// Record list without touching the filesystem; ids sorted.
std::vector<ShapeRecord> enumerate_records(const CorpusConfig& cfg);

inline constexpr const char* kManifestName = "manifest.tsv";

void write_manifest(const CorpusManifest& m, std::ostream& out);
CorpusManifest read_manifest(std::istream& in);
void save_manifest(const CorpusManifest& m, const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);

}  // namespace lf::trainset
