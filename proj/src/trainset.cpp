#include "lf/trainset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lf/meshops.hpp"

namespace lf::trainset {

namespace fs = std::filesystem;

std::string_view base_name(BaseShape b) {
  switch (b) {
    case BaseShape::triangle: return "triangle";
    case BaseShape::square: return "square";
    case BaseShape::hexagon: return "hexagon";
    case BaseShape::cylinder: return "cylinder";
  }
  return "?";
}

BaseShape parse_base(std::string_view name) {
  for (auto b : kAllBases) {
    if (base_name(b) == name) return b;
  }
  throw std::invalid_argument("unknown base shape '" + std::string(name) + "'");
}

TriMesh make_basis_shape(BaseShape kind, double height, double radius, int facets, int height_segments) {
  if (!(height > 0.0) || !(radius > 0.0)) throw std::invalid_argument("basis shape: height and radius must be positive");
  if (facets < 3) throw std::invalid_argument("basis shape: need at least 3 facets");
  if (height_segments < 1) throw std::invalid_argument("basis shape: need at least one height segment");
  const int sides = kind == BaseShape::triangle ? 3 : kind == BaseShape::square ? 4 : kind == BaseShape::hexagon ? 6 : facets;
  const double circumradius = radius / std::cos(M_PI / sides);

  TriMesh m;
  for (int ring = 0; ring <= height_segments; ++ring) {
    const double z = -0.5 * height + height * ring / height_segments;
    for (int k = 0; k < sides; ++k) {
      // Offset by half a step so the square has axis-aligned faces.
      const double a = M_PI * (2 * k + 1) / sides;
      m.vertices.emplace_back(circumradius * std::cos(a), circumradius * std::sin(a), z);
    }
  }
  auto vid = [&](int ring, int k) { return static_cast<std::uint32_t>(ring * sides + (k % sides)); };
  for (int ring = 0; ring < height_segments; ++ring) {
    for (int k = 0; k < sides; ++k) {
      const auto a = vid(ring, k), b = vid(ring, k + 1), c = vid(ring + 1, k + 1), d = vid(ring + 1, k);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }
  for (int k = 1; k + 1 < sides; ++k) {
    m.triangles.push_back({vid(0, 0), vid(0, k + 1), vid(0, k)});
    m.triangles.push_back({vid(height_segments, 0), vid(height_segments, k), vid(height_segments, k + 1)});
  }
  return m;
}

const ShapeRecord* CorpusManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<RecipeGrid> CorpusConfig::default_recipe_grids() {
  using spline::Recipe;
  return {
      {Recipe::shrink_x, {0.15, 0.3, 0.45}},
      {Recipe::translate_top_x, {0.1, 0.2, 0.3}},
      {Recipe::translate_top_y, {0.1, 0.2, 0.3}},
      {Recipe::expand_middle, {0.15, 0.3, 0.5}},
      {Recipe::expand_top, {-0.3, 0.25, 0.5}},
      {Recipe::twist_top, {0.4, 0.8, 1.2}},
  };
}

void CorpusConfig::validate() const {
  if (bases.empty()) throw std::invalid_argument("corpus: no base shapes");
  if (samples_per_shape == 0) throw std::invalid_argument("corpus: samples_per_shape must be positive");
  if (max_chain < 1) throw std::invalid_argument("corpus: max_chain must be at least 1");
  if (chains > 0 && (recipes.size() < 2 || max_chain < 2)) {
    throw std::invalid_argument("corpus: chains need at least two recipes and max_chain >= 2");
  }
  for (const auto& g : recipes) {
    const auto b = spline::recipe_bounds(g.recipe);
    for (double m : g.magnitudes) {
      if (!(m >= b.lo && m <= b.hi)) {
        throw std::out_of_range("corpus: magnitude " + std::to_string(m) + " outside bounds of " +
                                std::string(spline::recipe_name(g.recipe)));
      }
    }
  }
}

TriMesh build_shape(const CorpusConfig& cfg, BaseShape base, const std::vector<RecipeStep>& chain) {
  const TriMesh mesh = make_basis_shape(base, cfg.height, cfg.radius, cfg.facets, cfg.height_segments);
  if (chain.empty()) return mesh;
  const int n = cfg.lattice_points, p = cfg.lattice_degree;
  const auto lattice = spline::make_mesh_lattice(mesh, {n, n, n}, {p, p, p});
  auto deformed = lattice;
  for (const auto& [recipe, magnitude] : chain) deformed = spline::apply_recipe(recipe, magnitude, deformed);
  return spline::ffd_apply(lattice, deformed, mesh);
}

std::vector<ShapeRecord> enumerate_records(const CorpusConfig& cfg) {
  cfg.validate();
  std::vector<ShapeRecord> records;
  for (auto base : cfg.bases) {
    const std::string b(base_name(base));
    records.push_back({b + "-base", base, {}, "", ""});
    for (const auto& grid : cfg.recipes) {
      for (std::size_t m = 0; m < grid.magnitudes.size(); ++m) {
        records.push_back({b + "-" + std::string(spline::recipe_name(grid.recipe)) + "-" + std::to_string(m), base,
                           {{grid.recipe, grid.magnitudes[m]}}, "", ""});
      }
    }
  }

  std::mt19937_64 rng(cfg.seed ^ 0x5eed'c0de'cafe'f00dULL);
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    const auto base = cfg.bases[std::uniform_int_distribution<std::size_t>(0, cfg.bases.size() - 1)(rng)];
    const std::size_t length = std::min<std::size_t>(cfg.max_chain, 2);
    std::vector<std::size_t> picks;
    while (picks.size() < length) {
      const auto r = std::uniform_int_distribution<std::size_t>(0, cfg.recipes.size() - 1)(rng);
      if (std::find(picks.begin(), picks.end(), r) == picks.end()) picks.push_back(r);
    }
    std::vector<RecipeStep> chain;
    for (auto r : picks) {
      const auto& mags = cfg.recipes[r].magnitudes;
      if (mags.empty()) continue;
      chain.emplace_back(cfg.recipes[r].recipe, mags[std::uniform_int_distribution<std::size_t>(0, mags.size() - 1)(rng)]);
    }
    char idx[16];
    std::snprintf(idx, sizeof idx, "%04zu", c);
    records.push_back({std::string(base_name(base)) + "-chain-" + idx, base, chain, "", ""});
  }

  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].id == records[i - 1].id) throw std::invalid_argument("corpus: duplicate shape id " + records[i].id);
  }
  for (auto& r : records) {
    r.mesh_path = "meshes/" + r.id + ".obj";
    r.sdf_path = "sdf/" + r.id + ".sdf";
  }
  return records;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("manifest: bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

CorpusManifest generate_corpus(const CorpusConfig& cfg, const fs::path& out_dir) {
  auto records = enumerate_records(cfg);
  if (!out_dir.parent_path().empty() && !fs::exists(out_dir.parent_path())) {
    throw std::runtime_error("output parent directory does not exist: " + out_dir.parent_path().string());
  }
  fs::create_directories(out_dir / "meshes");
  fs::create_directories(out_dir / "sdf");

  const auto n = static_cast<std::int64_t>(records.size());
  std::vector<std::string> errors(records.size());
  // Records are independent; each writes only its own files.
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& rec = records[i];
    try {
      const TriMesh shape = build_shape(cfg, rec.base, rec.recipe_chain);
      const auto norm = normalize_to_unit_sphere(shape);
      if (!norm.mesh.is_watertight()) throw MeshError("deformed mesh is not watertight");
      if (!(mesh_volume(norm.mesh) > 0.0)) throw MeshError("deformed mesh has no volume");
      write_obj(norm.mesh, out_dir / rec.mesh_path);
      auto samples = sample_sdf(norm.mesh, cfg.samples_per_shape, splitmix64(cfg.seed + static_cast<std::uint64_t>(i)));
      samples.shape_id = rec.id;
      write_samples(samples, out_dir / rec.sdf_path);
    } catch (const std::exception& e) {
      errors[i] = rec.id + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error("corpus generation failed for " + e);
  }

  CorpusManifest manifest;
  manifest.records = std::move(records);
  manifest.seed = cfg.seed;
  manifest.samples_per_shape = cfg.samples_per_shape;
  manifest.base_dir = out_dir;
  save_manifest(manifest, out_dir / kManifestName);
  return manifest;
}

void write_manifest(const CorpusManifest& m, std::ostream& out) {
  out << "# latentform corpus manifest\n";
  out << "# seed=" << m.seed << '\n';
  out << "# samples_per_shape=" << m.samples_per_shape << '\n';
  for (const auto& r : m.records) {
    std::string chain;
    for (const auto& [recipe, mag] : r.recipe_chain) {
      if (!chain.empty()) chain += ',';
      chain += std::string(spline::recipe_name(recipe)) + ":" + format_double(mag);
    }
    if (chain.empty()) chain = "none";
    out << r.id << '\t' << base_name(r.base) << '\t' << chain << '\t' << r.mesh_path << '\t' << r.sdf_path << '\n';
  }
}

CorpusManifest read_manifest(std::istream& in) {
  CorpusManifest m;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(2, eq - 2);
      const auto value = line.substr(eq + 1);
      if (key == "seed") m.seed = std::stoull(value);
      if (key == "samples_per_shape") m.samples_per_shape = std::stoull(value);
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 5) {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": expected 5 tab-separated fields");
    }
    ShapeRecord r;
    r.id = fields[0];
    r.base = parse_base(fields[1]);
    if (fields[2] != "none") {
      for (const auto& step : split(fields[2], ',')) {
        const auto colon = step.find(':');
        if (colon == std::string::npos) {
          throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": bad recipe '" + step + "'");
        }
        r.recipe_chain.emplace_back(spline::parse_recipe(step.substr(0, colon)), parse_double(step.substr(colon + 1)));
      }
    }
    r.mesh_path = fields[3];
    r.sdf_path = fields[4];
    if (!ids.insert(r.id).second) throw std::invalid_argument("manifest: duplicate id " + r.id);
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const CorpusManifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_manifest(m, out);
}

CorpusManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  auto m = read_manifest(in);
  m.base_dir = path.parent_path();
  return m;
}

}  // namespace lf::trainset
