#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "lf/meshops.hpp"
#include "lf/trainset.hpp"
#include "support.hpp"

using namespace lf;
using namespace lf::trainset;
using lf::test::TempDir;

namespace {

CorpusConfig tiny_config() {
  CorpusConfig cfg;
  cfg.bases = {BaseShape::square, BaseShape::hexagon};
  cfg.recipes = {{spline::Recipe::twist_top, {0.0, 0.6}}, {spline::Recipe::expand_top, {0.3}}};
  cfg.samples_per_shape = 400;
  cfg.seed = 5;
  cfg.chains = 2;
  cfg.facets = 16;
  cfg.height_segments = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("trainset") {
  TEST_CASE("basis shapes") {
    const TriMesh sq = make_basis_shape(BaseShape::square, 2.0, 1.0);
    CHECK(std::abs(mesh_volume(sq) - 8.0) < 1e-9);
    for (auto b : kAllBases) {
      const TriMesh m = make_basis_shape(b, 2.0, 1.0, 32, 3);
      CHECK(m.is_watertight());
      CHECK(m.euler_characteristic() == 2);
      CHECK(mesh_volume(m) > 0.0);
      m.validate();
    }
    const TriMesh tri = make_basis_shape(BaseShape::triangle, 2.0, 1.0, 32, 1);
    CHECK(tri.triangles.size() == 8);
    CHECK(tri.vertices.size() == 6);

    // Regular n-gon with apothem r has area n r^2 tan(pi/n).
    const TriMesh cyl = make_basis_shape(BaseShape::cylinder, 2.0, 1.0, 64);
    const double polygon = 64 * std::tan(std::numbers::pi / 64) * 2.0;
    CHECK(test::rel_err(mesh_volume(cyl), polygon) < 1e-12);
    CHECK(test::rel_err(mesh_volume(cyl), 2.0 * std::numbers::pi) < 0.005);
    const TriMesh hex = make_basis_shape(BaseShape::hexagon, 1.5, 0.5);
    CHECK(test::rel_err(mesh_volume(hex), 6 * std::tan(std::numbers::pi / 6) * 0.25 * 1.5) < 1e-12);

    CHECK_THROWS(make_basis_shape(BaseShape::cylinder, 2.0, 1.0, 2));
    CHECK_THROWS(make_basis_shape(BaseShape::square, -1.0, 1.0));
    for (auto b : kAllBases) CHECK(parse_base(base_name(b)) == b);
    CHECK_THROWS(parse_base("pentagon"));
  }

  TEST_CASE("record enumeration counts") {
    CorpusConfig cfg;
    const auto recs = enumerate_records(cfg);
    CHECK(recs.size() == 4 * 6 * 3 + 4);
    std::set<std::string> ids;
    for (const auto& r : recs) {
      ids.insert(r.id);
      CHECK(r.recipe_chain.size() <= cfg.max_chain);
    }
    CHECK(ids.size() == recs.size());
    CHECK(std::is_sorted(recs.begin(), recs.end(), [](auto& a, auto& b) { return a.id < b.id; }));

    cfg.chains = 10;
    const auto with_chains = enumerate_records(cfg);
    CHECK(with_chains.size() == 86);
    int chained = 0;
    for (const auto& r : with_chains) chained += r.recipe_chain.size() == 2;
    CHECK(chained == 10);
    CHECK(enumerate_records(cfg) == with_chains);
  }

  TEST_CASE("zero magnitude leaves the base shape") {
    CorpusConfig cfg;
    for (auto b : kAllBases) {
      const TriMesh base = build_shape(cfg, b, {});
      for (auto r : spline::kAllRecipes) {
        const TriMesh m = build_shape(cfg, b, {{r, 0.0}});
        REQUIRE(m.vertices.size() == base.vertices.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < m.vertices.size(); ++i) worst = std::max(worst, (m.vertices[i] - base.vertices[i]).norm());
        CHECK(worst < 1e-9);
      }
    }
  }

  TEST_CASE("every default recipe yields a closed positive-volume shape") {
    CorpusConfig cfg;
    for (auto b : kAllBases) {
      for (const auto& g : cfg.recipes) {
        for (double m : g.magnitudes) {
          const TriMesh shape = build_shape(cfg, b, {{g.recipe, m}});
          CHECK(shape.is_watertight());
          CHECK(mesh_volume(shape) > 0.0);
        }
      }
    }
  }

  TEST_CASE("corpus generation is deterministic and consistent") {
    const auto cfg = tiny_config();
    TempDir t1, t2;
    const auto m1 = generate_corpus(cfg, t1 / "c");
    const auto m2 = generate_corpus(cfg, t2 / "c");
    CHECK(m1 == m2);
    CHECK(m1.records.size() == enumerate_records(cfg).size());
    CHECK(test::slurp(t1 / "c/manifest.tsv") == test::slurp(t2 / "c/manifest.tsv"));
    for (const auto& r : m1.records) {
      CHECK(test::slurp(m1.sdf_file(r)) == test::slurp(m2.sdf_file(r)));
      CHECK(test::slurp(m1.mesh_file(r)) == test::slurp(m2.mesh_file(r)));
    }

    std::mt19937_64 rng(1);
    for (const auto& r : m1.records) {
      const TriMesh mesh = read_obj(m1.mesh_file(r));
      CHECK(mesh.is_watertight());
      CHECK(mesh_volume(mesh) > 0.0);
      const auto set = read_samples(m1.sdf_file(r));
      CHECK(set.shape_id == r.id);
      CHECK(set.samples.size() == cfg.samples_per_shape);
      for (int k = 0; k < 100; ++k) {
        const auto& s = set.samples[std::uniform_int_distribution<std::size_t>(0, set.samples.size() - 1)(rng)];
        // OBJ round trip is exact, so the oracle sees the same surface.
        const bool inside = test::brute_inside(mesh, s.point);
        if (std::abs(s.distance) > 1e-9) CHECK((s.distance < 0) == inside);
      }
    }
    const auto loaded = load_manifest(t1 / "c/manifest.tsv");
    CHECK(loaded == m1);
  }

  TEST_CASE("manifest text round trip") {
    CorpusManifest m;
    m.seed = 99;
    m.samples_per_shape = 1234;
    m.records = enumerate_records(tiny_config());
    std::stringstream ss;
    write_manifest(m, ss);
    CHECK(read_manifest(ss) == m);
    std::istringstream bad("a\tsquare\n");
    CHECK_THROWS(read_manifest(bad));
  }

  TEST_CASE("missing output parent fails before writing") {
    TempDir tmp;
    const auto target = tmp / "missing/corpus";
    CHECK_THROWS(generate_corpus(tiny_config(), target));
    CHECK(!std::filesystem::exists(tmp / "missing"));
  }

  TEST_CASE("invalid configs") {
    auto cfg = tiny_config();
    cfg.samples_per_shape = 0;
    CHECK_THROWS(enumerate_records(cfg));
    cfg = tiny_config();
    cfg.recipes[0].magnitudes.push_back(5.0);
    CHECK_THROWS(enumerate_records(cfg));
    cfg = tiny_config();
    cfg.bases.clear();
    CHECK_THROWS(enumerate_records(cfg));
  }
}
