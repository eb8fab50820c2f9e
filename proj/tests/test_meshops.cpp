#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lf/meshops.hpp"
#include "lf/splinekit.hpp"
#include "support.hpp"

using namespace lf;
using lf::test::TempDir;

namespace {

const TriMesh& cube2() {
  static const TriMesh m = make_box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  return m;
}

// Exact SDF of the box [-1,1]^3.
double cube_sdf(const Vec3& p) {
  const Vec3 q = p.cwiseAbs() - Vec3::Ones();
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

Vec3 random_point(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

SdfGrid sphere_grid(int n, double r) {
  SdfGrid g = SdfGrid::cube(-1.0, 1.0, n);
  for (std::size_t i = 0; i < g.node_count(); ++i) g.values[i] = g.node(i).norm() - r;
  return g;
}

}  // namespace

TEST_SUITE("meshops") {
  TEST_CASE("cube signed distance examples") {
    const SdfQuery q(cube2());
    CHECK(q.signed_distance(Vec3::Zero()) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(q.signed_distance(Vec3(2, 0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(q.signed_distance(Vec3(2, 2, 2)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
    CHECK(signed_distance(cube2(), Vec3(0.5, 0.2, -0.1)) == doctest::Approx(-0.5).epsilon(1e-15));
  }

  TEST_CASE("cube SDF agrees with the analytic box distance") {
    const SdfQuery q(cube2());
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const Vec3 p = random_point(rng, 2.5);
      worst = std::max(worst, std::abs(q.signed_distance(p) - cube_sdf(p)));
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("sphere SDF within the tessellation bound") {
    const SdfQuery q(make_icosphere(1.0, 3));
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const Vec3 p = random_point(rng, 1.5);
      worst = std::max(worst, std::abs(q.signed_distance(p) - (p.norm() - 1.0)));
    }
    CHECK(worst < 0.01);
  }

  TEST_CASE("unsigned distance and sign match brute-force oracles") {
    TriMesh twisted = make_icosphere(0.9, 2);
    const auto lat = spline::make_mesh_lattice(twisted);
    twisted = spline::ffd_apply(lat, spline::apply_recipe(spline::Recipe::twist_top, 1.2, lat), twisted);
    for (const TriMesh* m : std::initializer_list<const TriMesh*>{&cube2(), &twisted}) {
      const SdfQuery q(*m);
      std::mt19937_64 rng(3);
      int disagreements = 0;
      for (int i = 0; i < 1000; ++i) {
        const Vec3 p = random_point(rng, 1.3);
        const double d = q.signed_distance(p);
        REQUIRE(std::abs(std::abs(d) - test::brute_unsigned_distance(*m, p)) < 1e-12);
        if ((d < 0) != test::brute_inside(*m, p)) ++disagreements;
      }
      CHECK(disagreements == 0);
    }
  }

  TEST_CASE("signed distance is 1-Lipschitz") {
    const SdfQuery q(make_icosphere(0.7, 2));
    std::mt19937_64 rng(4);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 p = random_point(rng, 1.2), r = random_point(rng, 1.2);
      REQUIRE(std::abs(q.signed_distance(p) - q.signed_distance(r)) <= (p - r).norm() + 1e-9);
    }
  }

  TEST_CASE("open meshes are rejected when the query is built") {
    TriMesh open = cube2();
    open.triangles.pop_back();
    CHECK_THROWS_AS(SdfQuery{open}, MeshError);
  }

  TEST_CASE("OpenMP distance kernels equal the serial reference") {
    const SdfQuery q(make_icosphere(0.8, 3));
    std::mt19937_64 rng(5);
    std::vector<Vec3> pts(5000);
    for (auto& p : pts) p = random_point(rng, 1.1);
    std::vector<double> a(pts.size()), b(pts.size());
    signed_distances(q, pts, a);
    signed_distances_serial(q, pts, b);
    CHECK(a == b);
    SdfGrid g1 = SdfGrid::cube(-1, 1, 17), g2 = g1;
    fill_grid(q, g1);
    fill_grid_serial(q, g2);
    CHECK(g1.values == g2.values);
  }

  TEST_CASE("sampling: determinism, domain, values") {
    const TriMesh sphere = make_icosphere(1.0 - kNormalizationPad, 4);
    const auto a = sample_sdf(sphere, 1000, 42);
    const auto b = sample_sdf(sphere, 1000, 42);
    TempDir tmp;
    write_samples(a, tmp / "a.sdf");
    write_samples(b, tmp / "b.sdf");
    CHECK(test::slurp(tmp / "a.sdf") == test::slurp(tmp / "b.sdf"));
    const auto c = sample_sdf(sphere, 1000, 43);
    CHECK(c.samples[0].point != a.samples[0].point);

    const SdfQuery q(sphere);
    double worst_analytic = 0.0;
    for (const auto& s : a.samples) {
      CHECK(s.point.norm() <= 1.1 + 1e-12);
      REQUIRE(s.distance == q.signed_distance(s.point));
      worst_analytic = std::max(worst_analytic, std::abs(s.distance - (s.point.norm() - (1.0 - kNormalizationPad))));
    }
    CHECK(worst_analytic < 0.01);
    CHECK_THROWS_AS(sample_sdf(sphere, 0, 1), std::invalid_argument);
  }

  TEST_CASE("sample mixture puts most points near the surface") {
    const TriMesh sphere = make_icosphere(0.9, 3);
    const auto s = sample_sdf(sphere, 4000, 7);
    int near = 0;
    for (const auto& x : s.samples) near += std::abs(x.distance) < 0.02;
    CHECK(near > 0.9 * 4000);
  }

  TEST_CASE("normalization") {
    const auto n = normalize_to_unit_sphere(cube2());
    CHECK(n.scale == doctest::Approx((1.0 - kNormalizationPad) / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(n.offset.norm() < 1e-15);
    double maxr = 0.0;
    for (const auto& v : n.mesh.vertices) maxr = std::max(maxr, v.norm());
    CHECK(maxr == doctest::Approx(1.0 - kNormalizationPad).epsilon(1e-14));

    const auto again = normalize_to_unit_sphere(n.mesh);
    CHECK(std::abs(again.scale - 1.0) < 1e-9);
    CHECK(again.offset.norm() < 1e-12);

    const Vec3 t(3, -2, 7);
    const auto moved = normalize_to_unit_sphere(transformed(cube2(), 1.0, t));
    CHECK(moved.scale == doctest::Approx(n.scale).epsilon(1e-14));
    CHECK((moved.offset - t).norm() < 1e-12);
    // original = normalized / scale + offset
    const TriMesh orig = transformed(cube2(), 1.0, t);
    for (std::size_t i = 0; i < orig.vertices.size(); ++i) {
      CHECK((moved.mesh.vertices[i] / moved.scale + moved.offset - orig.vertices[i]).norm() < 1e-12);
    }
    const auto bb = normalize_to_unit_sphere(make_box(Vec3(0, 0, 0), Vec3(4, 1, 2))).mesh.bounds();
    CHECK(bb.center().norm() < 1e-15);
  }

  TEST_CASE("volume") {
    CHECK(std::abs(mesh_volume(make_box(Vec3::Zero(), Vec3::Ones())) - 1.0) < 1e-12);
    const double sphere = mesh_volume(make_icosphere(1.0, 3));
    CHECK(test::rel_err(sphere, 4.0 * std::numbers::pi / 3.0) < 0.02);
    const TriMesh m = make_icosphere(0.6, 2);
    const double v = mesh_volume(m);
    // Power-of-two scales are exact in floating point; others round once per product.
    for (double s : {0.25, 0.5, 2.0, 4.0}) CHECK(mesh_volume(transformed(m, s, Vec3::Zero())) == v * s * s * s);
    for (double s : {0.3, 3.0, 7.5}) CHECK(test::rel_err(mesh_volume(transformed(m, s, Vec3::Zero())), v * s * s * s) < 1e-14);
    TriMesh inverted = cube2();
    for (auto& t : inverted.triangles) std::swap(t[1], t[2]);
    CHECK_THROWS_AS(mesh_volume(inverted), MeshError);
  }

  TEST_CASE("volume is unchanged by the identity deformation") {
    const TriMesh m = make_icosphere(0.8, 3);
    const auto lat = spline::make_mesh_lattice(m);
    CHECK(mesh_volume(spline::ffd_apply(lat, lat, m)) == mesh_volume(m));
  }

  TEST_CASE("scale_to_volume") {
    const TriMesh unit = make_box(Vec3::Zero(), Vec3::Ones());
    const TriMesh same = scale_to_volume(unit, 1.0);
    for (std::size_t i = 0; i < unit.vertices.size(); ++i) CHECK((same.vertices[i] - unit.vertices[i]).norm() < 1e-12);
    const TriMesh big = scale_to_volume(unit, 8.0);
    CHECK((big.bounds().extent() - Vec3::Constant(2.0)).norm() < 1e-12);
    CHECK((big.bounds().center() - unit.bounds().center()).norm() < 1e-12);
    const TriMesh s = make_icosphere(0.3, 2);
    for (double target : {0.001, 0.37, 12.5}) CHECK(test::rel_err(mesh_volume(scale_to_volume(s, target)), target) < 1e-9);
    CHECK_THROWS(scale_to_volume(unit, 0.0));
  }

  TEST_CASE("marching cubes: uniform fields and the single corner case") {
    SdfGrid g = SdfGrid::cube(-1, 1, 5);
    std::fill(g.values.begin(), g.values.end(), 1.0);
    CHECK(marching_cubes(g).empty());
    std::fill(g.values.begin(), g.values.end(), -1.0);
    CHECK(marching_cubes(g).empty());

    SdfGrid cell(std::array<int, 3>{2, 2, 2}, Vec3::Zero(), 1.0);
    std::fill(cell.values.begin(), cell.values.end(), 1.0);
    cell.at(0, 0, 0) = -1.0;
    const TriMesh one = marching_cubes(cell);
    CHECK(one.triangles.size() == 1);
    for (int c = 0; c < 8; ++c) CHECK(marching_cubes_case_triangles(1 << c) == 1);
    CHECK(marching_cubes_case_triangles(0) == 0);
    CHECK(marching_cubes_case_triangles(255) == 0);
    // Edge midpoints at the zero crossing.
    for (const auto& v : one.vertices) CHECK(std::abs(v.sum() - 0.5) < 1e-15);
    // Normal points toward the positive corners.
    CHECK(one.triangle_normal(0).dot(Vec3::Ones()) > 0);
  }

  TEST_CASE("marching cubes sphere is closed and on the sphere") {
    const SdfGrid g = sphere_grid(64, 0.7);
    const TriMesh m = marching_cubes(g);
    REQUIRE(!m.empty());
    CHECK(m.is_watertight());
    CHECK(m.boundary_edge_count() == 0);
    CHECK(m.euler_characteristic() == 2);
    double worst = 0.0;
    for (const auto& v : m.vertices) worst = std::max(worst, std::abs(v.norm() - 0.7));
    CHECK(worst < g.spacing);
    CHECK(test::rel_err(mesh_volume(m), 4.0 / 3.0 * std::numbers::pi * 0.343) < 0.01);
  }

  TEST_CASE("marching cubes on random sign-transverse fields has no boundary") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      SdfGrid g = SdfGrid::cube(0, 1, 9);
      for (auto& v : g.values) v = u(rng);
      // Positive shell so every surface closes inside the grid.
      for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 9; ++j)
          for (int i = 0; i < 9; ++i)
            if (i == 0 || j == 0 || k == 0 || i == 8 || j == 8 || k == 8) g.at(i, j, k) = 1.0;
      const TriMesh m = marching_cubes(g);
      CHECK(m.boundary_edge_count() == 0);
    }
  }

  TEST_CASE("largest component, welding and file round trips") {
    TriMesh two = make_icosphere(0.3, 2);
    const TriMesh small = transformed(make_box(Vec3::Zero(), Vec3::Ones()), 0.1, Vec3(2, 0, 0));
    const auto base = static_cast<std::uint32_t>(two.vertices.size());
    two.vertices.insert(two.vertices.end(), small.vertices.begin(), small.vertices.end());
    for (auto t : small.triangles) two.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    const TriMesh big = largest_component(two);
    CHECK(big.triangles.size() == make_icosphere(0.3, 2).triangles.size());
    CHECK(big.is_watertight());

    TempDir tmp;
    write_obj(big, tmp / "m.obj");
    const TriMesh o = read_obj(tmp / "m.obj");
    CHECK(o.triangles == big.triangles);
    for (std::size_t i = 0; i < o.vertices.size(); ++i) CHECK(o.vertices[i] == big.vertices[i]);
    write_stl(big, tmp / "m.stl");
    const TriMesh s = read_stl(tmp / "m.stl");
    CHECK(s.triangles.size() == big.triangles.size());
    CHECK(s.is_watertight());
    CHECK(std::abs(mesh_volume(s) - mesh_volume(big)) < 1e-6);
  }

  TEST_CASE("sample and grid files") {
    TempDir tmp;
    const auto set = sample_sdf(make_icosphere(0.5, 2), 300, 9);
    write_samples(set, tmp / "s.sdf");
    const auto back = read_samples(tmp / "s.sdf");
    CHECK(back.shape_id == set.shape_id);
    REQUIRE(back.samples.size() == set.samples.size());
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      CHECK(back.samples[i].point == set.samples[i].point);
      CHECK(back.samples[i].distance == set.samples[i].distance);
    }
    const auto bytes = test::slurp(tmp / "s.sdf");
    CHECK(bytes.substr(0, 4) == "SDF1");
    {
      std::ofstream cut(tmp / "cut.sdf", std::ios::binary);
      cut << bytes.substr(0, bytes.size() / 2);
    }
    try {
      read_samples(tmp / "cut.sdf");
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("cut.sdf") != std::string::npos);
    }

    const SdfGrid g = sphere_grid(12, 0.5);
    write_grid(g, tmp / "g.sdg");
    const SdfGrid h = read_grid(tmp / "g.sdg");
    CHECK(h.resolution == g.resolution);
    CHECK(h.values == g.values);
    CHECK(h.origin == g.origin);
    CHECK(h.spacing == g.spacing);
  }

  TEST_CASE("grid interpolation reproduces linear fields") {
    SdfGrid g = SdfGrid::cube(-1, 1, 6);
    for (std::size_t i = 0; i < g.node_count(); ++i) g.values[i] = Vec3(0.3, -1.2, 2.0).dot(g.node(i)) + 0.1;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
      const Vec3 p = random_point(rng, 1.0);
      CHECK(std::abs(g.interpolate(p) - (Vec3(0.3, -1.2, 2.0).dot(p) + 0.1)) < 1e-12);
    }
  }
}
