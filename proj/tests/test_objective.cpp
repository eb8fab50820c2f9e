#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lf/meshops.hpp"
#include "lf/objective.hpp"
#include "lf/trainset.hpp"
#include "support.hpp"

using namespace lf;
using namespace lf::mix;
using lf::test::TempDir;

namespace {

TriMesh default_element(const ChannelSpec& spec) {
  const auto prism = trainset::make_basis_shape(trainset::BaseShape::square, 2.0, 1.0, 32, 8);
  return place_element(normalize_to_unit_sphere(prism).mesh, spec, 0.003);
}

// Perimeter from every directed pair (i, j) that has all other points
// strictly on its left.
double brute_hull_perimeter(const std::vector<Vec2>& p) {
  double per = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i == j) continue;
      bool edge = true;
      for (std::size_t k = 0; k < p.size() && edge; ++k) {
        if (k == i || k == j) continue;
        const double c = (p[j] - p[i]).x() * (p[k] - p[i]).y() - (p[j] - p[i]).y() * (p[k] - p[i]).x();
        edge = c > 0;
      }
      if (edge) per += (p[j] - p[i]).norm();
    }
  }
  return per;
}

}  // namespace

TEST_SUITE("objective") {
  TEST_CASE("uniform axial flow: translation and transit time") {
    const double U = 0.7;
    const FunctionField f([&](const Vec3&) { return Vec3(U, 0, 0); });
    AdvectOptions o;
    o.dt = 1.3e-3;
    const auto t = advect(f, Vec3(0.0, 0.01, 0.002), 0.0315, o);
    CHECK(t.status == AdvectStatus::reached);
    CHECK(t.exit.x() == 0.0315);
    CHECK(t.exit.y() == 0.01);
    CHECK(t.exit.z() == 0.002);
    CHECK(std::abs(t.time - 0.0315 / U) < 1e-9);
  }

  TEST_CASE("linear shear keeps the cross-section position") {
    const FunctionField f([](const Vec3& p) { return Vec3(0.2 + 30.0 * p.z(), 0, 0); });
    for (double z : {0.0, 0.001, 0.004, 0.0075}) {
      const auto t = advect(f, Vec3(0.0, 0.012, z), 0.0315, {});
      CHECK(t.status == AdvectStatus::reached);
      CHECK(t.exit.y() == 0.012);
      CHECK(t.exit.z() == z);
    }
  }

  TEST_CASE("RK4 endpoint error drops by at least 15x when dt halves") {
    const double U = 1.0, w = 2.0 * std::numbers::pi, yc = 0.5, zc = 0.5;
    const FunctionField f([&](const Vec3& p) { return Vec3(U, -w * (p.z() - zc), w * (p.y() - yc)); });
    const Vec3 x0(0.0, 0.8, 0.5);
    const double T = 1.0;
    const Vec3 exact(T * U, yc + 0.3 * std::cos(w * T), zc + 0.3 * std::sin(w * T));
    double prev = 0.0;
    for (double dt : {0.04, 0.02, 0.01, 0.005}) {
      AdvectOptions o;
      o.dt = dt;
      const auto t = advect(f, x0, T * U, o);
      const double err = (t.exit - exact).norm();
      if (prev > 0) CHECK(prev / err >= 15.0);
      prev = err;
    }
  }

  TEST_CASE("stagnation and step limits") {
    const FunctionField still([](const Vec3&) { return Vec3(1e-9, 0, 0); });
    AdvectOptions o;
    o.stuck_steps = 10;
    const auto t = advect(still, Vec3::Zero(), 1.0, o);
    CHECK(t.status == AdvectStatus::stuck);
    CHECK(t.steps == 9);
    const FunctionField slow([](const Vec3&) { return Vec3(1e-3, 0, 0); });
    o.max_steps = 100;
    CHECK(advect(slow, Vec3::Zero(), 1.0, o).status == AdvectStatus::max_steps);
    CHECK_THROWS(advect(slow, Vec3(2, 0, 0), 1.0, o));
    o.dt = 0;
    CHECK_THROWS(advect(slow, Vec3::Zero(), 1.0, o));
  }

  TEST_CASE("parallel advection equals the serial reference") {
    const ChannelSpec spec;
    const SurrogateField field(default_element(spec), spec);
    std::vector<Vec3> starts;
    for (const auto& r : inflow_rectangles(spec, MixingConfig{}))
      for (const auto& q : r) starts.emplace_back(0.0, q.x(), q.y());
    const auto a = advect_all(field, starts, spec.length, {});
    const auto b = advect_all_serial(field, starts, spec.length, {});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].exit == b[i].exit);
      CHECK(a[i].status == b[i].status);
    }
  }

  TEST_CASE("hull examples") {
    const std::vector<Vec2> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(convex_hull_2d(sq).perimeter == 4.0);
    std::vector<Vec2> filled = sq;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int i = 0; i < 100; ++i) filled.emplace_back(u(rng), u(rng));
    const auto h = convex_hull_2d(filled);
    CHECK(h.vertices.size() == 4);
    for (const auto& c : sq) CHECK(std::find(h.vertices.begin(), h.vertices.end(), c) != h.vertices.end());
    CHECK(h.perimeter == 4.0);
    const std::vector<Vec2> line = {{0, 0}, {1, 0}, {2, 0}};
    CHECK(convex_hull_2d(line).perimeter == 4.0);
    const std::vector<Vec2> two = {{0, 0}, {1, 0}};
    CHECK_THROWS(convex_hull_2d(two));
  }

  TEST_CASE("hull agrees with the all-pairs oracle and is invariant") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Vec2> p(5 + trial);
      for (auto& q : p) q = Vec2(g(rng), g(rng));
      const auto h = convex_hull_2d(p);
      CHECK(std::abs(h.perimeter - brute_hull_perimeter(p)) < 1e-12);
      // Counter-clockwise.
      double area = 0.0;
      for (std::size_t i = 0; i < h.vertices.size(); ++i) {
        const auto& a = h.vertices[i];
        const auto& b = h.vertices[(i + 1) % h.vertices.size()];
        area += a.x() * b.y() - a.y() * b.x();
      }
      CHECK(area > 0);
      auto shuffled = p;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(convex_hull_2d(shuffled).perimeter == h.perimeter);
      const double th = 0.1 * trial;
      const Eigen::Matrix2d R = Eigen::Rotation2Dd(th).toRotationMatrix();
      auto moved = p;
      for (auto& q : moved) q = R * q + Vec2(3.0, -1.0);
      CHECK(std::abs(convex_hull_2d(moved).perimeter - h.perimeter) < 1e-9);
    }
  }

  TEST_CASE("inflow rectangles") {
    const ChannelSpec spec;
    const MixingConfig cfg;
    const auto rects = inflow_rectangles(spec, cfg);
    REQUIRE(rects.size() == 12);
    const double dy = spec.width * 0.6 / 4, dz = spec.height * 0.6 / 3;
    for (const auto& r : rects) {
      CHECK(r.size() == 16);
      Eigen::AlignedBox2d box;
      for (const auto& q : r) box.extend(q);
      CHECK(std::abs(box.sizes().x() - dy) < 1e-15);
      CHECK(std::abs(box.sizes().y() - dz) < 1e-15);
      CHECK(box.min().x() >= 0.2 * spec.width - 1e-15);
      CHECK(box.max().y() <= 0.8 * spec.height + 1e-15);
      CHECK(std::abs(convex_hull_2d(r).perimeter - 2 * (dy + dz)) < 1e-15);
    }
    MixingConfig bad;
    bad.particles_per_rect = 10;
    CHECK_THROWS(inflow_rectangles(spec, bad));
  }

  TEST_CASE("empty channel with uniform flow gives J = 0") {
    const ChannelSpec spec;
    const FunctionField f([](const Vec3&) { return Vec3(0.5, 0.0, 0.0); });
    const auto r = evaluate_mixing(f, spec, MixingConfig{});
    CHECK(std::abs(r.J) < 1e-9);
    CHECK(r.skipped == 0);
    const FunctionField drift([](const Vec3&) { return Vec3(0.5, 0.2, -0.01); });
    CHECK(std::abs(evaluate_mixing(drift, spec, MixingConfig{}).J) < 1e-9);
  }

  TEST_CASE("cross-flow shear matches the parallelogram oracle") {
    const ChannelSpec spec;
    const double U = 0.5, gamma = 40.0;
    const FunctionField f([&](const Vec3& p) { return Vec3(U, gamma * p.z(), 0.0); });
    const MixingConfig cfg;
    const auto r = evaluate_mixing(f, spec, cfg);
    // (y, z) -> (y + s z, z) with s = gamma * L / U: rectangle -> parallelogram.
    const double s = gamma * spec.length / U;
    const double dy = spec.width * cfg.inflow_portion / cfg.n_rect_y;
    const double dz = spec.height * cfg.inflow_portion / cfg.n_rect_z;
    const double expect = -(2 * dz * (std::sqrt(1 + s * s) - 1)) / (2 * (dy + dz));
    CHECK(r.J < 0);
    CHECK(test::rel_err(r.J, expect) < 0.01);
  }

  TEST_CASE("base channel flow moves every cross-section rigidly") {
    const ChannelSpec spec;
    const FunctionField f([&](const Vec3& p) { return spec.base_velocity(p); });
    CHECK(std::abs(evaluate_mixing(f, spec, MixingConfig{}).J) < 1e-6);
  }

  TEST_CASE("surrogate field rules") {
    const ChannelSpec spec;
    const TriMesh elem = default_element(spec);
    const SurrogateField field(elem, spec);
    CHECK(field.ramp_width() > 0);
    const Vec3 c = spec.center();
    CHECK(field(c) == Vec3::Zero());
    CHECK(field.phi(c) < 0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0, spec.length), uy(0, spec.width), uz(0, spec.height);
    int far = 0;
    for (int i = 0; i < 3000; ++i) {
      const Vec3 p(ux(rng), uy(rng), uz(rng));
      const double phi = field.phi(p);
      const Vec3 v = field(p);
      const Vec3 vb = spec.base_velocity(p);
      if (phi > field.ramp_width()) {
        ++far;
        REQUIRE(v == vb);
      } else if (phi < 0) {
        REQUIRE(v == Vec3::Zero());
      } else {
        REQUIRE(v.norm() <= vb.norm() * (1 + 1e-12));
      }
    }
    CHECK(far > 2500);
    for (const auto& v : elem.vertices) CHECK(field(v).norm() <= spec.base_velocity(v).norm() * (1 + 1e-12));
  }

  TEST_CASE("an element changes the hulls; J is deterministic and dt-robust") {
    const ChannelSpec spec;
    const TriMesh elem = default_element(spec);
    const SurrogateField field(elem, spec);
    const MixingConfig cfg;
    const auto a = evaluate_mixing(field, spec, cfg);
    const auto b = evaluate_mixing(field, spec, cfg);
    CHECK(a.J == b.J);
    double biggest = 0.0;
    for (const auto& r : a.rects) {
      if (!r.skipped) biggest = std::max(biggest, std::abs(r.p_out - r.p_in) / r.p_in);
    }
    CHECK(biggest > 1e-6);
    MixingConfig half = cfg;
    half.advect.dt *= 0.5;
    const double Jh = evaluate_mixing(field, spec, half).J;
    CHECK(std::abs(Jh - a.J) < 0.01 * std::abs(a.J));
    CHECK(mixing_objective(elem, spec, cfg) == a.J);
  }

  TEST_CASE("J is invariant under translating the whole configuration") {
    ChannelSpec spec;
    const TriMesh elem = default_element(spec);
    const double J0 = mixing_objective(elem, spec, MixingConfig{});
    for (const Vec3& shift : {Vec3(0.01, -0.02, 0.005), Vec3(-1.0, 2.0, 0.5)}) {
      ChannelSpec moved = spec;
      moved.origin = shift;
      const double J1 = mixing_objective(transformed(elem, 1.0, shift), moved, MixingConfig{});
      CHECK(std::abs(J1 - J0) <= 1e-6 * std::abs(J0));
    }
  }

  TEST_CASE("objective unreliable when most particles stall") {
    const ChannelSpec spec;
    const FunctionField dead([](const Vec3&) { return Vec3::Zero(); });
    try {
      evaluate_mixing(dead, spec, MixingConfig{});
      FAIL("expected an exception");
    } catch (const ObjectiveError& e) {
      CHECK(std::string(e.what()).find("objective unreliable") != std::string::npos);
    }
    // Only the upper half of the channel moves: bottom rectangles are skipped.
    const FunctionField half([&](const Vec3& p) { return p.z() > 0.5 * spec.height ? Vec3(1, 0, 0) : Vec3::Zero(); });
    const auto r = evaluate_mixing(half, spec, MixingConfig{});
    CHECK(r.skipped == 4);
    CHECK(r.stuck > 0);
  }

  TEST_CASE("trajectory dump") {
    TempDir tmp;
    const ChannelSpec spec;
    const FunctionField f([](const Vec3&) { return Vec3(1.0, 0, 0); });
    MixingConfig cfg;
    cfg.n_rect_y = 1;
    cfg.n_rect_z = 1;
    cfg.particles_per_rect = 4;
    dump_trajectories(f, spec, cfg, tmp / "traj");
    const auto text = test::slurp(tmp / "traj/particle_00_03.csv");
    CHECK(text.rfind("t,x,y,z\n0,0,", 0) == 0);
  }
}
