#include "lf/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lf::mix {

void ChannelSpec::validate() const {
  if (!(length > 0.0 && width > 0.0 && height > 0.0)) throw std::invalid_argument("channel: dimensions must be positive");
  if (!(barrel_speed > 0.0)) throw std::invalid_argument("channel: barrel speed must be positive");
  if (!std::isfinite(barrel_angle) || !std::isfinite(axial_speed) || !origin.allFinite()) throw std::invalid_argument("channel: bad flow parameters");
}

Vec3 ChannelSpec::base_velocity(const Vec3& p) const {
  const double r = (p.z() - origin.z()) / height;
  return {axial_speed + barrel_speed * std::cos(barrel_angle) * r, barrel_speed * std::sin(barrel_angle) * r, 0.0};
}

// ---------------------------------------------------------------- surrogate

SurrogateField::SurrogateField(const TriMesh& element, const ChannelSpec& spec, const SurrogateOptions& opts)
    : spec_(spec) {
  spec.validate();
  if (!(opts.ramp_fraction > 0.0) || opts.sdf_resolution < 4) throw std::invalid_argument("surrogate: bad options");
  const Aabb box = element.bounds();
  if (box.empty()) throw std::invalid_argument("surrogate: empty element mesh");
  double radius = 0.0;
  for (const auto& v : element.vertices) radius = std::max(radius, (v - box.center()).norm());
  ramp_ = opts.ramp_fraction * radius;

  const Vec3 extent = box.extent() + Vec3::Constant(4.0 * ramp_);
  const double spacing = extent.maxCoeff() / (opts.sdf_resolution - 1);
  const Vec3 lo = box.lo - Vec3::Constant(2.0 * ramp_ + spacing);
  std::array<int, 3> res{};
  for (int a = 0; a < 3; ++a) res[a] = static_cast<int>(std::ceil((extent[a] + 2.0 * spacing) / spacing)) + 1;
  grid_ = SdfGrid(res, lo, spacing);
  fill_grid(SdfQuery(element), grid_);
  far_ = 2.0 * ramp_;
}

namespace {

// Trilinear value and gradient inside the grid box.
double trilinear(const SdfGrid& g, const Vec3& p, Vec3* grad) {
  const Vec3 u = (p - g.origin) / g.spacing;
  int c[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>(std::floor(u[a])), 0, g.resolution[a] - 2);
    f[a] = std::clamp(u[a] - c[a], 0.0, 1.0);
  }
  double v[2][2][2];
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) v[di][dj][dk] = g.at(c[0] + di, c[1] + dj, c[2] + dk);
  const double x0 = 1.0 - f[0], y0 = 1.0 - f[1], z0 = 1.0 - f[2];
  const double x1 = f[0], y1 = f[1], z1 = f[2];
  const double value = x0 * y0 * z0 * v[0][0][0] + x1 * y0 * z0 * v[1][0][0] + x0 * y1 * z0 * v[0][1][0] +
                       x1 * y1 * z0 * v[1][1][0] + x0 * y0 * z1 * v[0][0][1] + x1 * y0 * z1 * v[1][0][1] +
                       x0 * y1 * z1 * v[0][1][1] + x1 * y1 * z1 * v[1][1][1];
  if (grad) {
    const double gx = y0 * z0 * (v[1][0][0] - v[0][0][0]) + y1 * z0 * (v[1][1][0] - v[0][1][0]) +
                      y0 * z1 * (v[1][0][1] - v[0][0][1]) + y1 * z1 * (v[1][1][1] - v[0][1][1]);
    const double gy = x0 * z0 * (v[0][1][0] - v[0][0][0]) + x1 * z0 * (v[1][1][0] - v[1][0][0]) +
                      x0 * z1 * (v[0][1][1] - v[0][0][1]) + x1 * z1 * (v[1][1][1] - v[1][0][1]);
    const double gz = x0 * y0 * (v[0][0][1] - v[0][0][0]) + x1 * y0 * (v[1][0][1] - v[1][0][0]) +
                      x0 * y1 * (v[0][1][1] - v[0][1][0]) + x1 * y1 * (v[1][1][1] - v[1][1][0]);
    *grad = Vec3(gx, gy, gz) / g.spacing;
  }
  return value;
}

}  // namespace

double SurrogateField::phi(const Vec3& p) const {
  if (!grid_.contains(p)) return far_;
  return trilinear(grid_, p, nullptr);
}

Vec3 SurrogateField::operator()(const Vec3& p) const {
  const Vec3 vb = spec_.base_velocity(p);
  if (!grid_.contains(p)) return vb;
  Vec3 grad;
  const double d = trilinear(grid_, p, &grad);
  if (d >= ramp_) return vb;
  if (d < 0.0) return Vec3::Zero();
  const double t = d / ramp_;
  const double s = t * t * (3.0 - 2.0 * t);
  const double gn = grad.norm();
  Vec3 vt = Vec3::Zero();
  if (gn > 0.0) {
    const Vec3 n = grad / gn;
    vt = vb - vb.dot(n) * n;
  }
  return s * vb + (1.0 - s) * vt;
}

// ---------------------------------------------------------------- advection

namespace {

Vec3 rk4_step(const VelocityField& v, const Vec3& x, double h) {
  const Vec3 k1 = v(x);
  const Vec3 k2 = v(x + 0.5 * h * k1);
  const Vec3 k3 = v(x + 0.5 * h * k2);
  const Vec3 k4 = v(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Step length h in (0, dt] with rk4_step(x, h).x() == plane, by Illinois
// regula falsi on the bracket [0, dt].
double crossing_step(const VelocityField& v, const Vec3& x, double dt, double plane, double g_dt) {
  double a = 0.0, ga = x.x() - plane;
  double b = dt, gb = g_dt;
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(plane), 1e-300);
  int side = 0;
  for (int it = 0; it < 100; ++it) {
    const double c = b - gb * (b - a) / (gb - ga);
    const double gc = rk4_step(v, x, c).x() - plane;
    if (std::abs(gc) <= tol || c <= a || c >= b) return std::clamp(c, a, b);
    if ((gc < 0.0) == (ga < 0.0)) {
      a = c;
      ga = gc;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = c;
      gb = gc;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
  }
  return b;
}

}  // namespace

Trajectory advect(const VelocityField& field, const Vec3& x0, double plane_x, const AdvectOptions& opts) {
  if (!(opts.dt > 0.0)) throw std::invalid_argument("advect: dt must be positive");
  if (!(x0.x() < plane_x)) throw std::invalid_argument("advect: start point is not upstream of the outflow plane");
  Trajectory tr;
  Vec3 x = x0;
  double t = 0.0;
  int stagnant = 0;
  if (opts.record) tr.path.emplace_back(t, x);
  for (long step = 0; step < opts.max_steps; ++step) {
    if (field(x).norm() < opts.v_min) {
      if (++stagnant >= opts.stuck_steps) {
        tr.status = AdvectStatus::stuck;
        tr.exit = x;
        tr.time = t;
        tr.steps = step;
        return tr;
      }
    } else {
      stagnant = 0;
    }
    const Vec3 next = rk4_step(field, x, opts.dt);
    if (next.x() >= plane_x) {
      const double h = crossing_step(field, x, opts.dt, plane_x, next.x() - plane_x);
      tr.exit = rk4_step(field, x, h);
      tr.exit.x() = plane_x;
      tr.time = t + h;
      tr.steps = step + 1;
      tr.status = AdvectStatus::reached;
      if (opts.record) tr.path.emplace_back(tr.time, tr.exit);
      return tr;
    }
    x = next;
    t += opts.dt;
    if (opts.record) tr.path.emplace_back(t, x);
  }
  tr.status = AdvectStatus::max_steps;
  tr.exit = x;
  tr.time = t;
  tr.steps = opts.max_steps;
  return tr;
}

std::vector<Trajectory> advect_all(const VelocityField& field, std::span<const Vec3> starts, double plane_x,
                                   const AdvectOptions& opts) {
  std::vector<Trajectory> out(starts.size());
  const auto n = static_cast<long>(starts.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = advect(field, starts[static_cast<std::size_t>(i)], plane_x, opts);
  return out;
}

std::vector<Trajectory> advect_all_serial(const VelocityField& field, std::span<const Vec3> starts, double plane_x,
                                          const AdvectOptions& opts) {
  std::vector<Trajectory> out;
  out.reserve(starts.size());
  for (const auto& s : starts) out.push_back(advect(field, s, plane_x, opts));
  return out;
}

// ---------------------------------------------------------------- hull

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

Hull2d convex_hull_2d(std::span<const Vec2> points) {
  if (points.size() < 3) throw std::invalid_argument("convex hull needs at least 3 points");
  std::vector<Vec2> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  p.erase(std::unique(p.begin(), p.end()), p.end());

  Hull2d hull;
  if (p.size() == 1) {
    hull.vertices = p;
    return hull;
  }
  std::vector<Vec2> h(2 * p.size());
  std::size_t k = 0;
  for (const auto& q : p) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], q) <= 0.0) --k;
    h[k++] = q;
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 2], h[k - 1], p[i]) <= 0.0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  hull.vertices = std::move(h);
  // Collinear input collapses to its two extremes; the closed walk there and
  // back gives twice the segment length.
  for (std::size_t i = 0; i < hull.vertices.size(); ++i) {
    hull.perimeter += (hull.vertices[(i + 1) % hull.vertices.size()] - hull.vertices[i]).norm();
  }
  return hull;
}

// ---------------------------------------------------------------- objective

void MixingConfig::validate() const {
  if (n_rect_y < 1 || n_rect_z < 1) throw std::invalid_argument("mixing: rectangle counts must be positive");
  if (particles_per_rect < 4 || particles_per_rect % 4 != 0) {
    throw std::invalid_argument("mixing: particles per rectangle must be a positive multiple of 4");
  }
  if (!(inflow_portion > 0.0 && inflow_portion <= 1.0)) throw std::invalid_argument("mixing: inflow portion in (0, 1]");
}

std::vector<std::vector<Vec2>> inflow_rectangles(const ChannelSpec& spec, const MixingConfig& cfg) {
  cfg.validate();
  const double y0 = spec.origin.y() + 0.5 * spec.width * (1.0 - cfg.inflow_portion);
  const double z0 = spec.origin.z() + 0.5 * spec.height * (1.0 - cfg.inflow_portion);
  const double dy = spec.width * cfg.inflow_portion / cfg.n_rect_y;
  const double dz = spec.height * cfg.inflow_portion / cfg.n_rect_z;
  const int per_side = cfg.particles_per_rect / 4;
  std::vector<std::vector<Vec2>> rects;
  for (int iz = 0; iz < cfg.n_rect_z; ++iz) {
    for (int iy = 0; iy < cfg.n_rect_y; ++iy) {
      const double ya = y0 + iy * dy, yb = y0 + (iy + 1) * dy;
      const double za = z0 + iz * dz, zb = z0 + (iz + 1) * dz;
      const Vec2 corners[4] = {{ya, za}, {yb, za}, {yb, zb}, {ya, zb}};
      std::vector<Vec2> pts;
      for (int s = 0; s < 4; ++s) {
        const Vec2& a = corners[s];
        const Vec2& b = corners[(s + 1) % 4];
        for (int j = 0; j < per_side; ++j) pts.push_back(a + (b - a) * (static_cast<double>(j) / per_side));
      }
      rects.push_back(std::move(pts));
    }
  }
  return rects;
}

MixingResult evaluate_mixing(const VelocityField& field, const ChannelSpec& spec, const MixingConfig& cfg) {
  spec.validate();
  const auto rects = inflow_rectangles(spec, cfg);
  std::vector<Vec3> starts;
  for (const auto& r : rects) {
    for (const auto& q : r) starts.emplace_back(spec.inflow_x(), q.x(), q.y());
  }
  const auto tracks = advect_all(field, starts, spec.outflow_x(), cfg.advect);

  MixingResult result;
  double sum = 0.0;
  int used = 0;
  std::size_t k = 0;
  for (std::size_t r = 0; r < rects.size(); ++r) {
    RectResult rr;
    rr.id = static_cast<int>(r);
    for (const auto& q : rects[r]) {
      const Trajectory& t = tracks[k++];
      if (t.status != AdvectStatus::reached) {
        ++rr.stuck;
        continue;
      }
      rr.inflow.push_back(q);
      rr.outflow.emplace_back(t.exit.y(), t.exit.z());
    }
    result.stuck += rr.stuck;
    if (rr.inflow.size() < 3) {
      rr.skipped = true;
      ++result.skipped;
    } else {
      rr.p_in = convex_hull_2d(rr.inflow).perimeter;
      rr.p_out = convex_hull_2d(rr.outflow).perimeter;
      sum += (rr.p_out - rr.p_in) / rr.p_in;
      ++used;
    }
    result.rects.push_back(std::move(rr));
  }
  if (2 * result.skipped > static_cast<int>(rects.size()) || used == 0) {
    throw ObjectiveError("objective unreliable: " + std::to_string(result.skipped) + " of " +
                         std::to_string(rects.size()) + " rectangles lost all particles");
  }
  result.J = -sum / used;
  return result;
}

double mixing_objective(const TriMesh& element, const ChannelSpec& spec, const MixingConfig& cfg,
                        const SurrogateOptions& sopts) {
  const SurrogateField field(element, spec, sopts);
  return evaluate_mixing(field, spec, cfg).J;
}

TriMesh place_element(const TriMesh& normalized, const ChannelSpec& spec, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("place_element: scale must be positive");
  TriMesh m = normalized;
  const Vec3 c = spec.center();
  for (auto& v : m.vertices) v = c + scale * v;
  return m;
}

void dump_trajectories(const VelocityField& field, const ChannelSpec& spec, const MixingConfig& cfg,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  AdvectOptions opts = cfg.advect;
  opts.record = true;
  const auto rects = inflow_rectangles(spec, cfg);
  for (std::size_t r = 0; r < rects.size(); ++r) {
    std::vector<Vec3> starts;
    for (const auto& q : rects[r]) starts.emplace_back(spec.inflow_x(), q.x(), q.y());
    const auto tracks = advect_all(field, starts, spec.outflow_x(), opts);
    for (std::size_t p = 0; p < tracks.size(); ++p) {
      char name[64];
      std::snprintf(name, sizeof name, "particle_%02zu_%02zu.csv", r, p);
      std::ofstream out(dir / name);
      if (!out) throw std::runtime_error("cannot write trajectory file in " + dir.string());
      out.precision(17);
      out << "t,x,y,z\n";
      for (const auto& [t, x] : tracks[p].path) out << t << ',' << x.x() << ',' << x.y() << ',' << x.z() << '\n';
    }
  }
}

}  // namespace lf::mix
