#pragma once

// Mixing objective: particles seeded on inflow rectangles are advected to
// the outflow plane and the growth of their convex hull perimeters is
// averaged. The flow is an analytic surrogate around the mixing element.

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "lf/geometry.hpp"
#include "lf/meshops.hpp"

namespace lf::mix {

/// Unwound screw channel: x in [0, length] along the flow, y in [0, width],
/// z in [0, height] with the barrel at z = height, all relative to `origin`.
struct ChannelSpec {
  double length = 0.0315;
  double width = 0.02405;
  double height = 0.0075;
  double barrel_speed = 1.0;     // m/s
  double barrel_angle = 0.3082;  // rad between the barrel motion and the x axis
  double axial_speed = 0.0;      // uniform offset along x
  Vec3 origin = Vec3::Zero();

  void validate() const;
  /// Oblique drag flow: barrel velocity scaled linearly with z / height,
  /// plus the axial offset.
  Vec3 base_velocity(const Vec3& p) const;
  Vec3 center() const { return origin + Vec3(0.5 * length, 0.5 * width, 0.5 * height); }
  double inflow_x() const { return origin.x(); }
  double outflow_x() const { return origin.x() + length; }
};

class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Vec3 operator()(const Vec3& p) const = 0;
};

/// Wraps an arbitrary callable.
class FunctionField final : public VelocityField {
 public:
  explicit FunctionField(std::function<Vec3(const Vec3&)> fn) : fn_(std::move(fn)) {}
  Vec3 operator()(const Vec3& p) const override { return fn_(p); }

 private:
  std::function<Vec3(const Vec3&)> fn_;
};

struct SurrogateOptions {
  double ramp_fraction = 0.1;  // ramp width / element bounding radius
  int sdf_resolution = 40;     // nodes along the longest grid axis
};

/// v = s(phi) * v_base + (1 - s(phi)) * v_tangential outside the element and
/// 0 inside, where phi is the element's signed distance (trilinear grid
/// interpolant) and s a smoothstep ramp from 0 at the surface to 1 at the
/// ramp width. The field is not divergence free.
class SurrogateField final : public VelocityField {
 public:
  SurrogateField(const TriMesh& element, const ChannelSpec& spec, const SurrogateOptions& opts = {});
  Vec3 operator()(const Vec3& p) const override;

  double phi(const Vec3& p) const;
  double ramp_width() const { return ramp_; }
  const SdfGrid& grid() const { return grid_; }

 private:
  ChannelSpec spec_;
  SdfGrid grid_;
  double ramp_ = 0.0;
  double far_ = 0.0;  // value reported outside the grid box
};

struct AdvectOptions {
  double dt = 2.5e-5;
  long max_steps = 100000;
  double v_min = 1e-6;   // speeds below this count as stagnant
  int stuck_steps = 50;  // consecutive stagnant steps before giving up
  bool record = false;   // keep every step in the trajectory
};

enum class AdvectStatus { reached, stuck, max_steps };

struct Trajectory {
  AdvectStatus status = AdvectStatus::reached;
  Vec3 exit = Vec3::Zero();
  double time = 0.0;
  long steps = 0;
  std::vector<std::pair<double, Vec3>> path;  // (t, x); filled when recording
};

/// Classical RK4 until x >= plane_x; the last step is shortened so the exit
/// point lies on the plane.
Trajectory advect(const VelocityField& field, const Vec3& x0, double plane_x, const AdvectOptions& opts);

/// Advect many particles. The OpenMP kernel and the serial reference return
/// identical results.
std::vector<Trajectory> advect_all(const VelocityField& field, std::span<const Vec3> starts, double plane_x,
                                   const AdvectOptions& opts);
std::vector<Trajectory> advect_all_serial(const VelocityField& field, std::span<const Vec3> starts, double plane_x,
                                          const AdvectOptions& opts);

struct Hull2d {
  std::vector<Vec2> vertices;  // counter-clockwise
  double perimeter = 0.0;
};

/// Monotone-chain hull. Collinear input yields the two extreme points and a
/// perimeter of twice their distance. Throws for fewer than 3 points.
Hull2d convex_hull_2d(std::span<const Vec2> points);

struct MixingConfig {
  int n_rect_y = 4;
  int n_rect_z = 3;
  int particles_per_rect = 16;  // multiple of 4, corners included
  double inflow_portion = 0.6;  // central fraction of the cross-section
  AdvectOptions advect;

  void validate() const;
};

struct RectResult {
  int id = 0;
  std::vector<Vec2> inflow;   // (y, z)
  std::vector<Vec2> outflow;  // survivors only
  double p_in = 0.0;
  double p_out = 0.0;
  int stuck = 0;
  bool skipped = false;
};

struct MixingResult {
  double J = 0.0;
  std::vector<RectResult> rects;
  int skipped = 0;
  int stuck = 0;
};

class ObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Particles placed evenly along each inflow rectangle's perimeter, as
/// absolute (y, z).
std::vector<std::vector<Vec2>> inflow_rectangles(const ChannelSpec& spec, const MixingConfig& cfg);

/// J = -(1/R) sum (P_out - P_in) / P_in over rectangles with at least 3
/// surviving particles. Throws ObjectiveError("objective unreliable") when
/// more than half of the rectangles are skipped.
MixingResult evaluate_mixing(const VelocityField& field, const ChannelSpec& spec, const MixingConfig& cfg);

/// Element mesh in channel coordinates -> J through the surrogate field.
double mixing_objective(const TriMesh& element, const ChannelSpec& spec, const MixingConfig& cfg,
                        const SurrogateOptions& sopts = {});

/// Normalized (unit-sphere) mesh scaled and moved to the channel centre.
TriMesh place_element(const TriMesh& normalized, const ChannelSpec& spec, double scale);

/// One CSV "t,x,y,z" per particle in dir (particle_RR_PP.csv).
void dump_trajectories(const VelocityField& field, const ChannelSpec& spec, const MixingConfig& cfg,
                       const std::filesystem::path& dir);

}  // namespace lf::mix
