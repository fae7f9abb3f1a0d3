#include "uavsim/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uavsim {

int Aabb::longest_axis() const {
  const Vec3 e = extent();
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (e[a] > e[axis]) axis = a;
  }
  return axis;
}

CameraIntrinsics CameraIntrinsics::from_focal(double focal_px, int width_px, int height_px,
                                              double exposure_s, double desired_mmpp) {
  CameraIntrinsics c;
  c.focal_length_px = focal_px;
  c.pixel_width_px = 1.0;
  c.image_width_px = width_px;
  c.image_height_px = height_px;
  c.horizontal_fov_rad = 2.0 * std::atan(0.5 * width_px / focal_px);
  c.vertical_fov_rad = 2.0 * std::atan(0.5 * height_px / focal_px);
  c.exposure_time_s = exposure_s;
  c.desired_mmpp = desired_mmpp;
  return c;
}

void CameraIntrinsics::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("camera: " + what); };
  if (!(focal_length_px > 0.0)) fail("focal_length_px must be > 0");
  if (!(pixel_width_px > 0.0)) fail("pixel_width_px must be > 0");
  if (image_width_px <= 0 || image_height_px <= 0) fail("image size must be positive");
  const double pi = std::numbers::pi;
  if (!(horizontal_fov_rad > 0.0 && horizontal_fov_rad < pi)) fail("horizontal_fov_rad must lie in (0, pi)");
  if (!(vertical_fov_rad > 0.0 && vertical_fov_rad < pi)) fail("vertical_fov_rad must lie in (0, pi)");
  if (!(exposure_time_s > 0.0)) fail("exposure_time_s must be > 0");
  if (!(desired_mmpp > 0.0)) fail("desired_mmpp must be > 0");
  const double hfov = 2.0 * std::atan(0.5 * image_width_px / focal_length_px);
  const double vfov = 2.0 * std::atan(0.5 * image_height_px / focal_length_px);
  if (std::abs(hfov - horizontal_fov_rad) > 1e-6 || std::abs(vfov - vertical_fov_rad) > 1e-6) {
    fail("field of view inconsistent with focal length and image size");
  }
}

VoxelIndex quantize(const GridSpec& grid, const Vec3& p) {
  const Vec3 rel = (p - grid.origin) / grid.voxel_size;
  return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
          static_cast<int>(std::floor(rel.z()))};
}

std::optional<VoxelIndex> world_to_voxel(const GridSpec& grid, const Vec3& p) {
  if (!p.allFinite()) return std::nullopt;
  const VoxelIndex v = quantize(grid, p);
  if (!grid.in_bounds(v)) return std::nullopt;
  return v;
}

Vec3 voxel_center(const GridSpec& grid, const VoxelIndex& v) {
  return grid.origin + grid.voxel_size * Vec3(v.i + 0.5, v.j + 0.5, v.k + 0.5);
}

bool voxel_contains(const GridSpec& grid, const VoxelIndex& v, const Vec3& p) {
  const double tol = 1e-9 * grid.voxel_size;
  return grid.voxel_box(v).contains(p, tol);
}

GridSpec grid_covering(const Aabb& box, double voxel_size) {
  GridSpec g;
  g.voxel_size = voxel_size;
  for (int a = 0; a < 3; ++a) {
    g.origin[a] = std::floor(box.min[a] / voxel_size) * voxel_size;
    const double n = std::ceil((box.max[a] - g.origin[a]) / voxel_size - 1e-9);
    g.dims[a] = std::max(1, static_cast<int>(n));
  }
  return g;
}

void traverse_segment(const GridSpec& grid, const Vec3& from, const Vec3& to,
                      const VoxelVisitor& visit) {
  const Vec3 d = to - from;
  if (d.squaredNorm() == 0.0 || !from.allFinite() || !to.allFinite()) return;

  const Aabb b = grid.bounds();
  double t0 = 0.0;
  double t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (from[a] < b.min[a] || from[a] > b.max[a]) return;
      continue;
    }
    double ta = (b.min[a] - from[a]) / d[a];
    double tb = (b.max[a] - from[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 >= t1) return;

  const double vs = grid.voxel_size;
  const Vec3 start = from + t0 * d;
  VoxelIndex v;
  int step[3];
  double t_max[3];
  auto boundary_t = [&](int a) {
    const int next = v[a] + (step[a] > 0 ? 1 : 0);
    return (grid.origin[a] + next * vs - from[a]) / d[a];
  };
  for (int a = 0; a < 3; ++a) {
    const double rel = (start[a] - grid.origin[a]) / vs;
    int idx = static_cast<int>(std::floor(rel));
    if (d[a] < 0.0 && rel == static_cast<double>(idx)) idx -= 1;
    v[a] = std::clamp(idx, 0, grid.dims[a] - 1);
    step[a] = d[a] > 0.0 ? 1 : (d[a] < 0.0 ? -1 : 0);
  }
  for (int a = 0; a < 3; ++a) {
    t_max[a] = step[a] == 0 ? std::numeric_limits<double>::infinity() : boundary_t(a);
  }

  double t = t0;
  while (true) {
    const double t_next = std::min({t_max[0], t_max[1], t_max[2]});
    const double t_exit = std::min(t_next, t1);
    if (t_exit > t && !visit(v, t, t_exit)) return;
    if (t_next >= t1) return;
    for (int a = 0; a < 3; ++a) {
      if (t_max[a] == t_next) {
        v[a] += step[a];
        if (v[a] < 0 || v[a] >= grid.dims[a]) return;
        t_max[a] = boundary_t(a);
      }
    }
    t = t_next;
  }
}

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace

RaycastResult voxel_raycast(const GridSpec& grid, const OccupancyQuery& occupied,
                            const Vec3& from, const Vec3& to) {
  RaycastResult result;
  if ((to - from).squaredNorm() == 0.0) return result;
  // Traverse in a canonical direction so the verdict cannot depend on the
  // argument order.
  const bool swapped = lex_less(to, from);
  const Vec3& a = swapped ? to : from;
  const Vec3& b = swapped ? from : to;
  traverse_segment(grid, a, b, [&](const VoxelIndex& v, double, double) {
    if (!occupied(v)) return true;
    if (voxel_contains(grid, v, from) || voxel_contains(grid, v, to)) return true;
    result.blocked = true;
    result.first_block = v;
    return swapped;
  });
  return result;
}

std::optional<ImagePoint> project_point(const Vec3& p_cam, const CameraIntrinsics& intr) {
  if (!(p_cam.z() > 0.0)) return std::nullopt;
  const ImagePoint ip = pinhole(p_cam, intr.focal_length_px);
  if (std::abs(ip.u) > 0.5 * intr.image_width_px) return std::nullopt;
  if (std::abs(ip.v) > 0.5 * intr.image_height_px) return std::nullopt;
  return ip;
}

Mat3 camera_rotation(double yaw, double pitch) {
  const Vec3 z_axis = view_direction(yaw, pitch);
  const Vec3 x_axis(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 y_axis = z_axis.cross(x_axis);
  Mat3 r;
  r.col(0) = x_axis;
  r.col(1) = y_axis;
  r.col(2) = z_axis;
  return r;
}

Pose camera_pose(const Vec3& position, double body_yaw, double gimbal_pitch, double gimbal_yaw) {
  Pose p;
  p.position = position;
  p.orientation = Quat(camera_rotation(body_yaw + gimbal_yaw, gimbal_pitch));
  p.orientation.normalize();
  return p;
}

Vec3 view_direction(double yaw, double pitch) {
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

std::array<double, 2> aim_angles(const Vec3& dir) {
  return {std::atan2(dir.y(), dir.x()), std::atan2(dir.z(), std::hypot(dir.x(), dir.y()))};
}

bool fov_contains(const Pose& camera, const CameraIntrinsics& intr, const Vec3& point_world) {
  return project_point(camera.to_local(point_world), intr).has_value();
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace uavsim
