#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace uavsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// World frame is z-up. Camera frame is +z forward, +x right, +y down.

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();  // world-from-body

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Vec3 to_local(const Vec3& world) const {
    return orientation.conjugate() * (world - position);
  }
  Vec3 to_world(const Vec3& local) const {
    return orientation * local + position;
  }
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double volume() const {
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
  bool valid() const {
    return min.x() <= max.x() && min.y() <= max.y() && min.z() <= max.z();
  }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= min.array() - tol).all() &&
           (p.array() <= max.array() + tol).all();
  }
  Aabb inflated(double margin) const {
    return {min.array() - margin, max.array() + margin};
  }
  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  // Axis of the longest side; ties resolve to the lower axis index.
  int longest_axis() const;

  bool operator==(const Aabb& o) const { return min == o.min && max == o.max; }
};

struct CameraIntrinsics {
  double focal_length_px = 600.0;
  double pixel_width_px = 1.0;
  int image_width_px = 640;
  int image_height_px = 480;
  double horizontal_fov_rad = 0.0;
  double vertical_fov_rad = 0.0;
  double exposure_time_s = 0.01;
  double desired_mmpp = 5.0;

  // Fills the field-of-view angles from the focal length and image size.
  static CameraIntrinsics from_focal(double focal_px, int width_px, int height_px,
                                    double exposure_s, double desired_mmpp);

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

struct VoxelIndex {
  int i = 0;
  int j = 0;
  int k = 0;

  auto operator<=>(const VoxelIndex&) const = default;
  VoxelIndex operator+(const VoxelIndex& o) const { return {i + o.i, j + o.j, k + o.k}; }
  int operator[](int axis) const { return axis == 0 ? i : (axis == 1 ? j : k); }
  int& operator[](int axis) { return axis == 0 ? i : (axis == 1 ? j : k); }
};

struct VoxelIndexHash {
  std::size_t operator()(const VoxelIndex& v) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(v.i);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.j);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.k);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

// Regular voxel lattice. Linear indices are x-fastest.
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double voxel_size = 1.0;
  std::array<int, 3> dims{0, 0, 0};

  std::size_t size() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  bool in_bounds(const VoxelIndex& v) const {
    return v.i >= 0 && v.j >= 0 && v.k >= 0 && v.i < dims[0] && v.j < dims[1] &&
           v.k < dims[2];
  }
  std::size_t linear(const VoxelIndex& v) const {
    return static_cast<std::size_t>(v.i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(v.j) + static_cast<std::size_t>(dims[1]) * v.k);
  }
  VoxelIndex from_linear(std::size_t idx) const {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
            static_cast<int>(idx / (nx * ny))};
  }
  Aabb bounds() const {
    return {origin, origin + voxel_size * Vec3(dims[0], dims[1], dims[2])};
  }
  Aabb voxel_box(const VoxelIndex& v) const {
    const Vec3 lo = origin + voxel_size * Vec3(v.i, v.j, v.k);
    return {lo, lo + Vec3::Constant(voxel_size)};
  }
  bool operator==(const GridSpec& o) const {
    return origin == o.origin && voxel_size == o.voxel_size && dims == o.dims;
  }
};

// Floor quantization without bounds checking.
VoxelIndex quantize(const GridSpec& grid, const Vec3& p);
// Explicit out-of-bounds outcome as std::nullopt.
std::optional<VoxelIndex> world_to_voxel(const GridSpec& grid, const Vec3& p);
Vec3 voxel_center(const GridSpec& grid, const VoxelIndex& v);
// Closed-box containment with a small tolerance; a point on a shared face
// is contained by both neighbours.
bool voxel_contains(const GridSpec& grid, const VoxelIndex& v, const Vec3& p);

// Smallest grid aligned to multiples of voxel_size that covers `box`.
GridSpec grid_covering(const Aabb& box, double voxel_size);

// ---------------------------------------------------------------------------
// Segment traversal

// Visits every voxel the segment [from, to] passes through, clipped to the
// grid, in order from `from`. The visitor receives the voxel and the
// parametric entry/exit in [0, 1] and returns false to stop early. Exact
// ties between axes step all tied axes at once, so a segment passing through
// an edge or corner never visits the voxels it only touches.
using VoxelVisitor = std::function<bool(const VoxelIndex&, double t_enter, double t_exit)>;
void traverse_segment(const GridSpec& grid, const Vec3& from, const Vec3& to,
                      const VoxelVisitor& visit);

using OccupancyQuery = std::function<bool(const VoxelIndex&)>;

struct RaycastResult {
  bool blocked = false;
  std::optional<VoxelIndex> first_block;
};

// Line of sight along the open segment (from, to). Voxels that contain either
// endpoint never block. The verdict is symmetric in the endpoints;
// first_block is the blocking voxel nearest to `from`.
RaycastResult voxel_raycast(const GridSpec& grid, const OccupancyQuery& occupied,
                            const Vec3& from, const Vec3& to);

// ---------------------------------------------------------------------------
// Camera

struct ImagePoint {
  double u = 0.0;  // px, right of the optical axis
  double v = 0.0;  // px, below the optical axis
};

// Unclipped pinhole projection. Requires p_cam.z() != 0.
inline ImagePoint pinhole(const Vec3& p_cam, double focal_px) {
  return {focal_px * p_cam.x() / p_cam.z(), focal_px * p_cam.y() / p_cam.z()};
}

// std::nullopt when behind the camera or outside the image rectangle.
std::optional<ImagePoint> project_point(const Vec3& p_cam, const CameraIntrinsics& intr);

// Camera axes for a total yaw (about world z) and pitch (positive raises the
// optical axis). Columns are the camera x, y, z axes in world coordinates.
Mat3 camera_rotation(double yaw, double pitch);
Pose camera_pose(const Vec3& position, double body_yaw, double gimbal_pitch,
                 double gimbal_yaw);
// Optical axis direction in world for the given angles.
Vec3 view_direction(double yaw, double pitch);
// Inverse of view_direction: {yaw, pitch} aiming along `dir`.
std::array<double, 2> aim_angles(const Vec3& dir);

bool fov_contains(const Pose& camera, const CameraIntrinsics& intr, const Vec3& point_world);

double wrap_angle(double a);

}  // namespace uavsim
