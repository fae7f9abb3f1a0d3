#pragma once

// Random capture configurations and their brute-force scores, shared by the
// scoring unit tests and the acceptance binary.

#include <vector>

#include "oracles.hpp"
#include "uavsim/rng.hpp"
#include "uavsim/scoring.hpp"
#include "uavsim/world.hpp"

namespace fixtures {

using namespace uavsim;

struct CaptureConfig {
  OccupancyGrid grid;
  InterestPoint point;
  Vec3 camera_position = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;
  Vec3 velocity_world = Vec3::Zero();
  Vec3 omega_cam = Vec3::Zero();
  CameraIntrinsics intr;

  Pose pose() const { return camera_pose(camera_position, yaw, pitch, 0.0); }
};

inline OccupancyGrid random_world(Rng& rng, int n, double density) {
  GridSpec g;
  g.origin = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
  g.voxel_size = rng.uniform(0.5, 1.5);
  g.dims = {n, n, n};
  OccupancyGrid grid(g, VoxelState::kFree);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (rng.uniform() < density) grid.set_linear(i, VoxelState::kOccupied);
  }
  return grid;
}

inline CaptureConfig random_capture(Rng& rng) {
  CaptureConfig c;
  c.grid = random_world(rng, 16, 0.08);
  const GridSpec& g = c.grid.spec();
  c.grid.set({8, 8, 8}, VoxelState::kOccupied);
  // An occupied voxel face whose neighbour is free.
  for (;;) {
    const VoxelIndex v{static_cast<int>(rng.below(16)), static_cast<int>(rng.below(16)),
                       static_cast<int>(rng.below(16))};
    const int face = static_cast<int>(rng.below(6));
    if (!c.grid.occupied(v) || c.grid.occupied(v + kFaceSteps[static_cast<std::size_t>(face)])) continue;
    c.point.id = 1;
    c.point.normal = face_normal(face);
    c.point.position = face_center(g, v, face);
    for (int a = 0; a < 3; ++a) {
      if (a != face / 2) c.point.position[a] += g.voxel_size * rng.uniform(-0.45, 0.45);
    }
    break;
  }
  const int flavour = static_cast<int>(rng.below(4));
  c.intr = flavour % 2 == 0 ? CameraIntrinsics::from_focal(600.0, 640, 480, 0.01, 5.0)
                            : CameraIntrinsics::from_focal(1400.0, 1920, 1080, rng.uniform(0.002, 0.03), 4.0);
  // Mostly in front of the surface, sometimes behind or grazing.
  Vec3 offset(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  if (flavour != 3) offset += 1.5 * c.point.normal;
  c.camera_position = c.point.position + rng.uniform(1.0, 12.0) * offset.normalized();
  const auto aim = aim_angles(c.point.position - c.camera_position);
  c.yaw = aim[0] + rng.uniform(-0.5, 0.5);
  c.pitch = std::clamp(aim[1] + rng.uniform(-0.4, 0.4), -1.5, 1.5);
  c.velocity_world = rng.uniform(0.0, 4.0) * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  c.omega_cam = rng.uniform(0.0, 1.5) * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return c;
}

struct OracleScores {
  double seen = 0.0;
  double blur = 0.0;
  double res = 0.0;
  bool sampled_los_blocked = false;
  bool exact_los_blocked = false;
};

inline OracleScores oracle_scores(const CaptureConfig& c) {
  OracleScores o;
  const Mat3 r = oracle::camera_axes(c.yaw, c.pitch);
  const Vec3 p_cam = r.transpose() * (c.point.position - c.camera_position);
  const Vec3 n_cam = r.transpose() * c.point.normal;
  const GridSpec& g = c.grid.spec();
  const oracle::Occupied occ = [&](const VoxelIndex& v) { return c.grid.occupied(v); };
  o.exact_los_blocked = oracle::los_exhaustive(g, occ, c.camera_position, c.point.position).blocked;
  o.sampled_los_blocked = oracle::los_sampled(g, occ, c.camera_position, c.point.position, g.voxel_size / 20.0);
  const bool facing = c.point.normal.dot(c.camera_position - c.point.position) > 0.0;
  const bool in_fov = oracle::in_fov_by_angles(p_cam, c.intr.horizontal_fov_rad, c.intr.vertical_fov_rad);
  o.seen = facing && in_fov && !o.exact_los_blocked ? 1.0 : 0.0;
  const Vec3 v = oracle::point_velocity_fd(c.point.position, c.camera_position, r, c.velocity_world, c.omega_cam, 1e-4);
  o.blur = oracle::blur_two_pose(p_cam, v, c.intr.exposure_time_s, c.intr.focal_length_px, c.intr.pixel_width_px);
  o.res = p_cam.z() > 0.0 ? oracle::resolution_by_footprint(p_cam, n_cam, c.intr.focal_length_px,
                                                             c.intr.desired_mmpp, kGrazingFloor)
                          : 0.0;
  return o;
}

struct ModuleScores {
  double seen = 0.0;
  double blur = 0.0;
  double res = 0.0;
};

inline ModuleScores module_scores(const CaptureConfig& c) {
  const Pose pose = c.pose();
  ModuleScores m;
  m.seen = q_seen(pose, c.intr, c.point, c.grid);
  const Vec3 v = point_velocity_in_camera(c.point.position, pose, c.velocity_world, c.omega_cam);
  m.blur = q_blur(c.point.position, pose, v, c.intr);
  m.res = q_res(c.point, pose, c.intr);
  return m;
}

// Points on the image border can flip between the two FOV formulations by
// rounding alone; such configurations are not informative.
inline bool near_fov_border(const CaptureConfig& c) {
  const Mat3 r = oracle::camera_axes(c.yaw, c.pitch);
  const Vec3 p = r.transpose() * (c.point.position - c.camera_position);
  if (p.z() <= 0.0) return false;
  const double u = c.intr.focal_length_px * p.x() / p.z();
  const double v = c.intr.focal_length_px * p.y() / p.z();
  return std::abs(std::abs(u) - 0.5 * c.intr.image_width_px) < 1e-6 ||
         std::abs(std::abs(v) - 0.5 * c.intr.image_height_px) < 1e-6;
}

}  // namespace fixtures
