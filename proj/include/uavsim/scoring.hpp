#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "uavsim/geometry.hpp"
#include "uavsim/world.hpp"

namespace uavsim {

// Floor on the obliquity cosine in the resolution score.
inline constexpr double kGrazingFloor = 0.05;

struct CaptureContext {
  std::string uav_id;
  std::uint64_t capture_id = 0;
  double time_s = 0.0;
  Pose camera;
  Vec3 linear_velocity = Vec3::Zero();   // camera, world frame, m/s
  Vec3 angular_velocity = Vec3::Zero();  // camera, camera frame, rad/s
  CameraIntrinsics intrinsics;
};

struct CaptureEntry {
  int point_id = 0;
  double q_seen = 0.0;
  double q_blur = 0.0;
  double q_res = 0.0;
  double q = 0.0;

  bool operator==(const CaptureEntry&) const = default;
};

struct CaptureRecord {
  std::string uav_id;
  std::uint64_t capture_id = 0;
  double time_s = 0.0;
  Pose camera;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  std::vector<CaptureEntry> entries;  // only points with q_seen = 1
};

// 1 if the point is in the image, has line of sight to the camera and faces it.
double q_seen(const Pose& camera, const CameraIntrinsics& intr, const InterestPoint& point,
              const OccupancyGrid& truth);

// Velocity of a static world point in the camera frame.
Vec3 point_velocity_in_camera(const Vec3& point_world, const Pose& camera, const Vec3& linear_velocity_world,
                              const Vec3& angular_velocity_cam);

// Score for an image displacement of (du, dv) pixels during the exposure.
double blur_from_displacement(double du, double dv, double pixel_width);

double q_blur(const Vec3& point_world, const Pose& camera, const Vec3& velocity_cam,
              const CameraIntrinsics& intr);

struct Resolution {
  double horizontal_mmpp = 0.0;
  double vertical_mmpp = 0.0;
};
// Per-axis surface resolution, including the obliquity floor.
Resolution surface_resolution(const Vec3& p_cam, const Vec3& normal_cam, double focal_px);

double q_res(const InterestPoint& point, const Pose& camera, const CameraIntrinsics& intr);

CaptureRecord score_capture(const CaptureContext& ctx, std::span<const InterestPoint> points,
                            const OccupancyGrid& truth);

struct PointScore {
  int id = 0;
  double best_q = 0.0;
  std::string best_uav;
  double best_t = 0.0;
};

struct UavScoreStats {
  int captures = 0;
  int delivered = 0;
  bool collided = false;
};

struct ScoreBoard {
  double total_q = 0.0;
  int points_total = 0;
  int points_detected = 0;  // best_q > 0
  std::vector<PointScore> per_point;  // in interest-point order
  std::map<std::string, UavScoreStats> per_uav;
};

// Q over the records delivered to the ground station by UAVs that never
// collided. Ties keep the earliest record.
ScoreBoard tally(std::span<const CaptureRecord> records, const std::set<std::uint64_t>& delivered_ids,
                 const std::set<std::string>& collided, std::span<const InterestPoint> points);

}  // namespace uavsim
