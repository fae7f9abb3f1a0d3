#include "uavsim/scoring.hpp"

#include <algorithm>
#include <unordered_map>

namespace uavsim {

double q_seen(const Pose& camera, const CameraIntrinsics& intr, const InterestPoint& point,
              const OccupancyGrid& truth) {
  if (point.normal.dot(camera.position - point.position) <= 0.0) return 0.0;
  if (!fov_contains(camera, intr, point.position)) return 0.0;
  return truth.raycast(camera.position, point.position).blocked ? 0.0 : 1.0;
}

Vec3 point_velocity_in_camera(const Vec3& point_world, const Pose& camera, const Vec3& linear_velocity_world,
                              const Vec3& angular_velocity_cam) {
  const Vec3 p_cam = camera.to_local(point_world);
  return -(camera.orientation.conjugate() * linear_velocity_world) - angular_velocity_cam.cross(p_cam);
}

double blur_from_displacement(double du, double dv, double pixel_width) {
  const double m = std::max(std::abs(du), std::abs(dv));
  if (m == 0.0) return 1.0;
  return std::min(pixel_width / m, 1.0);
}

double q_blur(const Vec3& point_world, const Pose& camera, const Vec3& velocity_cam,
              const CameraIntrinsics& intr) {
  const Vec3 p0 = camera.to_local(point_world);
  const Vec3 p1 = p0 + velocity_cam * intr.exposure_time_s;
  if (p0.z() <= 0.0 || p1.z() <= 0.0) return 0.0;
  const ImagePoint a = pinhole(p0, intr.focal_length_px);
  const ImagePoint b = pinhole(p1, intr.focal_length_px);
  return blur_from_displacement(b.u - a.u, b.v - a.v, intr.pixel_width_px);
}

Resolution surface_resolution(const Vec3& p_cam, const Vec3& normal_cam, double focal_px) {
  const double base = 1000.0 * p_cam.z() / focal_px;
  const Vec3 d = p_cam / p_cam.z();
  const double nd = normal_cam.dot(d);
  // Moving one pixel along an image axis slides the hit point along the
  // surface by base * |e - (n_e / n.d) d|; the reciprocal of that factor is
  // the cosine between the viewing ray and the surface along that axis.
  auto cosine = [&](int axis) {
    if (nd == 0.0) return 0.0;
    const Vec3 e = Vec3::Unit(axis);
    return 1.0 / (e - (normal_cam[axis] / nd) * d).norm();
  };
  return {base / std::max(cosine(0), kGrazingFloor), base / std::max(cosine(1), kGrazingFloor)};
}

double q_res(const InterestPoint& point, const Pose& camera, const CameraIntrinsics& intr) {
  const Vec3 p_cam = camera.to_local(point.position);
  if (p_cam.z() <= 0.0) return 0.0;
  const Vec3 n_cam = camera.orientation.conjugate() * point.normal;
  const Resolution r = surface_resolution(p_cam, n_cam, intr.focal_length_px);
  return std::min(intr.desired_mmpp / std::max(r.horizontal_mmpp, r.vertical_mmpp), 1.0);
}

CaptureRecord score_capture(const CaptureContext& ctx, std::span<const InterestPoint> points,
                            const OccupancyGrid& truth) {
  CaptureRecord rec;
  rec.uav_id = ctx.uav_id;
  rec.capture_id = ctx.capture_id;
  rec.time_s = ctx.time_s;
  rec.camera = ctx.camera;
  rec.linear_velocity = ctx.linear_velocity;
  rec.angular_velocity = ctx.angular_velocity;
  for (const InterestPoint& p : points) {
    if (q_seen(ctx.camera, ctx.intrinsics, p, truth) == 0.0) continue;
    CaptureEntry e;
    e.point_id = p.id;
    e.q_seen = 1.0;
    const Vec3 vel = point_velocity_in_camera(p.position, ctx.camera, ctx.linear_velocity, ctx.angular_velocity);
    e.q_blur = q_blur(p.position, ctx.camera, vel, ctx.intrinsics);
    e.q_res = q_res(p, ctx.camera, ctx.intrinsics);
    e.q = e.q_seen * e.q_blur * e.q_res;
    rec.entries.push_back(e);
  }
  return rec;
}

ScoreBoard tally(std::span<const CaptureRecord> records, const std::set<std::uint64_t>& delivered_ids,
                 const std::set<std::string>& collided, std::span<const InterestPoint> points) {
  ScoreBoard board;
  board.points_total = static_cast<int>(points.size());
  std::unordered_map<int, std::size_t> slot;
  for (const InterestPoint& p : points) {
    slot.emplace(p.id, board.per_point.size());
    board.per_point.push_back({p.id, 0.0, "", 0.0});
  }
  for (const std::string& id : collided) board.per_uav[id].collided = true;

  // Scan in time order so that ties resolve to the earliest capture.
  std::vector<const CaptureRecord*> order;
  for (const CaptureRecord& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const CaptureRecord* a, const CaptureRecord* b) {
    if (a->time_s != b->time_s) return a->time_s < b->time_s;
    return a->uav_id < b->uav_id;
  });

  for (const CaptureRecord* r : order) {
    UavScoreStats& stats = board.per_uav[r->uav_id];
    ++stats.captures;
    if (!delivered_ids.contains(r->capture_id)) continue;
    ++stats.delivered;
    if (collided.contains(r->uav_id)) continue;
    for (const CaptureEntry& e : r->entries) {
      auto it = slot.find(e.point_id);
      if (it == slot.end()) continue;
      PointScore& ps = board.per_point[it->second];
      if (e.q > ps.best_q) {
        ps.best_q = e.q;
        ps.best_uav = r->uav_id;
        ps.best_t = r->time_s;
      }
    }
  }
  for (const PointScore& ps : board.per_point) {
    board.total_q += ps.best_q;
    board.points_detected += ps.best_q > 0.0;
  }
  return board;
}

}  // namespace uavsim
