#include <doctest.h>

#include <numbers>

#include "capture_fixtures.hpp"
#include "oracles.hpp"
#include "uavsim/scoring.hpp"

using namespace uavsim;

namespace {

CameraIntrinsics cam600() { return CameraIntrinsics::from_focal(600.0, 640, 480, 0.01, 5.0); }

// 10x10x10 grid of 1 m voxels with voxel (5,5,5) occupied; interest point
// on its -x face.
struct Scene {
  OccupancyGrid grid;
  InterestPoint point;
  Scene() {
    GridSpec g;
    g.dims = {10, 10, 10};
    grid = OccupancyGrid(g, VoxelState::kFree);
    grid.set({5, 5, 5}, VoxelState::kOccupied);
    point = {0, Vec3(5.0, 5.5, 5.5), Vec3(-1, 0, 0)};
  }
};

// Camera looking along +x from `x`, level.
Pose facing_plus_x(double x) { return camera_pose({x, 5.5, 5.5}, 0.0, 0.0, 0.0); }

}  // namespace

TEST_CASE("q_seen frontal, occluded and back-facing") {
  Scene s;
  const auto c = cam600();
  CHECK(q_seen(facing_plus_x(2.0), c, s.point, s.grid) == 1.0);
  s.grid.set({3, 5, 5}, VoxelState::kOccupied);
  CHECK(q_seen(facing_plus_x(1.5), c, s.point, s.grid) == 0.0);

  Scene back;
  const Pose behind = camera_pose({8.5, 5.5, 5.5}, std::numbers::pi, 0.0, 0.0);
  // A camera on the far side looking back at the same face.
  CHECK(q_seen(behind, c, back.point, back.grid) == 0.0);
  // Looking away from a point that is otherwise visible.
  CHECK(q_seen(camera_pose({2.0, 5.5, 5.5}, std::numbers::pi, 0.0, 0.0), c, back.point, back.grid) == 0.0);
}

TEST_CASE("point_velocity_in_camera examples") {
  const Pose cam = camera_pose({0, 0, 0}, 0.0, 0.0, 0.0);
  CHECK(point_velocity_in_camera({5, 0, 0}, cam, Vec3::Zero(), Vec3::Zero()).norm() == 0.0);

  // Camera translating along its own +x (world -y for yaw 0).
  const Vec3 cam_x = cam.rotation().col(0);
  const Vec3 v = point_velocity_in_camera({5, 0, 0}, cam, cam_x, Vec3::Zero());
  CHECK((v - Vec3(-1, 0, 0)).norm() < 1e-12);

  // Yaw rate about the camera y axis.
  const double w = 0.7;
  const double z = 4.0;
  const Vec3 vr = point_velocity_in_camera({z, 0, 0}, cam, Vec3::Zero(), Vec3(0, w, 0));
  CHECK(vr.x() == doctest::Approx(-w * z));
  CHECK(std::abs(vr.y()) < 1e-12);
  CHECK(std::abs(vr.z()) < 1e-12);
  const Mat3 r = oracle::camera_axes(0.0, 0.0);
  const Vec3 fd = oracle::point_velocity_fd({z, 0, 0}, Vec3::Zero(), r, Vec3::Zero(), Vec3(0, w, 0), 1e-5);
  CHECK((fd - vr).norm() < 1e-6);
}

TEST_CASE("point velocity matches finite differences of the image position") {
  Rng rng(404);
  for (int n = 0; n < 200; ++n) {
    const Vec3 pos(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 10));
    const double yaw = rng.uniform(-3.1, 3.1);
    const double pitch = rng.uniform(-1.5, 0.5);
    const Mat3 r = oracle::camera_axes(yaw, pitch);
    const Vec3 p_cam(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 15));
    const Vec3 point = pos + r * p_cam;
    const Vec3 vel(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
    const Vec3 omega(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 v = point_velocity_in_camera(point, camera_pose(pos, yaw, pitch, 0.0), vel, omega);
    // Image-plane velocity from v against finite differences of the projection.
    const double h = 1e-5;
    const Vec3 a = oracle::point_in_moving_camera(point, pos, r, vel, omega, -h);
    const Vec3 b = oracle::point_in_moving_camera(point, pos, r, vel, omega, h);
    const double du_fd = (b.x() / b.z() - a.x() / a.z()) / (2 * h);
    const double dv_fd = (b.y() / b.z() - a.y() / a.z()) / (2 * h);
    const double du = (v.x() * p_cam.z() - p_cam.x() * v.z()) / (p_cam.z() * p_cam.z());
    const double dv = (v.y() * p_cam.z() - p_cam.y() * v.z()) / (p_cam.z() * p_cam.z());
    const double scale = std::max(std::hypot(du_fd, dv_fd), 1e-9);
    CHECK(std::hypot(du - du_fd, dv - dv_fd) / scale < 1e-4);
  }
}

TEST_CASE("q_blur boundary cases") {
  CHECK(blur_from_displacement(0.0, 0.0, 1.0) == 1.0);
  CHECK(blur_from_displacement(1.0, 0.0, 1.0) == 1.0);
  CHECK(blur_from_displacement(0.0, -2.0, 1.0) == 0.5);
  CHECK(blur_from_displacement(0.5, 0.25, 1.0) == 1.0);

  // Exact binary fractions: f = 512, z = 4, tau = 2^-7.
  const CameraIntrinsics c = CameraIntrinsics::from_focal(512.0, 640, 480, 0.0078125, 5.0);
  const Pose cam = camera_pose({0, 0, 0}, 0.0, 0.0, 0.0);
  const Vec3 point(4, 0, 0);
  CHECK(q_blur(point, cam, Vec3::Zero(), c) == 1.0);
  CHECK(q_blur(point, cam, Vec3(1, 0, 0), c) == 1.0);
  CHECK(q_blur(point, cam, Vec3(2, 0, 0), c) == 0.5);
  CHECK(q_blur(point, cam, Vec3(0, 4, 0), c) == 0.25);
  // Point crossing behind the camera during the exposure.
  CHECK(q_blur(point, cam, Vec3(0, 0, -1000), c) == 0.0);
}

TEST_CASE("q_blur lateral motion against two-pose projection") {
  const auto c = cam600();
  const Pose cam = camera_pose({0, 0, 0}, 0.0, 0.0, 0.0);
  const Vec3 point(5, 0, 0);
  const Vec3 v = point_velocity_in_camera(point, cam, cam.rotation().col(0), Vec3::Zero());
  const double q = q_blur(point, cam, v, c);
  // 1 m/s for 10 ms at 5 m with f = 600 is 1.2 px.
  CHECK(q == doctest::Approx(1.0 / 1.2));
  CHECK(q == doctest::Approx(oracle::blur_two_pose({0, 0, 5}, {-1, 0, 0}, 0.01, 600.0, 1.0)).epsilon(1e-12));
}

TEST_CASE("q_res frontal and oblique") {
  const auto c = cam600();
  // 1000 * 3 / 600 = 5 mm/px = r_des.
  InterestPoint p{0, Vec3(3, 0, 0), Vec3(-1, 0, 0)};
  const Pose cam = camera_pose({0, 0, 0}, 0.0, 0.0, 0.0);
  CHECK(q_res(p, cam, c) == doctest::Approx(1.0).epsilon(1e-12));
  p.position = Vec3(6, 0, 0);
  CHECK(q_res(p, cam, c) == doctest::Approx(0.5).epsilon(1e-12));

  // 60 degrees between the view direction and the surface normal.
  const double a = std::numbers::pi / 3;
  InterestPoint oblique{0, Vec3(3, 0, 0), Vec3(-std::cos(a), std::sin(a), 0)};
  const Mat3 r = oracle::camera_axes(0.0, 0.0);
  const Vec3 p_cam = r.transpose() * oblique.position;
  const Vec3 n_cam = r.transpose() * oblique.normal;
  const double expected = oracle::resolution_by_footprint(p_cam, n_cam, 600.0, 5.0, kGrazingFloor);
  CHECK(q_res(oblique, cam, c) == doctest::Approx(expected).epsilon(1e-7));
  CHECK(expected == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("score_capture empty and ideal") {
  Scene s;
  CaptureContext ctx;
  ctx.uav_id = "a";
  ctx.intrinsics = cam600();
  ctx.camera = camera_pose({2.0, 5.5, 5.5}, std::numbers::pi / 2, 0.0, 0.0);
  std::vector<InterestPoint> pts{s.point};
  CHECK(score_capture(ctx, pts, s.grid).entries.empty());
  ctx.camera = facing_plus_x(2.0);  // 3 m from the face
  const CaptureRecord rec = score_capture(ctx, pts, s.grid);
  REQUIRE(rec.entries.size() == 1);
  CHECK(rec.entries[0].q == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("components match brute-force oracles on random captures") {
  Rng rng(77);
  int seen = 0;
  for (int n = 0; n < 1000; ++n) {
    const fixtures::CaptureConfig cfg = fixtures::random_capture(rng);
    if (fixtures::near_fov_border(cfg)) continue;
    const auto o = fixtures::oracle_scores(cfg);
    const auto m = fixtures::module_scores(cfg);
    CHECK(m.seen == o.seen);
    if (o.sampled_los_blocked) CHECK(o.exact_los_blocked);
    if (o.seen == 0.0) continue;
    ++seen;
    CHECK(std::abs(m.blur - o.blur) < 1e-6);
    CHECK(std::abs(m.res - o.res) < 1e-6);

    CaptureContext ctx;
    ctx.uav_id = "u";
    ctx.camera = cfg.pose();
    ctx.linear_velocity = cfg.velocity_world;
    ctx.angular_velocity = cfg.omega_cam;
    ctx.intrinsics = cfg.intr;
    const CaptureRecord rec = score_capture(ctx, std::span(&cfg.point, 1), cfg.grid);
    REQUIRE(rec.entries.size() == 1);
    CHECK(std::abs(rec.entries[0].q - m.blur * m.res) < 1e-9);
  }
  CHECK(seen > 100);
}

TEST_CASE("components are invariant under rigid motion of the whole scene") {
  Rng rng(5150);
  for (int n = 0; n < 200; ++n) {
    const fixtures::CaptureConfig cfg = fixtures::random_capture(rng);
    const Pose pose = cfg.pose();
    InterestPoint p = cfg.point;
    const Vec3 v = point_velocity_in_camera(p.position, pose, cfg.velocity_world, cfg.omega_cam);
    const double blur = q_blur(p.position, pose, v, cfg.intr);
    const double res = q_res(p, pose, cfg.intr);

    const Quat rot(Eigen::AngleAxisd(rng.uniform(-3, 3), Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 1).normalized()));
    const Vec3 shift(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
    Pose moved;
    moved.position = rot * pose.position + shift;
    moved.orientation = rot * pose.orientation;
    InterestPoint pm{p.id, rot * p.position + shift, rot * p.normal};
    const Vec3 vm = point_velocity_in_camera(pm.position, moved, rot * cfg.velocity_world, cfg.omega_cam);
    CHECK((vm - v).norm() < 1e-9);
    CHECK(q_blur(pm.position, moved, vm, cfg.intr) == doctest::Approx(blur).epsilon(1e-9));
    CHECK(q_res(pm, moved, cfg.intr) == doctest::Approx(res).epsilon(1e-9));

    // Line of sight survives a whole-voxel translation of grid and scene.
    GridSpec g = cfg.grid.spec();
    const Vec3 step = g.voxel_size * Vec3(static_cast<double>(rng.below(7)) - 3, 2, -1);
    g.origin += step;
    OccupancyGrid shifted(g, VoxelState::kFree);
    for (std::size_t i = 0; i < g.size(); ++i) shifted.set_linear(i, cfg.grid.at_linear(i));
    Pose ps = pose;
    ps.position += step;
    InterestPoint pt{p.id, p.position + step, p.normal};
    if (!fixtures::near_fov_border(cfg)) CHECK(q_seen(ps, cfg.intr, pt, shifted) == q_seen(pose, cfg.intr, p, cfg.grid));
  }
}

TEST_CASE("q_blur is monotone in exposure and speed") {
  Rng rng(31);
  for (int n = 0; n < 300; ++n) {
    const Pose cam = camera_pose({0, 0, 0}, rng.uniform(-3, 3), rng.uniform(-1, 0.3), 0.0);
    const Vec3 point = cam.to_world(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2, 10)));
    const Vec3 dir = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
    CameraIntrinsics c = cam600();
    double prev = 1.0;
    for (double speed = 0.0; speed < 6.0; speed += 0.25) {
      const double q = q_blur(point, cam, speed * dir, c);
      CHECK(q <= prev + 1e-12);
      prev = q;
    }
    prev = 1.0;
    for (double tau = 0.001; tau < 0.05; tau += 0.002) {
      c.exposure_time_s = tau;
      const double q = q_blur(point, cam, 2.0 * dir, c);
      CHECK(q <= prev + 1e-12);
      prev = q;
    }
  }
}

TEST_CASE("q_res is nonincreasing with range for frontal views") {
  const auto c = cam600();
  const Pose cam = camera_pose({0, 0, 0}, 0.0, 0.0, 0.0);
  double prev = 1.0;
  for (double x = 0.5; x < 30.0; x += 0.25) {
    const double q = q_res({0, Vec3(x, 0, 0), Vec3(-1, 0, 0)}, cam, c);
    CHECK(q <= prev + 1e-12);
    prev = q;
  }
}

TEST_CASE("tally takes the max over time and UAVs") {
  const std::vector<InterestPoint> pts{{0, Vec3::Zero(), Vec3::UnitX()}, {1, Vec3::Zero(), Vec3::UnitX()}};
  auto record = [](const std::string& uav, std::uint64_t id, double t, int point, double q) {
    CaptureRecord r;
    r.uav_id = uav;
    r.capture_id = id;
    r.time_s = t;
    r.entries.push_back({point, 1.0, q, 1.0, q});
    return r;
  };
  const std::vector<CaptureRecord> recs{record("a", 1, 1.0, 0, 0.3), record("a", 2, 2.0, 0, 0.7),
                                        record("b", 3, 3.0, 0, 0.5)};
  const ScoreBoard b = tally(recs, {1, 2, 3}, {}, pts);
  CHECK(b.total_q == doctest::Approx(0.7));
  CHECK(b.points_detected == 1);
  CHECK(b.per_point[0].best_uav == "a");
  CHECK(b.per_point[0].best_t == 2.0);

  SUBCASE("collided UAV is excluded even when delivered") {
    const ScoreBoard c = tally(recs, {1, 2, 3}, {"a"}, pts);
    CHECK(c.total_q == doctest::Approx(0.5));
    CHECK(c.per_uav.at("a").collided);
  }
  SUBCASE("undelivered records count for nothing") {
    const ScoreBoard d = tally(recs, {1, 3}, {}, pts);
    CHECK(d.total_q == doctest::Approx(0.5));
    CHECK(d.per_uav.at("a").captures == 2);
    CHECK(d.per_uav.at("a").delivered == 1);
    const ScoreBoard e = tally(recs, {}, {}, pts);
    CHECK(e.total_q == 0.0);
  }
}

TEST_CASE("Q is bounded and monotone in the delivered set") {
  Rng rng(12);
  std::vector<InterestPoint> pts;
  for (int i = 0; i < 20; ++i) pts.push_back({i, Vec3::Zero(), Vec3::UnitZ()});
  std::vector<CaptureRecord> recs;
  for (std::uint64_t id = 0; id < 60; ++id) {
    CaptureRecord r;
    r.uav_id = rng.uniform() < 0.5 ? "a" : "b";
    r.capture_id = id;
    r.time_s = rng.uniform(0, 100);
    for (int e = 0; e < 5; ++e) {
      const double q = rng.uniform();
      r.entries.push_back({static_cast<int>(rng.below(20)), 1.0, q, 1.0, q});
    }
    recs.push_back(r);
  }
  std::set<std::uint64_t> delivered;
  double prev = 0.0;
  for (std::uint64_t id = 0; id < 60; ++id) {
    delivered.insert((id * 37) % 60);
    const double q = tally(recs, delivered, {}, pts).total_q;
    CHECK(q >= prev);
    CHECK(q <= 20.0);
    prev = q;
  }
}
