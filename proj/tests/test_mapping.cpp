#include <doctest.h>

#include <map>
#include <queue>

#include "capture_fixtures.hpp"
#include "uavsim/lidar.hpp"
#include "uavsim/mapping.hpp"
#include "uavsim/rng.hpp"
#include "uavsim/scoring.hpp"

using namespace uavsim;

namespace {

GridSpec unit_grid(int n) {
  GridSpec g;
  g.origin = Vec3::Zero();
  g.voxel_size = 1.0;
  g.dims = {n, n, n};
  return g;
}

// Entry parameter of the first occupied voxel the segment crosses with a
// chord of positive length, by brute force over every voxel.
std::optional<double> first_entry(const OccupancyGrid& w, const Vec3& a, const Vec3& b) {
  const GridSpec& g = w.spec();
  const Vec3 d = b - a;
  std::optional<double> best;
  for (std::size_t li = 0; li < g.size(); ++li) {
    if (w.at_linear(li) != VoxelState::kOccupied) continue;
    const Vec3 lo = oracle::voxel_lo(g, g.from_linear(li));
    double t0 = 0.0;
    double t1 = 1.0;
    bool miss = false;
    for (int ax = 0; ax < 3 && !miss; ++ax) {
      const double hi = lo[ax] + g.voxel_size;
      if (d[ax] == 0.0) {
        miss = a[ax] < lo[ax] || a[ax] > hi;
        continue;
      }
      double ta = (lo[ax] - a[ax]) / d[ax];
      double tb = (hi - a[ax]) / d[ax];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (miss || t1 <= t0) continue;
    if (!best || t0 < *best) best = t0;
  }
  return best;
}

BeliefMap belief_from(const OccupancyGrid& truth) {
  BeliefMap b(truth.spec());
  for (std::size_t li = 0; li < truth.spec().size(); ++li) {
    b.set(truth.spec().from_linear(li), truth.at_linear(li), 0.0);
  }
  return b;
}

// Uniform-cost search written without a heuristic or tie-breaking rules.
std::optional<double> dijkstra(const BeliefMap& b, const VoxelIndex& s, const VoxelIndex& t, double unknown_penalty) {
  const GridSpec& g = b.spec();
  auto cost = [&](const VoxelIndex& v) -> double {
    const VoxelState st = b.at(v);
    if (st == VoxelState::kOccupied) return -1.0;
    if (st == VoxelState::kUnknown) return unknown_penalty > 0.0 ? unknown_penalty * g.voxel_size : -1.0;
    return g.voxel_size;
  };
  if (cost(t) < 0.0) return std::nullopt;
  std::map<VoxelIndex, double> dist;
  using Item = std::pair<double, VoxelIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[s] = 0.0;
  pq.push({0.0, s});
  while (!pq.empty()) {
    const auto [dv, v] = pq.top();
    pq.pop();
    if (dv > dist[v]) continue;
    if (v == t) return dv;
    for (const VoxelIndex& st : kFaceSteps) {
      const VoxelIndex n = v + st;
      if (!g.in_bounds(n)) continue;
      const double c = cost(n);
      if (c < 0.0) continue;
      auto it = dist.find(n);
      if (it == dist.end() || dv + c < it->second) {
        dist[n] = dv + c;
        pq.push({dv + c, n});
      }
    }
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("lidar in an empty world misses every ray") {
  const OccupancyGrid w(unit_grid(20), VoxelState::kFree);
  LidarSpec spec;
  spec.rays_per_scan = 500;
  const LidarScan s = lidar_scan({10, 10, 10}, w, spec, 0, 1, 0.0);
  CHECK(s.hits.empty());
  CHECK(s.misses.size() == 500);
  for (const Vec3& d : s.misses) CHECK(std::abs(d.norm() - 1.0) < 1e-12);
}

TEST_CASE("lidar sees a wall at its distance") {
  OccupancyGrid w(unit_grid(20), VoxelState::kFree);
  for (int j = 0; j < 20; ++j)
    for (int k = 0; k < 20; ++k) w.set({10, j, k}, VoxelState::kOccupied);
  LidarSpec spec;
  const Vec3 origin(7.0, 10.5, 10.5);
  const LidarScan s = lidar_scan(origin, w, spec, 3, 1, 0.0);
  REQUIRE(!s.hits.empty());
  double nearest = 1e9;
  for (const Vec3& h : s.hits) {
    CHECK(std::abs(h.x() - 10.0) < 1e-9);
    nearest = std::min(nearest, (h - origin).norm());
  }
  CHECK(nearest >= 3.0 - 1e-9);
  CHECK(nearest <= 3.0 + w.spec().voxel_size);
}

TEST_CASE("lidar hits match a brute-force first-entry search") {
  Rng rng(31);
  LidarSpec spec;
  spec.rays_per_scan = 150;
  spec.max_range_m = 9.0;
  for (int world = 0; world < 10; ++world) {
    OccupancyGrid w = fixtures::random_world(rng, 12, 0.05);
    const GridSpec& g = w.spec();
    const VoxelIndex ov{6, 6, 6};
    w.set(ov, VoxelState::kFree);
    const Vec3 origin = voxel_center(g, ov) + 0.3 * g.voxel_size * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const auto dirs = fibonacci_directions(spec.rays_per_scan, scan_spin(world, 5));
    const LidarScan s = lidar_scan(origin, w, spec, world, 5, 0.0);
    std::size_t hi = 0;
    std::size_t mi = 0;
    for (const Vec3& dir : dirs) {
      const Vec3 end = origin + dir * spec.max_range_m;
      const auto t = first_entry(w, origin, end);
      if (t) {
        REQUIRE(hi < s.hits.size());
        CHECK((s.hits[hi] - (origin + (end - origin) * *t)).norm() < 1e-9);
        ++hi;
      } else {
        REQUIRE(mi < s.misses.size());
        CHECK((s.misses[mi] - dir).norm() < 1e-12);
        ++mi;
      }
    }
    CHECK(hi == s.hits.size());
    CHECK(mi == s.misses.size());
  }
}

TEST_CASE("scan pattern is deterministic and rotates between scans") {
  CHECK(scan_spin(4, 9) == scan_spin(4, 9));
  CHECK(scan_spin(4, 9) != scan_spin(5, 9));
  CHECK(scan_spin(4, 9) != scan_spin(4, 10));
  const auto a = fibonacci_directions(100, 0.0);
  const auto b = fibonacci_directions(100, 0.7);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i].z() - b[i].z()) < 1e-15);
}

TEST_CASE("integrating an all-miss scan frees space and marks nothing occupied") {
  const OccupancyGrid w(unit_grid(20), VoxelState::kFree);
  LidarSpec spec;
  spec.rays_per_scan = 300;
  spec.max_range_m = 5.0;
  BeliefMap b(w.spec());
  const Vec3 origin(10.2, 10.4, 10.6);
  const auto changed = integrate_scan(b, lidar_scan(origin, w, spec, 0, 1, 2.0));
  CHECK(changed == b.known_count());
  CHECK(b.occupied_count() == 0);
  CHECK(b.at(quantize(w.spec(), origin)) == VoxelState::kFree);
  CHECK(b.stamp(quantize(w.spec(), origin)) == 2.0);
  // Nothing beyond the range (plus one voxel diagonal) becomes known.
  for (std::size_t li = 0; li < w.spec().size(); ++li) {
    if (b.grid().at_linear(li) == VoxelState::kUnknown) continue;
    CHECK((voxel_center(w.spec(), w.spec().from_linear(li)) - origin).norm() <= 5.0 + std::sqrt(3.0));
  }
  const auto window = b.take_dirty_window();
  REQUIRE(window);
  CHECK_FALSE(b.take_dirty_window());
}

TEST_CASE("integrating a single hit") {
  OccupancyGrid w(unit_grid(10), VoxelState::kFree);
  BeliefMap b(w.spec());
  LidarScan s;
  s.origin = {1.5, 5.5, 5.5};
  s.max_range_m = 20.0;
  s.hits = {{6.0, 5.5, 5.5}};
  integrate_scan(b, s);
  for (int i = 1; i <= 5; ++i) CHECK(b.at({i, 5, 5}) == VoxelState::kFree);
  CHECK(b.at({6, 5, 5}) == VoxelState::kOccupied);
  CHECK(b.at({7, 5, 5}) == VoxelState::kUnknown);
  CHECK(b.occupied_count() == 1);
  CHECK(b.known_count() == 6);
}

TEST_CASE("orbiting a block recovers its visible surface and nothing false") {
  OccupancyGrid w(unit_grid(16), VoxelState::kFree);
  for (int i = 6; i < 10; ++i)
    for (int j = 6; j < 10; ++j)
      for (int k = 0; k < 4; ++k) w.set({i, j, k}, VoxelState::kOccupied);
  LidarSpec spec;
  spec.max_range_m = 12.0;
  BeliefMap b(w.spec());
  std::uint64_t idx = 0;
  for (int a = 0; a < 12; ++a) {
    const double th = 2.0 * std::numbers::pi * a / 12.0;
    for (double z : {1.5, 3.5, 6.5}) {
      const Vec3 o(8.0 + 5.5 * std::cos(th), 8.0 + 5.5 * std::sin(th), z);
      integrate_scan(b, lidar_scan(o, w, spec, idx, 3, static_cast<double>(idx)));
      ++idx;
    }
  }
  int surface = 0;
  for (std::size_t li = 0; li < w.spec().size(); ++li) {
    const VoxelIndex v = w.spec().from_linear(li);
    const VoxelState believed = b.at(v);
    if (believed != VoxelState::kUnknown) CHECK(believed == w.at(v));
    if (!w.occupied(v)) continue;
    bool exposed = false;
    for (const VoxelIndex& st : kFaceSteps) {
      const VoxelIndex n = v + st;
      exposed |= n.k >= 0 && !w.occupied(n);
    }
    if (!exposed) continue;
    ++surface;
    CHECK(believed == VoxelState::kOccupied);
  }
  CHECK(surface == 12 * 4 + 4);  // 12 per side layer, plus the top's inner 4
  CHECK(b.occupied_count() == static_cast<std::size_t>(surface));
}

TEST_CASE("merging chunks fills unknowns and prefers newer data") {
  const GridSpec g = unit_grid(6);
  OccupancyGrid src(g, VoxelState::kUnknown);
  src.set({1, 1, 1}, VoxelState::kOccupied);
  src.set({2, 1, 1}, VoxelState::kFree);
  BeliefMap b(g);
  b.set({2, 1, 1}, VoxelState::kOccupied, 5.0);
  const auto old_chunks = make_map_chunks(src, {0, 0, 0}, {5, 5, 5}, 1.0);
  CHECK(merge_chunk(b, old_chunks[0]) == 1);
  CHECK(b.at({1, 1, 1}) == VoxelState::kOccupied);
  CHECK(b.at({2, 1, 1}) == VoxelState::kOccupied);
  CHECK(b.at({0, 0, 0}) == VoxelState::kUnknown);
  const auto new_chunks = make_map_chunks(src, {0, 0, 0}, {5, 5, 5}, 9.0);
  CHECK(merge_chunk(b, new_chunks[0]) == 1);
  CHECK(b.at({2, 1, 1}) == VoxelState::kFree);
  CHECK(b.known_count() == 2);
  CHECK(b.occupied_count() == 1);
}

TEST_CASE("grid path basics") {
  const OccupancyGrid w(unit_grid(8), VoxelState::kFree);
  BeliefMap b = belief_from(w);
  auto p = grid_shortest_path(b, {2, 2, 2}, {3, 2, 2});
  REQUIRE(p);
  CHECK(p->voxels.size() == 2);
  CHECK(p->cost == doctest::Approx(1.0));

  // Enclose the target.
  for (const VoxelIndex& st : kFaceSteps) b.set(VoxelIndex{5, 5, 5} + st, VoxelState::kOccupied, 0.0);
  CHECK_FALSE(grid_shortest_path(b, {1, 1, 1}, {5, 5, 5}));
  CHECK_FALSE(grid_shortest_path(b, {1, 1, 1}, {5, 5, 6}));

  // Reserved voxels and the floor are avoided.
  const std::vector<VoxelIndex> reserved{{2, 1, 1}};
  PathOptions opt;
  opt.reserved = reserved;
  opt.min_center_z = 1.0;
  p = grid_shortest_path(b, {1, 1, 1}, {3, 1, 1}, opt);
  REQUIRE(p);
  CHECK(p->voxels.size() == 5);
  for (const VoxelIndex& v : p->voxels) {
    CHECK(v != reserved[0]);
    CHECK(v.k >= 1);
  }
  const auto corners = path_corners(p->voxels);
  CHECK(corners.size() == 4);
  CHECK(corners.front() == VoxelIndex{1, 1, 1});
  CHECK(corners.back() == VoxelIndex{3, 1, 1});
}

TEST_CASE("grid path costs equal a uniform-cost search") {
  Rng rng(77);
  int reachable = 0;
  int unreachable = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const GridSpec g = unit_grid(12);
    BeliefMap b(g);
    for (std::size_t li = 0; li < g.size(); ++li) {
      const double u = rng.uniform();
      b.set(g.from_linear(li), u < 0.25 ? VoxelState::kOccupied : u < 0.4 ? VoxelState::kUnknown : VoxelState::kFree, 0.0);
    }
    auto pick = [&] {
      return VoxelIndex{static_cast<int>(rng.below(12)), static_cast<int>(rng.below(12)), static_cast<int>(rng.below(12))};
    };
    const VoxelIndex s = pick();
    const VoxelIndex t = pick();
    b.set(s, VoxelState::kFree, 0.0);
    for (double penalty : {3.0, 0.0}) {
      PathOptions opt;
      opt.unknown_penalty = penalty;
      const auto p = grid_shortest_path(b, s, t, opt);
      const auto ref = dijkstra(b, s, t, penalty);
      REQUIRE(p.has_value() == ref.has_value());
      if (!p) {
        ++unreachable;
        continue;
      }
      ++reachable;
      CHECK(p->cost == doctest::Approx(*ref).epsilon(1e-12));
      CHECK(p->voxels.front() == s);
      CHECK(p->voxels.back() == t);
      double sum = 0.0;
      for (std::size_t i = 1; i < p->voxels.size(); ++i) {
        const VoxelIndex a = p->voxels[i - 1];
        const VoxelIndex d{p->voxels[i].i - a.i, p->voxels[i].j - a.j, p->voxels[i].k - a.k};
        CHECK(std::abs(d.i) + std::abs(d.j) + std::abs(d.k) == 1);
        const VoxelState st = b.at(p->voxels[i]);
        CHECK(st != VoxelState::kOccupied);
        if (penalty <= 0.0) CHECK(st == VoxelState::kFree);
        sum += st == VoxelState::kUnknown ? penalty : 1.0;
      }
      CHECK(sum == doctest::Approx(p->cost));
    }
  }
  CHECK(reachable > 20);
  CHECK(unreachable > 5);
}

TEST_CASE("inspection waypoints around a lone voxel and a pair") {
  const GridSpec g = unit_grid(15);
  OccupancyGrid w(g, VoxelState::kFree);
  w.set({7, 7, 7}, VoxelState::kOccupied);
  const auto intr = CameraIntrinsics::from_focal(600.0, 640, 480, 0.01, 5.0);
  const double standoff = inspection_standoff(intr, g.voxel_size, 10.0);
  CHECK(standoff == doctest::Approx(3.0));

  auto set = generate_inspection_waypoints(belief_from(w), intr);
  REQUIRE(set.waypoints.size() == 6);
  for (std::size_t n = 0; n < 6; ++n) {
    const Waypoint& wp = set.waypoints[n];
    const SurfaceFace& src = set.sources[n];
    const Vec3 fc = face_center(g, src.voxel, src.face);
    const Vec3 to_face = fc - wp.position;
    CHECK((to_face.normalized() - wp.view_direction).norm() < 1e-12);
    CHECK(to_face.norm() <= standoff + 1e-9);
    CHECK(to_face.norm() > standoff - g.voxel_size);
    CHECK_FALSE(w.occupied(quantize(g, wp.position)));
  }

  w.set({8, 7, 7}, VoxelState::kOccupied);
  set = generate_inspection_waypoints(belief_from(w), intr);
  CHECK(set.waypoints.size() == 10);
  for (const SurfaceFace& f : set.sources) {
    CHECK_FALSE((f.voxel == VoxelIndex{7, 7, 7} && f.face == 0));
    CHECK_FALSE((f.voxel == VoxelIndex{8, 7, 7} && f.face == 1));
  }
}

TEST_CASE("waypoints back off from obstacles and the floor") {
  const GridSpec g = unit_grid(15);
  OccupancyGrid w(g, VoxelState::kFree);
  w.set({7, 7, 7}, VoxelState::kOccupied);
  w.set({9, 7, 7}, VoxelState::kOccupied);  // leaves one free voxel on +x
  w.set({7, 7, 1}, VoxelState::kOccupied);
  const auto intr = CameraIntrinsics::from_focal(600.0, 640, 480, 0.01, 5.0);
  InspectionOptions opt;
  opt.min_center_z = 2.0;
  const auto set = generate_inspection_waypoints(belief_from(w), intr, opt);
  bool saw_gap = false;
  for (std::size_t n = 0; n < set.waypoints.size(); ++n) {
    const SurfaceFace& f = set.sources[n];
    CHECK(set.waypoints[n].position.z() >= 2.0);
    if (f.voxel == VoxelIndex{7, 7, 7} && f.face == 0) {
      CHECK(quantize(g, set.waypoints[n].position) == VoxelIndex{8, 7, 7});
      saw_gap = true;
    }
    // The low voxel's bottom face has no room above the floor limit.
    CHECK_FALSE((f.voxel == VoxelIndex{7, 7, 1} && f.face == 5));
  }
  CHECK(saw_gap);
}

TEST_CASE("the standoff meets the desired resolution head on") {
  for (double f : {600.0, 1400.0}) {
    for (double r_des : {2.0, 5.0}) {
      const auto intr = CameraIntrinsics::from_focal(f, 1280, 960, 0.01, r_des);
      const double voxel = 0.5;
      const double d = inspection_standoff(intr, voxel, 1e9);
      const InterestPoint ip{1, Vec3(0, 0, 5), Vec3::UnitX()};
      const Vec3 cam = ip.position + d * ip.normal;
      const auto aim = aim_angles(-ip.normal);
      CHECK(q_res(ip, camera_pose(cam, aim[0], aim[1], 0.0), intr) >= 0.99);
    }
  }
}
