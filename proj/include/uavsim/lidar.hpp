#pragma once

#include <cstdint>
#include <vector>

#include "uavsim/geometry.hpp"
#include "uavsim/world.hpp"

namespace uavsim {

struct LidarScan {
  double time_s = 0.0;
  std::uint64_t scan_index = 0;
  Vec3 origin = Vec3::Zero();
  double max_range_m = 0.0;
  std::vector<Vec3> hits;    // world points on the first occupied voxel
  std::vector<Vec3> misses;  // unit directions of rays that hit nothing
};

// Unit directions of a Fibonacci sphere with n points, spun about z by
// `spin` radians.
std::vector<Vec3> fibonacci_directions(int n, double spin);

// The rotation applied to the ray pattern for a given scan; a fixed
// irrational step per scan plus a per-seed offset.
double scan_spin(std::uint64_t scan_index, std::uint64_t seed);

// Casts every ray of the pattern against the ground truth. A ray stops at
// the entry point of the first occupied voxel it passes through.
LidarScan lidar_scan(const Vec3& origin, const OccupancyGrid& truth, const LidarSpec& spec,
                     std::uint64_t scan_index, std::uint64_t seed, double time_s);

}  // namespace uavsim
