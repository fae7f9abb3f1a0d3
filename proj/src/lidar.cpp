#include "uavsim/lidar.hpp"

#include <numbers>

#include "uavsim/rng.hpp"

namespace uavsim {

std::vector<Vec3> fibonacci_directions(int n, double spin) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i + spin;
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

double scan_spin(std::uint64_t scan_index, std::uint64_t seed) {
  Rng rng(seed ^ 0x6c69646172ULL);
  const double offset = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // Fractional part of the scan index times the inverse golden ratio.
  const double frac = std::fmod(static_cast<double>(scan_index % 1000003ULL) * 0.6180339887498949, 1.0);
  return offset + 2.0 * std::numbers::pi * frac;
}

LidarScan lidar_scan(const Vec3& origin, const OccupancyGrid& truth, const LidarSpec& spec,
                     std::uint64_t scan_index, std::uint64_t seed, double time_s) {
  LidarScan scan;
  scan.time_s = time_s;
  scan.scan_index = scan_index;
  scan.origin = origin;
  scan.max_range_m = spec.max_range_m;
  const GridSpec& g = truth.spec();
  for (const Vec3& dir : fibonacci_directions(spec.rays_per_scan, scan_spin(scan_index, seed))) {
    const Vec3 end = origin + dir * spec.max_range_m;
    double hit_t = -1.0;
    traverse_segment(g, origin, end, [&](const VoxelIndex& v, double t0, double) {
      if (!truth.occupied(v)) return true;
      hit_t = t0;
      return false;
    });
    if (hit_t >= 0.0) {
      scan.hits.push_back(origin + (end - origin) * hit_t);
    } else {
      scan.misses.push_back(dir);
    }
  }
  return scan;
}

}  // namespace uavsim
