#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uavsim/comms.hpp"
#include "uavsim/lidar.hpp"
#include "uavsim/mtsp.hpp"
#include "uavsim/world.hpp"

namespace uavsim {

// An agent's occupancy belief over the operational grid.
class BeliefMap {
 public:
  BeliefMap() = default;
  explicit BeliefMap(const GridSpec& spec);

  const GridSpec& spec() const { return grid_.spec(); }
  const OccupancyGrid& grid() const { return grid_; }
  VoxelState at(const VoxelIndex& v) const { return grid_.at(v); }
  VoxelState state_or(const VoxelIndex& v, VoxelState outside) const { return grid_.state_or(v, outside); }
  bool occupied(const VoxelIndex& v) const { return grid_.occupied(v); }
  double stamp(const VoxelIndex& v) const { return stamps_[spec().linear(v)]; }

  // Returns true if the state changed.
  bool set(const VoxelIndex& v, VoxelState s, double time_s);

  // Bumped on every state change.
  std::uint64_t version() const { return version_; }
  std::size_t known_count() const { return known_; }
  std::size_t occupied_count() const { return occupied_; }

  // Inclusive index bounds of voxels changed since the last call, if any.
  std::optional<std::pair<VoxelIndex, VoxelIndex>> take_dirty_window();

 private:
  OccupancyGrid grid_;
  std::vector<double> stamps_;
  std::uint64_t version_ = 0;
  std::size_t known_ = 0;
  std::size_t occupied_ = 0;
  bool dirty_ = false;
  VoxelIndex dirty_lo_;
  VoxelIndex dirty_hi_;
};

// Marks voxels along each ray free up to the hit, the hit voxel occupied,
// and misses free out to the maximum range. Returns the number of voxels
// whose state changed.
std::size_t integrate_scan(BeliefMap& belief, const LidarScan& scan);

// Copies known voxels of a received chunk into the belief where the belief
// is unknown or older than the chunk. Returns the number of changes.
std::size_t merge_chunk(BeliefMap& belief, const MapChunk& chunk);

struct PathOptions {
  double unknown_penalty = 3.0;  // step cost into an unknown voxel; <= 0 forbids
  double min_center_z = -1e300;  // voxels whose centre is lower are blocked
  // Voxels reserved by other agents; treated as blocked.
  std::span<const VoxelIndex> reserved;
  std::size_t max_expansions = 2'000'000;
};

struct GridPath {
  std::vector<VoxelIndex> voxels;  // from start to goal inclusive
  double cost = 0.0;
};

// A* over 6-connected voxels that are not believed occupied. Ties on f are
// broken by the smaller linear index. The start voxel is always allowed.
std::optional<GridPath> grid_shortest_path(const BeliefMap& belief, const VoxelIndex& from, const VoxelIndex& to,
                                           const PathOptions& options = {});

// Drops intermediate voxels that lie on a straight axis-aligned run, so the
// remaining points are the corners of the path.
std::vector<VoxelIndex> path_corners(std::span<const VoxelIndex> path);

struct InspectionOptions {
  double dwell_s = 0.4;
  double lidar_safe_max_m = 10.0;
  double min_center_z = -1e300;
  // Only faces of occupied voxels inside these boxes (all if empty).
  std::span<const Aabb> boxes;
};

struct InspectionWaypointSet {
  std::vector<Waypoint> waypoints;
  std::vector<SurfaceFace> sources;  // parallel to waypoints
};

// Range at which one pixel covers the desired resolution, clamped to
// [voxel_size, lidar_safe_max].
double inspection_standoff(const CameraIntrinsics& intr, double voxel_size, double lidar_safe_max_m);

// One waypoint per believed-occupied face adjacent to believed-free space,
// at the largest voxel-centre distance along the face normal that does not
// exceed the standoff and lies in a believed-free voxel. View directions
// point back at the face centre. Waypoints closer than half a voxel to an
// earlier one are dropped.
InspectionWaypointSet generate_inspection_waypoints(const BeliefMap& belief, const CameraIntrinsics& intr,
                                                    const InspectionOptions& options = {});

}  // namespace uavsim
