#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavsim/geometry.hpp"

namespace uavsim {

enum class VoxelState : std::uint8_t { kUnknown = 0, kFree = 1, kOccupied = 2 };

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const GridSpec& spec, VoxelState fill);

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return states_.size(); }

  VoxelState at(const VoxelIndex& v) const { return states_[spec_.linear(v)]; }
  VoxelState at_linear(std::size_t idx) const { return states_[idx]; }
  // Out-of-grid voxels report `outside`.
  VoxelState state_or(const VoxelIndex& v, VoxelState outside) const {
    return spec_.in_bounds(v) ? at(v) : outside;
  }
  bool occupied(const VoxelIndex& v) const {
    return spec_.in_bounds(v) && at(v) == VoxelState::kOccupied;
  }
  void set(const VoxelIndex& v, VoxelState s) { states_[spec_.linear(v)] = s; }
  void set_linear(std::size_t idx, VoxelState s) { states_[idx] = s; }

  std::span<const VoxelState> states() const { return states_; }
  std::size_t count(VoxelState s) const;
  std::vector<VoxelIndex> voxels_in_state(VoxelState s) const;

  OccupancyQuery occupancy_query() const {
    return [this](const VoxelIndex& v) { return occupied(v); };
  }
  RaycastResult raycast(const Vec3& from, const Vec3& to) const {
    return voxel_raycast(spec_, occupancy_query(), from, to);
  }

  bool operator==(const OccupancyGrid&) const = default;

 private:
  GridSpec spec_;
  std::vector<VoxelState> states_;
};

// The six axis-aligned face directions, in the order +x -x +y -y +z -z.
inline constexpr std::array<VoxelIndex, 6> kFaceSteps{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                                       {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
inline Vec3 face_normal(int face) {
  const VoxelIndex s = kFaceSteps[static_cast<std::size_t>(face)];
  return {static_cast<double>(s.i), static_cast<double>(s.j), static_cast<double>(s.k)};
}
inline Vec3 face_center(const GridSpec& grid, const VoxelIndex& v, int face) {
  return voxel_center(grid, v) + 0.5 * grid.voxel_size * face_normal(face);
}

enum class Role : std::uint8_t { kExplorer, kPhotographer };
std::string to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

struct InterestPoint {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();

  bool operator==(const InterestPoint&) const = default;
};

struct LidarSpec {
  double max_range_m = 20.0;
  int rays_per_scan = 2000;
  double scan_rate_hz = 10.0;

  bool operator==(const LidarSpec&) const = default;
};

struct UavSpec {
  std::string id;
  Role role = Role::kPhotographer;
  Vec3 start_position = Vec3::Zero();
  double max_speed = 3.0;
  double max_accel = 3.0;
  double collision_radius = 0.3;
  CameraIntrinsics camera;
  std::optional<LidarSpec> lidar;

  bool operator==(const UavSpec&) const = default;
};

using FleetSpec = std::vector<UavSpec>;

inline constexpr const char* kGcsId = "gcs";

struct Scenario {
  std::string name;
  std::vector<Aabb> bounding_boxes;
  OccupancyGrid ground_truth;
  std::vector<InterestPoint> interest_points;
  FleetSpec fleet;
  Vec3 gcs_position = Vec3::Zero();
  double mission_budget_s = 240.0;
  double voxel_size = 1.0;
  std::uint64_t rng_seed = 0;

  bool operator==(const Scenario&) const = default;
};

// Raised for malformed or inconsistent scenarios. `where` is the field path
// for schema errors or the invariant name for consistency errors.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// Throws ScenarioError naming the first violated invariant.
void validate_scenario(const Scenario& s);

// Smallest cuboid holding every box corner and start position, inflated by
// one voxel on each face.
Aabb operational_volume(std::span<const Aabb> boxes, std::span<const Vec3> starts,
                        double voxel_size);
// Voxel grid over the operational volume; shared by ground truth and beliefs.
GridSpec operational_grid(std::span<const Aabb> boxes, std::span<const Vec3> starts,
                          double voxel_size);

enum class StructureStyle : std::uint8_t { kSolidBlock, kShell, kLattice };
std::string to_string(StructureStyle s);
std::optional<StructureStyle> parse_style(std::string_view s);

struct GeneratorSpec {
  std::string name = "scenario";
  std::string layout = "single";  // single | pair | row
  StructureStyle style = StructureStyle::kSolidBlock;
  std::array<int, 3> structure_voxels{16, 16, 10};
  int interest_points = 200;
  std::uint64_t seed = 1;
  double voxel_size = 1.0;
  double box_padding_m = 6.0;
  int explorers = 1;
  int photographers = 2;
  double mission_budget_s = 240.0;
  int lattice_spacing = 4;
};

// Deterministic in the spec. Throws ScenarioError if the structure exposes
// fewer faces than requested interest points.
Scenario generate_scenario(const GeneratorSpec& spec);

// Default fleet member parameters used by the generator.
UavSpec default_explorer(const std::string& id, const Vec3& start);
UavSpec default_photographer(const std::string& id, const Vec3& start);

// Face keys for occupied voxel faces adjacent to free space reachable from
// the grid boundary. Downward faces on the lowest occupied layer (resting on
// the ground) are excluded.
struct SurfaceFace {
  VoxelIndex voxel;
  int face = 0;
};
std::vector<SurfaceFace> exposed_faces(const OccupancyGrid& truth);

// JSON scenario files. Loading validates and throws ScenarioError.
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const Scenario& s, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace uavsim
