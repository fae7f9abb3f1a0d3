#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uavsim/engine.hpp"

namespace uavsim {

enum class PlannerFamily : std::uint8_t { kGridSweep, kTeamSpiral, kLawnmower, kIdle };
std::string to_string(PlannerFamily f);
std::optional<PlannerFamily> parse_family(std::string_view s);

struct PlannerParams {
  // Navigation.
  int replan_ticks = 50;
  double unknown_penalty = 3.0;
  double min_altitude_m = 1.0;  // lowest voxel centre a path may use
  double clearance_m = 0.3;     // extra margin over the collision radius
  double yield_radius_m = 3.0;
  // Capture.
  double dwell_s = 0.4;
  bool continuous_capture = false;
  int capture_every_ticks = 2;  // continuous mode cadence
  // Grid sweep.
  double lane_spacing_fraction = 0.8;  // of the lidar range
  bool frontier_lite = false;
  double coverage_min_q_res = 0.9;
  double rendezvous_timeout_s = 20.0;
  // Team spiral.
  double spiral_layer_voxels = 2.0;
  double spiral_inset_m = 1.0;  // explorer loop inside the box boundary
  // Lawnmower.
  double lawnmower_speed = 2.0;
  double lawnmower_layer_m = 3.0;
  double lawnmower_lane_m = 4.0;
  int lawnmower_capture_every_ticks = 5;
  double lawnmower_pitch = -0.5235987755982988;

  std::uint64_t seed = 0;
};

// One planner of the family for the given UAV, or for the ground station
// when `uav_id` is kGcsId (always passive).
std::unique_ptr<Planner> make_planner(PlannerFamily family, const std::string& uav_id, const PlannerParams& params);

// Planners for every UAV in the fleet plus the ground station.
PlannerSet make_planners(std::span<const UavSpec> fleet, PlannerFamily family, const PlannerParams& params);

namespace planning {

// Latest odometry heard from each neighbour.
struct Neighbor {
  std::string id;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double time_s = 0.0;
  std::uint64_t heard_tick = 0;
};

class NeighborTable {
 public:
  void update(const Observation& obs);
  const std::map<std::string, Neighbor>& all() const { return table_; }
  const Neighbor* find(const std::string& id) const;
  // Heard on this tick's inbox.
  bool fresh(const std::string& id, std::uint64_t tick) const;

 private:
  std::map<std::string, Neighbor> table_;
};

struct Task {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> view;  // camera direction to hold on arrival
  bool capture = false;
  double dwell_s = 0.0;
  bool stop = true;  // settle before completing; false for pass-through points
  bool capture_en_route = false;  // capture on the continuous cadence while flying to it
};

// Camera yaw and gimbal pitch that look along `dir`, with the pitch kept
// inside the gimbal limits.
std::array<double, 2> aim_for(const Vec3& dir, const DynamicsConfig& limits = {});

// True if a sphere of `radius` swept along [a, b] stays in believed-free
// voxels (unknown counts as blocked unless `allow_unknown`).
bool segment_clear(const BeliefMap& belief, const Vec3& a, const Vec3& b, double radius, bool allow_unknown);

// Follows a list of tasks through the belief map: A* between tasks,
// straight-line shortcuts where the belief is clear, a stop-and-scan
// routine at tasks that ask for it, and yielding to higher-priority
// neighbours (larger id).
class Pilot {
 public:
  explicit Pilot(PlannerParams params) : params_(std::move(params)) {}

  void set_tasks(std::vector<Task> tasks);
  void push(const Task& t) { tasks_.push_back(t); }
  void clear();
  bool done() const { return tasks_.empty(); }
  std::size_t remaining() const { return tasks_.size(); }
  const std::vector<Task>& tasks() const { return tasks_; }
  void allow_unknown(bool on) { allow_unknown_ = on; }
  // Roles rank before names when deciding who yields.
  void role_priority(bool on) { role_priority_ = on; }

  // Command for this tick. Adds the number of tasks finished to `completed`.
  Command drive(const Observation& obs, const NeighborTable& neighbors, int& completed);

 private:
  void reset_leg();
  bool plan_path(const Observation& obs, const NeighborTable& neighbors);
  bool neighbor_outranks(const Observation& obs, const std::string& other) const;

  PlannerParams params_;
  std::vector<Task> tasks_;
  bool allow_unknown_ = false;
  bool role_priority_ = false;
  BeliefMap inflated_;
  std::uint64_t inflated_version_ = 0;
  int yield_ticks_ = 0;
  std::vector<Vec3> path_;  // remaining corners of the current leg
  std::optional<Vec3> leg_target_;  // position setpoint being flown
  std::uint64_t planned_tick_ = 0;
  std::uint64_t planned_version_ = 0;
  bool has_path_ = false;
  int failures_ = 0;
  std::uint64_t retry_tick_ = 0;
  int blocked_ticks_ = 0;
  bool captured_ = false;
  double arrived_s_ = -1.0;
  double dwell_until_s_ = 0.0;
  Vec3 progress_pos_ = Vec3::Zero();
  std::uint64_t progress_tick_ = 0;
};

// Planner-to-planner route handoff.
std::vector<std::uint8_t> encode_tasks(std::span<const Task> tasks);
std::optional<std::vector<Task>> decode_tasks(std::span<const std::uint8_t> bytes);

// Believed-occupied voxel faces next to believed-free voxels inside the
// boxes (all if empty).
std::vector<SurfaceFace> believed_faces(const BeliefMap& belief, std::span<const Aabb> boxes);

// Whether a capture from `cam` looking along `view` would, by the belief
// alone, see the whole face with at least `min_q_res`.
bool covers_face(const BeliefMap& belief, const CameraIntrinsics& intr, const Vec3& cam, const Vec3& view,
                 const SurfaceFace& face, double min_q_res);

// Greedy set cover of faces by candidate waypoints. Returns the indices of
// the chosen waypoints in pick order.
std::vector<std::size_t> select_waypoints(const BeliefMap& belief, const CameraIntrinsics& intr,
                                          std::span<const Waypoint> candidates, std::span<const SurfaceFace> faces,
                                          double min_q_res);

// Straight lanes along the longest horizontal axis of `box`, spaced at
// most `spacing` apart across the other two axes, ordered boustrophedon.
std::vector<std::pair<Vec3, Vec3>> sweep_lanes(const Aabb& box, double spacing, double min_z);

// Volume-proportional regions per team: boxes are visited in a best-first
// order from `origin` and cut with split_box_longest_side where a team's
// share ends.
std::vector<std::vector<Aabb>> team_regions(std::span<const Aabb> boxes, std::span<const int> team_sizes,
                                            const Vec3& origin);

// Lawnmower route for the UAV of sorted rank `rank` among `count`: its share
// of altitude layers (perimeter loops, a boustrophedon cap above `all`),
// ending low over `start`.
std::vector<Vec3> lawnmower_route(const Aabb& all, const Vec3& start, std::size_t rank, std::size_t count,
                                  const PlannerParams& params);

}  // namespace planning
}  // namespace uavsim
