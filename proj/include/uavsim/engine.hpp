#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "uavsim/comms.hpp"
#include "uavsim/lidar.hpp"
#include "uavsim/mapping.hpp"
#include "uavsim/scoring.hpp"
#include "uavsim/world.hpp"

namespace uavsim {

struct UavState {
  std::string id;
  Role role = Role::kPhotographer;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw = 0.0;
  double gimbal_pitch = 0.0;
  double gimbal_yaw = 0.0;  // relative to the body
  bool collided = false;
  bool airborne = false;
  bool landed = false;  // grounded again after flying
};

UavState initial_state(const UavSpec& spec);

enum class CommandKind : std::uint8_t { kHold, kPosition, kVelocity, kFullState, kLand };
std::string to_string(CommandKind k);

struct GimbalSetpoint {
  double pitch = 0.0;
  double yaw = 0.0;  // relative to the body
};

struct Command {
  CommandKind kind = CommandKind::kHold;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  std::optional<double> yaw;
  std::optional<GimbalSetpoint> gimbal;
  bool capture = false;

  static Command hold() { return {}; }
  static Command go_to(const Vec3& p, std::optional<double> yaw = std::nullopt);
  static Command fly(const Vec3& v, std::optional<double> yaw = std::nullopt);
};

struct KinematicLimits {
  double max_speed = 3.0;
  double max_accel = 3.0;
};

// Empty reason when accepted.
struct CommandVerdict {
  bool accepted = true;
  std::string reason;
};
CommandVerdict validate_command(const Command& cmd, const KinematicLimits& limits);

struct DynamicsConfig {
  double dt = 0.1;
  double yaw_rate = 1.5707963267948966;     // rad/s
  double gimbal_rate = 3.141592653589793;   // rad/s
  double gimbal_pitch_min = -2.0943951023931953;
  double gimbal_pitch_max = 0.5235987755982988;
  double gimbal_yaw_limit = 3.141592653589793;
  double position_gain = 1.0;  // full-state position error to velocity, 1/s
};

// Advances one UAV by one tick under `active`. Velocity tracks the desired
// velocity at up to max_accel, integrated exactly within the tick. Returns
// the camera angular velocity over the tick, in the camera frame.
Vec3 step_uav(UavState& s, const Command& active, const KinematicLimits& limits, const DynamicsConfig& cfg);

// Velocity the controller steers toward for the active command.
Vec3 desired_velocity(const UavState& s, const Command& active, const KinematicLimits& limits,
                      const DynamicsConfig& cfg);

struct CollisionBody {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};
// Indices of bodies whose sphere meets an occupied voxel, the ground plane
// z = 0, or another body's sphere.
std::vector<std::size_t> detect_collisions(std::span<const CollisionBody> bodies, const OccupancyGrid& truth);

enum class EventKind : std::uint8_t {
  kTakeoff,
  kLanded,
  kLidarScan,
  kMapUpdate,
  kCapture,
  kWaypointCompleted,
  kCommandRejected,
  kPlannerOverrun,
  kCollision,
  kMessageDelivered,
  kMessageDropped,
};
std::string to_string(EventKind k);

struct SimEvent {
  std::uint64_t tick = 0;
  double time_s = 0.0;
  std::string uav_id;
  EventKind kind = EventKind::kTakeoff;
  std::string detail;
};

struct TrajectorySample {
  std::uint64_t tick = 0;
  double time_s = 0.0;
  std::string id;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double yaw = 0.0;
  double gimbal_pitch = 0.0;
  double gimbal_yaw = 0.0;
  bool collided = false;
  bool airborne = false;
};

struct MessageLogEntry {
  std::uint64_t tick = 0;
  double time_s = 0.0;
  std::string sender;
  std::string recipient;
  PayloadKind kind = PayloadKind::kPlannerData;
  std::size_t size = 0;
  bool delivered = false;
  std::string reason;
  std::optional<std::uint64_t> capture_id;
};

// What a planner sees each tick. Nothing here is read from ground truth
// except through the agent's own sensing and delivered messages.
struct Observation {
  std::uint64_t tick = 0;
  double clock_s = 0.0;
  double dt = 0.1;
  double mission_budget_s = 0.0;
  const UavState* self = nullptr;
  const UavSpec* spec = nullptr;  // null for the ground station
  std::span<const UavSpec> fleet;
  std::span<const Aabb> boxes;
  Vec3 gcs_position = Vec3::Zero();
  std::span<const Message> inbox;
  const LidarScan* scan = nullptr;  // this tick's own scan, if any
  const BeliefMap* belief = nullptr;
  std::size_t pending_reports = 0;
};

struct Decision {
  std::optional<Command> command;  // empty keeps the active setpoint
  std::vector<Message> messages;   // sender is filled in by the engine
  int waypoints_completed = 0;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual Decision decide(const Observation& obs) = 0;
};

// Keyed by UAV id, plus kGcsId for the ground station (optional).
using PlannerSet = std::map<std::string, std::unique_ptr<Planner>>;

struct MissionConfig {
  DynamicsConfig dynamics;
  int keyframe_interval = kDefaultKeyframeInterval;
  RouterConfig router;
  double decision_budget_ms = 2000.0;
  std::uint64_t max_pre_takeoff_ticks = 600;
  double pre_takeoff_wall_s = 10.0;
  bool log_odometry = false;  // odometry deliveries in the message log
  bool record_trajectory = true;
};

struct MissionResult {
  std::string scenario;
  std::uint64_t ticks = 0;
  double clock_s = 0.0;
  bool took_off = false;
  bool aborted = false;
  std::string abort_reason;
  std::vector<TrajectorySample> trajectory;
  std::vector<SimEvent> events;
  std::vector<MessageLogEntry> messages;
  std::vector<CaptureRecord> captures;
  std::set<std::uint64_t> delivered_captures;
  std::set<std::string> collided;
  ScoreBoard score;
  double wall_s = 0.0;
};

// Runs the mission until the clock reaches the budget, every UAV has
// landed, or the pre-takeoff guard trips. A planner that throws aborts the
// mission; the partial result is returned with `aborted` set.
MissionResult run_mission(const Scenario& scenario, PlannerSet& planners, const MissionConfig& config = {});

}  // namespace uavsim
