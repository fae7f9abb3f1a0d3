#include "uavsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

namespace uavsim {

UavState initial_state(const UavSpec& spec) {
  UavState s;
  s.id = spec.id;
  s.role = spec.role;
  s.position = spec.start_position;
  return s;
}

std::string to_string(CommandKind k) {
  switch (k) {
    case CommandKind::kHold:
      return "hold";
    case CommandKind::kPosition:
      return "position";
    case CommandKind::kVelocity:
      return "velocity";
    case CommandKind::kFullState:
      return "full-state";
    case CommandKind::kLand:
      return "land";
  }
  return "unknown";
}

Command Command::go_to(const Vec3& p, std::optional<double> yaw) {
  Command c;
  c.kind = CommandKind::kPosition;
  c.position = p;
  c.yaw = yaw;
  return c;
}

Command Command::fly(const Vec3& v, std::optional<double> yaw) {
  Command c;
  c.kind = CommandKind::kVelocity;
  c.velocity = v;
  c.yaw = yaw;
  return c;
}

CommandVerdict validate_command(const Command& cmd, const KinematicLimits& limits) {
  auto finite = [](const Vec3& v) { return v.allFinite(); };
  if (!finite(cmd.position) || !finite(cmd.velocity) || !finite(cmd.acceleration)) return {false, "non-finite value"};
  if (cmd.yaw && !std::isfinite(*cmd.yaw)) return {false, "non-finite value"};
  if (cmd.gimbal && (!std::isfinite(cmd.gimbal->pitch) || !std::isfinite(cmd.gimbal->yaw))) {
    return {false, "non-finite value"};
  }
  if (cmd.kind == CommandKind::kVelocity || cmd.kind == CommandKind::kFullState) {
    if (cmd.velocity.norm() > limits.max_speed) return {false, "speed above limit"};
  }
  if (cmd.kind == CommandKind::kFullState && cmd.acceleration.norm() > limits.max_accel) {
    return {false, "acceleration above limit"};
  }
  return {};
}

namespace {

Vec3 clamp_norm(const Vec3& v, double max) {
  const double n = v.norm();
  return n > max ? Vec3(v * (max / n)) : v;
}

double slew(double current, double target, double max_step) {
  return current + std::clamp(target - current, -max_step, max_step);
}

bool requests_motion(const Command& cmd, const UavState& s) {
  switch (cmd.kind) {
    case CommandKind::kPosition:
      return (cmd.position - s.position).norm() > 1e-9;
    case CommandKind::kVelocity:
      return cmd.velocity.norm() > 0.0;
    case CommandKind::kFullState:
      return true;
    case CommandKind::kHold:
    case CommandKind::kLand:
      return false;
  }
  return false;
}

// Time-optimal straight-line approach to a point `dist` ahead, starting at
// speed v >= 0 toward it, integrated exactly over `dt`. Returns the distance
// moved and updates v.
double approach_along_line(double dist, double& v, double a, double vmax, double dt) {
  double moved = 0.0;
  double left = dt;
  for (int phase = 0; phase < 8 && left > 0.0; ++phase) {
    const double togo = dist - moved;
    if (togo <= 0.0 && v <= 0.0) break;
    if (v * v / (2.0 * a) >= togo - 1e-12) {
      // On or past the braking curve.
      const double b = togo > 1e-12 ? std::min(a, v * v / (2.0 * togo)) : a;
      const double t_stop = b > 0.0 ? v / b : 0.0;
      if (t_stop <= left) {
        moved = b > 0.0 && togo > 1e-12 && b < a ? dist : moved + v * t_stop - 0.5 * b * t_stop * t_stop;
        v = 0.0;
        break;
      }
      moved += v * left - 0.5 * b * left * left;
      v -= b * left;
      break;
    }
    if (v < vmax) {
      const double v1 = std::min(vmax, std::sqrt(a * togo + 0.5 * v * v));
      const double t1 = (v1 - v) / a;
      if (t1 >= left) {
        moved += v * left + 0.5 * a * left * left;
        v += a * left;
        break;
      }
      moved += 0.5 * (v + v1) * t1;
      v = v1;
      left -= t1;
      continue;
    }
    const double cruise = togo - v * v / (2.0 * a);
    const double t_c = cruise / v;
    if (t_c >= left) {
      moved += v * left;
      break;
    }
    moved += cruise;
    left -= t_c;
  }
  return moved;
}

}  // namespace

Vec3 desired_velocity(const UavState& s, const Command& active, const KinematicLimits& limits,
                      const DynamicsConfig& cfg) {
  switch (active.kind) {
    case CommandKind::kHold:
    case CommandKind::kLand:
      return Vec3::Zero();
    case CommandKind::kPosition: {
      const Vec3 d = active.position - s.position;
      const double dist = d.norm();
      if (dist < 1e-12) return Vec3::Zero();
      // Fastest speed that can be held for one more tick and still stop at
      // the target: v*dt + v^2/(2a) = dist.
      const double a = limits.max_accel;
      const double brake = a * (std::sqrt(cfg.dt * cfg.dt + 2.0 * dist / a) - cfg.dt);
      const double speed = std::min({limits.max_speed, brake, dist / cfg.dt});
      return d / dist * speed;
    }
    case CommandKind::kVelocity:
      return clamp_norm(active.velocity, limits.max_speed);
    case CommandKind::kFullState:
      return clamp_norm(active.velocity + active.acceleration * cfg.dt +
                            cfg.position_gain * (active.position - s.position),
                        limits.max_speed);
  }
  return Vec3::Zero();
}

Vec3 step_uav(UavState& s, const Command& active, const KinematicLimits& limits, const DynamicsConfig& cfg) {
  if (s.collided) return Vec3::Zero();
  const double dt = cfg.dt;
  bool moved = false;
  if (s.airborne && active.kind == CommandKind::kPosition) {
    const Vec3 d = active.position - s.position;
    const double dist = d.norm();
    const double v_along = dist > 0.0 ? s.velocity.dot(d) / dist : 0.0;
    const Vec3 lateral = dist > 0.0 ? Vec3(s.velocity - v_along * d / dist) : s.velocity;
    if (dist > 0.0 && v_along >= 0.0 && lateral.norm() <= 1e-9 * std::max(1.0, v_along)) {
      double v = std::min(v_along, limits.max_speed);
      const double step = approach_along_line(dist, v, limits.max_accel, limits.max_speed, dt);
      s.position = step >= dist ? active.position : Vec3(s.position + d / dist * step);
      s.velocity = d / dist * v;
      moved = true;
    } else if (dist == 0.0 && s.velocity.norm() == 0.0) {
      moved = true;
    }
  }
  if (s.airborne && !moved) {
    const Vec3 v_des = desired_velocity(s, active, limits, cfg);
    const Vec3 dv = v_des - s.velocity;
    const double need = dv.norm();
    const double a = limits.max_accel;
    if (need <= a * dt) {
      const double tau = a > 0.0 ? need / a : 0.0;
      const Vec3 acc = need > 0.0 ? Vec3(dv / need * a) : Vec3::Zero();
      s.position += s.velocity * tau + 0.5 * acc * tau * tau + v_des * (dt - tau);
      s.velocity = v_des;
    } else {
      const Vec3 acc = dv / need * a;
      s.position += s.velocity * dt + 0.5 * acc * dt * dt;
      s.velocity += acc * dt;
    }
  } else if (!s.airborne) {
    s.velocity = Vec3::Zero();
  }

  const double yaw0 = s.yaw;
  const double pitch0 = s.gimbal_pitch;
  const double gyaw0 = s.gimbal_yaw;
  if (active.yaw) s.yaw = wrap_angle(yaw0 + std::clamp(wrap_angle(*active.yaw - yaw0), -cfg.yaw_rate * dt, cfg.yaw_rate * dt));
  if (active.gimbal) {
    const double p = std::clamp(active.gimbal->pitch, cfg.gimbal_pitch_min, cfg.gimbal_pitch_max);
    const double y = std::clamp(active.gimbal->yaw, -cfg.gimbal_yaw_limit, cfg.gimbal_yaw_limit);
    s.gimbal_pitch = slew(pitch0, p, cfg.gimbal_rate * dt);
    s.gimbal_yaw = slew(gyaw0, y, cfg.gimbal_rate * dt);
  }
  const double pitch_rate = (s.gimbal_pitch - pitch0) / dt;
  const double yaw_rate = (wrap_angle(s.yaw - yaw0) + (s.gimbal_yaw - gyaw0)) / dt;
  const double p = s.gimbal_pitch;
  return {pitch_rate, -yaw_rate * std::cos(p), yaw_rate * std::sin(p)};
}

std::vector<std::size_t> detect_collisions(std::span<const CollisionBody> bodies, const OccupancyGrid& truth) {
  const GridSpec& g = truth.spec();
  std::vector<std::uint8_t> hit(bodies.size(), 0);
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    const Vec3& c = bodies[b].center;
    const double r = bodies[b].radius;
    if (c.z() - r < 0.0) {
      hit[b] = 1;
      continue;
    }
    const VoxelIndex lo = quantize(g, c - Vec3::Constant(r));
    const VoxelIndex hi = quantize(g, c + Vec3::Constant(r));
    for (int k = std::max(lo.k, 0); k <= std::min(hi.k, g.dims[2] - 1) && !hit[b]; ++k)
      for (int j = std::max(lo.j, 0); j <= std::min(hi.j, g.dims[1] - 1) && !hit[b]; ++j)
        for (int i = std::max(lo.i, 0); i <= std::min(hi.i, g.dims[0] - 1) && !hit[b]; ++i) {
          if (!truth.occupied({i, j, k})) continue;
          const Aabb box = g.voxel_box({i, j, k});
          const Vec3 closest = c.cwiseMax(box.min).cwiseMin(box.max);
          if ((closest - c).norm() < r) hit[b] = 1;
        }
  }
  for (std::size_t a = 0; a < bodies.size(); ++a)
    for (std::size_t b = a + 1; b < bodies.size(); ++b) {
      if ((bodies[a].center - bodies[b].center).norm() < bodies[a].radius + bodies[b].radius) hit[a] = hit[b] = 1;
    }
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    if (hit[b]) out.push_back(b);
  }
  return out;
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::kTakeoff:
      return "takeoff";
    case EventKind::kLanded:
      return "landed";
    case EventKind::kLidarScan:
      return "lidar-scan";
    case EventKind::kMapUpdate:
      return "map-update";
    case EventKind::kCapture:
      return "capture";
    case EventKind::kWaypointCompleted:
      return "waypoint-completed";
    case EventKind::kCommandRejected:
      return "command-rejected";
    case EventKind::kPlannerOverrun:
      return "planner-overrun";
    case EventKind::kCollision:
      return "collision";
    case EventKind::kMessageDelivered:
      return "message-delivered";
    case EventKind::kMessageDropped:
      return "message-dropped";
  }
  return "unknown";
}

namespace {

struct Agent {
  const UavSpec* spec = nullptr;  // null for the ground station
  UavState state;
  BeliefMap belief;
  Command active;
  Planner* planner = nullptr;
  std::vector<Message> inbox;
  std::deque<CaptureReport> pending;
  bool heard_gcs = false;
  double next_scan_s = 0.0;
  std::uint64_t scan_index = 0;
};

}  // namespace

MissionResult run_mission(const Scenario& scenario, PlannerSet& planners, const MissionConfig& config) {
  const auto wall_start = std::chrono::steady_clock::now();
  auto wall_s = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count(); };
  const OccupancyGrid& truth = scenario.ground_truth;
  const GridSpec& grid = truth.spec();
  const DynamicsConfig& dyn = config.dynamics;

  MissionResult result;
  result.scenario = scenario.name;

  // Agents in name order; the ground station takes part like any other.
  std::vector<Agent> agents;
  for (const UavSpec& u : scenario.fleet) {
    Agent a;
    a.spec = &u;
    a.state = initial_state(u);
    a.belief = BeliefMap(grid);
    agents.push_back(std::move(a));
  }
  {
    Agent gcs;
    gcs.state.id = kGcsId;
    gcs.state.position = scenario.gcs_position;
    gcs.belief = BeliefMap(grid);
    agents.push_back(std::move(gcs));
  }
  std::sort(agents.begin(), agents.end(), [](const Agent& a, const Agent& b) { return a.state.id < b.state.id; });
  for (Agent& a : agents) {
    auto it = planners.find(a.state.id);
    if (it != planners.end()) a.planner = it->second.get();
  }
  std::vector<Endpoint> endpoints(agents.size());
  auto is_uav = [](const Agent& a) { return a.spec != nullptr; };

  std::uint64_t tick = 0;
  double clock = 0.0;
  std::uint64_t next_capture_id = 1;
  const double eps = 1e-9;

  for (;;) {
    if (!result.took_off && (tick >= config.max_pre_takeoff_ticks || wall_s() > config.pre_takeoff_wall_s)) break;
    if (result.took_off && clock >= scenario.mission_budget_s - eps) break;
    if (result.took_off && std::all_of(agents.begin(), agents.end(), [&](const Agent& a) {
          return !is_uav(a) || a.state.collided || !a.state.airborne;
        })) {
      break;
    }

    std::vector<SimEvent> events;
    auto emit = [&](const std::string& id, EventKind kind, std::string detail) {
      events.push_back({tick, 0.0, id, kind, std::move(detail)});
    };

    // Deliveries from the previous tick.
    for (Agent& a : agents) {
      a.heard_gcs = false;
      std::size_t changed = 0;
      for (const Message& m : a.inbox) {
        if (m.sender == kGcsId) a.heard_gcs = true;
        if (m.kind == PayloadKind::kMapChunk) changed += merge_chunk(a.belief, decode_map_chunk(m.payload));
      }
      if (changed > 0) emit(a.state.id, EventKind::kMapUpdate, std::to_string(changed));
    }

    // Sensing.
    std::vector<std::optional<LidarScan>> scans(agents.size());
    for (std::size_t n = 0; n < agents.size(); ++n) {
      Agent& a = agents[n];
      if (!is_uav(a) || !a.spec->lidar || a.state.collided) continue;
      if (clock < a.next_scan_s - eps) continue;
      const LidarSpec& ls = *a.spec->lidar;
      scans[n] = lidar_scan(a.state.position, truth, ls, a.scan_index, scenario.rng_seed, clock);
      ++a.scan_index;
      const double period = 1.0 / ls.scan_rate_hz;
      while (a.next_scan_s <= clock + eps) a.next_scan_s += period;
      emit(a.state.id, EventKind::kLidarScan, std::to_string(scans[n]->hits.size()));
      const std::size_t changed = integrate_scan(a.belief, *scans[n]);
      if (changed > 0) emit(a.state.id, EventKind::kMapUpdate, std::to_string(changed));
    }

    // Decisions.
    std::vector<Decision> decisions(agents.size());
    for (std::size_t n = 0; n < agents.size(); ++n) {
      Agent& a = agents[n];
      if (a.planner == nullptr) continue;
      Observation obs;
      obs.tick = tick;
      obs.clock_s = clock;
      obs.dt = dyn.dt;
      obs.mission_budget_s = scenario.mission_budget_s;
      obs.self = &a.state;
      obs.spec = a.spec;
      obs.fleet = scenario.fleet;
      obs.boxes = scenario.bounding_boxes;
      obs.gcs_position = scenario.gcs_position;
      obs.inbox = a.inbox;
      obs.scan = scans[n] ? &*scans[n] : nullptr;
      obs.belief = &a.belief;
      obs.pending_reports = a.pending.size();
      const auto t0 = std::chrono::steady_clock::now();
      try {
        decisions[n] = a.planner->decide(obs);
      } catch (const std::exception& e) {
        result.aborted = true;
        result.abort_reason = a.state.id + ": " + e.what();
        break;
      }
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (ms > config.decision_budget_ms) {
        emit(a.state.id, EventKind::kPlannerOverrun, std::to_string(static_cast<long long>(ms)) + " ms");
        decisions[n] = Decision{};
        decisions[n].command = Command::hold();
      }
    }
    if (result.aborted) break;

    // Commands.
    std::vector<std::uint8_t> capture(agents.size(), 0);
    for (std::size_t n = 0; n < agents.size(); ++n) {
      Agent& a = agents[n];
      const Decision& d = decisions[n];
      if (d.waypoints_completed > 0) emit(a.state.id, EventKind::kWaypointCompleted, std::to_string(d.waypoints_completed));
      if (!is_uav(a) || !d.command) continue;
      const CommandVerdict v = validate_command(*d.command, {a.spec->max_speed, a.spec->max_accel});
      if (!v.accepted) {
        emit(a.state.id, EventKind::kCommandRejected, to_string(d.command->kind) + ": " + v.reason);
        continue;
      }
      a.active = *d.command;
      capture[n] = d.command->capture;
      if (!a.state.airborne && !a.state.collided && requests_motion(a.active, a.state)) {
        a.state.airborne = true;
        a.state.landed = false;
        result.took_off = true;
        emit(a.state.id, EventKind::kTakeoff, "");
      }
    }

    const bool any_airborne =
        std::any_of(agents.begin(), agents.end(), [&](const Agent& a) { return is_uav(a) && a.state.airborne; });
    const double t_end = clock + (any_airborne ? dyn.dt : 0.0);

    // Motion.
    std::vector<Vec3> omega(agents.size(), Vec3::Zero());
    for (std::size_t n = 0; n < agents.size(); ++n) {
      Agent& a = agents[n];
      if (!is_uav(a)) continue;
      omega[n] = step_uav(a.state, a.active, {a.spec->max_speed, a.spec->max_accel}, dyn);
      if (a.state.airborne && a.active.kind == CommandKind::kLand && a.state.velocity.norm() < 0.05) {
        a.state.airborne = false;
        a.state.landed = true;
        a.state.velocity = Vec3::Zero();
        emit(a.state.id, EventKind::kLanded, "");
      }
    }

    // Collisions.
    {
      std::vector<CollisionBody> bodies;
      std::vector<std::size_t> owner;
      for (std::size_t n = 0; n < agents.size(); ++n) {
        if (!is_uav(agents[n])) continue;
        bodies.push_back({agents[n].state.position, agents[n].spec->collision_radius});
        owner.push_back(n);
      }
      for (std::size_t b : detect_collisions(bodies, truth)) {
        UavState& s = agents[owner[b]].state;
        if (s.collided) continue;
        s.collided = true;
        s.velocity = Vec3::Zero();
        result.collided.insert(s.id);
        emit(s.id, EventKind::kCollision, "");
      }
    }

    // Captures, scored against the pose at the end of the tick.
    for (std::size_t n = 0; n < agents.size(); ++n) {
      Agent& a = agents[n];
      if (!capture[n] || a.state.collided) continue;
      CaptureContext ctx;
      ctx.uav_id = a.state.id;
      ctx.capture_id = next_capture_id++;
      ctx.time_s = t_end;
      ctx.camera = camera_pose(a.state.position, a.state.yaw, a.state.gimbal_pitch, a.state.gimbal_yaw);
      ctx.linear_velocity = a.state.velocity;
      ctx.angular_velocity = omega[n];
      ctx.intrinsics = a.spec->camera;
      CaptureRecord rec = score_capture(ctx, scenario.interest_points, truth);
      emit(a.state.id, EventKind::kCapture, std::to_string(ctx.capture_id) + " " + std::to_string(rec.entries.size()));
      if (!rec.entries.empty()) {
        CaptureReport rep{rec.capture_id, rec.uav_id, rec.time_s, {}};
        for (const CaptureEntry& e : rec.entries) rep.point_q.emplace_back(e.point_id, e.q);
        a.pending.push_back(std::move(rep));
      }
      result.captures.push_back(std::move(rec));
    }

    // Outbox: automatic feeds, planner messages, then capture reports.
    std::vector<Message> outbox;
    std::vector<std::optional<std::uint64_t>> capture_of;
    {
      std::vector<FeedAgent> feeds;
      const bool keyframe = keyframe_tick(tick, config.keyframe_interval);
      for (Agent& a : agents) {
        FeedAgent f{a.state.id, a.state.role, a.state.position, a.state.velocity, a.state.yaw, {}};
        if (is_uav(a) && a.state.role == Role::kExplorer && keyframe) {
          if (auto w = a.belief.take_dirty_window()) {
            f.chunks = make_map_chunks(a.belief.grid(), w->first, w->second, t_end, config.router.max_message_bytes);
          } else {
            MapChunk empty;
            empty.stamp_s = t_end;
            f.chunks.push_back(empty);
          }
        }
        if (!is_uav(a)) f.role = Role::kPhotographer;
        feeds.push_back(std::move(f));
      }
      outbox = auto_feeds(feeds, tick, t_end, config.keyframe_interval);
      capture_of.assign(outbox.size(), std::nullopt);
      for (std::size_t n = 0; n < agents.size(); ++n) {
        for (Message& m : decisions[n].messages) {
          m.sender = agents[n].state.id;
          m.sent_at_s = t_end;
          outbox.push_back(std::move(m));
          capture_of.push_back(std::nullopt);
        }
      }
      for (Agent& a : agents) {
        if (!a.heard_gcs) continue;
        for (const CaptureReport& r : a.pending) {
          outbox.push_back({a.state.id, kGcsId, PayloadKind::kCaptureReport, encode(r), t_end});
          capture_of.push_back(r.capture_id);
        }
      }
    }
    for (std::size_t n = 0; n < agents.size(); ++n) endpoints[n] = {agents[n].state.id, agents[n].state.position};

    const bool last_tick = result.took_off && t_end >= scenario.mission_budget_s - eps;
    std::map<std::string, std::vector<Message>> next_inbox;
    std::set<std::uint64_t> acked;
    for (Delivery& d : route(outbox, endpoints, truth, config.router)) {
      const Message& m = outbox[d.message_index];
      if (d.delivered && last_tick) {
        d.delivered = false;
        d.reason = "mission-ended";
      }
      if (d.delivered) {
        next_inbox[d.recipient].push_back(m);
        if (capture_of[d.message_index] && d.recipient == kGcsId) {
          result.delivered_captures.insert(*capture_of[d.message_index]);
          acked.insert(*capture_of[d.message_index]);
        }
      }
      if (m.kind == PayloadKind::kOdometry && !config.log_odometry) continue;
      result.messages.push_back(
          {tick, t_end, m.sender, d.recipient, m.kind, m.size_bytes(), d.delivered, d.reason, capture_of[d.message_index]});
      if (m.kind != PayloadKind::kOdometry) {
        emit(m.sender, d.delivered ? EventKind::kMessageDelivered : EventKind::kMessageDropped,
             to_string(m.kind) + " -> " + d.recipient + (d.reason.empty() ? "" : " (" + d.reason + ")"));
      }
    }
    for (Agent& a : agents) {
      a.inbox = std::move(next_inbox[a.state.id]);
      std::erase_if(a.pending, [&](const CaptureReport& r) { return acked.contains(r.capture_id); });
    }

    if (config.record_trajectory) {
      for (const Agent& a : agents) {
        if (!is_uav(a)) continue;
        const UavState& s = a.state;
        result.trajectory.push_back(
            {tick, t_end, s.id, s.position, s.velocity, s.yaw, s.gimbal_pitch, s.gimbal_yaw, s.collided, s.airborne});
      }
    }

    std::stable_sort(events.begin(), events.end(), [](const SimEvent& x, const SimEvent& y) {
      return std::tie(x.uav_id, x.kind) < std::tie(y.uav_id, y.kind);
    });
    for (SimEvent& e : events) {
      e.time_s = t_end;
      result.events.push_back(std::move(e));
    }

    clock = t_end;
    ++tick;
  }

  result.ticks = tick;
  result.clock_s = clock;
  result.score = tally(result.captures, result.delivered_captures, result.collided, scenario.interest_points);
  result.wall_s = wall_s();
  return result;
}

}  // namespace uavsim
