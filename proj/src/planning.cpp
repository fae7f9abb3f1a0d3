#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uavsim/planners.hpp"

namespace uavsim::planning {

void NeighborTable::update(const Observation& obs) {
  for (const Message& m : obs.inbox) {
    if (m.kind != PayloadKind::kOdometry) continue;
    const Odometry o = decode_odometry(m.payload);
    Neighbor& n = table_[o.id];
    n.id = o.id;
    n.position = o.position;
    n.velocity = o.velocity;
    n.time_s = o.time_s;
    n.heard_tick = obs.tick;
  }
}

const Neighbor* NeighborTable::find(const std::string& id) const {
  const auto it = table_.find(id);
  return it == table_.end() ? nullptr : &it->second;
}

bool NeighborTable::fresh(const std::string& id, std::uint64_t tick) const {
  const Neighbor* n = find(id);
  return n != nullptr && n->heard_tick == tick;
}

std::array<double, 2> aim_for(const Vec3& dir, const DynamicsConfig& limits) {
  auto a = aim_angles(dir);
  a[1] = std::clamp(a[1], limits.gimbal_pitch_min, limits.gimbal_pitch_max);
  return a;
}

namespace {

// Distance from p to the closed box of voxel v.
double voxel_distance(const GridSpec& g, const VoxelIndex& v, const Vec3& p) {
  const Aabb b = g.voxel_box(v);
  const Vec3 q = p.cwiseMax(b.min).cwiseMin(b.max);
  return (p - q).norm();
}

bool sphere_clear(const BeliefMap& belief, const Vec3& p, double radius, bool allow_unknown) {
  if (p.z() - radius <= 0.0) return false;
  const GridSpec& g = belief.spec();
  const VoxelIndex lo = quantize(g, p - Vec3::Constant(radius));
  const VoxelIndex hi = quantize(g, p + Vec3::Constant(radius));
  for (int k = lo.k; k <= hi.k; ++k) {
    for (int j = lo.j; j <= hi.j; ++j) {
      for (int i = lo.i; i <= hi.i; ++i) {
        const VoxelIndex v{i, j, k};
        if (!g.in_bounds(v)) continue;
        const VoxelState s = belief.at(v);
        if (s == VoxelState::kFree || (s == VoxelState::kUnknown && allow_unknown)) continue;
        if (voxel_distance(g, v, p) < radius) return false;
      }
    }
  }
  return true;
}

// Copy of the belief with every voxel touching an occupied one (26
// neighbourhood) marked occupied.
BeliefMap inflate(const BeliefMap& belief) {
  const GridSpec& g = belief.spec();
  BeliefMap out(g);
  for (std::size_t li = 0; li < g.size(); ++li) {
    const VoxelState s = belief.grid().at_linear(li);
    if (s != VoxelState::kUnknown) out.set(g.from_linear(li), s, 0.0);
  }
  for (std::size_t li = 0; li < g.size(); ++li) {
    if (belief.grid().at_linear(li) != VoxelState::kOccupied) continue;
    const VoxelIndex v = g.from_linear(li);
    for (int dk = -1; dk <= 1; ++dk) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          const VoxelIndex n{v.i + di, v.j + dj, v.k + dk};
          if (g.in_bounds(n)) out.set(n, VoxelState::kOccupied, 0.0);
        }
      }
    }
  }
  return out;
}

}  // namespace

bool segment_clear(const BeliefMap& belief, const Vec3& a, const Vec3& b, double radius, bool allow_unknown) {
  const double len = (b - a).norm();
  const double step = 0.25 * belief.spec().voxel_size;
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int s = 0; s <= n; ++s) {
    if (!sphere_clear(belief, a + (b - a) * (static_cast<double>(s) / n), radius, allow_unknown)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Pilot

void Pilot::set_tasks(std::vector<Task> tasks) {
  tasks_ = std::move(tasks);
  reset_leg();
}

void Pilot::clear() {
  tasks_.clear();
  reset_leg();
}

void Pilot::reset_leg() {
  path_.clear();
  has_path_ = false;
  failures_ = 0;
  retry_tick_ = 0;
  captured_ = false;
  arrived_s_ = -1.0;
  dwell_until_s_ = 0.0;
  yield_ticks_ = 0;
  progress_tick_ = 0;
  blocked_ticks_ = 0;
}

bool Pilot::neighbor_outranks(const Observation& obs, const std::string& other) const {
  if (role_priority_) {
    const Role mine = obs.self->role;
    Role theirs = Role::kPhotographer;
    for (const UavSpec& u : obs.fleet) {
      if (u.id == other) theirs = u.role;
    }
    if (mine != theirs) return theirs == Role::kExplorer;
  }
  return other > obs.self->id;
}

bool Pilot::plan_path(const Observation& obs, const NeighborTable& neighbors) {
  const UavState& s = *obs.self;
  const BeliefMap& belief = *obs.belief;
  const GridSpec& g = belief.spec();
  const Task& t = tasks_.front();
  planned_tick_ = obs.tick;
  planned_version_ = belief.version();
  path_.clear();
  has_path_ = false;

  const VoxelIndex from = quantize(g, s.position);
  const VoxelIndex to = quantize(g, t.position);
  if (!g.in_bounds(from) || !g.in_bounds(to) || from == to) {
    path_.push_back(t.position);
    has_path_ = true;
    return true;
  }

  std::vector<VoxelIndex> reserved;
  for (const auto& [id, n] : neighbors.all()) {
    if (id == s.id || obs.tick > n.heard_tick + 20) continue;
    if ((n.position - s.position).norm() > 10.0) continue;
    const VoxelIndex c = quantize(g, n.position);
    for (int dk = -1; dk <= 1; ++dk) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) reserved.push_back({c.i + di, c.j + dj, c.k + dk});
      }
    }
  }
  std::sort(reserved.begin(), reserved.end());
  reserved.erase(std::remove(reserved.begin(), reserved.end(), to), reserved.end());

  PathOptions opt;
  opt.unknown_penalty = allow_unknown_ ? params_.unknown_penalty : 0.0;
  opt.min_center_z = params_.min_altitude_m;
  opt.reserved = reserved;

  if (inflated_version_ != belief.version() || inflated_.spec().size() != g.size()) {
    inflated_ = inflate(belief);
    inflated_version_ = belief.version();
  }
  std::optional<GridPath> path;
  // Keep a voxel of margin where possible; fall back to the raw belief when
  // the goal or the way out of the start lies in the margin.
  if (inflated_.at(to) != VoxelState::kOccupied) path = grid_shortest_path(inflated_, from, to, opt);
  if (!path) path = grid_shortest_path(belief, from, to, opt);
  if (!path) return false;

  const std::vector<VoxelIndex> corners = path_corners(path->voxels);
  for (std::size_t i = 1; i < corners.size(); ++i) path_.push_back(voxel_center(g, corners[i]));
  if (path_.empty()) path_.push_back(t.position);
  path_.back() = t.position;
  has_path_ = true;
  return true;
}

Command Pilot::drive(const Observation& obs, const NeighborTable& neighbors, int& completed) {
  const UavState& s = *obs.self;
  const BeliefMap& belief = *obs.belief;
  const double radius = obs.spec->collision_radius + params_.clearance_m;
  const double speed = s.velocity.norm();

  while (!tasks_.empty()) {
    const Task& t = tasks_.front();
    std::optional<std::array<double, 2>> aim;
    if (t.view) aim = aim_for(*t.view);
    auto aimed = [&](Command c) {
      if (aim) {
        c.yaw = (*aim)[0];
        c.gimbal = GimbalSetpoint{(*aim)[1], 0.0};
      }
      return c;
    };

    const double dist = (t.position - s.position).norm();
    const double reach = t.stop ? 1e-3 : 0.5 * belief.spec().voxel_size;
    if (dist <= reach && (!t.stop || speed < 1e-3)) {
      if (arrived_s_ < 0.0) arrived_s_ = obs.clock_s;
      if (!t.stop) {
        ++completed;
        tasks_.erase(tasks_.begin());
        reset_leg();
        continue;
      }
      Command c = aimed(Command::go_to(t.position));
      if (!captured_) {
        const bool settled = !aim || (std::abs(wrap_angle(s.yaw - (*aim)[0])) < 1e-3 &&
                                      std::abs(s.gimbal_pitch - (*aim)[1]) < 1e-3 &&
                                      std::abs(s.gimbal_yaw) < 1e-3);
        if (settled || obs.clock_s - arrived_s_ > 6.0) {
          c.capture = t.capture;
          captured_ = true;
          dwell_until_s_ = obs.clock_s + t.dwell_s;
        }
        return c;
      }
      if (obs.clock_s + 1e-9 < dwell_until_s_) return c;
      ++completed;
      tasks_.erase(tasks_.begin());
      reset_leg();
      continue;
    }

    // Stuck on this leg for too long: drop it.
    if (progress_tick_ == 0 || (s.position - progress_pos_).norm() > 1.0) {
      progress_tick_ = obs.tick + 1;
      progress_pos_ = s.position;
    } else if (obs.tick > progress_tick_ + 150) {
      ++completed;
      tasks_.erase(tasks_.begin());
      reset_leg();
      continue;
    }

    Command c = aimed(Command::go_to(s.position));
    c.kind = CommandKind::kHold;
    if (t.capture_en_route && params_.capture_every_ticks > 0 &&
        obs.tick % static_cast<std::uint64_t>(params_.capture_every_ticks) == 0) {
      c.capture = true;
    }

    // Yield to higher-priority neighbours close ahead.
    const Vec3 heading = (has_path_ && !path_.empty() ? path_.front() : t.position) - s.position;
    bool yield = false;
    for (const auto& [id, n] : neighbors.all()) {
      // Parked neighbours are left to the path reservations.
      if (id == s.id || obs.tick > n.heard_tick + 2 || n.velocity.norm() < 0.05 || !neighbor_outranks(obs, id)) {
        continue;
      }
      const Vec3 rel = n.position - s.position;
      if (rel.norm() < params_.yield_radius_m && rel.dot(heading) > 0.0) yield = true;
      // Closest approach over the next few seconds if both keep going.
      const Vec3 mine = speed > 1e-3 || heading.norm() < 1e-9 ? s.velocity : obs.spec->max_speed * heading.normalized();
      const Vec3 dv = n.velocity - mine;
      const double tc = dv.squaredNorm() > 1e-12 ? std::clamp(-rel.dot(dv) / dv.squaredNorm(), 0.0, 3.0) : 0.0;
      double r = 0.0;
      for (const UavSpec& u : obs.fleet) {
        if (u.id == id) r = u.collision_radius;
      }
      if ((rel + tc * dv).norm() < obs.spec->collision_radius + r + params_.clearance_m + 0.3 && rel.dot(mine) > 0.0) {
        yield = true;
      }
    }
    if (yield && yield_ticks_ < 50) {
      ++yield_ticks_;
      return c;
    }
    if (yield_ticks_ >= 50) {
      // Waited long enough; route around whoever is in the way.
      yield_ticks_ = 0;
      has_path_ = false;
    }

    auto neighbor_clear = [&](const Vec3& a, const Vec3& b, double margin) {
      for (const auto& [id, n] : neighbors.all()) {
        if (id == s.id || obs.tick > n.heard_tick + 20) continue;
        double r = 0.0;
        for (const UavSpec& u : obs.fleet) {
          if (u.id == id) r = u.collision_radius;
        }
        const Vec3 ab = b - a;
        const double t = ab.squaredNorm() > 0.0 ? std::clamp((n.position - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0) : 0.0;
        if ((a + t * ab - n.position).norm() < obs.spec->collision_radius + r + margin) return false;
      }
      return true;
    };
    // Shortcuts keep the full margin; a planned leg only has to avoid contact.
    auto free_leg = [&](const Vec3& a, const Vec3& b) {
      return neighbor_clear(a, b, params_.clearance_m) && segment_clear(belief, a, b, radius, allow_unknown_);
    };
    auto safe_leg = [&](const Vec3& a, const Vec3& b) {
      return neighbor_clear(a, b, 0.1) && segment_clear(belief, a, b, obs.spec->collision_radius, true);
    };

    if (obs.tick < retry_tick_) return c;
    bool replan = !has_path_ || path_.empty() || obs.tick >= planned_tick_ + static_cast<std::uint64_t>(params_.replan_ticks);
    if (!replan && !safe_leg(s.position, path_.front())) replan = true;
    if (replan && !plan_path(obs, neighbors)) {
      ++failures_;
      retry_tick_ = obs.tick + static_cast<std::uint64_t>(params_.replan_ticks);
      if (failures_ >= 3) {
        ++completed;
        tasks_.erase(tasks_.begin());
        reset_leg();
        continue;
      }
      return c;
    }
    if (!safe_leg(s.position, path_.front())) {
      // Someone parked on the way; give the task up rather than wait forever.
      if (++blocked_ticks_ > 60) {
        ++completed;
        tasks_.erase(tasks_.begin());
        reset_leg();
        continue;
      }
      retry_tick_ = obs.tick + 10;
      blocked_ticks_ += 9;
      has_path_ = false;
      return c;
    }
    blocked_ticks_ = 0;

    // Skip ahead to the farthest corner reachable in a straight line.
    std::size_t next = 0;
    for (std::size_t i = path_.size(); i-- > 1;) {
      if (free_leg(s.position, path_[i])) {
        next = i;
        break;
      }
    }
    path_.erase(path_.begin(), path_.begin() + static_cast<std::ptrdiff_t>(next));
    if (path_.size() > 1 && (path_.front() - s.position).norm() < 1e-3 && speed < 1e-3) {
      path_.erase(path_.begin());
    }
    Vec3 target = path_.front();
    // Turn only from a standstill or onto the same line; turning at speed
    // would cut the corner.
    if (leg_target_ && (target - *leg_target_).norm() > 1e-9 && speed > 1e-3) {
      const Vec3 d = target - s.position;
      const bool in_line = d.norm() > 1e-9 && s.velocity.dot(d) > (1.0 - 1e-9) * speed * d.norm();
      if (!in_line) {
        if (!safe_leg(s.position, *leg_target_)) return c;
        target = *leg_target_;
      }
    }
    leg_target_ = target;
    c.kind = CommandKind::kPosition;
    c.position = target;
    if (!aim) {
      const Vec3 d = target - s.position;
      if (std::hypot(d.x(), d.y()) > 0.5) c.yaw = std::atan2(d.y(), d.x());
    }
    return c;
  }
  return Command::hold();
}

// ---------------------------------------------------------------------------
// Route handoff

std::vector<std::uint8_t> encode_tasks(std::span<const Task> tasks) {
  ByteWriter w;
  w.u8('T');
  w.u32(static_cast<std::uint32_t>(tasks.size()));
  for (const Task& t : tasks) {
    w.vec(t.position);
    w.u8(static_cast<std::uint8_t>((t.view ? 1 : 0) | (t.capture ? 2 : 0) | (t.stop ? 4 : 0) |
                                   (t.capture_en_route ? 8 : 0)));
    if (t.view) w.vec(*t.view);
    w.f64(t.dwell_s);
  }
  return w.take();
}

std::optional<std::vector<Task>> decode_tasks(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    if (r.u8() != 'T') return std::nullopt;
    const std::uint32_t n = r.u32();
    std::vector<Task> out;
    for (std::uint32_t i = 0; i < n; ++i) {
      Task t;
      t.position = r.vec();
      const std::uint8_t flags = r.u8();
      if (flags & 1) t.view = r.vec();
      t.capture = (flags & 2) != 0;
      t.stop = (flags & 4) != 0;
      t.capture_en_route = (flags & 8) != 0;
      t.dwell_s = r.f64();
      out.push_back(t);
    }
    if (!r.done()) return std::nullopt;
    return out;
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Coverage

std::vector<SurfaceFace> believed_faces(const BeliefMap& belief, std::span<const Aabb> boxes) {
  const GridSpec& g = belief.spec();
  std::vector<SurfaceFace> out;
  for (std::size_t li = 0; li < g.size(); ++li) {
    if (belief.grid().at_linear(li) != VoxelState::kOccupied) continue;
    const VoxelIndex v = g.from_linear(li);
    const Vec3 c = voxel_center(g, v);
    if (!boxes.empty() && std::none_of(boxes.begin(), boxes.end(), [&](const Aabb& b) { return b.contains(c, 1e-9); })) {
      continue;
    }
    for (int f = 0; f < 6; ++f) {
      if (belief.state_or(v + kFaceSteps[static_cast<std::size_t>(f)], VoxelState::kUnknown) == VoxelState::kFree) {
        out.push_back({v, f});
      }
    }
  }
  return out;
}

bool covers_face(const BeliefMap& belief, const CameraIntrinsics& intr, const Vec3& cam, const Vec3& view,
                 const SurfaceFace& face, double min_q_res) {
  const GridSpec& g = belief.spec();
  const Vec3 n = face_normal(face.face);
  const Vec3 c = face_center(g, face.voxel, face.face);
  if ((cam - c).dot(n) <= 0.0) return false;
  const auto a = aim_for(view);
  const Pose pose = camera_pose(cam, a[0], a[1], 0.0);
  const int axis = face.face / 2;
  const Vec3 u = Vec3::Unit((axis + 1) % 3) * (0.45 * g.voxel_size);
  const Vec3 w = Vec3::Unit((axis + 2) % 3) * (0.45 * g.voxel_size);
  for (const Vec3& corner : std::array<Vec3, 4>{c + u + w, c + u - w, c - u + w, c - u - w}) {
    if (!fov_contains(pose, intr, corner)) return false;
  }
  if (q_res(InterestPoint{0, c, n}, pose, intr) < min_q_res) return false;
  return !belief.grid().raycast(cam, c + 1e-6 * n).blocked;
}

std::vector<std::size_t> select_waypoints(const BeliefMap& belief, const CameraIntrinsics& intr,
                                          std::span<const Waypoint> candidates, std::span<const SurfaceFace> faces,
                                          double min_q_res) {
  const GridSpec& g = belief.spec();
  // Faces farther than this cannot reach min_q_res even head on.
  const double reach = intr.focal_length_px * intr.desired_mmpp / 1000.0 / std::max(min_q_res, 1e-3) + g.voxel_size;
  std::vector<std::vector<std::size_t>> covers(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Waypoint& wp = candidates[i];
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const Vec3 c = face_center(g, faces[f].voxel, faces[f].face);
      if ((c - wp.position).norm() > reach) continue;
      if (face_normal(faces[f].face).dot(wp.view_direction) > -0.5) continue;
      if (covers_face(belief, intr, wp.position, wp.view_direction, faces[f], min_q_res)) covers[i].push_back(f);
    }
  }
  std::vector<std::uint8_t> done(faces.size(), 0);
  std::vector<std::uint8_t> used(candidates.size(), 0);
  std::vector<std::size_t> picked;
  for (;;) {
    std::size_t best = candidates.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (used[i]) continue;
      std::size_t gain = 0;
      for (std::size_t f : covers[i]) gain += done[f] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best == candidates.size()) break;
    used[best] = 1;
    picked.push_back(best);
    for (std::size_t f : covers[best]) done[f] = 1;
  }
  return picked;
}

// ---------------------------------------------------------------------------
// Sweep lanes and team regions

namespace {

std::vector<double> spread(double lo, double hi, double spacing) {
  if (hi <= lo) return {0.5 * (lo + hi)};
  const int n = static_cast<int>(std::ceil((hi - lo) / spacing - 1e-9)) + 1;
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

}  // namespace

std::vector<std::pair<Vec3, Vec3>> sweep_lanes(const Aabb& box, double spacing, double min_z) {
  const Vec3 e = box.extent();
  const int a = e.x() >= e.y() ? 0 : 1;
  const int b = 1 - a;
  const double margin = 1.0;
  const std::vector<double> bs = spread(box.min[b] + margin, box.max[b] - margin, spacing);
  const std::vector<double> zs = spread(std::max(min_z, box.min.z() + margin), box.max.z() - margin, spacing);
  std::vector<std::pair<Vec3, Vec3>> lanes;
  bool forward = true;
  for (std::size_t zi = 0; zi < zs.size(); ++zi) {
    for (std::size_t k = 0; k < bs.size(); ++k) {
      const double bv = zi % 2 == 0 ? bs[k] : bs[bs.size() - 1 - k];
      Vec3 p0;
      Vec3 p1;
      p0[a] = box.min[a] + margin;
      p1[a] = box.max[a] - margin;
      p0[b] = p1[b] = bv;
      p0[2] = p1[2] = zs[zi];
      if (!forward) std::swap(p0, p1);
      lanes.emplace_back(p0, p1);
      forward = !forward;
    }
  }
  return lanes;
}

std::vector<std::vector<Aabb>> team_regions(std::span<const Aabb> boxes, std::span<const int> team_sizes,
                                            const Vec3& origin) {
  std::vector<std::vector<Aabb>> out(team_sizes.size());
  if (team_sizes.empty() || boxes.empty()) return out;

  // Best-first: nearest unvisited box centre from the previous one.
  std::vector<Aabb> order;
  std::vector<std::uint8_t> seen(boxes.size(), 0);
  Vec3 at = origin;
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    std::size_t best = boxes.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (seen[i]) continue;
      const double d = (boxes[i].center() - at).norm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    seen[best] = 1;
    order.push_back(boxes[best]);
    at = boxes[best].center();
  }

  double total_volume = 0.0;
  for (const Aabb& b : order) total_volume += b.volume();
  const double members = std::accumulate(team_sizes.begin(), team_sizes.end(), 0.0);
  std::size_t team = 0;
  double quota = total_volume * team_sizes[0] / members;
  const double eps = 1e-9 * std::max(1.0, total_volume);
  for (Aabb box : order) {
    for (;;) {
      const double v = box.volume();
      if (team + 1 == team_sizes.size() || v <= quota + eps) {
        out[team].push_back(box);
        quota -= v;
        if (quota <= eps && team + 1 < team_sizes.size()) {
          ++team;
          quota = total_volume * team_sizes[team] / members;
        }
        break;
      }
      const double frac = quota / v;
      const std::array<double, 2> fractions{frac, 1.0 - frac};
      const std::vector<Aabb> parts = split_box_longest_side(box, fractions);
      out[team].push_back(parts[0]);
      box = parts[1];
      ++team;
      quota = total_volume * team_sizes[team] / members;
    }
  }
  return out;
}

}  // namespace uavsim::planning
