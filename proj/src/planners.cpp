#include "uavsim/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace uavsim {

std::string to_string(PlannerFamily f) {
  switch (f) {
    case PlannerFamily::kGridSweep:
      return "grid-sweep";
    case PlannerFamily::kTeamSpiral:
      return "team-spiral";
    case PlannerFamily::kLawnmower:
      return "lawnmower";
    case PlannerFamily::kIdle:
      return "idle";
  }
  return "unknown";
}

std::optional<PlannerFamily> parse_family(std::string_view s) {
  for (PlannerFamily f : {PlannerFamily::kGridSweep, PlannerFamily::kTeamSpiral, PlannerFamily::kLawnmower,
                          PlannerFamily::kIdle}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

namespace {

using planning::NeighborTable;
using planning::Pilot;
using planning::Task;

// Planner-data tags.
constexpr std::uint8_t kTagTasks = 'T';
constexpr std::uint8_t kTagAck = 'A';
constexpr std::uint8_t kTagDone = 'D';

Message data_message(const std::string& to, std::vector<std::uint8_t> payload, double t) {
  Message m;
  m.recipient = to;
  m.kind = PayloadKind::kPlannerData;
  m.payload = std::move(payload);
  m.sent_at_s = t;
  return m;
}

std::vector<Message> full_map_messages(const BeliefMap& belief, double t) {
  const GridSpec& g = belief.spec();
  std::vector<Message> out;
  for (const MapChunk& c :
       make_map_chunks(belief.grid(), {0, 0, 0}, {g.dims[0] - 1, g.dims[1] - 1, g.dims[2] - 1}, t)) {
    Message m;
    m.recipient = kBroadcast;
    m.kind = PayloadKind::kMapChunk;
    m.payload = encode(c);
    m.sent_at_s = t;
    out.push_back(std::move(m));
  }
  return out;
}

Command land() {
  Command c;
  c.kind = CommandKind::kLand;
  return c;
}

class IdlePlanner final : public Planner {
 public:
  Decision decide(const Observation&) override { return {}; }
};

// Shared tail of the coordinated families: wait for a task list, fly it,
// go home once it is done or time runs short, land after every capture
// report is through.
class Crew : public Planner {
 public:
  explicit Crew(PlannerParams params) : params_(params), pilot_(params) {}

  Decision decide(const Observation& obs) final {
    Decision d;
    if (obs.self == nullptr || obs.spec == nullptr) return d;
    neighbors_.update(obs);
    if (!init_) {
      home_ = obs.spec->start_position + Vec3(0.0, 0.0, 2.0);
      setup(obs);
      init_ = true;
    }
    for (const Message& m : obs.inbox) {
      if (m.kind != PayloadKind::kPlannerData || m.payload.empty()) continue;
      if (m.payload[0] == kTagAck) {
        outstanding_.erase(m.sender);
      } else if (m.payload[0] == kTagTasks) {
        d.messages.push_back(data_message(m.sender, {kTagAck}, obs.clock_s));
        if (!got_tasks_) {
          if (auto tasks = planning::decode_tasks(m.payload)) {
            got_tasks_ = true;
            begin(obs, std::move(*tasks));
          }
        }
      } else {
        on_data(obs, m, d);
      }
    }
    if (obs.self->collided) return d;
    resend(obs, d);
    switch (phase_) {
      case Phase::kSetup:
        prepare(obs, d);
        break;
      case Phase::kWait:
        break;
      case Phase::kWork:
        work(obs, d);
        break;
      case Phase::kReturn:
        d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
        if (pilot_.done()) phase_ = Phase::kLand;
        break;
      case Phase::kLand:
        if (obs.pending_reports == 0) {
          d.command = land();
          phase_ = Phase::kDone;
        }
        break;
      case Phase::kDone:
        break;
    }
    return d;
  }

 protected:
  enum class Phase : std::uint8_t { kSetup, kWait, kWork, kReturn, kLand, kDone };

  virtual void setup(const Observation& obs) = 0;
  // Own work before the task list (exploration, planning).
  virtual void prepare(const Observation& obs, Decision& d) = 0;
  virtual void on_data(const Observation&, const Message&, Decision&) {}

  void begin(const Observation& obs, std::vector<Task> tasks) {
    got_tasks_ = true;
    if (tasks.empty() && !obs.self->airborne) {
      phase_ = Phase::kDone;
      return;
    }
    pilot_.set_tasks(std::move(tasks));
    phase_ = Phase::kWork;
  }

  void send_tasks(const Observation& obs, Decision& d, const std::string& to, std::span<const Task> tasks) {
    Outstanding o{planning::encode_tasks(tasks), obs.tick};
    d.messages.push_back(data_message(to, o.payload, obs.clock_s));
    outstanding_[to] = std::move(o);
  }

  void go_home() {
    Task t;
    t.position = home_;
    pilot_.set_tasks({t});
    phase_ = Phase::kReturn;
  }

  // Seconds needed to get home from here, with slack for detours.
  double time_home(const Observation& obs) const {
    return 1.5 * (home_ - obs.self->position).norm() / (0.8 * obs.spec->max_speed) + 8.0;
  }

  void work(const Observation& obs, Decision& d) {
    if (obs.clock_s + time_home(obs) >= obs.mission_budget_s || pilot_.done()) {
      go_home();
      d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
      return;
    }
    d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
  }

  PlannerParams params_;
  Pilot pilot_;
  NeighborTable neighbors_;
  Phase phase_ = Phase::kSetup;
  Vec3 home_ = Vec3::Zero();
  bool init_ = false;
  bool got_tasks_ = false;

 private:
  struct Outstanding {
    std::vector<std::uint8_t> payload;
    std::uint64_t sent_tick = 0;
  };

  void resend(const Observation& obs, Decision& d) {
    for (auto& [to, o] : outstanding_) {
      if (obs.tick < o.sent_tick + 10) continue;
      d.messages.push_back(data_message(to, o.payload, obs.clock_s));
      o.sent_tick = obs.tick;
    }
  }

  std::map<std::string, Outstanding> outstanding_;
};

std::vector<std::string> explorer_ids(std::span<const UavSpec> fleet) {
  std::vector<std::string> out;
  for (const UavSpec& u : fleet) {
    if (u.role == Role::kExplorer) out.push_back(u.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const UavSpec* find_spec(std::span<const UavSpec> fleet, const std::string& id) {
  for (const UavSpec& u : fleet) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

// Camera used for coverage planning: the first photographer's, else our own.
CameraIntrinsics planning_camera(const Observation& obs) {
  for (const UavSpec& u : obs.fleet) {
    if (u.role == Role::kPhotographer) return u.camera;
  }
  return obs.spec->camera;
}

double lidar_safe_max(const Observation& obs) {
  return obs.spec->lidar ? 0.5 * obs.spec->lidar->max_range_m : 10.0;
}

// ---------------------------------------------------------------------------
// Grid sweep

class GridSweep final : public Crew {
 public:
  explicit GridSweep(PlannerParams params) : Crew(params) {}

 private:
  enum class Stage : std::uint8_t { kExplore, kRendezvous, kGather, kIdle };

  void setup(const Observation& obs) override {
    explorers_ = explorer_ids(obs.fleet);
    const bool explorer = obs.spec->role == Role::kExplorer;
    leader_ = !explorers_.empty() && explorers_.front() == obs.self->id;
    pilot_.allow_unknown(true);
    if (!explorer) {
      // No own sensing: keep unknown space as a last resort only.
      PlannerParams p = params_;
      p.unknown_penalty = 3.0 * params_.unknown_penalty;
      pilot_ = Pilot(p);
      pilot_.allow_unknown(true);
      phase_ = Phase::kWait;
      return;
    }
    if (!params_.frontier_lite) {
      const std::size_t me = static_cast<std::size_t>(
          std::find(explorers_.begin(), explorers_.end(), obs.self->id) - explorers_.begin());
      const double range = obs.spec->lidar ? obs.spec->lidar->max_range_m : 20.0;
      std::vector<Task> tasks;
      std::size_t n = 0;
      for (const Aabb& box : obs.boxes) {
        for (const auto& [a, b] : planning::sweep_lanes(box, params_.lane_spacing_fraction * range,
                                                        params_.min_altitude_m + 0.5)) {
          if (n++ % explorers_.size() != me) continue;
          for (const Vec3& p : std::array<Vec3, 2>{a, b}) {
            Task t;
            t.position = p;
            t.stop = false;
            tasks.push_back(t);
          }
        }
      }
      pilot_.set_tasks(std::move(tasks));
    }
    stage_ = Stage::kExplore;
  }

  void on_data(const Observation&, const Message& m, Decision&) override {
    if (m.payload[0] == kTagDone) done_.insert(m.sender);
  }

  std::optional<Vec3> next_frontier(const Observation& obs) {
    const BeliefMap& b = *obs.belief;
    const GridSpec& g = b.spec();
    std::optional<Vec3> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t li = 0; li < g.size(); ++li) {
      if (b.grid().at_linear(li) != VoxelState::kFree) continue;
      const VoxelIndex v = g.from_linear(li);
      const Vec3 c = voxel_center(g, v);
      if (c.z() < params_.min_altitude_m + 0.5 || blacklist_.contains(li)) continue;
      if (std::none_of(obs.boxes.begin(), obs.boxes.end(), [&](const Aabb& box) { return box.contains(c); })) continue;
      bool frontier = false;
      for (const VoxelIndex& s : kFaceSteps) {
        if (b.state_or(v + s, VoxelState::kFree) == VoxelState::kUnknown) frontier = true;
      }
      if (!frontier) continue;
      const double d = (c - obs.self->position).norm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

  void prepare(const Observation& obs, Decision& d) override {
    switch (stage_) {
      case Stage::kExplore: {
        if (params_.frontier_lite && pilot_.done()) {
          const auto f = obs.clock_s < 0.35 * obs.mission_budget_s ? next_frontier(obs) : std::nullopt;
          if (f) {
            blacklist_.insert(obs.belief->spec().linear(quantize(obs.belief->spec(), *f)));
            Task t;
            t.position = *f;
            t.stop = false;
            pilot_.push(t);
          }
        }
        if (pilot_.done() || obs.clock_s + time_home(obs) + 60.0 >= obs.mission_budget_s) {
          Task t;
          t.position = home_;
          pilot_.set_tasks({t});
          stage_ = Stage::kRendezvous;
        }
        d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
        break;
      }
      case Stage::kRendezvous:
        d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
        if (!pilot_.done()) break;
        gather_start_ = obs.clock_s;
        stage_ = Stage::kGather;
        if (!leader_) {
          for (Message& m : full_map_messages(*obs.belief, obs.clock_s)) d.messages.push_back(std::move(m));
        }
        break;
      case Stage::kGather: {
        if (!leader_) break;
        const bool all_in = std::all_of(explorers_.begin() + 1, explorers_.end(),
                                        [&](const std::string& e) { return done_.contains(e); });
        if (!all_in && obs.clock_s < gather_start_ + params_.rendezvous_timeout_s) break;
        plan(obs, d);
        stage_ = Stage::kIdle;
        break;
      }
      case Stage::kIdle:
        break;
    }
    // Non-leaders announce they are back until a task list arrives.
    if (!leader_ && stage_ == Stage::kGather && !got_tasks_ && obs.tick % 10 == 0) {
      d.messages.push_back(data_message(explorers_.front(), {kTagDone}, obs.clock_s));
    }
  }

  void plan(const Observation& obs, Decision& d) {
    const BeliefMap& belief = *obs.belief;
    const CameraIntrinsics cam = planning_camera(obs);
    InspectionOptions io;
    io.dwell_s = params_.dwell_s;
    io.lidar_safe_max_m = lidar_safe_max(obs);
    io.min_center_z = params_.min_altitude_m + 0.5;
    io.boxes = obs.boxes;
    const InspectionWaypointSet cands = generate_inspection_waypoints(belief, cam, io);
    const std::vector<SurfaceFace> faces = planning::believed_faces(belief, obs.boxes);
    const std::vector<std::size_t> picked =
        planning::select_waypoints(belief, cam, cands.waypoints, faces, params_.coverage_min_q_res);

    // Crew: ourselves, explorers that reported back, photographers in range.
    std::vector<std::string> crew{obs.self->id};
    std::vector<Vec3> starts{obs.self->position};
    for (const UavSpec& u : obs.fleet) {
      if (u.id == obs.self->id) continue;
      const bool ok = u.role == Role::kExplorer ? done_.contains(u.id) : neighbors_.fresh(u.id, obs.tick);
      const planning::Neighbor* n = neighbors_.find(u.id);
      if (!ok || n == nullptr) continue;
      crew.push_back(u.id);
      starts.push_back(n->position);
    }
    std::vector<Vec3> points;
    for (std::size_t i : picked) points.push_back(cands.waypoints[i].position);
    MtspInstance inst = MtspInstance::from_points(starts, points, euclidean);
    for (double& s : inst.service) s = params_.dwell_s + 1.5;
    const RoutePlan routes = solve_mtsp(inst, MtspObjective::kMinMakespan);

    for (Message& m : full_map_messages(belief, obs.clock_s)) d.messages.push_back(std::move(m));
    for (std::size_t a = 0; a < crew.size(); ++a) {
      std::vector<Task> tasks;
      for (int w : routes.routes[a]) {
        const Waypoint& wp = cands.waypoints[picked[static_cast<std::size_t>(w)]];
        Task t;
        t.position = wp.position;
        t.view = wp.view_direction;
        t.capture = true;
        t.dwell_s = params_.continuous_capture ? 0.0 : wp.dwell_s;
        t.stop = !params_.continuous_capture;
        t.capture_en_route = params_.continuous_capture;
        tasks.push_back(t);
      }
      if (a == 0) {
        begin(obs, std::move(tasks));
      } else {
        send_tasks(obs, d, crew[a], tasks);
      }
    }
  }

  std::vector<std::string> explorers_;
  bool leader_ = false;
  Stage stage_ = Stage::kIdle;
  std::set<std::string> done_;
  std::set<std::size_t> blacklist_;
  double gather_start_ = 0.0;
};

// ---------------------------------------------------------------------------
// Team spiral

class TeamSpiral final : public Crew {
 public:
  explicit TeamSpiral(PlannerParams params) : Crew(params) {}

 private:
  void setup(const Observation& obs) override {
    pilot_.role_priority(true);
    pilot_.allow_unknown(true);
    const std::vector<std::string> explorers = explorer_ids(obs.fleet);
    if (explorers.empty()) {
      phase_ = Phase::kDone;
      return;
    }
    // Teams: each photographer joins the nearest explorer.
    std::vector<std::vector<std::string>> teams(explorers.size());
    for (std::size_t e = 0; e < explorers.size(); ++e) teams[e].push_back(explorers[e]);
    std::vector<const UavSpec*> photographers;
    for (const UavSpec& u : obs.fleet) {
      if (u.role == Role::kPhotographer) photographers.push_back(&u);
    }
    std::sort(photographers.begin(), photographers.end(),
              [](const UavSpec* a, const UavSpec* b) { return a->id < b->id; });
    for (const UavSpec* p : photographers) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < explorers.size(); ++e) {
        const double dd = (find_spec(obs.fleet, explorers[e])->start_position - p->start_position).norm();
        if (dd < best_d) {
          best_d = dd;
          best = e;
        }
      }
      teams[best].push_back(p->id);
    }
    std::vector<int> sizes;
    Vec3 origin = Vec3::Zero();
    for (const auto& t : teams) sizes.push_back(static_cast<int>(t.size()));
    for (const UavSpec& u : obs.fleet) origin += u.start_position;
    origin /= static_cast<double>(obs.fleet.size());
    const auto regions = planning::team_regions(obs.boxes, sizes, origin);
    for (std::size_t e = 0; e < teams.size(); ++e) {
      if (std::find(teams[e].begin(), teams[e].end(), obs.self->id) == teams[e].end()) continue;
      team_ = teams[e];
      region_ = regions[e];
    }
    if (obs.spec->role != Role::kExplorer) {
      PlannerParams p = params_;
      p.unknown_penalty = 3.0 * params_.unknown_penalty;
      pilot_ = Pilot(p);
      pilot_.role_priority(true);
      pilot_.allow_unknown(true);
      phase_ = Phase::kWait;
      return;
    }
    pilot_.set_tasks(spiral(obs));
    stage_ = 1;
  }

  // Loops just inside each region box, one layer every few voxels, camera
  // on the box centre and capturing on the way.
  std::vector<Task> spiral(const Observation& obs) const {
    const double vs = obs.belief->spec().voxel_size;
    const double step = params_.spiral_layer_voxels * vs;
    std::vector<Task> tasks;
    Vec3 at = obs.self->position;
    for (const Aabb& box : region_) {
      const Aabb in = box.inflated(-params_.spiral_inset_m);
      if (!in.valid()) continue;
      const Vec3 centre = box.center();
      std::array<Vec3, 4> corners{Vec3(in.min.x(), in.min.y(), 0), Vec3(in.max.x(), in.min.y(), 0),
                                  Vec3(in.max.x(), in.max.y(), 0), Vec3(in.min.x(), in.max.y(), 0)};
      std::size_t first = 0;
      for (std::size_t c = 1; c < 4; ++c) {
        if ((corners[c] - at).head<2>().norm() < (corners[first] - at).head<2>().norm()) first = c;
      }
      for (double z = std::max(params_.min_altitude_m + 0.5, box.min.z() + 0.5 * step); z <= in.max.z() + 1e-9;
           z += step) {
        for (std::size_t c = 0; c <= 4; ++c) {
          Task t;
          t.position = corners[(first + c) % 4];
          t.position.z() = z;
          Vec3 look = centre - t.position;
          look.z() = 0.0;
          t.view = look.normalized();
          t.stop = false;
          t.capture = false;
          t.capture_en_route = true;
          tasks.push_back(t);
          at = t.position;
        }
      }
    }
    return tasks;
  }

  // Rectangular loops at the inspection standoff around the believed
  // footprint of each layer band, plus a pass over the roof, dealt out to
  // the team in contiguous bands.
  std::vector<std::vector<Task>> bands(const Observation& obs) const {
    const BeliefMap& b = *obs.belief;
    const GridSpec& g = b.spec();
    const CameraIntrinsics cam = planning_camera(obs);
    const double standoff = inspection_standoff(cam, g.voxel_size, lidar_safe_max(obs));
    const double s_v = 0.8 * 2.0 * standoff * std::tan(0.5 * cam.vertical_fov_rad);
    const double s_h = 0.8 * 2.0 * standoff * std::tan(0.5 * cam.horizontal_fov_rad);

    std::vector<Vec3> occ;
    for (std::size_t li = 0; li < g.size(); ++li) {
      if (b.grid().at_linear(li) != VoxelState::kOccupied) continue;
      const Vec3 c = voxel_center(g, g.from_linear(li));
      if (std::any_of(region_.begin(), region_.end(), [&](const Aabb& r) { return r.contains(c, 1e-9); })) {
        occ.push_back(c);
      }
    }
    std::vector<std::vector<Task>> layers;
    if (occ.empty()) return std::vector<std::vector<Task>>(team_.size());
    const double half = 0.5 * g.voxel_size;
    double zlo = std::numeric_limits<double>::infinity();
    double zhi = -zlo;
    for (const Vec3& c : occ) {
      zlo = std::min(zlo, c.z() - half);
      zhi = std::max(zhi, c.z() + half);
    }
    auto footprint = [&](double z0, double z1) {
      Aabb f{Vec3::Constant(std::numeric_limits<double>::infinity()),
             Vec3::Constant(-std::numeric_limits<double>::infinity())};
      for (const Vec3& c : occ) {
        if (c.z() + half < z0 || c.z() - half > z1) continue;
        f.extend(c - Vec3::Constant(half));
        f.extend(c + Vec3::Constant(half));
      }
      return f;
    };
    auto free_at = [&](const Vec3& p) {
      return b.state_or(quantize(g, p), VoxelState::kFree) != VoxelState::kOccupied;
    };
    auto dwell = [&](const Vec3& p, const Vec3& view) {
      Task t;
      t.position = p;
      t.view = view.normalized();
      t.capture = true;
      t.dwell_s = params_.dwell_s;
      t.capture_en_route = true;
      return t;
    };
    auto along = [&](double lo, double hi, double spacing) {
      const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / spacing - 1e-9)));
      std::vector<double> out;
      for (int i = 0; i < n; ++i) out.push_back(lo + (i + 0.5) * (hi - lo) / n);
      return out;
    };

    const int n_layers = std::max(1, static_cast<int>(std::ceil((zhi - zlo) / s_v - 1e-9)));
    const double dz = (zhi - zlo) / n_layers;
    for (int l = 0; l < n_layers; ++l) {
      const double z = std::max(zlo + (l + 0.5) * dz, params_.min_altitude_m + 0.5);
      const Aabb f = footprint(zlo + l * dz, zlo + (l + 1) * dz);
      if (!f.valid()) continue;
      const double x0 = f.min.x() - standoff;
      const double x1 = f.max.x() + standoff;
      const double y0 = f.min.y() - standoff;
      const double y1 = f.max.y() + standoff;
      std::vector<Task> loop;
      auto corner = [&](double x, double y) {
        Task t;
        t.position = Vec3(x, y, z);
        t.stop = false;
        t.capture_en_route = true;
        loop.push_back(t);
      };
      corner(x0, y0);
      for (double x : along(f.min.x(), f.max.x(), s_h)) loop.push_back(dwell({x, y0, z}, Vec3::UnitY()));
      corner(x1, y0);
      for (double y : along(f.min.y(), f.max.y(), s_h)) loop.push_back(dwell({x1, y, z}, -Vec3::UnitX()));
      corner(x1, y1);
      for (double x : along(f.min.x(), f.max.x(), s_h)) {
        loop.push_back(dwell({f.min.x() + f.max.x() - x, y1, z}, -Vec3::UnitY()));
      }
      corner(x0, y1);
      for (double y : along(f.min.y(), f.max.y(), s_h)) {
        loop.push_back(dwell({x0, f.min.y() + f.max.y() - y, z}, Vec3::UnitX()));
      }
      std::erase_if(loop, [&](const Task& t) { return !free_at(t.position); });
      layers.push_back(std::move(loop));
    }
    // Roof pass, looking straight down.
    {
      const Aabb f = footprint(zhi - g.voxel_size, zhi);
      std::vector<Task> roof;
      const double z = zhi + standoff;
      bool forward = true;
      for (double y : along(f.min.y(), f.max.y(), s_h)) {
        std::vector<double> xs = along(f.min.x(), f.max.x(), s_v);
        if (!forward) std::reverse(xs.begin(), xs.end());
        for (double x : xs) roof.push_back(dwell({x, y, z}, Vec3(1e-6, 0.0, -1.0)));
        forward = !forward;
      }
      std::erase_if(roof, [&](const Task& t) { return !free_at(t.position); });
      layers.push_back(std::move(roof));
    }

    std::vector<std::vector<Task>> out(team_.size());
    const std::size_t per = layers.size() / team_.size();
    const std::size_t extra = layers.size() % team_.size();
    std::size_t next = 0;
    for (std::size_t m = 0; m < team_.size(); ++m) {
      const std::size_t take = per + (m < extra ? 1 : 0);
      for (std::size_t k = 0; k < take; ++k, ++next) {
        out[m].insert(out[m].end(), layers[next].begin(), layers[next].end());
      }
    }
    return out;
  }

  void prepare(const Observation& obs, Decision& d) override {
    if (stage_ == 1) {
      if (pilot_.done()) {
        Task t;
        t.position = home_;
        pilot_.set_tasks({t});
        stage_ = 2;
      }
      d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
      return;
    }
    if (stage_ == 2) {
      d.command = pilot_.drive(obs, neighbors_, d.waypoints_completed);
      if (!pilot_.done()) return;
      // Back at the entry point: share the map and hand out the bands.
      for (Message& m : full_map_messages(*obs.belief, obs.clock_s)) d.messages.push_back(std::move(m));
      std::vector<std::vector<Task>> work = bands(obs);
      // Members in priority order: explorer first, then by name.
      std::vector<std::string> members = team_;
      std::sort(members.begin() + 1, members.end());
      for (std::size_t m = 1; m < members.size(); ++m) send_tasks(obs, d, members[m], work[m]);
      stage_ = 3;
      begin(obs, std::move(work[0]));
    }
  }

  std::vector<std::string> team_;  // explorer first
  std::vector<Aabb> region_;
  int stage_ = 0;
};

// ---------------------------------------------------------------------------
// Lawnmower

class Lawnmower final : public Planner {
 public:
  explicit Lawnmower(PlannerParams params) : params_(params) {}

  Decision decide(const Observation& obs) override {
    Decision d;
    if (obs.self == nullptr || obs.spec == nullptr || obs.self->collided) return d;
    if (!init_) {
      setup(obs);
      init_ = true;
    }
    const UavState& s = *obs.self;
    const double speed = std::min(params_.lawnmower_speed, obs.spec->max_speed);
    const double accel = obs.spec->max_accel;

    if (next_ >= route_.size()) {
      if (!landing_ && obs.pending_reports == 0 && s.airborne) {
        d.command = land();
        landing_ = true;
      }
      return d;
    }
    const Vec3 target = route_[next_];
    const Vec3 diff = target - s.position;
    const double dist = diff.norm();
    const bool last = next_ + 1 == route_.size();
    if (dist < (last ? 1e-3 : 0.3)) {
      ++next_;
      d.waypoints_completed = 1;
      if (next_ >= route_.size()) {
        d.command = Command::go_to(target);
        return d;
      }
    }
    const Vec3 goal = route_[next_];
    const Vec3 to_goal = goal - s.position;
    const double gd = to_goal.norm();
    Command c;
    if (gd < 2.0 * speed * obs.dt) {
      c = Command::go_to(goal);
    } else {
      const double v = std::min(speed, 0.9 * std::sqrt(2.0 * accel * gd));
      c = Command::fly(to_goal / gd * v);
    }
    c.yaw = 0.0;
    const double gimbal_yaw = std::array<double, 4>{0.0, 0.5 * std::numbers::pi, std::numbers::pi,
                                                    -0.5 * std::numbers::pi}[cycle_ % 4];
    c.gimbal = GimbalSetpoint{goal.z() > cap_z_ - 1e-9 ? 2.0 * params_.lawnmower_pitch : params_.lawnmower_pitch,
                              gimbal_yaw};
    if (s.airborne && params_.lawnmower_capture_every_ticks > 0 &&
        ++since_capture_ >= params_.lawnmower_capture_every_ticks) {
      c.capture = true;
      since_capture_ = 0;
      ++cycle_;
    }
    d.command = c;
    return d;
  }

  const std::vector<Vec3>& route() const { return route_; }

 private:
  void setup(const Observation& obs) {
    std::vector<std::string> ids;
    for (const UavSpec& u : obs.fleet) ids.push_back(u.id);
    std::sort(ids.begin(), ids.end());
    const std::size_t me = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), obs.self->id) - ids.begin());
    Aabb all = obs.boxes.empty() ? obs.belief->spec().bounds() : obs.boxes[0];
    for (const Aabb& b : obs.boxes) {
      all.extend(b.min);
      all.extend(b.max);
    }
    cap_z_ = all.max.z() + 0.5;
    route_ = planning::lawnmower_route(all, obs.spec->start_position, me, ids.size(), params_);
  }

  PlannerParams params_;
  bool init_ = false;
  std::vector<Vec3> route_;
  std::size_t next_ = 0;
  double cap_z_ = 0.0;
  int since_capture_ = 0;
  std::size_t cycle_ = 0;
  bool landing_ = false;
};

}  // namespace

namespace planning {

std::vector<Vec3> lawnmower_route(const Aabb& all, const Vec3& start, std::size_t rank, std::size_t count,
                                  const PlannerParams& params) {
  std::vector<Vec3> route;
  const double cap_z = all.max.z() + 0.5;
  std::vector<double> layers;
  for (double z = params.lawnmower_layer_m; z < all.max.z() - 0.5; z += params.lawnmower_layer_m) layers.push_back(z);
  layers.push_back(cap_z);

  const std::array<Vec3, 4> corners{Vec3(all.min.x(), all.min.y(), 0), Vec3(all.max.x(), all.min.y(), 0),
                                    Vec3(all.max.x(), all.max.y(), 0), Vec3(all.min.x(), all.max.y(), 0)};
  for (std::size_t l = rank; l < layers.size(); l += std::max<std::size_t>(count, 1)) {
    const double z = layers[l];
    // Change altitude over the own start so climbs never cross a layer in use.
    route.emplace_back(start.x(), start.y(), z);
    if (l + 1 == layers.size()) {
      bool forward = true;
      for (double y = all.min.y(); y <= all.max.y() + 1e-9; y += params.lawnmower_lane_m) {
        route.emplace_back(forward ? all.min.x() : all.max.x(), y, z);
        route.emplace_back(forward ? all.max.x() : all.min.x(), y, z);
        forward = !forward;
      }
    } else {
      // Enter at the corner nearest the start so the leg in stays outside the boxes.
      std::size_t first = 0;
      for (std::size_t c = 1; c < 4; ++c) {
        if ((corners[c] - start).head<2>().norm() < (corners[first] - start).head<2>().norm()) first = c;
      }
      for (std::size_t c = 0; c <= 4; ++c) {
        Vec3 p = corners[(first + c) % 4];
        p.z() = z;
        route.push_back(p);
      }
    }
    route.emplace_back(start.x(), start.y(), z);
  }
  if (!route.empty()) route.emplace_back(start.x(), start.y(), std::min(1.5, start.z() + 0.5));
  return route;
}

}  // namespace planning

std::unique_ptr<Planner> make_planner(PlannerFamily family, const std::string& uav_id, const PlannerParams& params) {
  if (uav_id == kGcsId) return std::make_unique<IdlePlanner>();
  switch (family) {
    case PlannerFamily::kGridSweep:
      return std::make_unique<GridSweep>(params);
    case PlannerFamily::kTeamSpiral:
      return std::make_unique<TeamSpiral>(params);
    case PlannerFamily::kLawnmower:
      return std::make_unique<Lawnmower>(params);
    case PlannerFamily::kIdle:
      return std::make_unique<IdlePlanner>();
  }
  return std::make_unique<IdlePlanner>();
}

PlannerSet make_planners(std::span<const UavSpec> fleet, PlannerFamily family, const PlannerParams& params) {
  PlannerSet out;
  for (const UavSpec& u : fleet) out[u.id] = make_planner(family, u.id, params);
  out[kGcsId] = make_planner(family, kGcsId, params);
  return out;
}

}  // namespace uavsim
