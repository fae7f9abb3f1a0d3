#include "uavsim/world.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "uavsim/rng.hpp"

namespace uavsim {

OccupancyGrid::OccupancyGrid(const GridSpec& spec, VoxelState fill)
    : spec_(spec), states_(spec.size(), fill) {}

std::size_t OccupancyGrid::count(VoxelState s) const {
  return static_cast<std::size_t>(std::count(states_.begin(), states_.end(), s));
}

std::vector<VoxelIndex> OccupancyGrid::voxels_in_state(VoxelState s) const {
  std::vector<VoxelIndex> out;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i] == s) out.push_back(spec_.from_linear(i));
  }
  return out;
}

std::string to_string(Role r) { return r == Role::kExplorer ? "explorer" : "photographer"; }

std::optional<Role> parse_role(std::string_view s) {
  if (s == "explorer") return Role::kExplorer;
  if (s == "photographer") return Role::kPhotographer;
  return std::nullopt;
}

std::string to_string(StructureStyle s) {
  switch (s) {
    case StructureStyle::kSolidBlock:
      return "solid-block";
    case StructureStyle::kShell:
      return "shell";
    case StructureStyle::kLattice:
      return "lattice";
  }
  return "unknown";
}

std::optional<StructureStyle> parse_style(std::string_view s) {
  if (s == "solid-block" || s == "solid") return StructureStyle::kSolidBlock;
  if (s == "shell") return StructureStyle::kShell;
  if (s == "lattice") return StructureStyle::kLattice;
  return std::nullopt;
}

Aabb operational_volume(std::span<const Aabb> boxes, std::span<const Vec3> starts,
                        double voxel_size) {
  if (boxes.empty()) throw std::invalid_argument("operational_volume: at least one box required");
  Aabb o = boxes.front();
  for (const Aabb& b : boxes) {
    o.extend(b.min);
    o.extend(b.max);
  }
  for (const Vec3& p : starts) o.extend(p);
  return o.inflated(voxel_size);
}

GridSpec operational_grid(std::span<const Aabb> boxes, std::span<const Vec3> starts,
                          double voxel_size) {
  return grid_covering(operational_volume(boxes, starts, voxel_size), voxel_size);
}

namespace {

bool is_unit(const Vec3& n) { return std::abs(n.norm() - 1.0) <= 1e-9; }

int axis_of_normal(const Vec3& n) {
  int count = 0;
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (n[a] != 0.0) {
      ++count;
      axis = a;
    }
  }
  return count == 1 ? axis : -1;
}

}  // namespace

void validate_scenario(const Scenario& s) {
  if (!(s.mission_budget_s > 0.0)) throw ScenarioError("mission-budget", "mission_budget_s must be > 0");
  if (!(s.voxel_size > 0.0)) throw ScenarioError("voxel-size", "voxel_size_m must be > 0");
  if (s.bounding_boxes.empty()) throw ScenarioError("bounding-boxes", "at least one bounding box required");
  for (const Aabb& b : s.bounding_boxes) {
    if (!b.valid()) throw ScenarioError("bounding-boxes", "box min must not exceed max");
  }

  const GridSpec& g = s.ground_truth.spec();
  if (g.dims[0] <= 0 || g.dims[1] <= 0 || g.dims[2] <= 0) throw ScenarioError("grid-dims", "grid dims must be > 0");
  if (std::abs(g.voxel_size - s.voxel_size) > 1e-12) throw ScenarioError("grid-voxel-size", "grid voxel size differs from voxel_size_m");
  if (s.ground_truth.count(VoxelState::kUnknown) != 0) throw ScenarioError("ground-truth-known", "ground truth contains unknown voxels");
  for (const VoxelIndex& v : s.ground_truth.voxels_in_state(VoxelState::kOccupied)) {
    const Aabb vb = g.voxel_box(v);
    const bool inside = std::any_of(s.bounding_boxes.begin(), s.bounding_boxes.end(), [&](const Aabb& b) {
      return b.contains(vb.min, 1e-9) && b.contains(vb.max, 1e-9);
    });
    if (!inside) throw ScenarioError("structure-within-boxes", "occupied voxel outside every bounding box");
  }

  std::set<int> ids;
  for (const InterestPoint& ip : s.interest_points) {
    if (!ids.insert(ip.id).second) throw ScenarioError("interest-point-ids", "duplicate interest point id");
    if (!is_unit(ip.normal)) throw ScenarioError("interest-point-normal", "normal must be unit length");
    const int axis = axis_of_normal(ip.normal);
    if (axis < 0) throw ScenarioError("interest-point-normal", "normal must be axis-aligned");
    const bool in_box = std::any_of(s.bounding_boxes.begin(), s.bounding_boxes.end(),
                                    [&](const Aabb& b) { return b.contains(ip.position, 1e-9); });
    if (!in_box) throw ScenarioError("interest-point-in-box", "interest point outside every bounding box");
    const VoxelIndex owner = quantize(g, ip.position - 0.5 * s.voxel_size * ip.normal);
    if (!s.ground_truth.occupied(owner)) {
      throw ScenarioError("interest-point-on-surface", "interest point does not lie on an occupied voxel");
    }
    const Vec3 c = voxel_center(g, owner) + 0.5 * s.voxel_size * ip.normal;
    if (std::abs(ip.position[axis] - c[axis]) > 1e-9 * s.voxel_size) {
      throw ScenarioError("interest-point-on-surface", "interest point is off its voxel face plane");
    }
    const VoxelIndex outside = quantize(g, ip.position + 0.5 * s.voxel_size * ip.normal);
    if (s.ground_truth.occupied(outside)) {
      throw ScenarioError("interest-point-exposed", "interest point normal points into an occupied voxel");
    }
  }

  if (s.fleet.empty()) throw ScenarioError("fleet", "fleet is empty");
  std::set<std::string> names;
  int explorers = 0;
  for (const UavSpec& u : s.fleet) {
    if (u.id.empty() || u.id == kGcsId) throw ScenarioError("fleet-names", "invalid UAV id '" + u.id + "'");
    if (!names.insert(u.id).second) throw ScenarioError("fleet-names", "duplicate UAV id '" + u.id + "'");
    if (!(u.max_speed > 0.0) || !(u.max_accel > 0.0) || !(u.collision_radius > 0.0)) {
      throw ScenarioError("fleet-limits", "speed, acceleration and radius must be > 0 for " + u.id);
    }
    if (!u.start_position.allFinite()) throw ScenarioError("fleet-start", "non-finite start for " + u.id);
    try {
      u.camera.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("fleet-camera", u.id + " " + e.what());
    }
    if (u.role == Role::kExplorer) {
      ++explorers;
      if (!u.lidar) throw ScenarioError("fleet-lidar", "explorer " + u.id + " has no lidar");
      if (!(u.lidar->max_range_m > 0.0) || u.lidar->rays_per_scan <= 0 || !(u.lidar->scan_rate_hz > 0.0)) {
        throw ScenarioError("fleet-lidar", "invalid lidar parameters for " + u.id);
      }
    }
  }
  if (explorers < 1) throw ScenarioError("fleet-explorers", "at least one explorer required");
  for (std::size_t a = 0; a < s.fleet.size(); ++a) {
    for (std::size_t b = a + 1; b < s.fleet.size(); ++b) {
      const double r = std::max(s.fleet[a].collision_radius, s.fleet[b].collision_radius);
      if ((s.fleet[a].start_position - s.fleet[b].start_position).norm() <= 2.0 * r) {
        throw ScenarioError("start-separation", "starts of " + s.fleet[a].id + " and " + s.fleet[b].id +
                                                    " are not separated by more than 2 collision radii");
      }
    }
  }
}

std::vector<SurfaceFace> exposed_faces(const OccupancyGrid& truth) {
  const GridSpec& g = truth.spec();
  // Free space connected to the grid boundary.
  std::vector<std::uint8_t> exterior(g.size(), 0);
  std::deque<VoxelIndex> queue;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const VoxelIndex v = g.from_linear(i);
    const bool boundary = v.i == 0 || v.j == 0 || v.k == 0 || v.i == g.dims[0] - 1 ||
                          v.j == g.dims[1] - 1 || v.k == g.dims[2] - 1;
    if (boundary && truth.at_linear(i) != VoxelState::kOccupied) {
      exterior[i] = 1;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const VoxelIndex v = queue.front();
    queue.pop_front();
    for (const VoxelIndex& s : kFaceSteps) {
      const VoxelIndex n = v + s;
      if (!g.in_bounds(n)) continue;
      const std::size_t li = g.linear(n);
      if (exterior[li] || truth.at_linear(li) == VoxelState::kOccupied) continue;
      exterior[li] = 1;
      queue.push_back(n);
    }
  }

  int lowest = g.dims[2];
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (truth.at_linear(i) == VoxelState::kOccupied) lowest = std::min(lowest, g.from_linear(i).k);
  }

  std::vector<SurfaceFace> faces;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (truth.at_linear(i) != VoxelState::kOccupied) continue;
    const VoxelIndex v = g.from_linear(i);
    for (int f = 0; f < 6; ++f) {
      if (f == 5 && v.k == lowest) continue;
      const VoxelIndex n = v + kFaceSteps[static_cast<std::size_t>(f)];
      if (!g.in_bounds(n) || exterior[g.linear(n)]) faces.push_back({v, f});
    }
  }
  return faces;
}

UavSpec default_explorer(const std::string& id, const Vec3& start) {
  UavSpec u;
  u.id = id;
  u.role = Role::kExplorer;
  u.start_position = start;
  u.max_speed = 4.0;
  u.max_accel = 3.0;
  u.collision_radius = 0.4;
  u.camera = CameraIntrinsics::from_focal(1400.0, 1920, 1080, 0.01, 4.0);
  u.lidar = LidarSpec{20.0, 2000, 10.0};
  return u;
}

UavSpec default_photographer(const std::string& id, const Vec3& start) {
  UavSpec u;
  u.id = id;
  u.role = Role::kPhotographer;
  u.start_position = start;
  u.max_speed = 3.0;
  u.max_accel = 3.0;
  u.collision_radius = 0.3;
  u.camera = CameraIntrinsics::from_focal(1400.0, 1920, 1080, 0.01, 4.0);
  return u;
}

namespace {

// Structure voxel extents (in voxels, relative to the structure origin).
struct Footprint {
  std::array<int, 3> origin;  // lattice coordinates of the structure min corner
  std::array<int, 3> size;
};

std::vector<Footprint> layout_footprints(const GeneratorSpec& spec) {
  const auto& s = spec.structure_voxels;
  const int pad = static_cast<int>(std::ceil(spec.box_padding_m / spec.voxel_size));
  const int gap = 2 * pad + 4;
  std::vector<Footprint> out;
  out.push_back({{0, 0, 0}, s});
  if (spec.layout == "single") return out;
  const std::array<int, 3> half{std::max(2, s[0] / 2), std::max(2, s[1] / 2), std::max(2, s[2] / 2)};
  if (spec.layout == "pair") {
    out.push_back({{s[0] + gap, 0, 0}, half});
    return out;
  }
  if (spec.layout == "row") {
    out.push_back({{s[0] + gap, 0, 0}, half});
    out.push_back({{s[0] + half[0] + 2 * gap, 0, 0}, {half[0], s[1], s[2]}});
    return out;
  }
  throw ScenarioError("layout", "unknown layout preset '" + spec.layout + "'");
}

void fill_structure(const GeneratorSpec& spec, const Footprint& fp, const GridSpec& g,
                    OccupancyGrid& truth, Rng& rng) {
  const Vec3 base(fp.origin[0] * spec.voxel_size, fp.origin[1] * spec.voxel_size,
                  fp.origin[2] * spec.voxel_size);
  auto mark = [&](int x, int y, int z) {
    const Vec3 c = base + spec.voxel_size * Vec3(x + 0.5, y + 0.5, z + 0.5);
    truth.set(quantize(g, c), VoxelState::kOccupied);
  };
  const auto& n = fp.size;
  switch (spec.style) {
    case StructureStyle::kSolidBlock:
      for (int z = 0; z < n[2]; ++z)
        for (int y = 0; y < n[1]; ++y)
          for (int x = 0; x < n[0]; ++x) mark(x, y, z);
      break;
    case StructureStyle::kShell:
      for (int z = 0; z < n[2]; ++z)
        for (int y = 0; y < n[1]; ++y)
          for (int x = 0; x < n[0]; ++x) {
            const bool boundary = x == 0 || y == 0 || z == 0 || x == n[0] - 1 || y == n[1] - 1 || z == n[2] - 1;
            if (boundary) mark(x, y, z);
          }
      break;
    case StructureStyle::kLattice: {
      // Columns on a square pitch; beams along x and y at alternating heights,
      // offset by half a pitch so no member touches another.
      const int p = std::max(2, spec.lattice_spacing);
      const int h = p / 2;
      for (int y = 0; y < n[1]; y += p)
        for (int x = 0; x < n[0]; x += p)
          for (int z = 0; z < n[2]; ++z) mark(x, y, z);
      for (int z = h + 1; z < n[2]; z += p) {
        for (int y = h; y < n[1]; y += p) {
          if (rng.uniform() < 0.25) continue;
          for (int x = 0; x < n[0]; ++x) mark(x, y, z);
        }
      }
      for (int z = p + 1; z < n[2]; z += p) {
        if ((z - h - 1) % p == 0) continue;
        for (int x = h; x < n[0]; x += p) {
          if (rng.uniform() < 0.25) continue;
          for (int y = 0; y < n[1]; ++y) mark(x, y, z);
        }
      }
      break;
    }
  }
}

}  // namespace

Scenario generate_scenario(const GeneratorSpec& spec) {
  if (spec.interest_points <= 0) throw ScenarioError("interest_points", "count must be > 0");
  if (spec.explorers < 1) throw ScenarioError("explorers", "at least one explorer required");
  if (spec.photographers < 0) throw ScenarioError("photographers", "count must be >= 0");
  for (int d : spec.structure_voxels) {
    if (d <= 0) throw ScenarioError("structure_voxels", "dimensions must be > 0");
  }
  if (!(spec.voxel_size > 0.0)) throw ScenarioError("voxel_size", "must be > 0");

  Rng rng(spec.seed);
  Scenario s;
  s.name = spec.name;
  s.voxel_size = spec.voxel_size;
  s.rng_seed = spec.seed;
  s.mission_budget_s = spec.mission_budget_s;

  const std::vector<Footprint> fps = layout_footprints(spec);
  for (const Footprint& fp : fps) {
    Aabb b;
    for (int a = 0; a < 3; ++a) {
      b.min[a] = fp.origin[a] * spec.voxel_size;
      b.max[a] = (fp.origin[a] + fp.size[a]) * spec.voxel_size;
    }
    b = b.inflated(spec.box_padding_m);
    b.min.z() = 0.0;  // structures rest on the ground
    s.bounding_boxes.push_back(b);
  }

  // Fleet in a row in front of the first box, explorers first.
  const Aabb& first = s.bounding_boxes.front();
  const int n = spec.explorers + spec.photographers;
  for (int i = 0; i < n; ++i) {
    const Vec3 start(first.center().x() + (i - 0.5 * (n - 1)) * 2.0, first.min.y() - 2.0, 1.0);
    if (i < spec.explorers) {
      s.fleet.push_back(default_explorer("explorer_" + std::to_string(i + 1), start));
    } else {
      s.fleet.push_back(default_photographer("photographer_" + std::to_string(i - spec.explorers + 1), start));
    }
  }
  s.gcs_position = Vec3(first.center().x(), first.min.y() - 5.0, 1.5);

  std::vector<Vec3> starts;
  for (const UavSpec& u : s.fleet) starts.push_back(u.start_position);
  const GridSpec g = operational_grid(s.bounding_boxes, starts, spec.voxel_size);
  s.ground_truth = OccupancyGrid(g, VoxelState::kFree);
  for (const Footprint& fp : fps) fill_structure(spec, fp, g, s.ground_truth, rng);

  const std::vector<SurfaceFace> faces = exposed_faces(s.ground_truth);
  if (static_cast<std::size_t>(spec.interest_points) > faces.size()) {
    throw ScenarioError("interest_points", "requested " + std::to_string(spec.interest_points) +
                                               " interest points but only " + std::to_string(faces.size()) +
                                               " exposed faces are available (short by " +
                                               std::to_string(spec.interest_points - static_cast<int>(faces.size())) +
                                               ")");
  }

  // Distinct faces by partial Fisher-Yates, then a uniform position inside
  // each face with a small inset from its edges.
  std::vector<std::size_t> order(faces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int i = 0; i < spec.interest_points; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(order.size() - static_cast<std::size_t>(i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
    const SurfaceFace& f = faces[order[static_cast<std::size_t>(i)]];
    const Vec3 nrm = face_normal(f.face);
    const int axis = f.face / 2;
    Vec3 p = face_center(g, f.voxel, f.face);
    for (int a = 0; a < 3; ++a) {
      if (a == axis) continue;
      p[a] += spec.voxel_size * rng.uniform(-0.45, 0.45);
    }
    s.interest_points.push_back({i, p, nrm});
  }

  validate_scenario(s);
  return s;
}

}  // namespace uavsim
