#include "uavsim/mapping.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <unordered_set>

namespace uavsim {

BeliefMap::BeliefMap(const GridSpec& spec)
    : grid_(spec, VoxelState::kUnknown), stamps_(spec.size(), -std::numeric_limits<double>::infinity()) {}

bool BeliefMap::set(const VoxelIndex& v, VoxelState s, double time_s) {
  const std::size_t li = spec().linear(v);
  stamps_[li] = std::max(stamps_[li], time_s);
  const VoxelState old = grid_.at_linear(li);
  if (old == s) return false;
  known_ += (old == VoxelState::kUnknown) - (s == VoxelState::kUnknown);
  occupied_ += (s == VoxelState::kOccupied);
  occupied_ -= (old == VoxelState::kOccupied);
  grid_.set_linear(li, s);
  ++version_;
  if (!dirty_) {
    dirty_lo_ = v;
    dirty_hi_ = v;
    dirty_ = true;
  } else {
    for (int a = 0; a < 3; ++a) {
      dirty_lo_[a] = std::min(dirty_lo_[a], v[a]);
      dirty_hi_[a] = std::max(dirty_hi_[a], v[a]);
    }
  }
  return true;
}

std::optional<std::pair<VoxelIndex, VoxelIndex>> BeliefMap::take_dirty_window() {
  if (!dirty_) return std::nullopt;
  dirty_ = false;
  return std::make_pair(dirty_lo_, dirty_hi_);
}

std::size_t integrate_scan(BeliefMap& belief, const LidarScan& scan) {
  const GridSpec& g = belief.spec();
  std::size_t changed = 0;
  auto mark_free = [&](const Vec3& end) {
    traverse_segment(g, scan.origin, end, [&](const VoxelIndex& v, double, double) {
      if (belief.at(v) != VoxelState::kOccupied) changed += belief.set(v, VoxelState::kFree, scan.time_s);
      return true;
    });
  };
  for (const Vec3& hit : scan.hits) {
    const Vec3 d = hit - scan.origin;
    const double len = d.norm();
    VoxelIndex hv = quantize(g, scan.origin);
    if (len > 0.0) {
      mark_free(hit);
      hv = quantize(g, hit + d / len * (1e-6 * g.voxel_size));
    }
    if (g.in_bounds(hv)) changed += belief.set(hv, VoxelState::kOccupied, scan.time_s);
  }
  for (const Vec3& dir : scan.misses) mark_free(scan.origin + dir * scan.max_range_m);
  return changed;
}

std::size_t merge_chunk(BeliefMap& belief, const MapChunk& chunk) {
  const GridSpec& g = belief.spec();
  std::size_t changed = 0;
  std::size_t idx = 0;
  for (int k = 0; k < chunk.dims[2]; ++k)
    for (int j = 0; j < chunk.dims[1]; ++j)
      for (int i = 0; i < chunk.dims[0]; ++i, ++idx) {
        const VoxelState s = chunk.states[idx];
        if (s == VoxelState::kUnknown) continue;
        const VoxelIndex v = chunk.origin + VoxelIndex{i, j, k};
        if (!g.in_bounds(v)) continue;
        const VoxelState cur = belief.at(v);
        if (cur == VoxelState::kUnknown || (cur != s && belief.stamp(v) < chunk.stamp_s)) {
          changed += belief.set(v, s, chunk.stamp_s);
        }
      }
  return changed;
}

std::optional<GridPath> grid_shortest_path(const BeliefMap& belief, const VoxelIndex& from, const VoxelIndex& to,
                                           const PathOptions& options) {
  const GridSpec& g = belief.spec();
  if (!g.in_bounds(from) || !g.in_bounds(to)) return std::nullopt;
  const double vs = g.voxel_size;
  auto step_cost = [&](const VoxelIndex& v) -> double {
    if (v == from) return vs;
    switch (belief.at(v)) {
      case VoxelState::kOccupied:
        return -1.0;
      case VoxelState::kUnknown:
        if (options.unknown_penalty <= 0.0) return -1.0;
        break;
      case VoxelState::kFree:
        break;
    }
    if (voxel_center(g, v).z() < options.min_center_z) return -1.0;
    if (std::find(options.reserved.begin(), options.reserved.end(), v) != options.reserved.end()) return -1.0;
    return belief.at(v) == VoxelState::kUnknown ? options.unknown_penalty * vs : vs;
  };
  if (step_cost(to) < 0.0) return std::nullopt;

  auto h = [&](const VoxelIndex& v) {
    return vs * (std::abs(v.i - to.i) + std::abs(v.j - to.j) + std::abs(v.k - to.k));
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> gcost(g.size(), inf);
  std::vector<std::int64_t> parent(g.size(), -1);
  std::vector<std::uint8_t> closed(g.size(), 0);
  using Item = std::pair<double, std::size_t>;  // (f, linear index)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  const std::size_t start = g.linear(from);
  const std::size_t goal = g.linear(to);
  gcost[start] = 0.0;
  open.push({h(from), start});
  std::size_t expansions = 0;
  while (!open.empty()) {
    const auto [f, li] = open.top();
    open.pop();
    if (closed[li]) continue;
    closed[li] = 1;
    if (li == goal) break;
    if (++expansions > options.max_expansions) return std::nullopt;
    const VoxelIndex v = g.from_linear(li);
    for (const VoxelIndex& s : kFaceSteps) {
      const VoxelIndex n = v + s;
      if (!g.in_bounds(n)) continue;
      const std::size_t ni = g.linear(n);
      if (closed[ni]) continue;
      const double c = step_cost(n);
      if (c < 0.0) continue;
      const double ng = gcost[li] + c;
      if (ng < gcost[ni]) {
        gcost[ni] = ng;
        parent[ni] = static_cast<std::int64_t>(li);
        open.push({ng + h(n), ni});
      }
    }
  }
  if (!closed[goal]) return std::nullopt;
  GridPath path;
  path.cost = gcost[goal];
  for (std::int64_t cur = static_cast<std::int64_t>(goal); cur >= 0; cur = parent[static_cast<std::size_t>(cur)]) {
    path.voxels.push_back(g.from_linear(static_cast<std::size_t>(cur)));
  }
  std::reverse(path.voxels.begin(), path.voxels.end());
  return path;
}

std::vector<VoxelIndex> path_corners(std::span<const VoxelIndex> path) {
  std::vector<VoxelIndex> out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i == 0 || i + 1 == path.size()) {
      out.push_back(path[i]);
      continue;
    }
    const VoxelIndex a = path[i - 1];
    const VoxelIndex b = path[i];
    const VoxelIndex c = path[i + 1];
    const bool straight = (b.i - a.i == c.i - b.i) && (b.j - a.j == c.j - b.j) && (b.k - a.k == c.k - b.k);
    if (!straight) out.push_back(b);
  }
  return out;
}

double inspection_standoff(const CameraIntrinsics& intr, double voxel_size, double lidar_safe_max_m) {
  const double d = intr.focal_length_px * intr.desired_mmpp / 1000.0;
  return std::clamp(d, voxel_size, std::max(voxel_size, lidar_safe_max_m));
}

InspectionWaypointSet generate_inspection_waypoints(const BeliefMap& belief, const CameraIntrinsics& intr,
                                                    const InspectionOptions& options) {
  const GridSpec& g = belief.spec();
  const double vs = g.voxel_size;
  const double standoff = inspection_standoff(intr, vs, options.lidar_safe_max_m);
  const int max_steps = std::max(1, static_cast<int>(std::floor(standoff / vs - 0.5 + 1e-9)) + 1);
  InspectionWaypointSet out;
  std::unordered_set<VoxelIndex, VoxelIndexHash> taken;
  int next_id = 0;
  for (std::size_t li = 0; li < g.size(); ++li) {
    if (belief.grid().at_linear(li) != VoxelState::kOccupied) continue;
    const VoxelIndex v = g.from_linear(li);
    if (!options.boxes.empty()) {
      const Vec3 c = voxel_center(g, v);
      const bool inside = std::any_of(options.boxes.begin(), options.boxes.end(),
                                      [&](const Aabb& b) { return b.contains(c, 1e-9); });
      if (!inside) continue;
    }
    for (int f = 0; f < 6; ++f) {
      const VoxelIndex step = kFaceSteps[static_cast<std::size_t>(f)];
      if (belief.state_or(v + step, VoxelState::kUnknown) != VoxelState::kFree) continue;
      // Walk out along the normal through believed-free voxels.
      std::optional<VoxelIndex> best;
      VoxelIndex cur = v;
      for (int m = 1; m <= max_steps; ++m) {
        cur = cur + step;
        if (belief.state_or(cur, VoxelState::kUnknown) != VoxelState::kFree) break;
        if (voxel_center(g, cur).z() >= options.min_center_z) best = cur;
      }
      if (!best || taken.contains(*best)) continue;
      taken.insert(*best);
      Waypoint w;
      w.id = next_id++;
      w.position = voxel_center(g, *best);
      w.view_direction = -face_normal(f);
      w.dwell_s = options.dwell_s;
      out.waypoints.push_back(w);
      out.sources.push_back({v, f});
    }
  }
  return out;
}

}  // namespace uavsim
