#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "uavsim/geometry.hpp"

namespace uavsim {

struct Waypoint {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 view_direction = Vec3::UnitX();
  double dwell_s = 0.0;
};

enum class MtspObjective { kMinSum, kMinMakespan };

using DistanceFn = std::function<double(const Vec3&, const Vec3&)>;
inline double euclidean(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Sum of consecutive legs from `start` through `order`.
double path_cost(std::span<const Vec3> order, const Vec3& start, const DistanceFn& dist);

// Cost matrix over nodes 0..A-1 (agent starts) followed by A..A+W-1
// (waypoints). Entries need not be symmetric. `service[w]` is added once
// for each waypoint a route visits.
struct MtspInstance {
  int agents = 0;
  int waypoints = 0;
  std::vector<double> cost;  // (A+W) x (A+W), row-major, cost[from][to]
  std::vector<double> service;

  static MtspInstance from_points(std::span<const Vec3> starts, std::span<const Vec3> points,
                                  const DistanceFn& dist);
  double at(int from, int to) const {
    return cost[static_cast<std::size_t>(from) * static_cast<std::size_t>(agents + waypoints) +
                static_cast<std::size_t>(to)];
  }
};

// routes[a] lists waypoint indices (0-based, excluding agent nodes) in
// visiting order. Routes are open: agents do not return to their start.
struct RoutePlan {
  std::vector<std::vector<int>> routes;
  std::vector<double> costs;
  double makespan = 0.0;
  double total = 0.0;
};

double route_cost(const MtspInstance& inst, int agent, std::span<const int> route);
// Recomputes costs, makespan and total from the routes.
void refresh_costs(const MtspInstance& inst, RoutePlan& plan);
// True when `a` is strictly better than `b` under the objective; ties on the
// primary measure are broken by the other one.
bool better_plan(const RoutePlan& a, const RoutePlan& b, MtspObjective objective);

RoutePlan cheapest_insertion(const MtspInstance& inst, MtspObjective objective);
RoutePlan nearest_neighbor(const MtspInstance& inst);
// Reverses segments of one route until no reversal lowers its cost.
void two_opt(const MtspInstance& inst, int agent, std::vector<int>& route);

// Both constructions, each improved by 2-opt plus inter-route relocate and
// swap moves until no move helps; returns the better plan. Deterministic.
RoutePlan solve_mtsp(const MtspInstance& inst, MtspObjective objective = MtspObjective::kMinMakespan);
RoutePlan solve_mtsp(std::span<const Vec3> starts, std::span<const Vec3> points, const DistanceFn& dist,
                     MtspObjective objective = MtspObjective::kMinMakespan);

class MtspTooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExactMtspLimit = 9;

// Global optimum by dynamic programming over subsets; throws MtspTooLarge
// above kExactMtspLimit waypoints.
RoutePlan exact_mtsp_small(const MtspInstance& inst, MtspObjective objective = MtspObjective::kMinMakespan);

struct BoxCostWeights {
  double distance = 1.0;  // per m
  double volume = 0.05;   // per m^3
};
double box_assignment_cost(const Vec3& explorer_pos, const Aabb& box, const BoxCostWeights& w = {});
// Cost matrix for assigning boxes to explorers: agent-to-box and
// box-to-box legs both use box_assignment_cost from the origin point (the
// centre of the previous box) to the next box.
MtspInstance box_assignment_instance(std::span<const Vec3> explorers, std::span<const Aabb> boxes,
                                     const BoxCostWeights& w = {});

// Slabs along the longest axis with the given volume fractions, in order of
// increasing coordinate. Throws std::invalid_argument on bad fractions.
std::vector<Aabb> split_box_longest_side(const Aabb& box, std::span<const double> fractions);

}  // namespace uavsim
