#include "uavsim/mtsp.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace uavsim {

namespace {

constexpr double kTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Lexicographic comparison of (primary, secondary) with a small tolerance.
bool key_less(double p1, double s1, double p2, double s2) {
  if (p1 < p2 - kTol) return true;
  if (p1 > p2 + kTol) return false;
  return s1 < s2 - kTol;
}

struct Key {
  double primary;
  double secondary;
};

Key plan_key(std::span<const double> costs, MtspObjective objective) {
  double mx = 0.0;
  double sum = 0.0;
  for (double c : costs) {
    mx = std::max(mx, c);
    sum += c;
  }
  return objective == MtspObjective::kMinMakespan ? Key{mx, sum} : Key{sum, mx};
}

double service_of(const MtspInstance& inst, int w) {
  return inst.service.empty() ? 0.0 : inst.service[static_cast<std::size_t>(w)];
}

// Cost of visiting x between node ids `prev` and `next` (next < 0: none).
double leg(const MtspInstance& inst, int prev, int x, int next) {
  double c = inst.at(prev, x);
  if (next >= 0) c += inst.at(x, next);
  return c;
}

int node(const MtspInstance& inst, int w) { return inst.agents + w; }

// Node id before position i of a route, and after position i (or -1).
int prev_node(const MtspInstance& inst, int agent, const std::vector<int>& r, std::size_t i) {
  return i == 0 ? agent : node(inst, r[i - 1]);
}
int next_node(const MtspInstance& inst, const std::vector<int>& r, std::size_t i) {
  return i + 1 < r.size() ? node(inst, r[i + 1]) : -1;
}

double removal_delta(const MtspInstance& inst, int agent, const std::vector<int>& r, std::size_t i) {
  const int p = prev_node(inst, agent, r, i);
  const int n = next_node(inst, r, i);
  const int x = node(inst, r[i]);
  double d = -leg(inst, p, x, n) - service_of(inst, r[i]);
  if (n >= 0) d += inst.at(p, n);
  return d;
}

// Delta of inserting waypoint w so that it ends up at position j.
double insertion_delta(const MtspInstance& inst, int agent, const std::vector<int>& r, std::size_t j, int w) {
  const int p = j == 0 ? agent : node(inst, r[j - 1]);
  const int n = j < r.size() ? node(inst, r[j]) : -1;
  double d = leg(inst, p, node(inst, w), n) + service_of(inst, w);
  if (n >= 0) d -= inst.at(p, n);
  return d;
}

bool is_symmetric(const MtspInstance& inst) {
  const int n = inst.agents + inst.waypoints;
  for (int a = inst.agents; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (inst.at(a, b) != inst.at(b, a)) return false;
    }
  }
  return true;
}

bool relocate_pass(const MtspInstance& inst, RoutePlan& plan, MtspObjective objective) {
  const Key current = plan_key(plan.costs, objective);
  std::vector<double> trial = plan.costs;
  for (int a = 0; a < inst.agents; ++a) {
    auto& ra = plan.routes[static_cast<std::size_t>(a)];
    for (std::size_t i = 0; i < ra.size(); ++i) {
      const int w = ra[i];
      const double rm = removal_delta(inst, a, ra, i);
      for (int b = 0; b < inst.agents; ++b) {
        if (b == a) continue;
        auto& rb = plan.routes[static_cast<std::size_t>(b)];
        for (std::size_t j = 0; j <= rb.size(); ++j) {
          const double ins = insertion_delta(inst, b, rb, j, w);
          trial[static_cast<std::size_t>(a)] = plan.costs[static_cast<std::size_t>(a)] + rm;
          trial[static_cast<std::size_t>(b)] = plan.costs[static_cast<std::size_t>(b)] + ins;
          const Key k = plan_key(trial, objective);
          trial[static_cast<std::size_t>(a)] = plan.costs[static_cast<std::size_t>(a)];
          trial[static_cast<std::size_t>(b)] = plan.costs[static_cast<std::size_t>(b)];
          if (!key_less(k.primary, k.secondary, current.primary, current.secondary)) continue;
          ra.erase(ra.begin() + static_cast<std::ptrdiff_t>(i));
          rb.insert(rb.begin() + static_cast<std::ptrdiff_t>(j), w);
          refresh_costs(inst, plan);
          return true;
        }
      }
    }
  }
  return false;
}

bool swap_pass(const MtspInstance& inst, RoutePlan& plan, MtspObjective objective) {
  const Key current = plan_key(plan.costs, objective);
  std::vector<double> trial = plan.costs;
  for (int a = 0; a < inst.agents; ++a) {
    auto& ra = plan.routes[static_cast<std::size_t>(a)];
    for (int b = a + 1; b < inst.agents; ++b) {
      auto& rb = plan.routes[static_cast<std::size_t>(b)];
      for (std::size_t i = 0; i < ra.size(); ++i) {
        for (std::size_t j = 0; j < rb.size(); ++j) {
          std::swap(ra[i], rb[j]);
          trial[static_cast<std::size_t>(a)] = route_cost(inst, a, ra);
          trial[static_cast<std::size_t>(b)] = route_cost(inst, b, rb);
          const Key k = plan_key(trial, objective);
          if (key_less(k.primary, k.secondary, current.primary, current.secondary)) {
            refresh_costs(inst, plan);
            return true;
          }
          std::swap(ra[i], rb[j]);
          trial[static_cast<std::size_t>(a)] = plan.costs[static_cast<std::size_t>(a)];
          trial[static_cast<std::size_t>(b)] = plan.costs[static_cast<std::size_t>(b)];
        }
      }
    }
  }
  return false;
}

void improve(const MtspInstance& inst, RoutePlan& plan, MtspObjective objective) {
  // Each accepted move strictly lowers the lexicographic key, so this ends;
  // the cap only guards against pathological tolerance interplay.
  for (int round = 0; round < 100000; ++round) {
    for (int a = 0; a < inst.agents; ++a) two_opt(inst, a, plan.routes[static_cast<std::size_t>(a)]);
    refresh_costs(inst, plan);
    if (relocate_pass(inst, plan, objective)) continue;
    if (swap_pass(inst, plan, objective)) continue;
    break;
  }
}

}  // namespace

double path_cost(std::span<const Vec3> order, const Vec3& start, const DistanceFn& dist) {
  double c = 0.0;
  Vec3 prev = start;
  for (const Vec3& p : order) {
    c += dist(prev, p);
    prev = p;
  }
  return c;
}

MtspInstance MtspInstance::from_points(std::span<const Vec3> starts, std::span<const Vec3> points,
                                       const DistanceFn& dist) {
  MtspInstance inst;
  inst.agents = static_cast<int>(starts.size());
  inst.waypoints = static_cast<int>(points.size());
  const std::size_t n = starts.size() + points.size();
  std::vector<Vec3> all(starts.begin(), starts.end());
  all.insert(all.end(), points.begin(), points.end());
  inst.cost.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d = dist(all[a], all[b]);
      inst.cost[a * n + b] = d;
      inst.cost[b * n + a] = d;
    }
  }
  return inst;
}

double route_cost(const MtspInstance& inst, int agent, std::span<const int> route) {
  double c = 0.0;
  int prev = agent;
  for (int w : route) {
    c += inst.at(prev, node(inst, w)) + service_of(inst, w);
    prev = node(inst, w);
  }
  return c;
}

void refresh_costs(const MtspInstance& inst, RoutePlan& plan) {
  plan.costs.resize(plan.routes.size());
  plan.makespan = 0.0;
  plan.total = 0.0;
  for (std::size_t a = 0; a < plan.routes.size(); ++a) {
    plan.costs[a] = route_cost(inst, static_cast<int>(a), plan.routes[a]);
    plan.makespan = std::max(plan.makespan, plan.costs[a]);
    plan.total += plan.costs[a];
  }
}

bool better_plan(const RoutePlan& a, const RoutePlan& b, MtspObjective objective) {
  const Key ka = plan_key(a.costs, objective);
  const Key kb = plan_key(b.costs, objective);
  return key_less(ka.primary, ka.secondary, kb.primary, kb.secondary);
}

RoutePlan cheapest_insertion(const MtspInstance& inst, MtspObjective objective) {
  RoutePlan plan;
  plan.routes.assign(static_cast<std::size_t>(inst.agents), {});
  plan.costs.assign(static_cast<std::size_t>(inst.agents), 0.0);
  if (inst.agents == 0) return plan;
  std::vector<bool> used(static_cast<std::size_t>(inst.waypoints), false);
  double makespan = 0.0;
  for (int step = 0; step < inst.waypoints; ++step) {
    double best_p = kInf;
    double best_s = kInf;
    int best_w = -1;
    int best_a = -1;
    std::size_t best_j = 0;
    for (int w = 0; w < inst.waypoints; ++w) {
      if (used[static_cast<std::size_t>(w)]) continue;
      for (int a = 0; a < inst.agents; ++a) {
        const auto& r = plan.routes[static_cast<std::size_t>(a)];
        for (std::size_t j = 0; j <= r.size(); ++j) {
          const double d = insertion_delta(inst, a, r, j, w);
          const double p = objective == MtspObjective::kMinMakespan
                               ? std::max(makespan, plan.costs[static_cast<std::size_t>(a)] + d)
                               : d;
          if (key_less(p, d, best_p, best_s)) {
            best_p = p;
            best_s = d;
            best_w = w;
            best_a = a;
            best_j = j;
          }
        }
      }
    }
    auto& r = plan.routes[static_cast<std::size_t>(best_a)];
    r.insert(r.begin() + static_cast<std::ptrdiff_t>(best_j), best_w);
    plan.costs[static_cast<std::size_t>(best_a)] += best_s;
    makespan = std::max(makespan, plan.costs[static_cast<std::size_t>(best_a)]);
    used[static_cast<std::size_t>(best_w)] = true;
  }
  refresh_costs(inst, plan);
  return plan;
}

RoutePlan nearest_neighbor(const MtspInstance& inst) {
  RoutePlan plan;
  plan.routes.assign(static_cast<std::size_t>(inst.agents), {});
  plan.costs.assign(static_cast<std::size_t>(inst.agents), 0.0);
  if (inst.agents == 0) return plan;
  std::vector<bool> used(static_cast<std::size_t>(inst.waypoints), false);
  for (int step = 0; step < inst.waypoints; ++step) {
    int a = 0;
    for (int b = 1; b < inst.agents; ++b) {
      if (plan.costs[static_cast<std::size_t>(b)] < plan.costs[static_cast<std::size_t>(a)]) a = b;
    }
    auto& r = plan.routes[static_cast<std::size_t>(a)];
    const int from = r.empty() ? a : node(inst, r.back());
    int best = -1;
    double best_c = kInf;
    for (int w = 0; w < inst.waypoints; ++w) {
      if (used[static_cast<std::size_t>(w)]) continue;
      const double c = inst.at(from, node(inst, w)) + service_of(inst, w);
      if (c < best_c) {
        best_c = c;
        best = w;
      }
    }
    r.push_back(best);
    used[static_cast<std::size_t>(best)] = true;
    plan.costs[static_cast<std::size_t>(a)] += best_c;
  }
  refresh_costs(inst, plan);
  return plan;
}

void two_opt(const MtspInstance& inst, int agent, std::vector<int>& route) {
  const std::size_t n = route.size();
  if (n < 2) return;
  const bool symmetric = is_symmetric(inst);
  double current = route_cost(inst, agent, route);
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 1 < n && !improved; ++i) {
      for (std::size_t j = i + 1; j < n && !improved; ++j) {
        double delta;
        if (symmetric) {
          const int p = prev_node(inst, agent, route, i);
          const int a = node(inst, route[i]);
          const int b = node(inst, route[j]);
          const int q = next_node(inst, route, j);
          delta = inst.at(p, b) - inst.at(p, a);
          if (q >= 0) delta += inst.at(a, q) - inst.at(b, q);
        } else {
          std::reverse(route.begin() + static_cast<std::ptrdiff_t>(i), route.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          delta = route_cost(inst, agent, route) - current;
          std::reverse(route.begin() + static_cast<std::ptrdiff_t>(i), route.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        }
        if (delta < -kTol) {
          std::reverse(route.begin() + static_cast<std::ptrdiff_t>(i), route.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          current = route_cost(inst, agent, route);
          improved = true;
        }
      }
    }
  }
}

RoutePlan solve_mtsp(const MtspInstance& inst, MtspObjective objective) {
  if (inst.agents < 1) throw std::invalid_argument("solve_mtsp: at least one agent required");
  RoutePlan a = cheapest_insertion(inst, objective);
  improve(inst, a, objective);
  RoutePlan b = nearest_neighbor(inst);
  improve(inst, b, objective);
  return better_plan(b, a, objective) ? b : a;
}

RoutePlan solve_mtsp(std::span<const Vec3> starts, std::span<const Vec3> points, const DistanceFn& dist,
                     MtspObjective objective) {
  return solve_mtsp(MtspInstance::from_points(starts, points, dist), objective);
}

RoutePlan exact_mtsp_small(const MtspInstance& inst, MtspObjective objective) {
  if (inst.waypoints > kExactMtspLimit) {
    throw MtspTooLarge("exact_mtsp_small: " + std::to_string(inst.waypoints) + " waypoints exceeds the limit of " +
                       std::to_string(kExactMtspLimit));
  }
  if (inst.agents < 1) throw std::invalid_argument("exact_mtsp_small: at least one agent required");
  const int w = inst.waypoints;
  const std::size_t subsets = std::size_t{1} << w;
  const auto A = static_cast<std::size_t>(inst.agents);

  // Per agent: best open path over each subset, with its order.
  std::vector<std::vector<double>> best(A, std::vector<double>(subsets, kInf));
  std::vector<std::vector<std::vector<int>>> order(A, std::vector<std::vector<int>>(subsets));
  for (std::size_t a = 0; a < A; ++a) {
    std::vector<double> dp(subsets * static_cast<std::size_t>(std::max(w, 1)), kInf);
    std::vector<int> parent(dp.size(), -1);
    auto at = [&](std::size_t s, int last) -> std::size_t { return s * static_cast<std::size_t>(w) + static_cast<std::size_t>(last); };
    for (int x = 0; x < w; ++x) {
      dp[at(std::size_t{1} << x, x)] = inst.at(static_cast<int>(a), node(inst, x)) + service_of(inst, x);
    }
    for (std::size_t s = 1; s < subsets; ++s) {
      for (int last = 0; last < w; ++last) {
        if (!(s >> last & 1U)) continue;
        const double c = dp[at(s, last)];
        if (c == kInf) continue;
        for (int nx = 0; nx < w; ++nx) {
          if (s >> nx & 1U) continue;
          const std::size_t t = s | (std::size_t{1} << nx);
          const double nc = c + inst.at(node(inst, last), node(inst, nx)) + service_of(inst, nx);
          if (nc < dp[at(t, nx)]) {
            dp[at(t, nx)] = nc;
            parent[at(t, nx)] = last;
          }
        }
      }
    }
    best[a][0] = 0.0;
    for (std::size_t s = 1; s < subsets; ++s) {
      int arg = -1;
      for (int last = 0; last < w; ++last) {
        if ((s >> last & 1U) && dp[at(s, last)] < best[a][s]) {
          best[a][s] = dp[at(s, last)];
          arg = last;
        }
      }
      std::vector<int> seq;
      std::size_t cur = s;
      while (arg >= 0) {
        seq.push_back(arg);
        const int p = parent[at(cur, arg)];
        cur &= ~(std::size_t{1} << arg);
        arg = p;
      }
      std::reverse(seq.begin(), seq.end());
      order[a][s] = std::move(seq);
    }
  }

  // Split subsets across agents: f[k][s] is the best key using agents 0..k.
  struct Cell {
    double primary = kInf;
    double secondary = kInf;
    std::size_t own = 0;  // subset given to agent k
  };
  std::vector<std::vector<Cell>> f(A, std::vector<Cell>(subsets));
  auto combine = [&](double p_prev, double s_prev, double c) -> std::pair<double, double> {
    // Carries (max, sum) for min-makespan and (sum, max) for min-sum.
    if (objective == MtspObjective::kMinMakespan) return {std::max(p_prev, c), s_prev + c};
    return {p_prev + c, std::max(s_prev, c)};
  };
  for (std::size_t s = 0; s < subsets; ++s) f[0][s] = {best[0][s], best[0][s], s};
  for (std::size_t k = 1; k < A; ++k) {
    for (std::size_t s = 0; s < subsets; ++s) {
      // Enumerate subsets t of s handed to agent k.
      std::size_t t = s;
      for (;;) {
        const Cell& prev = f[k - 1][s & ~t];
        const auto [p, sec] = combine(prev.primary, prev.secondary, best[k][t]);
        if (key_less(p, sec, f[k][s].primary, f[k][s].secondary)) f[k][s] = {p, sec, t};
        if (t == 0) break;
        t = (t - 1) & s;
      }
    }
  }

  RoutePlan plan;
  plan.routes.assign(A, {});
  std::size_t s = subsets - 1;
  for (std::size_t k = A; k-- > 0;) {
    const std::size_t own = f[k][s].own;
    plan.routes[k] = order[k][own];
    s &= ~own;
  }
  refresh_costs(inst, plan);
  return plan;
}

double box_assignment_cost(const Vec3& explorer_pos, const Aabb& box, const BoxCostWeights& w) {
  return w.distance * (explorer_pos - box.center()).norm() + w.volume * box.volume();
}

MtspInstance box_assignment_instance(std::span<const Vec3> explorers, std::span<const Aabb> boxes,
                                     const BoxCostWeights& w) {
  MtspInstance inst;
  inst.agents = static_cast<int>(explorers.size());
  inst.waypoints = static_cast<int>(boxes.size());
  const std::size_t n = explorers.size() + boxes.size();
  inst.cost.assign(n * n, 0.0);
  for (std::size_t from = 0; from < n; ++from) {
    const Vec3 origin = from < explorers.size() ? explorers[from] : boxes[from - explorers.size()].center();
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const std::size_t to = explorers.size() + b;
      if (to != from) inst.cost[from * n + to] = box_assignment_cost(origin, boxes[b], w);
    }
  }
  return inst;
}

std::vector<Aabb> split_box_longest_side(const Aabb& box, std::span<const double> fractions) {
  if (fractions.empty()) throw std::invalid_argument("split_box_longest_side: no fractions");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw std::invalid_argument("split_box_longest_side: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split_box_longest_side: fractions must sum to 1");
  const int axis = box.longest_axis();
  const double len = box.max[axis] - box.min[axis];
  std::vector<Aabb> out;
  double cum = 0.0;
  double lo = box.min[axis];
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    cum += fractions[i];
    Aabb slab = box;
    slab.min[axis] = lo;
    slab.max[axis] = i + 1 == fractions.size() ? box.max[axis] : box.min[axis] + cum * len;
    lo = slab.max[axis];
    out.push_back(slab);
  }
  return out;
}

}  // namespace uavsim
