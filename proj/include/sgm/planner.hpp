#pragma once

// Nonparametric high-level policy: localize arbitrary observations onto graph
// vertices under the (possibly asymmetric) distance, and plan waypoint
// sequences with Dijkstra over edge weights.

#include <optional>
#include <queue>

#include "sgm/memory.hpp"

namespace sgm {

struct ExecParams {
  double acting_cutoff = 1.0;   // step units; localization + waypoint attainment
  int max_steps_per_edge = 30;  // low-level steps before a leg counts as failed
  int episode_budget = 400;     // environment steps per episode
  double goal_radius = 1.0;     // length units; episode success condition
};

struct Plan {
  std::vector<std::uint32_t> waypoint_ids;
  double total_cost = 0.0;
  std::size_t cursor = 0;  // index of the current target waypoint
};

enum class LocalizeMode { as_start, as_goal };

struct LocalizeResult {
  std::uint32_t id = 0;
  double dist = 0.0;
  bool in_range = false;  // dist <= cutoff; out-of-range still localizes
};

// as_start: nearest vertex to reach from s (argmin d(s, v)); as_goal: nearest
// vertex from which s can be reached (argmin d(v, s)).  Ties pick the lower id.
inline LocalizeResult localize(const GraphMemory& g, const DistanceFunction& d,
                               const Observation& s, double cutoff, LocalizeMode mode) {
  if (g.vertex_count() == 0) throw error("localize: empty graph");
  LocalizeResult best{0, mode == LocalizeMode::as_start ? d(s, g.obs[0]) : d(g.obs[0], s),
                      false};
  for (std::uint32_t v = 1; v < g.vertex_count(); ++v) {
    const double dist =
        mode == LocalizeMode::as_start ? d(s, g.obs[v]) : d(g.obs[v], s);
    if (dist < best.dist) best = {v, dist, false};
  }
  best.in_range = best.dist <= cutoff;
  return best;
}

// Dijkstra over non-negative edge weights.  Deterministic: the frontier pops
// (distance, vertex) lexicographically and equal-distance relaxations keep the
// lowest predecessor id.
inline std::optional<Plan> shortest_path(const GraphMemory& g, std::uint32_t src,
                                         std::uint32_t dst) {
  const std::size_t n = g.vertex_count();
  if (src >= n || dst >= n) throw error("shortest_path: unknown vertex");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::uint32_t> pred(n, std::uint32_t(-1));
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    if (u == dst) break;
    for (const Edge& e : g.out[u]) {
      const double nd = du + e.w;
      if (nd < dist[e.dst]) {
        dist[e.dst] = nd;
        pred[e.dst] = u;
        heap.push({nd, e.dst});
      } else if (nd == dist[e.dst] && u < pred[e.dst]) {
        pred[e.dst] = u;
      }
    }
  }
  if (dist[dst] == inf) return std::nullopt;
  Plan plan;
  plan.total_cost = dist[dst];
  for (std::uint32_t v = dst; v != src; v = pred[v]) plan.waypoint_ids.push_back(v);
  plan.waypoint_ids.push_back(src);
  std::reverse(plan.waypoint_ids.begin(), plan.waypoint_ids.end());
  return plan;
}

// Advances the cursor past every consecutively attained waypoint (within
// cutoff of s) and returns the first unattained one; at plan end the final
// node's observation keeps being returned.
inline Observation current_waypoint(Plan& plan, const GraphMemory& g,
                                    const DistanceFunction& d, const Observation& s,
                                    double cutoff) {
  if (plan.cursor >= plan.waypoint_ids.size())
    throw error("current_waypoint: cursor out of range");
  while (plan.cursor + 1 < plan.waypoint_ids.size() &&
         d(s, g.obs[plan.waypoint_ids[plan.cursor]]) <= cutoff)
    ++plan.cursor;
  return g.obs[plan.waypoint_ids[plan.cursor]];
}

}  // namespace sgm
