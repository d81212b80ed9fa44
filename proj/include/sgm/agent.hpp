#pragma once

// Hierarchical execution: localize onto the graph, plan waypoints, follow
// them with a greedy low-level controller, detect infeasible edges by leg
// timeouts, and (optionally) repair the graph by removing failed edges.

#include <chrono>
#include <limits>
#include <memory>

#include "sgm/maze.hpp"
#include "sgm/planner.hpp"

namespace sgm {

struct Controller {
  std::function<Action(const Observation&, const Observation&)> policy;
};

// Straight pursuit: step directly toward the waypoint, clipped to max_step.
// Walls truncate motion inside maze step(), which is what exposes infeasible
// edges as zero-progress legs.
inline Controller greedy_controller(double max_step) {
  return {[max_step](const Observation& s, const Observation& w) {
    Action a{w.x - s.x, w.y - s.y};
    const double n = a.norm();
    if (n > max_step) {
      a.dx *= max_step / n;
      a.dy *= max_step / n;
    }
    return a;
  }};
}

// Greedy pursuit with a deterministic unsticking rule: while consecutive
// calls fail to cover at least a fifth of a step, the commanded direction
// rotates through widening alternating angles.  That slides the agent around
// wall corners that truncate the straight approach, so only waypoints
// separated by real obstacles keep timing out.  Assumes attainment radii
// (acting cutoff, goal radius) exceed 0.2 * max_step, so intentional short
// approaches never look like collisions.
inline Controller sliding_controller(double max_step) {
  struct State {
    Observation last{std::numeric_limits<double>::quiet_NaN(), 0.0};
    int streak = 0;
  };
  auto st = std::make_shared<State>();
  return {[max_step, st](const Observation& s, const Observation& w) {
    const bool moved = !(euclid(s, st->last) < 0.2 * max_step);
    st->streak = moved ? 0 : st->streak + 1;
    st->last = s;
    Action a{w.x - s.x, w.y - s.y};
    const double n = a.norm();
    if (n > max_step) {
      a.dx *= max_step / n;
      a.dy *= max_step / n;
    }
    if (st->streak > 0) {
      static const double turns[8] = {45, -45, 90, -90, 135, -135, 180, 0};
      const double th = turns[(st->streak - 1) % 8] * kPi / 180.0;
      const double c = std::cos(th), sn = std::sin(th);
      a = {a.dx * c - a.dy * sn, a.dx * sn + a.dy * c};
    }
    return a;
  }};
}

constexpr std::uint32_t kNoWaypoint = std::uint32_t(-1);  // direct goal pursuit

struct EpisodeResult {
  bool success = false;
  int env_steps = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_removed;
  int replans = 0;
  std::vector<std::pair<Observation, std::uint32_t>> trace;  // filled on request
  Observation start{}, goal{};
  double difficulty = 0.0;  // true geodesic between start and goal, step units
};

struct RunOptions {
  bool record_trace = false;
  std::vector<double>* action_seconds = nullptr;  // per-step decision latency
};

inline EpisodeResult run_episode(const Maze& m, GraphMemory& g, const DistanceFunction& d,
                                 const Controller& ctrl, const Observation& start,
                                 const Observation& goal, const ExecParams& xp,
                                 bool allow_edge_removal, const RunOptions& opt = {}) {
  if (g.vertex_count() == 0) throw error("run_episode: empty graph");
  if (!m.point_free(start) || !m.point_free(goal))
    throw error("run_episode: start/goal must be in free space");

  EpisodeResult res;
  res.start = start;
  res.goal = goal;
  res.difficulty = geodesic(m, start, goal);

  Observation obs = start;
  if (euclid(obs, goal) <= xp.goal_radius) {
    res.success = true;
    return res;
  }

  const std::uint32_t goal_id =
      localize(g, d, goal, xp.acting_cutoff, LocalizeMode::as_goal).id;
  Plan plan;
  bool direct = false;  // past the final waypoint, pursuing the raw goal
  int leg_steps = 0;

  auto final_attained = [&]() {
    return plan.cursor + 1 == plan.waypoint_ids.size() &&
           d(obs, g.obs[plan.waypoint_ids[plan.cursor]]) <= xp.acting_cutoff;
  };
  // Fresh localize + Dijkstra from the current position; the cursor is
  // normalized past any already-attained prefix without counting as a
  // replanning trigger.
  auto adopt_plan = [&]() {
    const auto loc = localize(g, d, obs, xp.acting_cutoff, LocalizeMode::as_start);
    auto p = shortest_path(g, loc.id, goal_id);
    if (!p) return false;
    plan = std::move(*p);
    current_waypoint(plan, g, d, obs, xp.acting_cutoff);
    direct = final_attained();
    leg_steps = 0;
    return true;
  };

  if (!adopt_plan()) return res;  // goal vertex unreachable from the start

  while (res.env_steps < xp.episode_budget) {
    const auto t0 = opt.action_seconds ? std::chrono::steady_clock::now()
                                       : std::chrono::steady_clock::time_point{};
    if (!direct) {
      const std::size_t before = plan.cursor;
      current_waypoint(plan, g, d, obs, xp.acting_cutoff);
      if (final_attained()) {
        direct = true;
        leg_steps = 0;
      } else if (plan.cursor != before) {
        ++res.replans;  // waypoint attained: relocalize and replan
        if (!adopt_plan()) break;
      }
    }
    const Observation target = direct ? goal : g.obs[plan.waypoint_ids[plan.cursor]];
    const Action a = ctrl.policy(obs, target);
    if (opt.action_seconds)
      opt.action_seconds->push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    obs = step(m, obs, a);
    ++res.env_steps;
    ++leg_steps;
    if (opt.record_trace)
      res.trace.push_back({obs, direct ? kNoWaypoint : plan.waypoint_ids[plan.cursor]});

    if (euclid(obs, goal) <= xp.goal_radius) {
      res.success = true;
      break;
    }
    if (leg_steps >= xp.max_steps_per_edge) {
      // Transition failure.  Only a waypoint-to-waypoint leg names an edge;
      // the start leg and direct goal pursuit just relocalize.
      if (!direct && plan.cursor > 0 && allow_edge_removal) {
        const std::uint32_t src = plan.waypoint_ids[plan.cursor - 1];
        const std::uint32_t dst = plan.waypoint_ids[plan.cursor];
        if (g.has_edge(src, dst)) {
          remove_edge(g, src, dst);
          res.edges_removed.push_back({src, dst});
        }
      }
      ++res.replans;
      if (!adopt_plan()) break;
    }
  }
  return res;
}

struct CleanupReport {
  int steps_used = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_removed;
  int episodes = 0;
};

// Self-supervised repair: random start/goal episodes with edge removal
// enabled until the low-level step budget is spent.  The final episode is
// truncated so exactly n_steps environment steps are consumed at most.
inline CleanupReport cleanup(const Maze& m, GraphMemory& g, const DistanceFunction& d,
                             const Controller& ctrl, const ExecParams& xp, int n_steps,
                             std::uint64_t seed) {
  if (n_steps < 0) throw error("cleanup: negative step budget");
  CleanupReport rep;
  Rng rng(substream(seed, "cleanup"));
  int idle_episodes = 0;  // guard: a graph that yields no steps cannot consume budget
  while (rep.steps_used < n_steps && idle_episodes < 1000) {
    const Observation s = sample_free_point(m, rng);
    const Observation t = sample_free_point(m, rng);
    ExecParams capped = xp;
    capped.episode_budget = std::min(xp.episode_budget, n_steps - rep.steps_used);
    const EpisodeResult res = run_episode(m, g, d, ctrl, s, t, capped, true);
    rep.steps_used += res.env_steps;
    rep.episodes += 1;
    rep.edges_removed.insert(rep.edges_removed.end(), res.edges_removed.begin(),
                             res.edges_removed.end());
    idle_episodes = res.env_steps == 0 ? idle_episodes + 1 : 0;
  }
  return rep;
}

inline nlohmann::ordered_json episode_to_json(const EpisodeResult& r) {
  nlohmann::ordered_json j;
  j["success"] = r.success;
  j["env_steps"] = r.env_steps;
  j["replans"] = r.replans;
  j["start"] = {r.start.x, r.start.y};
  j["goal"] = {r.goal.x, r.goal.y};
  j["difficulty"] = r.difficulty;
  j["edges_removed"] = nlohmann::ordered_json::array();
  for (const auto& [s, t] : r.edges_removed) j["edges_removed"].push_back({s, t});
  return j;
}

}  // namespace sgm
