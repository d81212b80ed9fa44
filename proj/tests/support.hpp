#pragma once

// Shared helpers for the test suite and the acceptance runner: a brute-force
// shortest-path oracle (exhaustive simple-path enumeration with branch
// pruning) and a generator of small random directed graphs with exact
// quarter-integer weights, so Dijkstra results can be compared with ==.

#include <optional>

#include "sgm/memory.hpp"

namespace sgm_test {

inline sgm::GraphMemory random_small_graph(sgm::Rng& rng) {
  const std::size_t n = 2 + rng.below(29);  // 2..30 vertices
  const double p = 0.05 + 0.2 * rng.next_double();
  sgm::GraphMemory g;
  for (std::size_t v = 0; v < n; ++v) {
    g.obs.push_back({double(v), 0.0});
    g.out.emplace_back();
  }
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = 0; v < n; ++v) {
      if (u == v) continue;
      if (rng.next_double() < p)
        g.out[u].push_back({v, 0.25 * double(1 + rng.below(32))});
    }
  return g;
}

// Exhaustive minimum over simple paths; exact because weights are small
// multiples of 0.25.  Only for graphs of a few dozen vertices.
inline std::optional<double> brute_force_shortest(const sgm::GraphMemory& g,
                                                  std::uint32_t src, std::uint32_t dst) {
  std::vector<std::vector<sgm::Edge>> adj = g.out;
  for (auto& es : adj)
    std::sort(es.begin(), es.end(), [](const sgm::Edge& a, const sgm::Edge& b) {
      return a.w != b.w ? a.w < b.w : a.dst < b.dst;
    });
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> on_path(g.vertex_count(), false);
  auto dfs = [&](auto&& self, std::uint32_t u, double cost) -> void {
    if (cost >= best) return;
    if (u == dst) {
      best = cost;
      return;
    }
    on_path[u] = true;
    for (const sgm::Edge& e : adj[u])
      if (!on_path[e.dst]) self(self, e.dst, cost + e.w);
    on_path[u] = false;
  };
  dfs(dfs, src, 0.0);
  if (best == std::numeric_limits<double>::infinity()) return std::nullopt;
  return best;
}

}  // namespace sgm_test
