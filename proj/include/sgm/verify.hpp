#pragma once
// Exhaustive path-length comparison between a replay buffer's complete
// directed graph and its consistency-compressed counterpart.  Both graphs are
// fully connected (no range cutoff, no neighbour cap, no perceptual gate), so
// vertex merging is the only difference between them; shortest paths on both
// sides come from exact dense Dijkstra.  Merging one endpoint moves each edge
// price by at most 2*tau_a, so a k-edge path can grow by at most 2*k*tau_a;
// with a distance wrapper whose per-query error is at most eps, the compressed
// length stays within k*eps + 2*k*tau_a of the dense path's true price.  The
// trials here measure both margins against their bounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgm/distance.hpp"
#include "sgm/maze.hpp"

namespace sgm {

// ---- reports ---------------------------------------------------------------

struct GapTrial {
  std::uint32_t start = 0;     // buffer state ids; retained in both graphs
  std::uint32_t goal = 0;
  std::size_t path_edges = 0;  // k: edge count of the dense shortest path
  double len_dense = 0.0;      // its length under the planning distance
  double len_sparse = 0.0;     // shortest length over the compressed graph
  double true_len_dense = std::numeric_limits<double>::quiet_NaN();
  double bound_i = 0.0;        // 2*k*tau_a
  double bound_ii = std::numeric_limits<double>::quiet_NaN();  // k*eps + 2*k*tau_a
  bool pass_i = true;          // len_sparse - len_dense <= bound_i
  bool pass_ii = true;         // |len_sparse - true_len_dense| <= bound_ii
};

struct GapReport {
  double tau_a = 0.0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();  // NaN: no noise
  std::size_t dense_vertices = 0;
  std::size_t sparse_vertices = 0;
  std::vector<GapTrial> trials;

  std::size_t violations_i() const {
    std::size_t n = 0;
    for (const auto& t : trials) n += !t.pass_i;
    return n;
  }
  std::size_t violations_ii() const {
    std::size_t n = 0;
    for (const auto& t : trials) n += !t.pass_ii;
    return n;
  }
  // Trials where compression strictly lengthened the path (shows the bound
  // checks are exercised, not vacuous).
  std::size_t positive_gaps() const {
    std::size_t n = 0;
    for (const auto& t : trials) n += (t.len_sparse - t.len_dense) > 1e-9;
    return n;
  }
};

// ---- internals -------------------------------------------------------------

namespace detail {

// max_j |a[j] - b[j]| over n entries, with early exit once the running max
// clears `cap` (callers only care whether the max stays at or below cap).
inline bool row_gap_within(const double* a, const double* b, std::size_t n, double cap) {
  for (std::size_t j = 0; j < n; ++j)
    if (std::fabs(a[j] - b[j]) > cap) return false;
  return true;
}

// Streaming aggregation over the full pairwise matrix: state i merges into the
// first retained state v whose outgoing and incoming distance rows both stay
// within tau_a of i's, measured against every buffer state as reference.
inline std::vector<std::uint32_t> aggregate_full_reference(const std::vector<double>& w,
                                                           const std::vector<double>& wt,
                                                           std::size_t n, double tau_a) {
  std::vector<std::uint32_t> retained;
  for (std::size_t i = 0; i < n; ++i) {
    bool merged = false;
    for (const std::uint32_t v : retained) {
      if (!row_gap_within(&w[i * n], &w[std::size_t(v) * n], n, tau_a)) continue;
      if (!row_gap_within(&wt[i * n], &wt[std::size_t(v) * n], n, tau_a)) continue;
      merged = true;
      break;
    }
    if (!merged) retained.push_back(std::uint32_t(i));
  }
  return retained;
}

// Array Dijkstra over a complete directed graph given as a flat row-major
// weight matrix.  Returns (distance, parent) from `src` to every vertex.
inline std::pair<std::vector<double>, std::vector<std::uint32_t>> complete_dijkstra(
    const std::vector<double>& w, std::size_t n, std::uint32_t src) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::uint32_t> parent(n, std::uint32_t(-1));
  std::vector<char> done(n, 0);
  dist[src] = 0.0;
  for (std::size_t round = 0; round < n; ++round) {
    std::size_t u = n;
    double best = inf;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && dist[i] < best) best = dist[i], u = i;
    if (u == n) break;
    done[u] = 1;
    const double* row = &w[u * n];
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      const double nd = best + row[v];
      if (nd < dist[v]) dist[v] = nd, parent[v] = std::uint32_t(u);
    }
  }
  return {std::move(dist), std::move(parent)};
}

}  // namespace detail

// ---- gap measurement -------------------------------------------------------

// Core pipeline.  `d` prices both graphs; when `d_true` is non-null the dense
// shortest path is additionally re-priced with it and the two-sided
// noise-compounding bound is evaluated.
inline GapReport measure_gap(const ReplayBuffer& buffer, const DistanceFunction& d,
                             const DistanceFunction* d_true, double epsilon, double tau_a,
                             std::size_t pairs, std::uint64_t rng_seed) {
  if (tau_a < 0) throw error("measure_gap: tau_a must be non-negative");
  if (pairs == 0) throw error("measure_gap: pairs must be positive");
  const std::size_t n = buffer.total_states();
  if (n == 0) throw error("measure_gap: empty replay buffer");
  // The harness is deliberately exhaustive (complete graphs, O(n^2) memory);
  // refuse buffers where that stops being reasonable.
  if (n > 2000)
    throw error("measure_gap: buffer has " + std::to_string(n) +
                " states; exhaustive verification is capped at 2000");

  std::vector<Observation> states;
  states.reserve(n);
  for (const auto& ep : buffer.episodes)
    for (const auto& o : ep) states.push_back(o);

  // Full pairwise price matrix and its transpose (for cache-friendly scans of
  // incoming rows during aggregation).
  std::vector<double> w(n * n, 0.0), wt(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = i == j ? 0.0 : d(states[i], states[j]);
      w[i * n + j] = v;
      wt[j * n + i] = v;
    }

  const std::vector<std::uint32_t> retained = detail::aggregate_full_reference(w, wt, n, tau_a);
  const std::size_t r = retained.size();

  // Complete graph over the retained vertices, priced by the same distance.
  std::vector<double> ws(r * r, 0.0);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < r; ++b)
      ws[a * r + b] = w[std::size_t(retained[a]) * n + retained[b]];
  GapReport rep;
  rep.tau_a = tau_a;
  rep.epsilon = d_true ? epsilon : std::numeric_limits<double>::quiet_NaN();
  rep.dense_vertices = n;
  rep.sparse_vertices = r;
  rep.trials.reserve(pairs);

  Rng rng(substream(rng_seed, "pairs"));
  for (std::size_t t = 0; t < pairs; ++t) {
    const std::uint32_t sa = std::uint32_t(rng.below(r));
    std::uint32_t sb = std::uint32_t(rng.below(r));
    while (r > 1 && sb == sa) sb = std::uint32_t(rng.below(r));
    const std::uint32_t start = retained[sa], goal = retained[sb];

    const auto [dist_d, parent_d] = detail::complete_dijkstra(w, n, start);
    const auto [dist_s, parent_s] = detail::complete_dijkstra(ws, r, sa);

    GapTrial trial;
    trial.start = start;
    trial.goal = goal;
    trial.len_dense = dist_d[goal];
    trial.len_sparse = dist_s[sb];

    // Recover the dense path to count its edges (and re-price it if asked).
    std::vector<std::uint32_t> path;
    for (std::uint32_t v = goal; v != start; v = parent_d[v]) path.push_back(v);
    path.push_back(start);
    std::reverse(path.begin(), path.end());
    trial.path_edges = path.size() - 1;

    const double k = double(trial.path_edges);
    const double tol = 1e-9 * k;
    trial.bound_i = 2.0 * k * tau_a;
    trial.pass_i = trial.len_sparse - trial.len_dense <= trial.bound_i + tol;
    if (d_true) {
      double true_len = 0.0;
      for (std::size_t e = 0; e + 1 < path.size(); ++e)
        true_len += (*d_true)(states[path[e]], states[path[e + 1]]);
      trial.true_len_dense = true_len;
      trial.bound_ii = k * epsilon + 2.0 * k * tau_a;
      trial.pass_ii = std::fabs(trial.len_sparse - true_len) <= trial.bound_ii + tol;
    }
    rep.trials.push_back(trial);
  }
  return rep;
}

// Gap measurement under the planning distance itself.
inline GapReport verify_gap(const ReplayBuffer& buffer, const DistanceFunction& d, double tau_a,
                            std::size_t pairs, std::uint64_t rng_seed) {
  return measure_gap(buffer, d, nullptr, 0.0, tau_a, pairs, rng_seed);
}

// Gap measurement when the planning distance is a noise-corrupted view of
// `d_true` (deterministic value-keyed noise bounded by epsilon per query).
inline GapReport verify_gap_noisy(const ReplayBuffer& buffer, const DistanceFunction& d_true,
                                  double epsilon, double tau_a, std::size_t pairs,
                                  std::uint64_t rng_seed) {
  if (epsilon < 0) throw error("verify_gap_noisy: epsilon must be non-negative");
  const DistanceFunction noisy = with_noise(d_true, {epsilon, substream(rng_seed, "noise")});
  return measure_gap(buffer, noisy, &d_true, epsilon, tau_a, pairs, rng_seed);
}

// ---- serialization ---------------------------------------------------------

inline nlohmann::ordered_json gap_report_to_json(const GapReport& rep) {
  nlohmann::ordered_json j;
  j["tau_a"] = rep.tau_a;
  j["epsilon"] = std::isnan(rep.epsilon) ? nlohmann::ordered_json(nullptr)
                                         : nlohmann::ordered_json(rep.epsilon);
  j["dense_vertices"] = rep.dense_vertices;
  j["sparse_vertices"] = rep.sparse_vertices;
  j["violations_i"] = rep.violations_i();
  j["violations_ii"] = rep.violations_ii();
  j["positive_gaps"] = rep.positive_gaps();
  j["trials"] = nlohmann::ordered_json::array();
  for (const auto& t : rep.trials) {
    nlohmann::ordered_json jt;
    jt["start"] = t.start;
    jt["goal"] = t.goal;
    jt["k"] = t.path_edges;
    jt["len_dense"] = t.len_dense;
    jt["len_sparse"] = t.len_sparse;
    jt["true_len"] = std::isnan(t.true_len_dense) ? nlohmann::ordered_json(nullptr)
                                                  : nlohmann::ordered_json(t.true_len_dense);
    jt["bound_i"] = t.bound_i;
    jt["bound_ii"] = std::isnan(t.bound_ii) ? nlohmann::ordered_json(nullptr)
                                            : nlohmann::ordered_json(t.bound_ii);
    jt["pass_i"] = t.pass_i;
    jt["pass_ii"] = t.pass_ii;
    j["trials"].push_back(std::move(jt));
  }
  return j;
}

inline std::string gap_report_to_csv(const GapReport& rep) {
  std::ostringstream out;
  out << "start,goal,k,len_dense,len_sparse,true_len,bound_i,bound_ii,pass_i,pass_ii\n";
  out.precision(17);
  for (const auto& t : rep.trials) {
    out << t.start << ',' << t.goal << ',' << t.path_edges << ',' << t.len_dense << ','
        << t.len_sparse << ',' << t.true_len_dense << ',' << t.bound_i << ',' << t.bound_ii
        << ',' << int(t.pass_i) << ',' << int(t.pass_ii) << '\n';
  }
  return out.str();
}

}  // namespace sgm
