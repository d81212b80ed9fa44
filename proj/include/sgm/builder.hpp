#pragma once

// Graph construction from replay buffers: the online aggregation pass that
// merges redundant states as they stream in, plus baseline construction
// policies (dense, uniform subsample, one-way variants) for comparison.

#include <chrono>
#include <unordered_map>
#include <utility>

#include "sgm/maze.hpp"
#include "sgm/memory.hpp"

namespace sgm {

struct BuildReport {
  std::size_t input_states = 0;
  std::size_t vertices_kept = 0;
  std::size_t edges_before_knn = 0;
  std::size_t edges_after_knn = 0;
  // kept vertex id -> number of states merged into it, in id order
  std::vector<std::pair<std::uint32_t, std::size_t>> merge_histogram;
  double wall_clock = 0.0;

  std::size_t merged_total() const {
    std::size_t n = 0;
    for (const auto& [id, c] : merge_histogram) n += c;
    return n;
  }
};

inline nlohmann::ordered_json report_to_json(const BuildReport& r) {
  nlohmann::ordered_json j;
  j["input_states"] = r.input_states;
  j["vertices_kept"] = r.vertices_kept;
  j["edges_before_knn"] = r.edges_before_knn;
  j["edges_after_knn"] = r.edges_after_knn;
  j["merged"] = r.merged_total();
  j["merge_histogram"] = nlohmann::ordered_json::array();
  for (const auto& [id, c] : r.merge_histogram) j["merge_histogram"].push_back({id, c});
  j["wall_clock"] = r.wall_clock;
  return j;
}

inline void validate_build_params(const BuildParams& p) {
  if (p.tau_a < 0 || p.tau_p < 0 || p.max_dist < 0)
    throw error("build: thresholds must be non-negative");
  if (p.knn < 1) throw error("build: knn must be >= 1");
}

namespace detail {

// Capped sorted insertion implementing the same (weight, dst) order as
// knn_filter, so streaming construction matches add-everything-then-filter.
inline void insert_capped(std::vector<Edge>& es, Edge e, int k) {
  auto by_rank = [](const Edge& a, const Edge& b) {
    return a.w != b.w ? a.w < b.w : a.dst < b.dst;
  };
  es.insert(std::upper_bound(es.begin(), es.end(), e, by_rank), e);
  if (es.size() > std::size_t(k)) es.pop_back();
}

inline std::uint32_t add_vertex_streamed(GraphMemory& g, const DistanceFunction& d,
                                         const Observation& s, const BuildParams& p,
                                         std::size_t& edges_considered) {
  const auto id = std::uint32_t(g.obs.size());
  g.obs.push_back(s);
  g.out.emplace_back();
  for (std::uint32_t v = 0; v < id; ++v) {
    const double w_out = d(s, g.obs[v]);
    if (w_out <= p.max_dist) {
      ++edges_considered;
      insert_capped(g.out[id], {v, w_out}, p.knn);
    }
    const double w_in = d(g.obs[v], s);
    if (w_in <= p.max_dist) {
      ++edges_considered;
      insert_capped(g.out[v], {id, w_in}, p.knn);
    }
  }
  return id;
}

struct MergeCounter {
  std::vector<std::size_t> per_vertex;

  void bump(std::uint32_t id) {
    if (per_vertex.size() <= id) per_vertex.resize(id + 1, 0);
    ++per_vertex[id];
  }
  std::vector<std::pair<std::uint32_t, std::size_t>> histogram() const {
    std::vector<std::pair<std::uint32_t, std::size_t>> h;
    for (std::uint32_t v = 0; v < per_vertex.size(); ++v)
      if (per_vertex[v] > 0) h.push_back({v, per_vertex[v]});
    return h;
  }
};

// Single pass in episode-then-time order; each state is merged (with a
// witness) or kept as a vertex with its streamed edge set.
inline std::pair<GraphMemory, BuildReport> aggregate_pass(const ReplayBuffer& buf,
                                                          const DistanceFunction& d,
                                                          const Embedding& phi,
                                                          const BuildParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  GraphMemory g;
  g.params = p;
  BuildReport r;
  MergeCounter merges;
  for (const auto& ep : buf.episodes) {
    for (const Observation& s : ep) {
      ++r.input_states;
      const auto hit = find_merge_target(g, d, phi, s);
      if (hit) {
        g.witnesses.push_back({s, hit->id, hit->score.c_in, hit->score.c_out,
                               hit->perceptual, std::uint32_t(g.vertex_count())});
        merges.bump(hit->id);
      } else {
        add_vertex_streamed(g, d, s, p, r.edges_before_knn);
      }
    }
  }
  r.vertices_kept = g.vertex_count();
  r.edges_after_knn = g.edge_count();
  r.merge_histogram = merges.histogram();
  r.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(g), std::move(r)};
}

}  // namespace detail

inline std::pair<GraphMemory, BuildReport> build_sparse_graph(const ReplayBuffer& buf,
                                                              const DistanceFunction& d,
                                                              const Embedding& phi,
                                                              const BuildParams& p) {
  validate_build_params(p);
  if (buf.total_states() == 0) throw error("build: empty buffer");
  if (p.aggregation == Aggregation::uniform)
    throw error("build: uniform subsampling is a baseline strategy; use build_baseline");
  return detail::aggregate_pass(buf, d, phi, p);
}

// Baseline constructions.  `dense` keeps every distinct state; `uniform:<n>`
// keeps a seeded without-replacement subsample; the one-way and
// perceptual-only variants run the aggregation pass under that policy.
// Edge creation and the k-nearest filter are identical across all of them.
inline std::pair<GraphMemory, BuildReport> build_baseline(const ReplayBuffer& buf,
                                                          const DistanceFunction& d,
                                                          const Embedding& phi, BuildParams p,
                                                          const std::string& strategy) {
  validate_build_params(p);
  const std::size_t total = buf.total_states();
  if (total == 0) throw error("build: empty buffer");

  if (strategy == "dense") {
    const auto t0 = std::chrono::steady_clock::now();
    p.aggregation = Aggregation::none;
    GraphMemory g;
    g.params = p;
    BuildReport r;
    detail::MergeCounter dups;
    struct Key {
      std::uint64_t x, y;
      bool operator==(const Key&) const = default;
    };
    struct KeyHash {
      std::size_t operator()(const Key& k) const { return mix64(k.x ^ mix64(k.y)); }
    };
    std::unordered_map<Key, std::uint32_t, KeyHash> seen;
    for (const auto& ep : buf.episodes) {
      for (const Observation& s : ep) {
        ++r.input_states;
        const Key key{bits_of(s.x), bits_of(s.y)};
        const auto it = seen.find(key);
        if (it != seen.end()) {
          dups.bump(it->second);
          continue;
        }
        seen.emplace(key, detail::add_vertex_streamed(g, d, s, p, r.edges_before_knn));
      }
    }
    r.vertices_kept = g.vertex_count();
    r.edges_after_knn = g.edge_count();
    r.merge_histogram = dups.histogram();
    r.wall_clock =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(g), std::move(r)};
  }

  if (strategy.rfind("uniform:", 0) == 0) {
    const auto t0 = std::chrono::steady_clock::now();
    p = params_with_aggregation(p, strategy);
    if (p.uniform_n < 1) throw error("build: uniform subsample needs n >= 1");
    if (p.uniform_n > total)
      throw error("build: uniform subsample larger than buffer (" +
                  std::to_string(p.uniform_n) + " > " + std::to_string(total) + ")");
    // Seeded partial Fisher-Yates, then restored to temporal order.
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    Rng rng(substream(buf.seed, "uniform-subsample"));
    for (std::size_t i = 0; i < p.uniform_n; ++i)
      std::swap(idx[i], idx[i + rng.below(total - i)]);
    idx.resize(p.uniform_n);
    std::sort(idx.begin(), idx.end());
    GraphMemory g;
    g.params = p;
    BuildReport r;
    r.input_states = total;
    for (const std::size_t i : idx)
      detail::add_vertex_streamed(g, d, buf.flat(i), p, r.edges_before_knn);
    r.vertices_kept = g.vertex_count();
    r.edges_after_knn = g.edge_count();
    r.wall_clock =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(g), std::move(r)};
  }

  if (strategy == "perceptual-only" || strategy == "incoming-only" ||
      strategy == "outgoing-only") {
    p = params_with_aggregation(p, strategy);
    return detail::aggregate_pass(buf, d, phi, p);
  }
  throw error("build: unknown baseline strategy '" + strategy + "'");
}

// Reference graph over free-cell centers: 4-neighbor edges plus diagonals
// whose 2x2 block is fully free, weighted by exact center-to-center distance.
// Every edge is feasible by construction, which makes this the "faithful
// graph" used by sanity ceilings and histogram controls.
inline GraphMemory lattice_graph(const Maze& m) {
  GraphMemory g;
  g.params.max_dist = 2.0 * m.cell_size / m.max_step;
  g.params.knn = 8;
  g.params.aggregation = Aggregation::none;
  std::vector<std::int32_t> id_of(std::size_t(m.width) * m.height, -1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.is_free_cell(x, y)) {
        id_of[std::size_t(y) * m.width + x] = std::int32_t(g.obs.size());
        g.obs.push_back(m.cell_center(x, y));
        g.out.emplace_back();
      }
  auto vid = [&](int x, int y) -> std::int32_t {
    if (x < 0 || y < 0 || x >= m.width || y >= m.height) return -1;
    return id_of[std::size_t(y) * m.width + x];
  };
  const double unit = m.cell_size / m.max_step;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const std::int32_t a = vid(x, y);
      if (a < 0) continue;
      const int dx4[] = {1, 0, -1, 0}, dy4[] = {0, 1, 0, -1};
      for (int k = 0; k < 4; ++k) {
        const std::int32_t b = vid(x + dx4[k], y + dy4[k]);
        if (b >= 0) g.out[a].push_back({std::uint32_t(b), unit});
      }
      const int dxd[] = {1, 1, -1, -1}, dyd[] = {1, -1, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const std::int32_t b = vid(x + dxd[k], y + dyd[k]);
        if (b >= 0 && vid(x + dxd[k], y) >= 0 && vid(x, y + dyd[k]) >= 0)
          g.out[a].push_back({std::uint32_t(b), unit * std::sqrt(2.0)});
      }
    }
  return g;
}

// Strategy dispatcher used by the CLI and the ablation harness.
inline std::pair<GraphMemory, BuildReport> build_with_strategy(const ReplayBuffer& buf,
                                                               const DistanceFunction& d,
                                                               const Embedding& phi,
                                                               BuildParams p,
                                                               const std::string& strategy) {
  if (strategy == "twc" || strategy == "two-way" || strategy == "twc+perceptual")
    return build_sparse_graph(buf, d, phi, params_with_aggregation(p, "twc+perceptual"));
  if (strategy == "twc-only" || strategy == "none")
    return build_sparse_graph(buf, d, phi, params_with_aggregation(p, strategy));
  return build_baseline(buf, d, phi, p, strategy);
}

}  // namespace sgm
