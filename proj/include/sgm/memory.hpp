#pragma once

// Sparse graph memory: retained observations as vertices of a directed
// weighted graph, plus the two-way consistency (TWC) scores and merge
// policies that decide which incoming states collapse onto existing vertices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgm/core.hpp"
#include "sgm/distance.hpp"

namespace sgm {

enum class Aggregation {
  twc_perceptual,   // perceptual gate, then both TWC directions
  twc_only,         // both TWC directions, no gate
  perceptual_only,  // gate only
  incoming_only,    // gate, then incoming consistency
  outgoing_only,    // gate, then outgoing consistency
  uniform,          // no merging; builder subsamples instead
  none,             // no merging at all
};

inline std::string to_string(Aggregation a, std::size_t uniform_n = 0) {
  switch (a) {
    case Aggregation::twc_perceptual: return "twc+perceptual";
    case Aggregation::twc_only: return "twc-only";
    case Aggregation::perceptual_only: return "perceptual-only";
    case Aggregation::incoming_only: return "incoming-only";
    case Aggregation::outgoing_only: return "outgoing-only";
    case Aggregation::uniform: return "uniform:" + std::to_string(uniform_n);
    case Aggregation::none: return "none";
  }
  throw error("bad aggregation enum");
}

struct BuildParams {
  double tau_a = 5.0;     // aggregation threshold on TWC scores
  double tau_p = 0.05;    // perceptual prefilter threshold (feature units)
  double max_dist = 10.0; // edge creation range, step units
  int knn = 5;            // outgoing edges kept per vertex
  Aggregation aggregation = Aggregation::twc_perceptual;
  std::size_t uniform_n = 0;  // vertex budget for Aggregation::uniform

  std::string aggregation_string() const { return to_string(aggregation, uniform_n); }
};

inline BuildParams params_with_aggregation(BuildParams p, const std::string& s) {
  if (s == "twc+perceptual") p.aggregation = Aggregation::twc_perceptual;
  else if (s == "twc-only") p.aggregation = Aggregation::twc_only;
  else if (s == "perceptual-only") p.aggregation = Aggregation::perceptual_only;
  else if (s == "incoming-only") p.aggregation = Aggregation::incoming_only;
  else if (s == "outgoing-only") p.aggregation = Aggregation::outgoing_only;
  else if (s == "none") p.aggregation = Aggregation::none;
  else if (s.rfind("uniform:", 0) == 0) {
    p.aggregation = Aggregation::uniform;
    try {
      p.uniform_n = std::stoull(s.substr(8));
    } catch (const std::invalid_argument&) {
      throw error("bad uniform vertex budget in '" + s + "'");
    }
  } else {
    throw error("unknown aggregation '" + s + "'");
  }
  return p;
}

struct TwcScore {
  double c_in = 0.0;
  double c_out = 0.0;

  double worst() const { return std::max(c_in, c_out); }
};

// One rejected (merged) state: which vertex absorbed it and the scores that
// justified the merge.  Components not evaluated under the active policy are
// NaN.  vertex_count is the graph size at rejection time, so the decision can
// be re-verified against that vertex prefix later.
struct Witness {
  Observation obs;
  std::uint32_t kept_id = 0;
  double c_in = std::numeric_limits<double>::quiet_NaN();
  double c_out = std::numeric_limits<double>::quiet_NaN();
  double perceptual = std::numeric_limits<double>::quiet_NaN();
  std::uint32_t vertex_count = 0;
};

struct Edge {
  std::uint32_t dst;
  double w;
};

struct GraphMemory {
  std::vector<Observation> obs;          // vertex id -> observation
  std::vector<std::vector<Edge>> out;    // vertex id -> outgoing edges
  std::vector<Witness> witnesses;
  BuildParams params;

  std::size_t vertex_count() const { return obs.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& es : out) n += es.size();
    return n;
  }
  const std::vector<Edge>& edges_from(std::uint32_t v) const {
    if (v >= out.size()) throw error("graph: unknown vertex " + std::to_string(v));
    return out[v];
  }
  bool has_edge(std::uint32_t src, std::uint32_t dst) const {
    for (const Edge& e : edges_from(src))
      if (e.dst == dst) return true;
    return false;
  }
  double edge_weight(std::uint32_t src, std::uint32_t dst) const {
    for (const Edge& e : edges_from(src))
      if (e.dst == dst) return e.w;
    throw error("graph: no edge " + std::to_string(src) + "->" + std::to_string(dst));
  }
};

// ---- consistency scores ----------------------------------------------------

// Outgoing consistency: how differently s1 and s2 see every reference state
// as a goal.  References are the current vertices plus both arguments.
inline double c_out(const GraphMemory& g, const DistanceFunction& d,
                    const Observation& s1, const Observation& s2) {
  double worst = std::abs(d(s1, s1) - d(s2, s1));
  worst = std::max(worst, std::abs(d(s1, s2) - d(s2, s2)));
  for (const Observation& w : g.obs)
    worst = std::max(worst, std::abs(d(s1, w) - d(s2, w)));
  return worst;
}

// Incoming consistency: how differently every reference state sees s1 vs s2.
inline double c_in(const GraphMemory& g, const DistanceFunction& d,
                   const Observation& s1, const Observation& s2) {
  double worst = std::abs(d(s1, s1) - d(s1, s2));
  worst = std::max(worst, std::abs(d(s2, s1) - d(s2, s2)));
  for (const Observation& w : g.obs)
    worst = std::max(worst, std::abs(d(w, s1) - d(w, s2)));
  return worst;
}

inline TwcScore twc_score(const GraphMemory& g, const DistanceFunction& d,
                          const Observation& s1, const Observation& s2) {
  return {c_in(g, d, s1, s2), c_out(g, d, s1, s2)};
}

namespace detail {

// Thresholded evaluation with early exit; returns the exact score only when
// every requested component stays within tau.  Arguments are probed first:
// they are usually the most discriminative references.
inline std::optional<TwcScore> twc_within(const GraphMemory& g, const DistanceFunction& d,
                                          const Observation& s1, const Observation& s2,
                                          double tau, bool need_in, bool need_out) {
  TwcScore sc{0.0, 0.0};
  auto probe = [&](const Observation& w) {
    if (need_out) {
      sc.c_out = std::max(sc.c_out, std::abs(d(s1, w) - d(s2, w)));
      if (sc.c_out > tau) return false;
    }
    if (need_in) {
      sc.c_in = std::max(sc.c_in, std::abs(d(w, s1) - d(w, s2)));
      if (sc.c_in > tau) return false;
    }
    return true;
  };
  if (!probe(s1) || !probe(s2)) return std::nullopt;
  for (const Observation& w : g.obs)
    if (!probe(w)) return std::nullopt;
  return sc;
}

}  // namespace detail

// ---- merging ---------------------------------------------------------------

struct MergeDecision {
  std::uint32_t id = 0;  // absorbing vertex
  TwcScore score;        // NaN components if not evaluated under the policy
  double perceptual = std::numeric_limits<double>::quiet_NaN();
};

// First vertex (insertion order) the candidate may merge into under the
// graph's aggregation policy.  The perceptual check runs first and
// short-circuits the TWC evaluation.
inline std::optional<MergeDecision> find_merge_target(const GraphMemory& g,
                                                      const DistanceFunction& d,
                                                      const Embedding& phi,
                                                      const Observation& cand) {
  const Aggregation pol = g.params.aggregation;
  if (pol == Aggregation::uniform || pol == Aggregation::none) return std::nullopt;
  const bool use_gate = pol != Aggregation::twc_only;
  const bool need_in = pol == Aggregation::twc_perceptual ||
                       pol == Aggregation::twc_only || pol == Aggregation::incoming_only;
  const bool need_out = pol == Aggregation::twc_perceptual ||
                        pol == Aggregation::twc_only || pol == Aggregation::outgoing_only;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::uint32_t v = 0; v < g.obs.size(); ++v) {
    double pd = nan;
    if (use_gate) {
      pd = perceptual_distance(phi, g.obs[v], cand);
      if (pd > g.params.tau_p) continue;
    }
    if (pol == Aggregation::perceptual_only) return MergeDecision{v, {nan, nan}, pd};
    const auto sc =
        detail::twc_within(g, d, g.obs[v], cand, g.params.tau_a, need_in, need_out);
    if (!sc) continue;
    TwcScore rec{need_in ? sc->c_in : nan, need_out ? sc->c_out : nan};
    return MergeDecision{v, rec, pd};
  }
  return std::nullopt;
}

// ---- structure edits -------------------------------------------------------

// Adds a vertex for s and bidirectional edges to every vertex within
// max_dist; weights are the (direction-respecting) distances.
inline std::uint32_t add_node_with_edges(GraphMemory& g, const DistanceFunction& d,
                                         const Observation& s, double max_dist) {
  const auto id = std::uint32_t(g.obs.size());
  g.obs.push_back(s);
  g.out.emplace_back();
  for (std::uint32_t v = 0; v < id; ++v) {
    const double w_out = d(s, g.obs[v]);
    if (w_out <= max_dist) g.out[id].push_back({v, w_out});
    const double w_in = d(g.obs[v], s);
    if (w_in <= max_dist) g.out[v].push_back({id, w_in});
  }
  return id;
}

// Keeps each vertex's k lowest-weight outgoing edges (ties by destination id
// ascending); the survivors are left sorted the same way.
inline void knn_filter(GraphMemory& g, int k) {
  if (k < 1) throw error("knn_filter: k must be >= 1");
  for (auto& es : g.out) {
    std::sort(es.begin(), es.end(), [](const Edge& a, const Edge& b) {
      return a.w != b.w ? a.w < b.w : a.dst < b.dst;
    });
    if (es.size() > std::size_t(k)) es.resize(std::size_t(k));
  }
}

inline void remove_edge(GraphMemory& g, std::uint32_t src, std::uint32_t dst) {
  auto& es = const_cast<std::vector<Edge>&>(g.edges_from(src));
  for (auto it = es.begin(); it != es.end(); ++it) {
    if (it->dst == dst) {
      es.erase(it);
      return;
    }
  }
  throw error("remove_edge: no edge " + std::to_string(src) + "->" + std::to_string(dst));
}

// Structural invariants; used by deserialization and property tests.
inline void validate_graph(const GraphMemory& g) {
  if (g.out.size() != g.obs.size()) throw error("graph: adjacency size mismatch");
  for (std::uint32_t v = 0; v < g.out.size(); ++v) {
    for (const Edge& e : g.out[v]) {
      if (e.dst >= g.obs.size()) throw error("graph: dangling edge endpoint");
      if (e.dst == v) throw error("graph: self loop");
      if (!(e.w >= 0.0)) throw error("graph: negative or NaN edge weight");
    }
    for (std::size_t i = 0; i < g.out[v].size(); ++i)
      for (std::size_t j = i + 1; j < g.out[v].size(); ++j)
        if (g.out[v][i].dst == g.out[v][j].dst) throw error("graph: duplicate edge");
  }
}

// ---- serialization ---------------------------------------------------------

inline nlohmann::ordered_json params_to_json(const BuildParams& p) {
  nlohmann::ordered_json j;
  j["tau_a"] = p.tau_a;
  j["tau_p"] = p.tau_p;
  j["max_dist"] = p.max_dist;
  j["knn"] = p.knn;
  j["aggregation"] = p.aggregation_string();
  return j;
}

inline BuildParams params_from_json(const nlohmann::json& j) {
  BuildParams p;
  p.tau_a = j.value("tau_a", p.tau_a);
  p.tau_p = j.value("tau_p", p.tau_p);
  p.max_dist = j.value("max_dist", p.max_dist);
  p.knn = j.value("knn", p.knn);
  if (j.contains("aggregation"))
    p = params_with_aggregation(p, j["aggregation"].get<std::string>());
  return p;
}

inline nlohmann::ordered_json serialize(const GraphMemory& g) {
  nlohmann::ordered_json j;
  j["params"] = params_to_json(g.params);
  j["nodes"] = nlohmann::ordered_json::array();
  for (std::uint32_t v = 0; v < g.obs.size(); ++v)
    j["nodes"].push_back({{"id", v}, {"obs", {g.obs[v].x, g.obs[v].y}}});
  j["edges"] = nlohmann::ordered_json::array();
  for (std::uint32_t v = 0; v < g.out.size(); ++v)
    for (const Edge& e : g.out[v])
      j["edges"].push_back({{"src", v}, {"dst", e.dst}, {"w", e.w}});
  j["witnesses"] = nlohmann::ordered_json::array();
  auto num_or_null = [](double x) {
    return std::isnan(x) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(x);
  };
  for (const Witness& w : g.witnesses)
    j["witnesses"].push_back({{"obs", {w.obs.x, w.obs.y}},
                              {"kept", w.kept_id},
                              {"c_in", num_or_null(w.c_in)},
                              {"c_out", num_or_null(w.c_out)},
                              {"perceptual", num_or_null(w.perceptual)},
                              {"vertices", w.vertex_count}});
  return j;
}

inline GraphMemory deserialize(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges"))
    throw error("graph: malformed JSON (missing nodes/edges)");
  GraphMemory g;
  if (j.contains("params")) g.params = params_from_json(j["params"]);
  const auto& nodes = j["nodes"];
  g.obs.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!n.contains("id") || n["id"].get<std::size_t>() != i)
      throw error("graph: node ids must be dense and in insertion order");
    const auto& o = n["obs"];
    if (!o.is_array() || o.size() != 2) throw error("graph: node obs must be [x, y]");
    g.obs.push_back({o[0].get<double>(), o[1].get<double>()});
  }
  g.out.assign(g.obs.size(), {});
  for (const auto& e : j["edges"]) {
    const auto src = e["src"].get<std::uint32_t>();
    const auto dst = e["dst"].get<std::uint32_t>();
    if (src >= g.obs.size()) throw error("graph: dangling edge endpoint");
    g.out[src].push_back({dst, e["w"].get<double>()});
  }
  if (j.contains("witnesses")) {
    auto num = [](const nlohmann::json& x) {
      return x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>();
    };
    for (const auto& w : j["witnesses"]) {
      Witness wit;
      wit.obs = {w["obs"][0].get<double>(), w["obs"][1].get<double>()};
      wit.kept_id = w["kept"].get<std::uint32_t>();
      wit.c_in = num(w["c_in"]);
      wit.c_out = num(w["c_out"]);
      wit.perceptual = num(w["perceptual"]);
      wit.vertex_count = w["vertices"].get<std::uint32_t>();
      g.witnesses.push_back(wit);
    }
  }
  validate_graph(g);
  return g;
}

}  // namespace sgm
