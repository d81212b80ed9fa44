#pragma once
// Evaluation harness over graph memories: difficulty-stratified success
// tables, cleanup curves, vertex-selection ablations, edge-length histograms,
// path-length statistics, and per-action timing comparison.  Everything is
// deterministic given its seeds except the wall-clock timing numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgm/agent.hpp"
#include "sgm/builder.hpp"

namespace sgm {

// ---- difficulty stratification ---------------------------------------------

// Two-sweep geodesic diameter estimate: walk to the farthest subcell from an
// arbitrary free start, then measure the farthest distance from there.
inline double maze_diameter(const Maze& m) {
  int c0 = -1;
  for (int i = 0; i < m.sub_w() * m.sub_h() && c0 < 0; ++i)
    if (m.sub_is_free(i)) c0 = i;
  if (c0 < 0) throw error("maze_diameter: no free subcells");
  const auto farthest = [&m](int c) {
    const std::vector<double> f = m.distance_field(c);
    int best = c;
    double bd = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (std::isfinite(f[i]) && f[i] > bd) bd = f[i], best = int(i);
    return std::pair<int, double>{best, bd};
  };
  return farthest(farthest(c0).first).second;
}

struct EvalSpec {
  std::size_t episodes = 60;
  int bins = 3;                    // difficulty tiers over [0, diameter]
  int attempts_per_episode = 500;  // rejection cap when sampling one tier
};

struct SuccessRow {
  std::string strategy;    // empty when a single graph is being evaluated
  long cleanup_steps = 0;
  int bin = -1;            // tier index; -1 pools every difficulty
  double lo = 0.0, hi = 0.0;
  double success = 0.0, sem = 0.0;
  std::size_t episodes = 0;
  std::size_t seeds = 1;
  std::size_t deficit = 0;  // episodes dropped because no pair fit the tier
};

struct SuccessTable {
  std::vector<SuccessRow> rows;
};

// Raw material behind a success table: the episodes with their tier labels.
struct StratifiedEval {
  std::vector<EpisodeResult> results;
  std::vector<int> bin_of;            // parallel to results
  std::vector<double> edges;          // bins+1 ascending tier boundaries
  std::vector<std::size_t> deficit;   // per tier
};

inline StratifiedEval run_stratified_eval(const Maze& m, GraphMemory& g,
                                          const DistanceFunction& d, const Controller& ctrl,
                                          const ExecParams& xp, const EvalSpec& spec,
                                          std::uint64_t rng_seed) {
  if (spec.episodes == 0) throw error("eval: episodes must be positive");
  if (spec.bins < 1) throw error("eval: bins must be positive");
  StratifiedEval ev;
  const double diameter = maze_diameter(m);
  ev.edges.resize(std::size_t(spec.bins) + 1);
  for (int b = 0; b <= spec.bins; ++b)
    ev.edges[std::size_t(b)] = diameter * double(b) / double(spec.bins);
  ev.edges.back() += 1e-9;  // keep diameter-length pairs inside the top tier
  ev.deficit.assign(std::size_t(spec.bins), 0);

  Rng rng(substream(rng_seed, "eval"));
  for (std::size_t e = 0; e < spec.episodes; ++e) {
    const int b = int(e % std::size_t(spec.bins));
    const double lo = ev.edges[std::size_t(b)], hi = ev.edges[std::size_t(b) + 1];
    bool found = false;
    Observation start{}, goal{};
    for (int t = 0; t < spec.attempts_per_episode && !found; ++t) {
      start = sample_free_point(m, rng);
      goal = sample_free_point(m, rng);
      const double geo = geodesic(m, start, goal);
      found = geo >= lo && geo < hi;
    }
    if (!found) {
      ++ev.deficit[std::size_t(b)];
      continue;
    }
    ev.results.push_back(
        run_episode(m, g, d, ctrl, start, goal, xp, /*allow_edge_removal=*/false));
    ev.bin_of.push_back(b);
  }
  return ev;
}

inline SuccessTable fold_success(const StratifiedEval& ev, const std::string& strategy,
                                 long cleanup_steps) {
  const int bins = int(ev.deficit.size());
  SuccessTable table;
  for (int b = -1; b < bins; ++b) {
    std::size_t n = 0, wins = 0;
    for (std::size_t i = 0; i < ev.results.size(); ++i) {
      if (b >= 0 && ev.bin_of[i] != b) continue;
      ++n;
      wins += ev.results[i].success;
    }
    SuccessRow row;
    row.strategy = strategy;
    row.cleanup_steps = cleanup_steps;
    row.bin = b;
    row.lo = b >= 0 ? ev.edges[std::size_t(b)] : ev.edges.front();
    row.hi = b >= 0 ? ev.edges[std::size_t(b) + 1] : ev.edges.back();
    row.episodes = n;
    row.deficit = b >= 0 ? ev.deficit[std::size_t(b)]
                         : std::accumulate(ev.deficit.begin(), ev.deficit.end(), std::size_t(0));
    const double p = n ? double(wins) / double(n) : 0.0;
    row.success = p;
    row.sem = n ? std::sqrt(p * (1.0 - p) / double(n)) : 0.0;
    table.rows.push_back(std::move(row));
  }
  // Pooled row first, tiers after, so the CSV leads with the headline number.
  return table;
}

inline SuccessTable eval_success(const Maze& m, GraphMemory& g, const DistanceFunction& d,
                                 const Controller& ctrl, const ExecParams& xp,
                                 std::size_t episodes, int bins, std::uint64_t rng_seed) {
  EvalSpec spec;
  spec.episodes = episodes;
  spec.bins = bins;
  return fold_success(run_stratified_eval(m, g, d, ctrl, xp, spec, rng_seed), "", 0);
}

// ---- cleanup curves --------------------------------------------------------

struct CurvePoint {
  long cleanup_steps = 0;
  double success = 0.0, sem = 0.0;
  std::size_t episodes = 0;
};

// Interleaves cleanup up to each checkpoint with frozen-graph evaluation; one
// graph evolves across the whole curve, and every checkpoint re-runs the same
// evaluation pairs so points are directly comparable.
inline std::vector<CurvePoint> cleanup_curve(const Maze& m, GraphMemory& g,
                                             const DistanceFunction& d, const Controller& ctrl,
                                             const ExecParams& xp,
                                             const std::vector<long>& checkpoints,
                                             const EvalSpec& spec, std::uint64_t rng_seed) {
  long done = 0;
  for (const long cp : checkpoints)
    if (cp < done)
      throw error("cleanup_curve: checkpoints must be ascending and non-negative");
    else
      done = cp;

  std::vector<CurvePoint> curve;
  const std::uint64_t eval_seed = substream(rng_seed, "eval");
  done = 0;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const long chunk = checkpoints[i] - done;
    if (chunk > 0)
      cleanup(m, g, d, ctrl, xp, chunk, substream(rng_seed, "cleanup-" + std::to_string(i)));
    done = checkpoints[i];
    const StratifiedEval ev = run_stratified_eval(m, g, d, ctrl, xp, spec, eval_seed);
    const SuccessRow& all = fold_success(ev, "", done).rows.front();
    curve.push_back({done, all.success, all.sem, all.episodes});
  }
  return curve;
}

// ---- vertex-selection ablation ---------------------------------------------

// Builds one graph per selection strategy from the same buffer, then measures
// success with and without a cleanup phase, averaged across seeds.  The
// literal strategy "uniform" is matched to the two-way vertex count.
inline SuccessTable ablation_table(const Maze& m, const ReplayBuffer& buffer,
                                   const DistanceFunction& d, const Embedding& phi,
                                   const BuildParams& p, const Controller& ctrl,
                                   const ExecParams& xp,
                                   const std::vector<std::string>& strategies,
                                   long cleanup_budget, const EvalSpec& spec,
                                   const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw error("ablation_table: need at least one seed");
  if (cleanup_budget < 0) throw error("ablation_table: cleanup budget must be non-negative");

  SuccessTable table;
  for (const std::string& requested : strategies) {
    std::string strategy = requested;
    if (strategy == "uniform") {
      const auto [twc, rep] = build_with_strategy(buffer, d, phi, p, "two-way");
      strategy = "uniform:" + std::to_string(twc.vertex_count());
    }
    const auto [base, rep] = build_with_strategy(buffer, d, phi, p, strategy);

    for (const long budget : {long(0), cleanup_budget}) {
      std::vector<SuccessTable> per_seed;
      for (const std::uint64_t seed : seeds) {
        GraphMemory g = base;
        if (budget > 0) cleanup(m, g, d, ctrl, xp, budget, seed);
        const StratifiedEval ev = run_stratified_eval(m, g, d, ctrl, xp, spec, seed);
        per_seed.push_back(fold_success(ev, strategy, budget));
      }
      // Average matching rows across seeds.
      for (std::size_t r = 0; r < per_seed.front().rows.size(); ++r) {
        SuccessRow row = per_seed.front().rows[r];
        row.seeds = seeds.size();
        row.episodes = 0;
        row.deficit = 0;
        std::vector<double> rates;
        for (const SuccessTable& t : per_seed) {
          const SuccessRow& sr = t.rows[r];
          row.episodes += sr.episodes;
          row.deficit += sr.deficit;
          if (sr.episodes > 0) rates.push_back(sr.success);
        }
        double mean = 0.0;
        for (const double v : rates) mean += v;
        mean = rates.empty() ? 0.0 : mean / double(rates.size());
        double var = 0.0;
        for (const double v : rates) var += (v - mean) * (v - mean);
        row.success = mean;
        row.sem = rates.size() > 1
                      ? std::sqrt(var / double(rates.size() - 1) / double(rates.size()))
                      : 0.0;
        table.rows.push_back(std::move(row));
      }
      if (cleanup_budget == 0) break;  // "with" and "without" coincide
    }
  }
  return table;
}

// ---- edge-length histogram -------------------------------------------------

struct EdgeHistogram {
  double bin_width = 1.0;
  double long_threshold = 0.0;        // geodesic above which an edge is "long"
  std::vector<std::size_t> counts;    // counts[i] covers [i*w, (i+1)*w)
  std::size_t total_edges = 0;
  std::size_t long_edges = 0;

  double long_edge_fraction() const {
    return total_edges ? double(long_edges) / double(total_edges) : 0.0;
  }
};

// Bins every edge by the true geodesic between its endpoint observations.
// Edges priced short by a blind distance but geodesically long show up in the
// tail; `long_threshold` draws the line (callers typically use twice the
// graph's edge range so only clearly infeasible edges count).
inline EdgeHistogram edge_length_histogram(const Maze& m, const GraphMemory& g,
                                           double long_threshold, double bin_width = 1.0) {
  if (bin_width <= 0) throw error("edge_length_histogram: bin width must be positive");
  if (long_threshold < 0) throw error("edge_length_histogram: threshold must be non-negative");
  EdgeHistogram h;
  h.bin_width = bin_width;
  h.long_threshold = long_threshold;
  const DistanceFunction geo = grid_value_distance(m);  // memoizes per goal subcell
  for (std::uint32_t u = 0; u < g.vertex_count(); ++u)
    for (const Edge& e : g.out[u]) {
      const double len = geo(g.obs[u], g.obs[e.dst]);
      const std::size_t idx = std::size_t(len / bin_width);
      if (h.counts.size() <= idx) h.counts.resize(idx + 1, 0);
      ++h.counts[idx];
      ++h.total_edges;
      if (len > long_threshold) ++h.long_edges;
    }
  return h;
}

// ---- path-length statistics ------------------------------------------------

struct PathStats {
  std::size_t successes = 0;
  double mean_steps = std::numeric_limits<double>::quiet_NaN();
  double median_steps = std::numeric_limits<double>::quiet_NaN();
};

inline PathStats path_length_stats(const std::vector<EpisodeResult>& results) {
  std::vector<double> steps;
  for (const auto& r : results)
    if (r.success) steps.push_back(double(r.env_steps));
  PathStats st;
  st.successes = steps.size();
  if (steps.empty()) return st;
  std::sort(steps.begin(), steps.end());
  double sum = 0.0;
  for (const double v : steps) sum += v;
  st.mean_steps = sum / double(steps.size());
  const std::size_t mid = steps.size() / 2;
  st.median_steps =
      steps.size() % 2 ? steps[mid] : 0.5 * (steps[mid - 1] + steps[mid]);
  return st;
}

// ---- per-action timing -----------------------------------------------------

struct TimingRow {
  std::string graph;
  double mean_s = 0.0, sd_s = 0.0;
  std::size_t n = 0;
};

struct TimingReport {
  TimingRow dense, sparse;
  double ratio() const {
    return dense.mean_s > 0 ? sparse.mean_s / dense.mean_s
                            : std::numeric_limits<double>::quiet_NaN();
  }
};

// Wall-clock seconds per decision (waypoint checks, replanning, controller
// query) over the same start/goal pairs on both graphs.  Graph construction is
// excluded; environment stepping is excluded by the episode instrumentation.
inline TimingReport timing(const Maze& m, GraphMemory& dense_g, GraphMemory& sparse_g,
                           const DistanceFunction& d, const ExecParams& xp,
                           std::size_t actions, std::uint64_t rng_seed) {
  if (actions == 0) throw error("timing: actions must be positive");
  std::vector<std::pair<Observation, Observation>> pairs;
  Rng rng(substream(rng_seed, "timing-pairs"));
  while (pairs.size() < actions) {  // every episode contributes >= 1 action
    const Observation a = sample_free_point(m, rng);
    const Observation b = sample_free_point(m, rng);
    if (euclid(a, b) > xp.goal_radius) pairs.emplace_back(a, b);
  }
  const Controller ctrl = greedy_controller(m.max_step);
  const auto measure = [&](GraphMemory& g, const std::string& label) {
    std::vector<double> secs;
    RunOptions opt;
    opt.action_seconds = &secs;
    for (std::size_t i = 0; i < pairs.size() && secs.size() < actions; ++i)
      run_episode(m, g, d, ctrl, pairs[i].first, pairs[i].second, xp,
                  /*allow_edge_removal=*/false, opt);
    if (secs.size() > actions) secs.resize(actions);
    TimingRow row;
    row.graph = label;
    row.n = secs.size();
    double sum = 0.0;
    for (const double v : secs) sum += v;
    row.mean_s = secs.empty() ? 0.0 : sum / double(secs.size());
    double var = 0.0;
    for (const double v : secs) var += (v - row.mean_s) * (v - row.mean_s);
    row.sd_s = secs.size() > 1 ? std::sqrt(var / double(secs.size() - 1)) : 0.0;
    return row;
  };
  TimingReport rep;
  rep.dense = measure(dense_g, "dense");
  rep.sparse = measure(sparse_g, "sparse");
  return rep;
}

// ---- serialization ---------------------------------------------------------

inline std::string success_table_to_csv(const SuccessTable& table) {
  std::ostringstream out;
  out << "strategy,cleanup_steps,bin,success,sem,episodes,seeds\n";
  out.precision(17);
  for (const SuccessRow& r : table.rows) {
    out << r.strategy << ',' << r.cleanup_steps << ',';
    if (r.bin < 0)
      out << "all";
    else
      out << r.bin;
    out << ',' << r.success << ',' << r.sem << ',' << r.episodes << ',' << r.seeds << '\n';
  }
  return out.str();
}

inline std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "cleanup_steps,success,sem\n";
  out.precision(17);
  for (const CurvePoint& p : curve)
    out << p.cleanup_steps << ',' << p.success << ',' << p.sem << '\n';
  return out.str();
}

inline std::string histogram_to_csv(const EdgeHistogram& h) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count\n";
  out.precision(17);
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out << double(i) * h.bin_width << ',' << double(i + 1) * h.bin_width << ',' << h.counts[i]
        << '\n';
  return out.str();
}

inline std::string timing_to_csv(const TimingReport& rep) {
  std::ostringstream out;
  out << "graph,mean_s,sd_s,n\n";
  out.precision(17);
  for (const TimingRow* r : {&rep.dense, &rep.sparse})
    out << r->graph << ',' << r->mean_s << ',' << r->sd_s << ',' << r->n << '\n';
  return out.str();
}

}  // namespace sgm
