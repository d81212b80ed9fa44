#pragma once

// Asymmetric-capable distance functions over observations, plus feature
// embeddings for the perceptual prefilter.  Distances are reported in step
// units: d(s, g) estimates how many max_step moves reach g from s.

#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "sgm/core.hpp"
#include "sgm/maze.hpp"

namespace sgm {

struct DistanceFunction {
  std::string name;
  double self_tolerance = 0.0;  // bound on d(s, s)
  std::function<double(const Observation&, const Observation&)> fn;

  double operator()(const Observation& a, const Observation& b) const {
    return fn(a, b);
  }
};

struct NoiseSpec {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

// ---- ground-truth oracle ---------------------------------------------------

// Shortest-path distance backed by per-goal sub-grid fields, memoized by the
// goal's (snapped) subcell.  Copies of the returned function share one cache;
// the mutex keeps concurrent readers safe.
inline DistanceFunction grid_value_distance(const Maze& maze) {
  struct Cache {
    Maze maze;
    std::mutex mu;
    std::unordered_map<int, std::vector<double>> fields;
  };
  auto cache = std::make_shared<Cache>();
  cache->maze = maze;
  DistanceFunction d;
  d.name = "oracle";
  d.self_tolerance = 0.0;
  d.fn = [cache](const Observation& a, const Observation& b) {
    const Maze& m = cache->maze;
    const int sa = m.snap_subcell(a), sb = m.snap_subcell(b);
    const double lower = euclid(a, b) / m.max_step;
    if (sa == sb) return lower;
    const std::vector<double>* field = nullptr;
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      auto it = cache->fields.find(sb);
      if (it == cache->fields.end())
        it = cache->fields.emplace(sb, m.distance_field(sb)).first;
      field = &it->second;
    }
    const double v = (*field)[std::size_t(sa)];
    if (!std::isfinite(v)) throw error("grid_value_distance: unreachable pair");
    return std::max(lower, v);
  };
  return d;
}

// Wall-blind straight-line estimate (deliberately wrong across walls).
inline DistanceFunction euclidean_step_distance(const Maze& maze) {
  const double ms = maze.max_step;
  return {"euclid", 0.0,
          [ms](const Observation& a, const Observation& b) { return euclid(a, b) / ms; }};
}

// Adds deterministic value-keyed noise: d' = clamp(d + u, 0, inf) with u a
// pure hash of (ordered observation pair, seed), uniform in [-eps, +eps].
inline DistanceFunction with_noise(const DistanceFunction& base, const NoiseSpec& spec) {
  DistanceFunction d;
  d.name = base.name + "+noise:" + std::to_string(spec.epsilon);
  d.self_tolerance = base.self_tolerance + spec.epsilon;
  const double eps = spec.epsilon;
  const std::uint64_t seed = spec.seed;
  const auto inner = base.fn;
  d.fn = [inner, eps, seed](const Observation& a, const Observation& b) {
    std::uint64_t h = mix64(seed ^ 0x5b5ce4d9f1a3c7e2ull);
    h = hash_combine(h, bits_of(a.x));
    h = hash_combine(h, bits_of(a.y));
    h = hash_combine(h, bits_of(b.x));
    h = hash_combine(h, bits_of(b.y));
    const double u = (double(h >> 11) * 0x1.0p-53 * 2.0 - 1.0) * eps;
    return std::max(0.0, inner(a, b) + u);
  };
  return d;
}

// ---- perceptual aliasing model --------------------------------------------

// Horizontal room layout for alias modelling: rooms repeat with the given
// period along x, starting at origin.
struct AliasSpec {
  double origin = 0.0;
  double pitch = 1.0;           // horizontal room period
  double radius = 0.5;          // in-room offset below which confusion is possible
  double prob = 0.0;            // per-pair chance of confusion
  std::uint64_t seed = 0;
};

// Models a learned estimator that confuses visually identical positions in
// translated copies of the same room: for a deterministic lottery of
// cross-room pairs whose in-room offsets nearly coincide, the reported
// distance collapses to the small in-room offset instead of the true value.
// The lottery is a pure hash of the unordered pair, so the same pair is
// confused (or not) consistently across calls.
inline DistanceFunction translation_alias_distance(const Maze& maze,
                                                   const DistanceFunction& base,
                                                   const AliasSpec& spec) {
  if (spec.pitch <= 0) throw error("translation_alias_distance: pitch must be positive");
  if (spec.radius < 0) throw error("translation_alias_distance: negative radius");
  if (spec.prob < 0 || spec.prob > 1)
    throw error("translation_alias_distance: prob must be in [0, 1]");
  const double ms = maze.max_step;
  const auto inner = base.fn;
  DistanceFunction d;
  d.name = "alias(" + base.name + ")";
  d.self_tolerance = base.self_tolerance;
  d.fn = [inner, ms, spec](const Observation& a, const Observation& b) {
    const double honest = inner(a, b);
    const double ra = std::floor((a.x - spec.origin) / spec.pitch);
    const double rb = std::floor((b.x - spec.origin) / spec.pitch);
    if (ra == rb) return honest;
    const double dxl = (a.x - ra * spec.pitch) - (b.x - rb * spec.pitch);
    const double dyl = a.y - b.y;
    const double offset = std::sqrt(dxl * dxl + dyl * dyl);
    if (offset > spec.radius) return honest;
    std::uint64_t ka = hash_combine(bits_of(a.x), bits_of(a.y));
    std::uint64_t kb = hash_combine(bits_of(b.x), bits_of(b.y));
    if (ka > kb) std::swap(ka, kb);
    std::uint64_t h = mix64(spec.seed ^ 0xc2b2ae3d27d4eb4full);
    h = hash_combine(h, ka);
    h = hash_combine(h, kb);
    if (double(h >> 11) * 0x1.0p-53 >= spec.prob) return honest;
    return std::min(honest, offset / ms);
  };
  return d;
}

// Patch-level aliasing: identical rooms along x are split into square tiles,
// and a deterministic lottery picks whole tile pairs (same tile index, two
// different rooms) the estimator confuses.  Every observation pair across a
// confused tile pair reports leak * in-room offset instead of the true value,
// so the error is consistent for all states in the patch — the regime where
// aggregation can collapse many spurious edge opportunities into one.
struct RoomAliasSpec {
  double origin = 0.0;
  double pitch = 1.0;   // horizontal room period
  double tile = 1.0;    // side length of the confusable patches
  double prob = 0.0;    // per tile-pair chance of confusion
  double leak = 0.1;    // reported distance = leak * in-room offset
  std::uint64_t seed = 0;
};

inline DistanceFunction room_alias_distance(const Maze& maze, const DistanceFunction& base,
                                            const RoomAliasSpec& spec) {
  if (spec.pitch <= 0) throw error("room_alias_distance: pitch must be positive");
  if (spec.tile <= 0) throw error("room_alias_distance: tile must be positive");
  if (spec.prob < 0 || spec.prob > 1)
    throw error("room_alias_distance: prob must be in [0, 1]");
  if (spec.leak < 0) throw error("room_alias_distance: negative leak");
  const double ms = maze.max_step;
  const auto inner = base.fn;
  DistanceFunction d;
  d.name = "room-alias(" + base.name + ")";
  d.self_tolerance = base.self_tolerance;
  d.fn = [inner, ms, spec](const Observation& a, const Observation& b) {
    const double honest = inner(a, b);
    const auto room = [&spec](const Observation& o) {
      return std::int64_t(std::floor((o.x - spec.origin) / spec.pitch));
    };
    const std::int64_t ra = room(a), rb = room(b);
    if (ra == rb) return honest;
    const double lxa = a.x - spec.origin - double(ra) * spec.pitch;
    const double lxb = b.x - spec.origin - double(rb) * spec.pitch;
    const auto tile_of = [&spec](double lx, double y) {
      return std::pair<std::int64_t, std::int64_t>{std::int64_t(std::floor(lx / spec.tile)),
                                                   std::int64_t(std::floor(y / spec.tile))};
    };
    const auto ta = tile_of(lxa, a.y), tb = tile_of(lxb, b.y);
    if (ta != tb) return honest;
    std::uint64_t lo = std::uint64_t(ra), hi = std::uint64_t(rb);
    if (lo > hi) std::swap(lo, hi);
    std::uint64_t h = mix64(spec.seed ^ 0x9e2f68d1c3a5b7f4ull);
    h = hash_combine(h, std::uint64_t(ta.first));
    h = hash_combine(h, std::uint64_t(ta.second));
    h = hash_combine(h, lo);
    h = hash_combine(h, hi);
    if (double(h >> 11) * 0x1.0p-53 >= spec.prob) return honest;
    const double dxl = lxa - lxb, dyl = a.y - b.y;
    return std::min(honest, spec.leak * std::sqrt(dxl * dxl + dyl * dyl) / ms);
  };
  return d;
}

// Worst-case (largest) estimate across ensemble members.
inline DistanceFunction pessimistic_ensemble(const std::vector<DistanceFunction>& members) {
  if (members.empty()) throw error("pessimistic_ensemble: no members");
  DistanceFunction d;
  d.name = "ensemble[";
  for (std::size_t i = 0; i < members.size(); ++i)
    d.name += (i ? "," : "") + members[i].name;
  d.name += "]";
  for (const auto& mem : members)
    d.self_tolerance = std::max(d.self_tolerance, mem.self_tolerance);
  d.fn = [members](const Observation& a, const Observation& b) {
    double worst = 0.0;
    for (const auto& mem : members) worst = std::max(worst, mem.fn(a, b));
    return worst;
  };
  return d;
}

// ---- embeddings -----------------------------------------------------------

struct Embedding {
  std::string name;
  std::function<std::vector<double>(const Observation&)> fn;
};

inline Embedding identity_embedding() {
  return {"identity",
          [](const Observation& o) { return std::vector<double>{o.x, o.y}; }};
}

// Identity scaled to environment size, so perceptual thresholds are fractions
// of the bounding-box diagonal rather than absolute lengths.
inline Embedding scaled_identity_embedding(const Maze& maze) {
  const double diag = std::sqrt(maze.box_w() * maze.box_w() + maze.box_h() * maze.box_h());
  return {"scaled_identity",
          [diag](const Observation& o) { return std::vector<double>{o.x / diag, o.y / diag}; }};
}

inline double perceptual_distance(const Embedding& phi, const Observation& a,
                                  const Observation& b) {
  const std::vector<double> fa = phi.fn(a), fb = phi.fn(b);
  if (fa.size() != fb.size()) throw error("perceptual_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) s += (fa[i] - fb[i]) * (fa[i] - fb[i]);
  return std::sqrt(s);
}

// ---- temporal windows over buffer indices ---------------------------------

struct BufferIndex {
  int episode = 0;
  int t = 0;
};

// Distance over buffer positions rather than raw observations.
struct IndexedDistance {
  std::string name;
  std::function<double(const BufferIndex&, const BufferIndex&)> fn;

  double operator()(const BufferIndex& i, const BufferIndex& j) const { return fn(i, j); }
};

inline const Observation& buffer_at(const ReplayBuffer& buf, const BufferIndex& i) {
  if (i.episode < 0 || std::size_t(i.episode) >= buf.episodes.size())
    throw error("buffer index: episode out of range");
  const auto& ep = buf.episodes[std::size_t(i.episode)];
  if (i.t < 0 || std::size_t(i.t) >= ep.size())
    throw error("buffer index: time out of range");
  return ep[std::size_t(i.t)];
}

inline IndexedDistance indexed(const DistanceFunction& base, const ReplayBuffer& buf) {
  auto shared = std::make_shared<ReplayBuffer>(buf);
  const auto fn = base.fn;
  return {base.name, [shared, fn](const BufferIndex& i, const BufferIndex& j) {
            return fn(buffer_at(*shared, i), buffer_at(*shared, j));
          }};
}

// Pessimistic temporal smoothing: the max of base over every pair drawn from
// +/-window around each index, truncated at episode boundaries.
inline IndexedDistance temporal_window_distance(const DistanceFunction& base,
                                                const ReplayBuffer& buf, int window) {
  if (window < 0) throw error("temporal_window_distance: negative window");
  auto shared = std::make_shared<ReplayBuffer>(buf);
  const auto fn = base.fn;
  std::string name = "window:" + std::to_string(window) + ":" + base.name;
  return {name, [shared, fn, window](const BufferIndex& i, const BufferIndex& j) {
            const auto& epi = shared->episodes.at(std::size_t(i.episode));
            const auto& epj = shared->episodes.at(std::size_t(j.episode));
            if (i.t < 0 || std::size_t(i.t) >= epi.size() || j.t < 0 ||
                std::size_t(j.t) >= epj.size())
              throw error("temporal_window_distance: index out of range");
            const int ilo = std::max(0, i.t - window);
            const int ihi = std::min(int(epi.size()) - 1, i.t + window);
            const int jlo = std::max(0, j.t - window);
            const int jhi = std::min(int(epj.size()) - 1, j.t + window);
            double worst = 0.0;
            for (int a = ilo; a <= ihi; ++a)
              for (int b = jlo; b <= jhi; ++b)
                worst = std::max(worst, fn(epi[std::size_t(a)], epj[std::size_t(b)]));
            return worst;
          }};
}

// ---- config-string selection ----------------------------------------------

// Grammar: "oracle" | "euclid" | "oracle+noise:<eps>:<seed>" |
//          "alias:<origin>:<pitch>:<radius>:<prob>:<seed>:<base>" |
//          "room-alias:<origin>:<pitch>:<tile>:<prob>:<leak>:<seed>:<base>" |
//          "ensemble:[spec,spec,...]".
// "window:<w>" / "window:<w>:<spec>" is split off by parse_window_spec; the
// base defaults to oracle.
inline DistanceFunction parse_distance(const Maze& maze, const std::string& spec) {
  if (spec == "oracle") return grid_value_distance(maze);
  if (spec == "euclid") return euclidean_step_distance(maze);
  const std::string noise_prefix = "oracle+noise:";
  if (spec.rfind(noise_prefix, 0) == 0) {
    const std::string rest = spec.substr(noise_prefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      throw error("distance spec '" + spec + "': expected oracle+noise:<eps>:<seed>");
    try {
      const double eps = std::stod(rest.substr(0, colon));
      const std::uint64_t seed = std::stoull(rest.substr(colon + 1));
      return with_noise(grid_value_distance(maze), {eps, seed});
    } catch (const std::invalid_argument&) {
      throw error("distance spec '" + spec + "': bad number");
    }
  }
  const std::string ralias_prefix = "room-alias:";
  if (spec.rfind(ralias_prefix, 0) == 0) {
    std::string rest = spec.substr(ralias_prefix.size());
    double nums[5];
    std::uint64_t seed = 0;
    for (int i = 0; i < 6; ++i) {
      const auto colon = rest.find(':');
      if (colon == std::string::npos)
        throw error("distance spec '" + spec +
                    "': expected room-alias:<origin>:<pitch>:<tile>:<prob>:<leak>:<seed>:<base>");
      try {
        if (i < 5)
          nums[i] = std::stod(rest.substr(0, colon));
        else
          seed = std::stoull(rest.substr(0, colon));
      } catch (const std::invalid_argument&) {
        throw error("distance spec '" + spec + "': bad number");
      }
      rest = rest.substr(colon + 1);
    }
    if (rest.empty()) throw error("distance spec '" + spec + "': missing base spec");
    return room_alias_distance(maze, parse_distance(maze, rest),
                               {nums[0], nums[1], nums[2], nums[3], nums[4], seed});
  }
  const std::string alias_prefix = "alias:";
  if (spec.rfind(alias_prefix, 0) == 0) {
    std::string rest = spec.substr(alias_prefix.size());
    double nums[4];
    std::uint64_t seed = 0;
    for (int i = 0; i < 5; ++i) {
      const auto colon = rest.find(':');
      if (colon == std::string::npos)
        throw error("distance spec '" + spec +
                    "': expected alias:<origin>:<pitch>:<radius>:<prob>:<seed>:<base>");
      try {
        if (i < 4)
          nums[i] = std::stod(rest.substr(0, colon));
        else
          seed = std::stoull(rest.substr(0, colon));
      } catch (const std::invalid_argument&) {
        throw error("distance spec '" + spec + "': bad number");
      }
      rest = rest.substr(colon + 1);
    }
    if (rest.empty()) throw error("distance spec '" + spec + "': missing base spec");
    return translation_alias_distance(maze, parse_distance(maze, rest),
                                      {nums[0], nums[1], nums[2], nums[3], seed});
  }
  const std::string ens_prefix = "ensemble:[";
  if (spec.rfind(ens_prefix, 0) == 0 && spec.back() == ']') {
    const std::string body = spec.substr(ens_prefix.size(), spec.size() - ens_prefix.size() - 1);
    std::vector<DistanceFunction> members;
    std::string cur;
    int depth = 0;
    for (char c : body) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        members.push_back(parse_distance(maze, cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) members.push_back(parse_distance(maze, cur));
    return pessimistic_ensemble(members);
  }
  throw error("unknown distance spec '" + spec + "'");
}

struct WindowSpec {
  int window = 0;
  std::string base = "oracle";
};

// Splits "window:<w>[:<base>]" off a distance spec; other specs pass through
// with window = 0.
inline WindowSpec parse_window_spec(const std::string& spec) {
  const std::string prefix = "window:";
  if (spec.rfind(prefix, 0) != 0) return {0, spec};
  const std::string rest = spec.substr(prefix.size());
  const auto colon = rest.find(':');
  WindowSpec out;
  try {
    if (colon == std::string::npos) {
      out.window = std::stoi(rest);
    } else {
      out.window = std::stoi(rest.substr(0, colon));
      out.base = rest.substr(colon + 1);
    }
  } catch (const std::invalid_argument&) {
    throw error("distance spec '" + spec + "': bad window");
  }
  if (out.window < 0) throw error("distance spec '" + spec + "': negative window");
  return out;
}

}  // namespace sgm
