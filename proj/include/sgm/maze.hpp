#pragma once

// 2-D point-mass maze world.
//
// A maze is a rectangular cell grid ('#' wall, '.' free) living in a bounding
// box of width*cell_size x height*cell_size.  Walls are axis-aligned solid
// rectangles: full cells normally, or thin centered bands (wall_thickness
// fraction of a cell) in thin-wall variants.  The agent is a point; actions
// are straight displacements truncated at the first wall contact.
//
// Ground-truth shortest-path lengths come from a fine sub-grid (subcells per
// cell, 8-connected, sqrt(2) diagonals) and are reported in step units
// (divided by max_step).

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgm/core.hpp"

namespace sgm {

struct Rect {
  double x0, y0, x1, y1;

  bool contains_interior(double x, double y) const {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
  bool overlaps_area(const Rect& o) const {
    return std::min(x1, o.x1) > std::max(x0, o.x0) &&
           std::min(y1, o.y1) > std::max(y0, o.y0);
  }
};

class Maze {
 public:
  std::string name;
  int width = 0;   // cells
  int height = 0;  // cells
  double cell_size = 1.0;
  double wall_thickness = 1.0;  // fraction of a cell occupied by interior walls
  double max_step = 1.0;        // action norm cap; geodesics divide by this
  int subcells = 4;             // oracle sub-grid resolution per cell

  double box_w() const { return width * cell_size; }
  double box_h() const { return height * cell_size; }
  double skin() const { return 1e-3 * cell_size; }

  bool is_wall(int cx, int cy) const {
    if (cx < 0 || cy < 0 || cx >= width || cy >= height) return true;
    return wall_[std::size_t(cy) * width + cx] != 0;
  }
  bool is_free_cell(int cx, int cy) const {
    return cx >= 0 && cy >= 0 && cx < width && cy < height && !is_wall(cx, cy);
  }
  int free_cell_count() const {
    int n = 0;
    for (auto w : wall_) n += (w == 0);
    return n;
  }
  Observation cell_center(int cx, int cy) const {
    return {(cx + 0.5) * cell_size, (cy + 0.5) * cell_size};
  }

  // True iff p is inside the box and not strictly inside any wall rectangle.
  // Boundary contact counts as free (the stepper backs off before contact).
  bool point_free(const Observation& p) const {
    if (p.x <= 0 || p.y <= 0 || p.x >= box_w() || p.y >= box_h()) return false;
    const int cx = std::min(int(p.x / cell_size), width - 1);
    const int cy = std::min(int(p.y / cell_size), height - 1);
    for (const Rect& r : cell_rects(cx, cy))
      if (r.contains_interior(p.x, p.y)) return false;
    return true;
  }

  // ---- oracle sub-grid ---------------------------------------------------

  int sub_w() const { return width * subcells; }
  int sub_h() const { return height * subcells; }
  double sub_len() const { return cell_size / subcells; }
  bool sub_is_free(int i) const { return sub_free_[std::size_t(i)] != 0; }
  int sub_count() const { return sub_w() * sub_h(); }

  Observation sub_center(int i) const {
    const int sx = i % sub_w(), sy = i / sub_w();
    return {(sx + 0.5) * sub_len(), (sy + 0.5) * sub_len()};
  }

  // Sub-grid index of the nearest free subcell (BFS over the raw lattice when
  // the point's own subcell is blocked, e.g. within a band's safety margin).
  int snap_subcell(const Observation& p) const {
    const int sx = std::clamp(int(p.x / sub_len()), 0, sub_w() - 1);
    const int sy = std::clamp(int(p.y / sub_len()), 0, sub_h() - 1);
    const int start = sy * sub_w() + sx;
    if (sub_is_free(start)) return start;
    std::vector<std::uint8_t> seen(sub_count(), 0);
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    static const int ddx[4] = {1, -1, 0, 0}, ddy[4] = {0, 0, 1, -1};
    while (!q.empty()) {
      const int cur = q.front();
      q.pop();
      if (sub_is_free(cur)) return cur;
      const int cx = cur % sub_w(), cy = cur / sub_w();
      for (int k = 0; k < 4; ++k) {
        const int nx = cx + ddx[k], ny = cy + ddy[k];
        if (nx < 0 || ny < 0 || nx >= sub_w() || ny >= sub_h()) continue;
        const int ni = ny * sub_w() + nx;
        if (!seen[ni]) {
          seen[ni] = 1;
          q.push(ni);
        }
      }
    }
    throw error("maze '" + name + "': no free subcell reachable");
  }

  // Shortest-path field from one goal subcell to every subcell, in step
  // units.  Blocked subcells stay at +inf.
  std::vector<double> distance_field(int goal_subcell) const {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(sub_count(), inf);
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> heap;
    dist[goal_subcell] = 0.0;
    heap.push({0.0, goal_subcell});
    const int w = sub_w(), h = sub_h();
    while (!heap.empty()) {
      auto [d, i] = heap.top();
      heap.pop();
      if (d > dist[i]) continue;
      const int cx = i % w, cy = i / w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int ni = ny * w + nx;
          if (!sub_is_free(ni)) continue;
          if (dx != 0 && dy != 0) {
            // no corner cutting: both orthogonal neighbours must be free
            if (!sub_is_free(cy * w + nx) || !sub_is_free(ny * w + cx)) continue;
          }
          const double step_cost = (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
          const double nd = d + step_cost;
          if (nd < dist[ni]) {
            dist[ni] = nd;
            heap.push({nd, ni});
          }
        }
      }
    }
    const double scale = sub_len() / max_step;
    for (double& d : dist)
      if (d < inf) d *= scale;
    return dist;
  }

  // ---- construction ------------------------------------------------------

  // Builds derived geometry and validates the maze.  Called by load_maze.
  void finalize() {
    if (width < 3 || height < 3)
      throw error("maze '" + name + "': grid must be at least 3x3");
    if (free_cell_count() == 0) throw error("maze '" + name + "': no free cells");
    if (wall_thickness <= 0 || wall_thickness > 1)
      throw error("maze '" + name + "': wall_thickness must be in (0, 1]");
    if (cell_size <= 0) throw error("maze '" + name + "': cell_size must be positive");
    build_rects();
    build_subgrid();
    check_connected();
  }

  const std::vector<Rect>& cell_rects(int cx, int cy) const {
    return rects_[std::size_t(cy) * width + cx];
  }
  const std::vector<Rect>& margin_rects() const { return margins_; }

  std::vector<std::uint8_t> wall_;  // row-major, wall_[cy*width+cx]

 private:
  std::vector<std::vector<Rect>> rects_;  // wall rectangles, per cell
  std::vector<Rect> margins_;             // four rectangles outside the box
  std::vector<std::uint8_t> sub_free_;

  bool boundary_cell(int cx, int cy) const {
    return cx == 0 || cy == 0 || cx == width - 1 || cy == height - 1;
  }

  void build_rects() {
    rects_.assign(std::size_t(width) * height, {});
    for (int cy = 0; cy < height; ++cy) {
      for (int cx = 0; cx < width; ++cx) {
        if (!is_wall(cx, cy)) continue;
        auto& out = rects_[std::size_t(cy) * width + cx];
        const double x0 = cx * cell_size, y0 = cy * cell_size;
        const double x1 = x0 + cell_size, y1 = y0 + cell_size;
        if (wall_thickness >= 1.0 || boundary_cell(cx, cy)) {
          out.push_back({x0, y0, x1, y1});
          continue;
        }
        // Thin interior wall: centered bands oriented along runs of wall
        // cells so adjacent segments stay sealed.  Isolated pillars get both
        // bands (a small cross).
        const double half = 0.5 * wall_thickness * cell_size;
        const double mx = x0 + 0.5 * cell_size, my = y0 + 0.5 * cell_size;
        const bool horiz = is_wall(cx - 1, cy) || is_wall(cx + 1, cy);
        const bool vert = is_wall(cx, cy - 1) || is_wall(cx, cy + 1);
        if (horiz || !vert) out.push_back({x0, my - half, x1, my + half});
        if (vert || !horiz) out.push_back({mx - half, y0, mx + half, y1});
      }
    }
    const double m = cell_size;  // margin thickness; value irrelevant
    margins_ = {{-m, -m, 0, box_h() + m},
                {box_w(), -m, box_w() + m, box_h() + m},
                {-m, -m, box_w() + m, 0},
                {-m, box_h(), box_w() + m, box_h() + m}};
  }

  void build_subgrid() {
    sub_free_.assign(std::size_t(sub_count()), 1);
    for (int sy = 0; sy < sub_h(); ++sy) {
      for (int sx = 0; sx < sub_w(); ++sx) {
        const Rect sr{sx * sub_len(), sy * sub_len(), (sx + 1) * sub_len(),
                      (sy + 1) * sub_len()};
        const int cx = sx / subcells, cy = sy / subcells;
        bool blocked = false;
        // A band can only live inside its own cell, so checking the owning
        // cell's rectangles suffices.
        for (const Rect& r : cell_rects(cx, cy)) {
          if (r.overlaps_area(sr)) {
            blocked = true;
            break;
          }
        }
        sub_free_[std::size_t(sy) * sub_w() + sx] = blocked ? 0 : 1;
      }
    }
  }

  void check_connected() {
    int start = -1, nfree = 0;
    for (int i = 0; i < sub_count(); ++i) {
      if (sub_is_free(i)) {
        if (start < 0) start = i;
        ++nfree;
      }
    }
    if (start < 0) throw error("maze '" + name + "': no free space");
    std::vector<std::uint8_t> seen(sub_count(), 0);
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    int reached = 1;
    static const int ddx[4] = {1, -1, 0, 0}, ddy[4] = {0, 0, 1, -1};
    while (!q.empty()) {
      const int cur = q.front();
      q.pop();
      const int cx = cur % sub_w(), cy = cur / sub_w();
      for (int k = 0; k < 4; ++k) {
        const int nx = cx + ddx[k], ny = cy + ddy[k];
        if (nx < 0 || ny < 0 || nx >= sub_w() || ny >= sub_h()) continue;
        const int ni = ny * sub_w() + nx;
        if (!seen[ni] && sub_is_free(ni)) {
          seen[ni] = 1;
          ++reached;
          q.push(ni);
        }
      }
    }
    if (reached != nfree)
      throw error("maze '" + name + "': free space is disconnected");
  }
};

// ---- loading --------------------------------------------------------------

// Text format: optional first line "cell_size=<f> wall_thickness=<f>" (either
// key may appear alone), then one row per line of '#' and '.'.
inline Maze load_maze(const std::string& text, const std::string& name = "maze") {
  Maze m;
  m.name = name;
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t first = 0;
  if (!lines.empty() && lines[0].find('=') != std::string::npos) {
    std::istringstream hdr(lines[0]);
    std::string tok;
    while (hdr >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw error("maze '" + name + "': malformed header token '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "cell_size")
          m.cell_size = std::stod(val);
        else if (key == "wall_thickness")
          m.wall_thickness = std::stod(val);
        else
          throw error("maze '" + name + "': unknown header key '" + key + "'");
      } catch (const std::invalid_argument&) {
        throw error("maze '" + name + "': bad header value '" + val + "'");
      }
    }
    first = 1;
  }
  if (first >= lines.size()) throw error("maze '" + name + "': empty grid");
  m.height = int(lines.size() - first);
  m.width = int(lines[first].size());
  if (m.width == 0) throw error("maze '" + name + "': empty grid row");
  m.wall_.assign(std::size_t(m.width) * m.height, 0);
  for (int cy = 0; cy < m.height; ++cy) {
    const std::string& row = lines[first + cy];
    if (int(row.size()) != m.width)
      throw error("maze '" + name + "': ragged grid (row " + std::to_string(cy) + ")");
    for (int cx = 0; cx < m.width; ++cx) {
      const char c = row[cx];
      if (c == '#')
        m.wall_[std::size_t(cy) * m.width + cx] = 1;
      else if (c != '.')
        throw error("maze '" + name + "': bad character '" + std::string(1, c) + "'");
    }
  }
  m.max_step = m.cell_size;
  m.finalize();
  return m;
}

// Built-in templates.
inline Maze fixture(const std::string& which) {
  static const char* fourrooms =
      "###########\n"
      "#....#....#\n"
      "#....#....#\n"
      "#.........#\n"
      "#....#....#\n"
      "###.###.###\n"
      "#....#....#\n"
      "#.........#\n"
      "#....#....#\n"
      "#....#....#\n"
      "###########\n";
  if (which == "fourrooms") return load_maze(fourrooms, "fourrooms");
  if (which == "fourrooms-thin")
    return load_maze(std::string("cell_size=1.0 wall_thickness=0.2\n") + fourrooms,
                     "fourrooms-thin");
  if (which == "fourrooms-mid")
    return load_maze(std::string("cell_size=1.0 wall_thickness=0.5\n") + fourrooms,
                     "fourrooms-mid");
  if (which == "line3")
    // Free 3x5 box; the canonical corridor points A=(0.5,0.5), B=(2.5,0.5),
    // C=(4.5,0.5) sit along the bottom row.
    return load_maze(
        ".....\n"
        ".....\n"
        ".....\n",
        "line3");
  if (which == "hallway4")
    // Four identical 5x5 rooms in a row, doors on the middle row.  Rooms
    // repeat with a horizontal period of 6 cells starting at x = 1, which
    // makes positions at the same in-room offset geometric translates.
    return load_maze(
        "#########################\n"
        "#.....#.....#.....#.....#\n"
        "#.....#.....#.....#.....#\n"
        "#.......................#\n"
        "#.....#.....#.....#.....#\n"
        "#.....#.....#.....#.....#\n"
        "#########################\n",
        "hallway4");
  throw error("unknown maze fixture '" + which + "'");
}

// Seeded random maze: bordered grid with sprinkled interior walls, retried
// (deterministically) until the free space is connected.
inline Maze random_maze(std::uint64_t seed) {
  Rng rng(substream(seed, "random_maze"));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int w = 13 + int(rng.below(5));
    const int h = 13 + int(rng.below(5));
    const double p = rng.uniform(0.15, 0.30);
    std::string text;
    for (int cy = 0; cy < h; ++cy) {
      for (int cx = 0; cx < w; ++cx) {
        const bool border = cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1;
        text += (border || rng.next_double() < p) ? '#' : '.';
      }
      text += '\n';
    }
    try {
      return load_maze(text, "random-" + std::to_string(seed));
    } catch (const error&) {
      continue;  // disconnected sprinkle; redraw
    }
  }
  throw error("random_maze: no connected maze found for seed " + std::to_string(seed));
}

// ---- dynamics ------------------------------------------------------------

// Entry parameter of segment p -> p+d into rect r, or +inf if it misses.
inline double segment_rect_entry(const Observation& p, double dx, double dy,
                                 const Rect& r) {
  double tlo = 0.0, thi = 1.0;
  const double eps = 0.0;
  // x slab
  if (dx == 0.0) {
    if (p.x < r.x0 - eps || p.x > r.x1 + eps)
      return std::numeric_limits<double>::infinity();
  } else {
    double t0 = (r.x0 - p.x) / dx, t1 = (r.x1 - p.x) / dx;
    if (t0 > t1) std::swap(t0, t1);
    tlo = std::max(tlo, t0);
    thi = std::min(thi, t1);
  }
  // y slab
  if (dy == 0.0) {
    if (p.y < r.y0 - eps || p.y > r.y1 + eps)
      return std::numeric_limits<double>::infinity();
  } else {
    double t0 = (r.y0 - p.y) / dy, t1 = (r.y1 - p.y) / dy;
    if (t0 > t1) std::swap(t0, t1);
    tlo = std::max(tlo, t0);
    thi = std::min(thi, t1);
  }
  if (tlo > thi) return std::numeric_limits<double>::infinity();
  return tlo;
}

// Applies action a from s: moves along the straight segment, truncating at
// the first wall (or bounding box) contact, backed off by the skin distance.
inline Observation step(const Maze& m, const Observation& s, const Action& a) {
  const double len = a.norm();
  if (len > m.max_step * (1.0 + 1e-9))
    throw error("step: action norm " + std::to_string(len) + " exceeds max_step");
  if (len == 0.0) return s;
  double t_hit = std::numeric_limits<double>::infinity();
  for (const Rect& r : m.margin_rects())
    t_hit = std::min(t_hit, segment_rect_entry(s, a.dx, a.dy, r));
  // Candidate cells: those overlapping the segment's bounding box (wall
  // rectangles never leave their cell).
  const double lox = std::min(s.x, s.x + a.dx), hix = std::max(s.x, s.x + a.dx);
  const double loy = std::min(s.y, s.y + a.dy), hiy = std::max(s.y, s.y + a.dy);
  const int cx0 = std::max(0, int(std::floor(lox / m.cell_size)));
  const int cx1 = std::min(m.width - 1, int(std::floor(hix / m.cell_size)));
  const int cy0 = std::max(0, int(std::floor(loy / m.cell_size)));
  const int cy1 = std::min(m.height - 1, int(std::floor(hiy / m.cell_size)));
  for (int cy = cy0; cy <= cy1; ++cy)
    for (int cx = cx0; cx <= cx1; ++cx)
      for (const Rect& r : m.cell_rects(cx, cy))
        t_hit = std::min(t_hit, segment_rect_entry(s, a.dx, a.dy, r));
  double t = 1.0;
  if (t_hit <= 1.0) t = std::max(0.0, t_hit - m.skin() / len);
  return {s.x + a.dx * t, s.y + a.dy * t};
}

// Ground-truth shortest-path length between two free points, in step units.
// Sub-grid quantization is clamped from below by the straight-line bound.
inline double geodesic(const Maze& m, const Observation& a, const Observation& b) {
  const double lower = euclid(a, b) / m.max_step;
  const int sa = m.snap_subcell(a), sb = m.snap_subcell(b);
  if (sa == sb) return lower;
  // Early-exit Dijkstra from b until a's subcell is settled.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(m.sub_count(), inf);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> heap;
  dist[sb] = 0.0;
  heap.push({0.0, sb});
  const int w = m.sub_w(), h = m.sub_h();
  while (!heap.empty()) {
    auto [d, i] = heap.top();
    heap.pop();
    if (d > dist[i]) continue;
    if (i == sa) break;
    const int cx = i % w, cy = i / w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int ni = ny * w + nx;
        if (!m.sub_is_free(ni)) continue;
        if (dx != 0 && dy != 0) {
          if (!m.sub_is_free(cy * w + nx) || !m.sub_is_free(ny * w + cx)) continue;
        }
        const double nd = d + ((dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0);
        if (nd < dist[ni]) {
          dist[ni] = nd;
          heap.push({nd, ni});
        }
      }
    }
  }
  if (dist[sa] == inf)
    throw error("geodesic: unreachable pair in maze '" + m.name + "'");
  return std::max(lower, dist[sa] * m.sub_len() / m.max_step);
}

// ---- replay buffers -------------------------------------------------------

struct ReplayBuffer {
  std::vector<std::vector<Observation>> episodes;
  std::uint64_t seed = 0;

  std::size_t total_states() const {
    std::size_t n = 0;
    for (const auto& ep : episodes) n += ep.size();
    return n;
  }
  const Observation& flat(std::size_t idx) const {
    for (const auto& ep : episodes) {
      if (idx < ep.size()) return ep[idx];
      idx -= ep.size();
    }
    throw error("replay buffer: flat index out of range");
  }
};

inline Observation sample_free_point(const Maze& m, Rng& rng) {
  for (int tries = 0; tries < 100000; ++tries) {
    Observation p{rng.uniform(0.0, m.box_w()), rng.uniform(0.0, m.box_h())};
    if (m.point_free(p)) return p;
  }
  throw error("sample_free_point: rejection sampling failed");
}

// Random-walk exploration: uniform free starts, uniformly random actions with
// norm <= max_step.  Each episode holds horizon+1 observations.
inline ReplayBuffer collect_random_buffer(const Maze& m, int episodes, int horizon,
                                          std::uint64_t seed) {
  if (episodes <= 0 || horizon <= 0)
    throw error("collect_random_buffer: episodes and horizon must be positive");
  ReplayBuffer buf;
  buf.seed = seed;
  Rng rng(substream(seed, "explore"));
  buf.episodes.reserve(std::size_t(episodes));
  for (int e = 0; e < episodes; ++e) {
    std::vector<Observation> ep;
    ep.reserve(std::size_t(horizon) + 1);
    Observation s = sample_free_point(m, rng);
    ep.push_back(s);
    for (int t = 0; t < horizon; ++t) {
      const double r = m.max_step * std::sqrt(rng.next_double());
      const double th = 2.0 * kPi * rng.next_double();
      s = step(m, s, {r * std::cos(th), r * std::sin(th)});
      ep.push_back(s);
    }
    buf.episodes.push_back(std::move(ep));
  }
  return buf;
}

inline nlohmann::ordered_json buffer_to_json(const ReplayBuffer& buf) {
  nlohmann::ordered_json j;
  j["episodes"] = nlohmann::ordered_json::array();
  for (const auto& ep : buf.episodes) {
    nlohmann::ordered_json je = nlohmann::ordered_json::array();
    for (const auto& o : ep) je.push_back({o.x, o.y});
    j["episodes"].push_back(std::move(je));
  }
  j["seed"] = buf.seed;
  return j;
}

inline ReplayBuffer buffer_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("episodes") || !j["episodes"].is_array())
    throw error("replay buffer: malformed JSON (missing episodes array)");
  ReplayBuffer buf;
  buf.seed = j.value("seed", std::uint64_t(0));
  for (const auto& je : j["episodes"]) {
    if (!je.is_array()) throw error("replay buffer: episode is not an array");
    std::vector<Observation> ep;
    for (const auto& jo : je) {
      if (!jo.is_array() || jo.size() != 2)
        throw error("replay buffer: observation is not an [x, y] pair");
      ep.push_back({jo[0].get<double>(), jo[1].get<double>()});
    }
    buf.episodes.push_back(std::move(ep));
  }
  return buf;
}

inline void validate_buffer(const Maze& m, const ReplayBuffer& buf) {
  for (const auto& ep : buf.episodes)
    for (const auto& o : ep)
      if (!m.point_free(o))
        throw error("replay buffer: observation outside free space");
}

}  // namespace sgm
