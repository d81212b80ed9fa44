#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "sgm/maze.hpp"

using namespace sgm;

namespace {

// Independent door detector: a free cell pierced through a wall line has
// walls on two opposite sides.
int count_doors(const Maze& m) {
  int doors = 0;
  for (int cy = 0; cy < m.height; ++cy)
    for (int cx = 0; cx < m.width; ++cx)
      if (m.is_free_cell(cx, cy) &&
          ((m.is_wall(cx, cy - 1) && m.is_wall(cx, cy + 1)) ||
           (m.is_wall(cx - 1, cy) && m.is_wall(cx + 1, cy))))
        ++doors;
  return doors;
}

// Connected components of free cells after removing door cells.
int count_rooms(const Maze& m) {
  auto is_door = [&](int cx, int cy) {
    return (m.is_wall(cx, cy - 1) && m.is_wall(cx, cy + 1)) ||
           (m.is_wall(cx - 1, cy) && m.is_wall(cx + 1, cy));
  };
  std::vector<int> comp(std::size_t(m.width) * m.height, -1);
  int ncomp = 0;
  for (int cy = 0; cy < m.height; ++cy) {
    for (int cx = 0; cx < m.width; ++cx) {
      if (!m.is_free_cell(cx, cy) || is_door(cx, cy)) continue;
      if (comp[std::size_t(cy) * m.width + cx] >= 0) continue;
      std::vector<std::pair<int, int>> stk{{cx, cy}};
      comp[std::size_t(cy) * m.width + cx] = ncomp;
      while (!stk.empty()) {
        auto [x, y] = stk.back();
        stk.pop_back();
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (!m.is_free_cell(nx, ny) || is_door(nx, ny)) continue;
          if (comp[std::size_t(ny) * m.width + nx] < 0) {
            comp[std::size_t(ny) * m.width + nx] = ncomp;
            stk.push_back({nx, ny});
          }
        }
      }
      ++ncomp;
    }
  }
  return ncomp;
}

const char* kThinWallText =
    "cell_size=1.0 wall_thickness=0.2\n"
    "#########\n"
    "#.......#\n"
    "#######.#\n"
    "#.......#\n"
    "#########\n";

}  // namespace

TEST_CASE("load_maze basics") {
  const Maze m = load_maze("...\n...\n...\n", "open3");
  CHECK(m.width == 3);
  CHECK(m.height == 3);
  CHECK(m.free_cell_count() == 9);
  CHECK(m.cell_size == 1.0);
  CHECK(m.wall_thickness == 1.0);

  const Maze t = load_maze("cell_size=2.0 wall_thickness=0.5\n...\n...\n...\n");
  CHECK(t.cell_size == 2.0);
  CHECK(t.wall_thickness == 0.5);
  CHECK(t.max_step == 2.0);
}

TEST_CASE("load_maze rejects malformed input") {
  CHECK_THROWS_AS(load_maze(""), error);
  CHECK_THROWS_AS(load_maze("...\n..\n...\n"), error);   // ragged
  CHECK_THROWS_AS(load_maze("...\n.x.\n...\n"), error);  // bad char
  CHECK_THROWS_AS(load_maze("..\n..\n"), error);         // below 3x3
  CHECK_THROWS_AS(load_maze("###\n###\n###\n"), error);  // no free cells
  // walled-off room
  CHECK_THROWS_AS(load_maze(".....\n.....\n#####\n.....\n.....\n"), error);
  CHECK_THROWS_AS(load_maze("cell_size=zero\n...\n...\n...\n"), error);
  CHECK_THROWS_AS(load_maze("girth=1\n...\n...\n...\n"), error);
}

TEST_CASE("fourrooms template has four rooms and four doorways") {
  const Maze m = fixture("fourrooms");
  CHECK(m.width == 11);
  CHECK(m.height == 11);
  CHECK(m.free_cell_count() == 68);
  CHECK(count_doors(m) == 4);
  CHECK(count_rooms(m) == 4);

  const Maze thin = fixture("fourrooms-thin");
  CHECK(thin.wall_thickness == 0.2);
  CHECK(thin.free_cell_count() == 68);
}

TEST_CASE("hallway template repeats one room four times") {
  const Maze m = fixture("hallway4");
  CHECK(m.width == 25);
  CHECK(m.height == 7);
  CHECK(m.free_cell_count() == 103);
  // in-room twins translate by the 6-cell period; skipping a room is a long
  // trip, the adjacent room a short one
  CHECK(geodesic(m, {2.5, 1.5}, {14.5, 1.5}) > 12.0);
  CHECK(geodesic(m, {2.5, 1.5}, {8.5, 1.5}) < 12.0);
  for (int k = 0; k < 4; ++k) {
    REQUIRE(m.is_free_cell(2 + 6 * k, 1));
    REQUIRE(m.is_free_cell(2 + 6 * k, 5));
  }
  for (int row : {1, 2, 4, 5}) REQUIRE_FALSE(m.is_free_cell(6, row));
  CHECK(m.is_free_cell(6, 3));  // middle-row door
}

TEST_CASE("step moves exactly through open space") {
  const Maze m = fixture("line3");
  const Observation r = step(m, {0.5, 0.5}, {0.4, 0.0});
  CHECK(r.x == Catch::Approx(0.9).margin(1e-12));
  CHECK(r.y == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("step truncates at walls with skin backoff") {
  const Maze m = fixture("fourrooms");
  // head-on into the vertical wall at x=5 from the left room
  const Observation r = step(m, {4.7, 1.5}, {0.6, 0.0});
  CHECK(r.x == Catch::Approx(5.0 - m.skin()).margin(1e-9));
  CHECK(r.y == Catch::Approx(1.5).margin(1e-12));
  CHECK(m.point_free(r));

  // bounding box clamps too
  const Observation b = step(m, {0.4 + 1.0, 1.5}, {-0.9, 0.0});
  (void)b;
  CHECK(m.point_free(b));
}

TEST_CASE("diagonal grazing a wall corner is truncated at first contact") {
  const Maze m = load_maze(".....\n.....\n..#..\n.....\n.....\n", "pillar");
  // wall cell occupies [2,3]x[2,3]; aim exactly through its (2,2) corner
  const Observation r = step(m, {1.7, 1.7}, {0.6, 0.6});
  CHECK(euclid(r, {2.0, 2.0}) < 0.01);
  CHECK(m.point_free(r));
  // passing near but outside the corner is unobstructed
  const Observation f = step(m, {1.9, 1.2}, {0.6, 0.6});
  CHECK(f.x == Catch::Approx(2.5).margin(1e-12));
  CHECK(f.y == Catch::Approx(1.8).margin(1e-12));
}

TEST_CASE("step rejects oversized actions") {
  const Maze m = fixture("line3");
  CHECK_THROWS_AS(step(m, {0.5, 0.5}, {1.2, 0.0}), error);
}

TEST_CASE("step never enters a wall (randomized)") {
  for (const char* name : {"line3", "fourrooms", "fourrooms-thin"}) {
    const Maze m = fixture(name);
    Rng rng(substream(42, std::string("step-") + name));
    for (int i = 0; i < 100000; ++i) {
      const Observation s = sample_free_point(m, rng);
      const double r = m.max_step * std::sqrt(rng.next_double());
      const double th = 2.0 * kPi * rng.next_double();
      const Observation out = step(m, s, {r * std::cos(th), r * std::sin(th)});
      REQUIRE(m.point_free(out));
    }
  }
}

TEST_CASE("line3 corridor geodesics") {
  const Maze m = fixture("line3");
  const Observation A{0.5, 0.5}, B{2.5, 0.5}, C{4.5, 0.5};
  CHECK(geodesic(m, A, A) == 0.0);
  CHECK(geodesic(m, A, B) == Catch::Approx(2.0).margin(0.15));
  CHECK(geodesic(m, B, C) == Catch::Approx(2.0).margin(0.15));
  CHECK(geodesic(m, A, C) == Catch::Approx(4.0).margin(0.15));
}

TEST_CASE("thin wall separates close points geodesically") {
  const Maze m = load_maze(kThinWallText, "thinwall");
  const Observation a{1.5, 2.3}, b{1.5, 2.7};
  CHECK(euclid(a, b) == Catch::Approx(0.4).margin(1e-12));
  const double g = geodesic(m, a, b);
  CHECK(g >= 10.0 * euclid(a, b));
  // around the gap at column 7 and back
  CHECK(g < 16.0);
}

TEST_CASE("geodesic properties on sampled pairs") {
  for (const char* name : {"fourrooms", "fourrooms-thin"}) {
    const Maze m = fixture(name);
    Rng rng(substream(7, std::string("geo-") + name));
    for (int i = 0; i < 200; ++i) {
      const Observation a = sample_free_point(m, rng);
      const Observation b = sample_free_point(m, rng);
      const Observation c = sample_free_point(m, rng);
      const double ab = geodesic(m, a, b);
      REQUIRE(ab >= euclid(a, b) / m.max_step);
      REQUIRE(geodesic(m, b, a) == Catch::Approx(ab).margin(1e-9));
      // triangle inequality up to sub-grid quantization
      const double quant = 4.0 * m.sub_len() * std::sqrt(2.0) / m.max_step;
      REQUIRE(ab <= geodesic(m, a, c) + geodesic(m, c, b) + quant);
    }
  }
}

TEST_CASE("collect_random_buffer shapes and determinism") {
  const Maze m = fixture("fourrooms");
  const ReplayBuffer tiny = collect_random_buffer(m, 1, 1, 3);
  REQUIRE(tiny.episodes.size() == 1);
  CHECK(tiny.episodes[0].size() == 2);

  const ReplayBuffer a = collect_random_buffer(m, 20, 40, 9);
  const ReplayBuffer b = collect_random_buffer(m, 20, 40, 9);
  CHECK(a.total_states() == 20 * 41);
  CHECK(buffer_to_json(a).dump() == buffer_to_json(b).dump());
  const ReplayBuffer c = collect_random_buffer(m, 20, 40, 10);
  CHECK(buffer_to_json(a).dump() != buffer_to_json(c).dump());

  CHECK_THROWS_AS(collect_random_buffer(m, 0, 5, 1), error);
}

TEST_CASE("buffer observations are free and single-step reachable") {
  for (const char* name : {"fourrooms", "fourrooms-thin"}) {
    const Maze m = fixture(name);
    const ReplayBuffer buf = collect_random_buffer(m, 10, 50, 21);
    validate_buffer(m, buf);
    // consecutive observations are one truncated step apart; allow sub-grid
    // quantization slack on the oracle measurement
    const double quant = 5.0 * m.sub_len() * std::sqrt(2.0) / m.max_step;
    for (const auto& ep : buf.episodes) {
      for (std::size_t t = 0; t + 1 < ep.size(); ++t) {
        REQUIRE(euclid(ep[t], ep[t + 1]) <= m.max_step + 1e-9);
        REQUIRE(geodesic(m, ep[t], ep[t + 1]) <= 1.0 + quant);
      }
    }
  }
}

TEST_CASE("buffer JSON round trip") {
  const Maze m = fixture("line3");
  const ReplayBuffer buf = collect_random_buffer(m, 3, 4, 5);
  const auto j = buffer_to_json(buf);
  const ReplayBuffer back = buffer_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.episodes.size() == buf.episodes.size());
  CHECK(buffer_to_json(back).dump() == j.dump());
  CHECK(back.seed == buf.seed);

  CHECK_THROWS_AS(buffer_from_json(nlohmann::json::parse("{}")), error);
  CHECK_THROWS_AS(buffer_from_json(nlohmann::json::parse("{\"episodes\":[[[1]]]}")),
                  error);
}

TEST_CASE("random mazes are deterministic and valid") {
  std::set<std::string> grids;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const Maze a = random_maze(seed);
    const Maze b = random_maze(seed);
    REQUIRE(a.width == b.width);
    REQUIRE(a.wall_ == b.wall_);
    REQUIRE(a.width >= 13);
    REQUIRE(a.free_cell_count() > 0);
    grids.insert(std::string(a.wall_.begin(), a.wall_.end()));
  }
  CHECK(grids.size() == 4);  // different seeds differ
}
