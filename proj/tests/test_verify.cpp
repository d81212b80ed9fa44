#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "sgm/verify.hpp"

using namespace sgm;

namespace {

ReplayBuffer small_buffer(const Maze& m, std::uint64_t seed) {
  return collect_random_buffer(m, 11, 9, seed);  // 110 states
}

std::size_t distinct_states(const ReplayBuffer& buf) {
  std::set<std::pair<double, double>> seen;
  for (const auto& ep : buf.episodes)
    for (const auto& o : ep) seen.insert({o.x, o.y});
  return seen.size();
}

// Random walks repeat positions exactly whenever a step is fully truncated at
// a wall, so tests that need duplicate-free input dedupe into one episode.
ReplayBuffer deduped(const ReplayBuffer& src) {
  ReplayBuffer out;
  out.seed = src.seed;
  out.episodes.emplace_back();
  std::set<std::pair<double, double>> seen;
  for (const auto& ep : src.episodes)
    for (const auto& o : ep)
      if (seen.insert({o.x, o.y}).second) out.episodes[0].push_back(o);
  return out;
}

}  // namespace

// ----------------------------------------------------------------------------

TEST_CASE("zero-tolerance aggregation keeps every distinct state") {
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = small_buffer(m, 101);
  const DistanceFunction d = grid_value_distance(m);

  const GapReport rep = verify_gap(buf, d, 0.0, 20, 7);
  CHECK(rep.dense_vertices == buf.total_states());
  CHECK(rep.sparse_vertices == distinct_states(buf));
  REQUIRE(rep.trials.size() == 20);
  for (const auto& t : rep.trials) {
    CHECK(t.bound_i == 0.0);
    CHECK(t.len_sparse == Catch::Approx(t.len_dense).margin(1e-12));
    CHECK(t.pass_i);
  }
  CHECK(rep.violations_i() == 0);
  CHECK(rep.positive_gaps() == 0);
}

TEST_CASE("a buffer of identical states compresses to a single vertex") {
  ReplayBuffer buf;
  buf.seed = 3;
  const Observation o{2.5, 2.5};
  buf.episodes.push_back({o, o, o});
  buf.episodes.push_back({o, o});

  const Maze m = fixture("fourrooms");
  const GapReport rep = verify_gap(buf, grid_value_distance(m), 0.0, 6, 11);
  CHECK(rep.dense_vertices == 5);
  CHECK(rep.sparse_vertices == 1);
  for (const auto& t : rep.trials) {
    CHECK(t.start == t.goal);
    CHECK(t.path_edges == 0);
    CHECK(t.len_dense == 0.0);
    CHECK(t.len_sparse == 0.0);
    CHECK(t.pass_i);
  }
}

TEST_CASE("compression never lengthens paths beyond the admissible growth") {
  for (const std::uint64_t maze_seed : {21u, 22u, 23u}) {
    const Maze m = random_maze(maze_seed);
    const ReplayBuffer buf = collect_random_buffer(m, 12, 9, maze_seed * 31 + 5);
    const DistanceFunction d = grid_value_distance(m);
    for (const double tau : {0.5, 2.0, 5.0}) {
      const GapReport rep = verify_gap(buf, d, tau, 20, maze_seed);
      INFO("maze seed " << maze_seed << " tau " << tau << " sparse " << rep.sparse_vertices
                        << "/" << rep.dense_vertices);
      CHECK(rep.violations_i() == 0);
      CHECK(rep.sparse_vertices <= rep.dense_vertices);
      CHECK(rep.sparse_vertices >= 1);
    }
  }
}

TEST_CASE("zero noise reduces the noisy pipeline to the plain one") {
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = small_buffer(m, 202);
  const DistanceFunction d = grid_value_distance(m);

  const GapReport plain = verify_gap(buf, d, 1.5, 15, 99);
  const GapReport noisy = verify_gap_noisy(buf, d, 0.0, 1.5, 15, 99);
  CHECK(std::isnan(plain.epsilon));
  CHECK(noisy.epsilon == 0.0);
  REQUIRE(noisy.trials.size() == plain.trials.size());
  for (std::size_t i = 0; i < plain.trials.size(); ++i) {
    const GapTrial &a = plain.trials[i], &b = noisy.trials[i];
    CHECK(a.start == b.start);
    CHECK(a.goal == b.goal);
    CHECK(a.len_dense == b.len_dense);
    CHECK(a.len_sparse == b.len_sparse);
    CHECK(b.bound_ii == a.bound_i);  // k*0 + 2*k*tau collapses to the growth bound
    CHECK(b.true_len_dense == b.len_dense);
    CHECK(b.pass_ii);
  }
}

TEST_CASE("unit noise with no compression bounds the repricing error by path size") {
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = deduped(small_buffer(m, 303));
  const DistanceFunction d = grid_value_distance(m);

  const GapReport rep = verify_gap_noisy(buf, d, 1.0, 0.0, 20, 17);
  CHECK(rep.sparse_vertices == buf.total_states());
  CHECK(rep.violations_i() == 0);
  CHECK(rep.violations_ii() == 0);
  for (const auto& t : rep.trials) CHECK(t.bound_ii == double(t.path_edges));
}

TEST_CASE("noise and compression together stay within the combined bound") {
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = small_buffer(m, 404);
  const DistanceFunction d = grid_value_distance(m);
  for (const double eps : {0.5, 1.0})
    for (const double tau : {1.0, 3.0}) {
      const GapReport rep = verify_gap_noisy(buf, d, eps, tau, 25, 23);
      INFO("eps " << eps << " tau " << tau << " sparse " << rep.sparse_vertices);
      CHECK(rep.violations_i() == 0);
      CHECK(rep.violations_ii() == 0);
    }
}

TEST_CASE("metric pricing keeps the direct edge optimal and the gap at zero") {
  // When the pricing function (almost) satisfies the triangle inequality, the
  // dense shortest path over a complete graph is the direct edge or a tie
  // with it, and the compressed graph keeps the direct edge verbatim -- so
  // compression costs nothing even when it deletes most vertices.
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = small_buffer(m, 505);
  const GapReport rep = verify_gap(buf, grid_value_distance(m), 2.0, 40, 29);
  CHECK(rep.sparse_vertices < rep.dense_vertices);
  CHECK(rep.violations_i() == 0);
  CHECK(rep.positive_gaps() == 0);
}

TEST_CASE("aggressive merging under non-metric pricing produces measurable growth") {
  // Value noise breaks the triangle inequality, so dense optima take
  // multi-edge shortcuts whose waypoints compression can delete; the
  // compressed path then really is longer, and the growth bound is exercised
  // rather than vacuously satisfied.
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = small_buffer(m, 505);
  const GapReport rep = verify_gap_noisy(buf, grid_value_distance(m), 1.0, 2.0, 40, 29);
  INFO("positive gaps " << rep.positive_gaps() << "/" << rep.trials.size() << " with "
                        << rep.sparse_vertices << " of " << rep.dense_vertices << " vertices");
  CHECK(rep.sparse_vertices < rep.dense_vertices);
  CHECK(rep.violations_i() == 0);
  CHECK(rep.violations_ii() == 0);
  CHECK(rep.positive_gaps() >= 1);
  std::size_t multi_edge = 0;
  for (const auto& t : rep.trials) multi_edge += t.path_edges > 1;
  CHECK(multi_edge >= 1);
}

TEST_CASE("gap reports serialize to csv and json") {
  const Maze m = fixture("fourrooms");
  const ReplayBuffer buf = small_buffer(m, 606);
  const DistanceFunction d = grid_value_distance(m);

  const GapReport plain = verify_gap(buf, d, 1.0, 5, 31);
  const std::string csv = gap_report_to_csv(plain);
  CHECK(csv.rfind("start,goal,k,len_dense,len_sparse,true_len,bound_i,bound_ii,pass_i,pass_ii\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + one row per trial
  CHECK(csv == gap_report_to_csv(verify_gap(buf, d, 1.0, 5, 31)));  // deterministic

  const auto j = gap_report_to_json(plain);
  CHECK(j["tau_a"] == 1.0);
  CHECK(j["epsilon"].is_null());
  CHECK(j["trials"].size() == 5);
  CHECK(j["trials"][0]["true_len"].is_null());
  CHECK(j["violations_i"] == 0);

  const auto jn = gap_report_to_json(verify_gap_noisy(buf, d, 0.5, 1.0, 5, 31));
  CHECK(jn["epsilon"] == 0.5);
  CHECK_FALSE(jn["trials"][0]["true_len"].is_null());
  CHECK_FALSE(jn["trials"][0]["bound_ii"].is_null());
}

TEST_CASE("gap measurement rejects empty buffers and degenerate requests") {
  const Maze m = fixture("fourrooms");
  const DistanceFunction d = grid_value_distance(m);
  const ReplayBuffer empty;
  const ReplayBuffer buf = small_buffer(m, 707);
  CHECK_THROWS_AS(verify_gap(empty, d, 1.0, 5, 1), error);
  CHECK_THROWS_AS(verify_gap(buf, d, 1.0, 0, 1), error);
  CHECK_THROWS_AS(verify_gap(buf, d, -0.5, 5, 1), error);
  CHECK_THROWS_AS(verify_gap_noisy(buf, d, -1.0, 1.0, 5, 1), error);

  // Exhaustive search is O(n^2) memory; oversized buffers must fail fast
  // instead of allocating gigabytes.
  const ReplayBuffer huge = collect_random_buffer(m, 1, 2000, 1);  // 2001 states
  CHECK_THROWS_AS(verify_gap(huge, d, 1.0, 5, 1), error);
}
