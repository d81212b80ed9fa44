#pragma once
// Command-line driver: reproducible experiment commands over config files
// with flag overrides.  Every command is a pure function of (config, input
// files, seed) apart from wall-clock fields; artifacts are written atomically
// (temp file + rename) and errors leave as machine-readable JSON on stderr
// with a nonzero exit code.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "sgm/bench.hpp"
#include "sgm/verify.hpp"

namespace sgm {

// ---- experiment configuration ----------------------------------------------

// Flat "key = value" text with dotted section prefixes; '#' starts a comment.
// Later assignments override earlier ones, and command-line flags override the
// file.  Unknown keys are rejected so typos fail loudly.
struct ExperimentConfig {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw error("config: key '" + key + "' expects a number, got '" + it->second + "'");
    }
  }
  long integer(const std::string& key, long fallback) const {
    const double v = num(key, double(fallback));
    const long n = long(v);
    if (double(n) != v) throw error("config: key '" + key + "' expects an integer");
    return n;
  }
  std::uint64_t uid(const std::string& key, std::uint64_t fallback) const {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      return std::stoull(it->second);
    } catch (const std::exception&) {
      throw error("config: key '" + key + "' expects an unsigned integer, got '" + it->second +
                  "'");
    }
  }
  std::vector<std::string> list(const std::string& key, const std::string& fallback) const {
    const std::string raw = str(key, fallback);
    std::vector<std::string> items;
    std::string cur;
    for (const char c : raw) {
      if (c == ',') {
        if (!cur.empty()) items.push_back(cur);
        cur.clear();
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) items.push_back(cur);
    return items;
  }
};

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "maze",          "distance",        "strategy",          "controller",
      "seed",          "out",             "build.tau_a",       "build.tau_p",
      "build.max_dist", "build.knn",      "exec.acting_cutoff", "exec.max_steps_per_edge",
      "exec.episode_budget", "exec.goal_radius", "explore.episodes", "explore.horizon",
      "eval.episodes", "eval.bins",       "eval.attempts",     "cleanup.budget",
      "curve.checkpoints", "ablate.strategies", "ablate.seeds", "ablate.budget",
      "verify.tau_a",  "verify.epsilon",  "verify.pairs",      "timing.actions",
      "stats.bin_width", "stats.long_threshold"};
  return keys;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw error("config line " + std::to_string(lineno) + ": empty key");
    if (!known_config_keys().count(key))
      throw error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    cfg.kv[key] = value;
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw error("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_experiment_config(ss.str());
}

// ---- shared plumbing -------------------------------------------------------

inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw error("cannot open '" + tmp.string() + "' for writing");
    f << content;
    if (!f.good()) throw error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw error("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline Maze resolve_maze(const std::string& spec) {
  static const std::set<std::string> fixtures = {"fourrooms", "fourrooms-thin", "fourrooms-mid",
                                                 "line3", "hallway4"};
  if (fixtures.count(spec)) return fixture(spec);
  if (spec.rfind("random:", 0) == 0) {
    try {
      return random_maze(std::stoull(spec.substr(7)));
    } catch (const std::exception&) {
      throw error("maze spec '" + spec + "': expected random:<seed>");
    }
  }
  if (std::filesystem::exists(spec))
    return load_maze(read_file(spec), std::filesystem::path(spec).stem().string());
  throw error("maze '" + spec + "' is neither a fixture, random:<seed>, nor a readable file");
}

inline BuildParams build_params_from(const ExperimentConfig& cfg, const std::string& strategy) {
  BuildParams p;
  // The dense baseline conventionally runs with a shorter edge range; an
  // explicit build.max_dist always wins.
  if (strategy == "dense") p.max_dist = 6.0;
  p.tau_a = cfg.num("build.tau_a", p.tau_a);
  p.tau_p = cfg.num("build.tau_p", p.tau_p);
  p.max_dist = cfg.num("build.max_dist", p.max_dist);
  p.knn = int(cfg.integer("build.knn", p.knn));
  return p;
}

inline ExecParams exec_params_from(const ExperimentConfig& cfg) {
  ExecParams xp;
  xp.acting_cutoff = cfg.num("exec.acting_cutoff", xp.acting_cutoff);
  xp.max_steps_per_edge = int(cfg.integer("exec.max_steps_per_edge", xp.max_steps_per_edge));
  xp.episode_budget = int(cfg.integer("exec.episode_budget", xp.episode_budget));
  xp.goal_radius = cfg.num("exec.goal_radius", xp.goal_radius);
  return xp;
}

inline Controller controller_from(const ExperimentConfig& cfg, const Maze& m) {
  const std::string name = cfg.str("controller", "greedy");
  if (name == "greedy") return greedy_controller(m.max_step);
  if (name == "sliding") return sliding_controller(m.max_step);
  throw error("config: controller must be 'greedy' or 'sliding', got '" + name + "'");
}

struct CommandEnv {
  ExperimentConfig cfg;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  Maze maze() const { return resolve_maze(cfg.str("maze", "fourrooms")); }
  std::uint64_t seed() const { return cfg.uid("seed", 0); }
  std::string out_dir() const { return cfg.str("out", "."); }
  std::string artifact(const std::string& name) const {
    return (std::filesystem::path(out_dir()) / name).string();
  }
  void emit(const nlohmann::ordered_json& j) const { *out << j.dump() << "\n"; }
};

inline GraphMemory load_graph(const std::string& path) {
  return deserialize(nlohmann::json::parse(read_file(path)));
}

inline ReplayBuffer load_buffer(const std::string& path) {
  return buffer_from_json(nlohmann::json::parse(read_file(path)));
}

// ---- commands --------------------------------------------------------------

inline int cmd_explore(const CommandEnv& env) {
  const Maze m = env.maze();
  const int episodes = int(env.cfg.integer("explore.episodes", 100));
  const int horizon = int(env.cfg.integer("explore.horizon", 100));
  const ReplayBuffer buf = collect_random_buffer(m, episodes, horizon, env.seed());

  std::set<std::pair<int, int>> cells;
  for (const auto& ep : buf.episodes)
    for (const auto& o : ep)
      cells.insert({int(o.x / m.cell_size), int(o.y / m.cell_size)});
  const double coverage = double(cells.size()) / double(m.free_cell_count());

  const std::string path = env.artifact("buffer.json");
  write_file_atomic(path, buffer_to_json(buf).dump(2) + "\n");
  env.emit({{"file", path}, {"states", buf.total_states()}, {"coverage", coverage}});
  return 0;
}

inline int cmd_build(const CommandEnv& env, const std::string& buffer_path) {
  const Maze m = env.maze();
  const ReplayBuffer buf = load_buffer(buffer_path);
  const std::string strategy = env.cfg.str("strategy", "two-way");
  const BuildParams p = build_params_from(env.cfg, strategy);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  const auto [g, report] = build_with_strategy(buf, d, scaled_identity_embedding(m), p, strategy);

  const std::string path = env.artifact("graph.json");
  write_file_atomic(path, serialize(g).dump(2) + "\n");
  nlohmann::ordered_json j = report_to_json(report);
  j["strategy"] = strategy;
  j["file"] = path;
  env.emit(j);
  return 0;
}

inline int cmd_eval(const CommandEnv& env, const std::string& graph_path) {
  const Maze m = env.maze();
  GraphMemory g = load_graph(graph_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  SuccessTable table = eval_success(m, g, d, controller_from(env.cfg, m), exec_params_from(env.cfg),
                                    std::size_t(env.cfg.integer("eval.episodes", 60)),
                                    int(env.cfg.integer("eval.bins", 3)), env.seed());
  for (SuccessRow& r : table.rows) r.strategy = g.params.aggregation_string();

  const std::string path = env.artifact("eval.csv");
  write_file_atomic(path, success_table_to_csv(table));
  const SuccessRow& all = table.rows.front();
  env.emit({{"file", path},
            {"success", all.success},
            {"episodes", all.episodes},
            {"deficit", all.deficit}});
  return 0;
}

inline int cmd_cleanup(const CommandEnv& env, const std::string& graph_path) {
  const Maze m = env.maze();
  GraphMemory g = load_graph(graph_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  const long budget = env.cfg.integer("cleanup.budget", 1000);
  const CleanupReport rep = cleanup(m, g, d, controller_from(env.cfg, m), exec_params_from(env.cfg),
                                    budget, env.seed());

  const std::string gpath = env.artifact("graph.json");
  write_file_atomic(gpath, serialize(g).dump(2) + "\n");
  std::ostringstream removals;
  removals << "src,dst\n";
  for (const auto& [s, t] : rep.edges_removed) removals << s << ',' << t << '\n';
  const std::string rpath = env.artifact("removals.csv");
  write_file_atomic(rpath, removals.str());
  env.emit({{"file", gpath},
            {"removals", rpath},
            {"steps_used", rep.steps_used},
            {"edges_removed", rep.edges_removed.size()},
            {"episodes", rep.episodes}});
  return 0;
}

inline int cmd_curve(const CommandEnv& env, const std::string& graph_path) {
  const Maze m = env.maze();
  GraphMemory g = load_graph(graph_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  std::vector<long> checkpoints;
  for (const std::string& s : env.cfg.list("curve.checkpoints", "0"))
    try {
      checkpoints.push_back(std::stol(s));
    } catch (const std::exception&) {
      throw error("config: curve.checkpoints expects integers, got '" + s + "'");
    }
  EvalSpec spec;
  spec.episodes = std::size_t(env.cfg.integer("eval.episodes", 60));
  spec.bins = int(env.cfg.integer("eval.bins", 3));
  spec.attempts_per_episode = int(env.cfg.integer("eval.attempts", 500));
  const auto curve = cleanup_curve(m, g, d, controller_from(env.cfg, m), exec_params_from(env.cfg),
                                   checkpoints, spec, env.seed());

  const std::string path = env.artifact("curve.csv");
  write_file_atomic(path, curve_to_csv(curve));
  env.emit({{"file", path},
            {"points", curve.size()},
            {"first_success", curve.front().success},
            {"final_success", curve.back().success}});
  return 0;
}

inline int cmd_ablate(const CommandEnv& env, const std::string& buffer_path) {
  const Maze m = env.maze();
  const ReplayBuffer buf = load_buffer(buffer_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  const BuildParams p = build_params_from(env.cfg, "two-way");
  std::vector<std::uint64_t> seeds;
  for (const std::string& s : env.cfg.list("ablate.seeds", "1,2,3,4,5"))
    try {
      seeds.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw error("config: ablate.seeds expects unsigned integers, got '" + s + "'");
    }
  EvalSpec spec;
  spec.episodes = std::size_t(env.cfg.integer("eval.episodes", 60));
  spec.bins = int(env.cfg.integer("eval.bins", 3));
  spec.attempts_per_episode = int(env.cfg.integer("eval.attempts", 500));
  const SuccessTable table = ablation_table(
      m, buf, d, scaled_identity_embedding(m), p, controller_from(env.cfg, m),
      exec_params_from(env.cfg),
      env.cfg.list("ablate.strategies",
                   "two-way,incoming-only,outgoing-only,perceptual-only,uniform"),
      env.cfg.integer("ablate.budget", 1000), spec, seeds);

  const std::string path = env.artifact("ablation.csv");
  write_file_atomic(path, success_table_to_csv(table));
  env.emit({{"file", path}, {"rows", table.rows.size()}});
  return 0;
}

inline int cmd_verify(const CommandEnv& env, const std::string& buffer_path) {
  const Maze m = env.maze();
  const ReplayBuffer buf = load_buffer(buffer_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  const double tau = env.cfg.num("verify.tau_a", 1.0);
  const std::size_t pairs = std::size_t(env.cfg.integer("verify.pairs", 50));
  const GapReport rep =
      env.cfg.has("verify.epsilon")
          ? verify_gap_noisy(buf, d, env.cfg.num("verify.epsilon", 0.0), tau, pairs, env.seed())
          : verify_gap(buf, d, tau, pairs, env.seed());

  const std::string cpath = env.artifact("gap.csv");
  write_file_atomic(cpath, gap_report_to_csv(rep));
  const std::string jpath = env.artifact("gap.json");
  write_file_atomic(jpath, gap_report_to_json(rep).dump(2) + "\n");
  env.emit({{"csv", cpath},
            {"json", jpath},
            {"trials", rep.trials.size()},
            {"violations_i", rep.violations_i()},
            {"violations_ii", rep.violations_ii()},
            {"positive_gaps", rep.positive_gaps()}});
  return 0;
}

inline int cmd_timing(const CommandEnv& env, const std::string& dense_path,
                      const std::string& sparse_path) {
  const Maze m = env.maze();
  GraphMemory dense_g = load_graph(dense_path);
  GraphMemory sparse_g = load_graph(sparse_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  const TimingReport rep = timing(m, dense_g, sparse_g, d, exec_params_from(env.cfg),
                                  std::size_t(env.cfg.integer("timing.actions", 200)),
                                  env.seed());
  const std::string path = env.artifact("timing.csv");
  write_file_atomic(path, timing_to_csv(rep));
  env.emit({{"file", path},
            {"dense_mean_s", rep.dense.mean_s},
            {"sparse_mean_s", rep.sparse.mean_s},
            {"ratio", rep.ratio()}});
  return 0;
}

inline int cmd_stats(const CommandEnv& env, const std::string& graph_path) {
  const Maze m = env.maze();
  GraphMemory g = load_graph(graph_path);
  const DistanceFunction d = parse_distance(m, env.cfg.str("distance", "oracle"));
  const ExecParams xp = exec_params_from(env.cfg);
  EvalSpec spec;
  spec.episodes = std::size_t(env.cfg.integer("eval.episodes", 60));
  spec.bins = int(env.cfg.integer("eval.bins", 3));
  spec.attempts_per_episode = int(env.cfg.integer("eval.attempts", 500));
  const StratifiedEval ev =
      run_stratified_eval(m, g, d, controller_from(env.cfg, m), xp, spec, env.seed());
  const PathStats st = path_length_stats(ev.results);

  const double threshold = env.cfg.num("stats.long_threshold", 2.0 * g.params.max_dist);
  const EdgeHistogram h =
      edge_length_histogram(m, g, threshold, env.cfg.num("stats.bin_width", 1.0));
  const std::string hpath = env.artifact("edge_hist.csv");
  write_file_atomic(hpath, histogram_to_csv(h));

  nlohmann::ordered_json j;
  j["episodes"] = ev.results.size();
  j["successes"] = st.successes;
  j["mean_steps"] = st.successes ? nlohmann::ordered_json(st.mean_steps)
                                 : nlohmann::ordered_json(nullptr);
  j["median_steps"] = st.successes ? nlohmann::ordered_json(st.median_steps)
                                   : nlohmann::ordered_json(nullptr);
  j["episode_budget"] = xp.episode_budget;
  j["long_edge_fraction"] = h.long_edge_fraction();
  j["long_threshold"] = threshold;
  j["edge_hist"] = hpath;
  const std::string jpath = env.artifact("paths.json");
  write_file_atomic(jpath, j.dump(2) + "\n");
  env.emit(j);
  return 0;
}

// ---- argument parsing and dispatch -----------------------------------------

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sparse graph memories over replay buffers: build, plan, repair, measure"};
  app.require_subcommand(1);

  std::string config_path, seed_ov, maze_ov, distance_ov, strategy_ov, out_ov;
  std::string in1, in2;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file with 'key = value' lines");
    sub->add_option("--seed", seed_ov, "override the config seed");
    sub->add_option("--maze", maze_ov, "fixture name, random:<seed>, or maze file");
    sub->add_option("--distance", distance_ov, "distance spec override");
    sub->add_option("--strategy", strategy_ov, "build strategy override");
    sub->add_option("--out", out_ov, "output directory override");
  };

  CLI::App* explore = app.add_subcommand("explore", "collect a random-walk replay buffer");
  add_common(explore);
  CLI::App* build = app.add_subcommand("build", "build a graph memory from a buffer");
  add_common(build);
  build->add_option("buffer", in1, "buffer JSON file")->required();
  CLI::App* eval = app.add_subcommand("eval", "measure stratified success on a frozen graph");
  add_common(eval);
  eval->add_option("graph", in1, "graph JSON file")->required();
  CLI::App* clean = app.add_subcommand("cleanup", "remove edges the controller cannot execute");
  add_common(clean);
  clean->add_option("graph", in1, "graph JSON file")->required();
  CLI::App* curve = app.add_subcommand("curve", "success as a function of cleanup budget");
  add_common(curve);
  curve->add_option("graph", in1, "graph JSON file")->required();
  CLI::App* ablate = app.add_subcommand("ablate", "compare vertex-selection strategies");
  add_common(ablate);
  ablate->add_option("buffer", in1, "buffer JSON file")->required();
  CLI::App* verify = app.add_subcommand("verify", "path-length gap bounds on complete graphs");
  add_common(verify);
  verify->add_option("buffer", in1, "buffer JSON file")->required();
  CLI::App* tim = app.add_subcommand("timing", "per-action latency of two graphs");
  add_common(tim);
  tim->add_option("dense", in1, "baseline graph JSON file")->required();
  tim->add_option("sparse", in2, "compressed graph JSON file")->required();
  CLI::App* stats = app.add_subcommand("stats", "path-length and edge-length statistics");
  add_common(stats);
  stats->add_option("graph", in1, "graph JSON file")->required();

  try {
    std::vector<const char*> argv;
    argv.push_back("sgm");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << nlohmann::ordered_json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }

  try {
    CommandEnv env;
    if (!config_path.empty()) env.cfg = load_experiment_config(config_path);
    if (!seed_ov.empty()) env.cfg.kv["seed"] = seed_ov;
    if (!maze_ov.empty()) env.cfg.kv["maze"] = maze_ov;
    if (!distance_ov.empty()) env.cfg.kv["distance"] = distance_ov;
    if (!strategy_ov.empty()) env.cfg.kv["strategy"] = strategy_ov;
    if (!out_ov.empty()) env.cfg.kv["out"] = out_ov;
    env.out = &out;
    env.err = &err;

    if (app.got_subcommand(explore)) return cmd_explore(env);
    if (app.got_subcommand(build)) return cmd_build(env, in1);
    if (app.got_subcommand(eval)) return cmd_eval(env, in1);
    if (app.got_subcommand(clean)) return cmd_cleanup(env, in1);
    if (app.got_subcommand(curve)) return cmd_curve(env, in1);
    if (app.got_subcommand(ablate)) return cmd_ablate(env, in1);
    if (app.got_subcommand(verify)) return cmd_verify(env, in1);
    if (app.got_subcommand(tim)) return cmd_timing(env, in1, in2);
    if (app.got_subcommand(stats)) return cmd_stats(env, in1);
    throw error("no subcommand dispatched");  // unreachable with require_subcommand
  } catch (const std::exception& e) {
    err << nlohmann::ordered_json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}

}  // namespace sgm
