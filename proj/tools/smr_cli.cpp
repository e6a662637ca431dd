#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smr/errors.hpp"
#include "smr/io.hpp"
#include "smr/metrics.hpp"
#include "smr/scene_sim.hpp"
#include "smr/session.hpp"

namespace fs = std::filesystem;
using namespace smr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInternal = 3;
constexpr int kExitDominance = 4;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> strength_threshold;
  std::optional<int> fail_streak;
};

ScenarioFile load_with_overrides(const std::string& path, const Overrides& o) {
  ScenarioFile f = load_scenario(path);
  if (o.seed) {
    f.scenario.rng_seed = *o.seed;
    f.session.seed = *o.seed;
    f.session.merge.robust_options.seed = *o.seed;
  }
  if (o.strength_threshold) f.session.merge.strength_threshold = *o.strength_threshold;
  if (o.fail_streak) f.session.fail_streak = *o.fail_streak;
  validate(f.session);
  return f;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidConfig, "out: cannot write '" + path.string() + "'");
  out << text;
}

void write_run_artifacts(const RunReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
  for (bool estimated : {true, false}) {
    std::ofstream out(dir / (estimated ? "trajectory_estimated.tum" : "trajectory_groundtruth.tum"),
                      std::ios::binary);
    write_tum(out, keyframe_trajectory(report, estimated));
  }
  write_text(dir / "events.jsonl", format_events_jsonl(report));
  write_text(dir / "graph.dot", to_dot(report.graph));
}

RunReport execute(const ScenarioFile& f, Mode mode, bool deterministic) {
  RunReport r = run_scenario(f, mode);
  if (!deterministic) r.generated_at = utc_now();
  return r;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the scenario rng_seed");
  cmd->add_option("--strength-threshold", o.strength_threshold,
                  "Minimum connection strength for a merge");
  cmd->add_option("--fail-streak", o.fail_streak,
                  "Consecutive orientation failures before a new map is opened");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Submap tracking, merging and evaluation on simulated scenarios"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string scenario_path;
  std::vector<std::string> scenario_paths;
  std::string mode_name = "proposed";
  std::string out_dir;
  bool deterministic = false;

  CLI::App* run = app.add_subcommand("run", "Run one mode and write report, trajectories, events, graph");
  run->add_option("scenario", scenario_path, "Scenario JSON")->required();
  run->add_option("--mode", mode_name, "proposed | baseline")
      ->check(CLI::IsMember({"proposed", "baseline"}));
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--deterministic", deterministic, "Omit timestamps from the report");
  add_overrides(run, overrides);

  CLI::App* compare = app.add_subcommand("compare", "Run both modes and tabulate integrity and RMSE");
  compare->add_option("scenarios", scenario_paths, "Scenario JSON files")->required();
  compare->add_option("--out", out_dir, "Output directory");
  compare->add_flag("--deterministic", deterministic, "Omit timestamps from the reports");
  add_overrides(compare, overrides);

  std::string report_path;
  CLI::App* export_graph = app.add_subcommand("export-graph", "Print the submap graph of a report as DOT");
  export_graph->add_option("report", report_path, "report.json written by run")->required();

  int query_frame = -1;
  CLI::App* query = app.add_subcommand("query", "Show connected-frame retrieval for one frame");
  query->add_option("scenario", scenario_path, "Scenario JSON")->required();
  query->add_option("--frame", query_frame, "Frame id to query")->required();
  add_overrides(query, overrides);

  std::string kind_name = "uav_s_curve";
  std::string world_out;
  CLI::App* gen = app.add_subcommand("gen-scenario", "Write a scenario template or a generated world");
  gen->add_option("--kind", kind_name, "uav_s_curve | street_loop | indoor_room | waypoints");
  gen->add_option("--from", scenario_path, "Existing scenario to expand into a world");
  gen->add_option("--world-out", world_out, "Write the generated world JSON here");
  gen->add_option("--out", out_dir, "Write the scenario JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      const ScenarioFile f = load_with_overrides(scenario_path, overrides);
      const Mode mode = mode_from_string(mode_name);
      const RunReport r = execute(f, mode, deterministic);
      const fs::path dir = out_dir.empty() ? fs::path("out") / f.scenario.name / to_string(mode)
                                           : fs::path(out_dir);
      write_run_artifacts(r, dir);
      std::printf("%s %s: keyframes=%zu submaps=%zu merges=%zu ate_rmse_cm=%.3f -> %s\n",
                  f.scenario.name.c_str(), to_string(mode).c_str(), r.keyframes_retained,
                  r.submap_count_final, r.merge_events.size(), r.ate_rmse_cm, dir.string().c_str());
      return kExitOk;
    }

    if (*compare) {
      const fs::path root = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
      std::vector<ComparisonRow> rows;
      for (const std::string& path : scenario_paths) {
        const ScenarioFile f = load_with_overrides(path, overrides);
        const RunReport p = execute(f, Mode::kProposed, deterministic);
        const RunReport b = execute(f, Mode::kBaseline, deterministic);
        write_run_artifacts(p, root / f.scenario.name / "proposed");
        write_run_artifacts(b, root / f.scenario.name / "baseline");
        rows.push_back(compare_modes(p, b));
      }
      const std::string text = format_comparison_text(rows);
      fs::create_directories(root);
      write_text(root / "comparison.txt", text);
      write_text(root / "comparison.csv", format_comparison_csv(rows));
      std::cout << text;
      for (const ComparisonRow& r : rows) {
        if (!r.integrity_dominates) {
          std::cerr << "dominance violated on " << r.scenario << "\n";
          return kExitDominance;
        }
      }
      return kExitOk;
    }

    if (*export_graph) {
      const RunReport r = report_from_json(read_json_file(report_path));
      std::cout << to_dot(r.graph);
      return kExitOk;
    }

    if (*query) {
      const ScenarioFile f = load_with_overrides(scenario_path, overrides);
      const World world = generate_world(f.scenario);
      if (query_frame < 0 || query_frame >= static_cast<int>(world.frames.size())) {
        throw Error(ErrorCode::kInvalidConfig, "frame: " + std::to_string(query_frame) +
                                                   " outside [0, " +
                                                   std::to_string(world.frames.size()) + ")");
      }
      Session session(world.landmarks, f.session, Mode::kProposed);
      for (int i = 0; i < query_frame; ++i) session.step(world.frames[i]);
      const Frame& frame = world.frames[query_frame];
      const SessionState& st = session.state();

      Json out{{"frame_id", frame.id},
               {"status", to_string(st.status)},
               {"current_map", st.current_map.name}};
      Json stack = Json::array();
      for (const Submap& s : st.stack_L) stack.push_back(s.name);
      out["stack"] = stack;
      try {
        const AdjacentAndNearby sel =
            select_adjacent_and_nearby50(frame, st.current_map, f.session.nearby_window);
        const AdaptiveThresholds th =
            compute_thresholds(frame, sel.adjacent->frame, sel.nearby50->frame);
        out["adjacent_frame"] = sel.adjacent->frame.id;
        out["nearby50_frame"] = sel.nearby50->frame.id;
        out["thresholds"] = Json{{"k", th.k}, {"l", th.l}, {"n0", th.n0},
                                 {"n1", th.n1}, {"s0", th.s0}, {"s1", th.s1}};
        std::vector<const Submap*> others;
        for (const Submap& s : st.stack_L) others.push_back(&s);
        Json matches = Json::array();
        for (const ConnectedFrameMatch& m : retrieve_connected_frames(frame, others, th)) {
          matches.push_back(Json{{"submap", submap_label(m.matched_submap_id)},
                                 {"frame_id", m.matched_frame_id},
                                 {"common_words", m.common_words},
                                 {"score", m.score}});
        }
        out["matches"] = matches;
      } catch (const Error& e) {
        out["retrieval_error"] = e.what();
      }
      Json edges = Json::array();
      for (const auto& [key, e] : st.book.graph.edges()) {
        edges.push_back(Json{{"a", submap_label(key.first)}, {"b", submap_label(key.second)},
                             {"F", e.F}, {"M", e.M}, {"theta_deg", e.theta_median_deg}, {"C", e.C}});
      }
      out["edges"] = edges;
      std::cout << out.dump(2) << "\n";
      return kExitOk;
    }

    if (*gen) {
      ScenarioFile f;
      if (!scenario_path.empty()) {
        f = load_scenario(scenario_path);
      } else {
        f.scenario.name = kind_name;
        f.scenario.trajectory_kind = trajectory_kind_from_string(kind_name);
        f.scenario.frame_count = 200;
        f.scenario.landmark_count = 2000;
        f.scenario.vocabulary_size = 1000;
        if (f.scenario.trajectory_kind == TrajectoryKind::kWaypoints) {
          f.scenario.waypoints.waypoints = {{0, Point3(0, 0, 20)}, {199, Point3(100, 0, 20)}};
        }
        validate(f.scenario);
      }
      const std::string text = scenario_to_json(f).dump(2) + "\n";
      if (out_dir.empty()) {
        std::cout << text;
      } else {
        write_text(out_dir, text);
      }
      if (!world_out.empty()) write_text(world_out, world_to_json(generate_world(f.scenario)).dump() + "\n");
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::kInvalidConfig:
      case ErrorCode::kMalformedInput:
      case ErrorCode::kScenarioMismatch:
        return kExitConfig;
      default:
        return kExitInternal;
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
