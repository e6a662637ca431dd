#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "smr/metrics.hpp"
#include "smr/scene_sim.hpp"
#include "smr/session.hpp"

namespace smr {

using Json = nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

/// A scenario file: world description, session overrides, and whether every
/// submap is expected to end up in one connected map.
struct ScenarioFile {
  ScenarioConfig scenario;
  SessionConfig session;
  bool full_connectivity = false;
};

/// Strict parse: unknown keys and wrong types throw kInvalidConfig naming
/// the field. The session seed follows the scenario rng_seed.
ScenarioFile scenario_from_json(const Json& j);
Json scenario_to_json(const ScenarioFile& file);

/// Throws kInvalidConfig mentioning the path when the file is missing and
/// kMalformedInput when it is not valid JSON.
Json read_json_file(const std::filesystem::path& path);
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Runs one mode on a loaded scenario and fills the config echo.
RunReport run_scenario(const ScenarioFile& file, Mode mode);

Json report_to_json(const RunReport& report);
RunReport report_from_json(const Json& j);

Json world_to_json(const World& world);

struct TumPose {
  double timestamp = 0.0;
  Pose pose;
};

/// `timestamp tx ty tz qx qy qz qw`, 9 significant digits, Hamilton
/// quaternion normalized with qw >= 0.
void write_tum(std::ostream& out, const std::vector<TumPose>& poses);
std::vector<TumPose> read_tum(std::istream& in);
std::vector<TumPose> keyframe_trajectory(const RunReport& report, bool estimated);

/// Undirected DOT graph: nodes carry keyframe counts, edges carry F, M,
/// theta and C, spanning-tree edges are bold.
std::string to_dot(const GraphSnapshot& graph);

std::string format_events_jsonl(const RunReport& report);

}  // namespace smr
