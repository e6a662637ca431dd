#include "smr/io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

#include "smr/errors.hpp"

namespace smr {
namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + what);
}

std::string join(const std::string& ctx, const std::string& key) {
  return ctx.empty() ? key : ctx + "." + key;
}

// Strict object reader: every key must be consumed, types are checked.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) invalid(ctx_.empty() ? "scenario" : ctx_, "must be a JSON object");
  }

  template <class T>
  void opt(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    out = convert<T>(*it, join(ctx_, key));
  }

  template <class T>
  void req(const std::string& key, T& out) {
    if (!j_.contains(key)) invalid(join(ctx_, key), "is required");
    opt(key, out);
  }

  const Json* sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) invalid(join(ctx_, it.key()), "unknown field");
    }
  }

  template <class T>
  static T convert(const Json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) invalid(field, "must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) invalid(field, "must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) invalid(field, "must be a non-negative integer");
      return v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) invalid(field, "must be an integer");
      return v.get<T>();
    } else {
      if (!v.is_number()) invalid(field, "must be a number");
      return v.get<T>();
    }
  }

 private:
  const Json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

Point3 read_point(const Json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 3) invalid(field, "must be an array of 3 numbers");
  Point3 p;
  for (int i = 0; i < 3; ++i) p[i] = ObjectReader::convert<double>(v[i], field);
  return p;
}

Json point_json(const Vec3& p) { return Json::array({p.x(), p.y(), p.z()}); }

Json pose_json(const Pose& pose) {
  Json r = Json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(pose.rotation(i, k));
  }
  return Json{{"R", r}, {"t", point_json(pose.translation)}};
}

Pose pose_from_json(const Json& j) {
  const Json& r = j.at("R");
  if (!r.is_array() || r.size() != 9) {
    throw Error(ErrorCode::kMalformedInput, "pose rotation must have 9 entries");
  }
  Pose p;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) p.rotation(i, k) = r.at(3 * i + k).get<double>();
  }
  const Json& t = j.at("t");
  for (int i = 0; i < 3; ++i) p.translation[i] = t.at(i).get<double>();
  return p;
}

void read_trajectory(ScenarioConfig& c, const Json& j) {
  ObjectReader r(j, "trajectory");
  switch (c.trajectory_kind) {
    case TrajectoryKind::kUavSCurve:
      r.opt("height_m", c.uav.height_m);
      r.opt("strip_length_m", c.uav.strip_length_m);
      r.opt("strip_spacing_m", c.uav.strip_spacing_m);
      r.opt("strip_count", c.uav.strip_count);
      r.opt("relief_m", c.uav.relief_m);
      break;
    case TrajectoryKind::kStreetLoop:
    case TrajectoryKind::kIndoorRoom:
      r.opt("width_m", c.loop.width_m);
      r.opt("depth_m", c.loop.depth_m);
      r.opt("standoff_m", c.loop.standoff_m);
      r.opt("corner_radius_m", c.loop.corner_radius_m);
      r.opt("camera_height_m", c.loop.camera_height_m);
      r.opt("wall_height_m", c.loop.wall_height_m);
      r.opt("wall_jitter_m", c.loop.wall_jitter_m);
      r.opt("laps", c.loop.laps);
      break;
    case TrajectoryKind::kWaypoints: {
      r.opt("ground_margin_m", c.waypoints.ground_margin_m);
      r.opt("relief_m", c.waypoints.relief_m);
      if (const Json* wps = r.sub("waypoints")) {
        if (!wps->is_array()) invalid("trajectory.waypoints", "must be an array");
        for (std::size_t i = 0; i < wps->size(); ++i) {
          const std::string ctx = "trajectory.waypoints[" + std::to_string(i) + "]";
          ObjectReader w((*wps)[i], ctx);
          Waypoint wp;
          w.req("frame", wp.frame);
          const Json* pos = w.sub("position");
          if (pos == nullptr) invalid(ctx + ".position", "is required");
          wp.position = read_point(*pos, ctx + ".position");
          w.finish();
          c.waypoints.waypoints.push_back(wp);
        }
      }
      break;
    }
  }
  r.finish();
}

Json trajectory_json(const ScenarioConfig& c) {
  switch (c.trajectory_kind) {
    case TrajectoryKind::kUavSCurve:
      return Json{{"height_m", c.uav.height_m},
                  {"strip_length_m", c.uav.strip_length_m},
                  {"strip_spacing_m", c.uav.strip_spacing_m},
                  {"strip_count", c.uav.strip_count},
                  {"relief_m", c.uav.relief_m}};
    case TrajectoryKind::kStreetLoop:
    case TrajectoryKind::kIndoorRoom:
      return Json{{"width_m", c.loop.width_m},
                  {"depth_m", c.loop.depth_m},
                  {"standoff_m", c.loop.standoff_m},
                  {"corner_radius_m", c.loop.corner_radius_m},
                  {"camera_height_m", c.loop.camera_height_m},
                  {"wall_height_m", c.loop.wall_height_m},
                  {"wall_jitter_m", c.loop.wall_jitter_m},
                  {"laps", c.loop.laps}};
    case TrajectoryKind::kWaypoints: {
      Json wps = Json::array();
      for (const Waypoint& w : c.waypoints.waypoints) {
        wps.push_back(Json{{"frame", w.frame}, {"position", point_json(w.position)}});
      }
      return Json{{"waypoints", wps},
                  {"ground_margin_m", c.waypoints.ground_margin_m},
                  {"relief_m", c.waypoints.relief_m}};
    }
  }
  return Json::object();
}

void read_session(SessionConfig& s, const Json& j) {
  ObjectReader r(j, "session");
  r.opt("fail_streak", s.fail_streak);
  r.opt("keyframe_stride", s.keyframe_stride);
  r.opt("min_init_landmarks", s.min_init_landmarks);
  r.opt("min_init_parallax_deg", s.min_init_parallax_deg);
  r.opt("init_buffer_max", s.init_buffer_max);
  r.opt("min_track_landmarks", s.min_track_landmarks);
  r.opt("query_stride", s.query_stride);
  r.opt("nearby_window", s.nearby_window);
  r.opt("strength_threshold", s.merge.strength_threshold);
  r.opt("merge_residual_cap", s.merge.merge_residual_cap);
  r.opt("min_shared_points", s.merge.min_shared_points);
  r.opt("robust", s.merge.robust);
  r.opt("robust_inlier_threshold", s.merge.robust_options.inlier_threshold);
  r.opt("robust_iterations", s.merge.robust_options.iterations);
  r.finish();
}

Json session_json(const SessionConfig& s) {
  return Json{{"fail_streak", s.fail_streak},
              {"keyframe_stride", s.keyframe_stride},
              {"min_init_landmarks", s.min_init_landmarks},
              {"min_init_parallax_deg", s.min_init_parallax_deg},
              {"init_buffer_max", s.init_buffer_max},
              {"min_track_landmarks", s.min_track_landmarks},
              {"query_stride", s.query_stride},
              {"nearby_window", s.nearby_window},
              {"strength_threshold", s.merge.strength_threshold},
              {"merge_residual_cap", s.merge.merge_residual_cap},
              {"min_shared_points", s.merge.min_shared_points},
              {"robust", s.merge.robust},
              {"robust_inlier_threshold", s.merge.robust_options.inlier_threshold},
              {"robust_iterations", s.merge.robust_options.iterations}};
}

}  // namespace

ScenarioFile scenario_from_json(const Json& j) {
  ScenarioFile f;
  ScenarioConfig& c = f.scenario;
  ObjectReader r(j, "");
  int version = 0;
  r.req("schema_version", version);
  if (version != kScenarioSchemaVersion) {
    invalid("schema_version", "unsupported version " + std::to_string(version));
  }
  r.req("name", c.name);
  std::string kind;
  r.req("trajectory_kind", kind);
  c.trajectory_kind = trajectory_kind_from_string(kind);
  r.req("frame_count", c.frame_count);
  r.req("landmark_count", c.landmark_count);
  r.opt("vocabulary_size", c.vocabulary_size);
  if (const Json* cam = r.sub("camera")) {
    ObjectReader cr(*cam, "camera");
    cr.opt("fov_deg", c.camera.fov_deg);
    cr.opt("max_range_m", c.camera.max_range_m);
    cr.finish();
  }
  if (const Json* ws = r.sub("failure_windows")) {
    if (!ws->is_array()) invalid("failure_windows", "must be an array");
    for (std::size_t i = 0; i < ws->size(); ++i) {
      ObjectReader wr((*ws)[i], "failure_windows[" + std::to_string(i) + "]");
      FailureWindow w;
      wr.req("start_frame", w.start_frame);
      wr.req("end_frame", w.end_frame);
      wr.finish();
      c.failure_windows.push_back(w);
    }
  }
  r.opt("observation_dropout_in_failure", c.observation_dropout_in_failure);
  r.opt("failure_speedup", c.failure_speedup);
  r.opt("frame_rate_hz", c.frame_rate_hz);
  if (const Json* n = r.sub("noise")) {
    ObjectReader nr(*n, "noise");
    nr.opt("pose_sigma_m", c.noise.pose_sigma_m);
    nr.opt("point_sigma_m", c.noise.point_sigma_m);
    nr.finish();
  }
  r.opt("rng_seed", c.rng_seed);
  if (const Json* t = r.sub("trajectory")) read_trajectory(c, *t);
  if (const Json* s = r.sub("session")) read_session(f.session, *s);
  r.opt("full_connectivity", f.full_connectivity);
  r.finish();

  f.session.noise = c.noise;
  f.session.seed = c.rng_seed;
  f.session.merge.robust_options.seed = c.rng_seed;
  validate(c);
  validate(f.session);
  return f;
}

Json scenario_to_json(const ScenarioFile& f) {
  const ScenarioConfig& c = f.scenario;
  Json windows = Json::array();
  for (const FailureWindow& w : c.failure_windows) {
    windows.push_back(Json{{"start_frame", w.start_frame}, {"end_frame", w.end_frame}});
  }
  return Json{{"schema_version", kScenarioSchemaVersion},
              {"name", c.name},
              {"trajectory_kind", to_string(c.trajectory_kind)},
              {"frame_count", c.frame_count},
              {"landmark_count", c.landmark_count},
              {"vocabulary_size", c.vocabulary_size},
              {"camera", Json{{"fov_deg", c.camera.fov_deg}, {"max_range_m", c.camera.max_range_m}}},
              {"failure_windows", windows},
              {"observation_dropout_in_failure", c.observation_dropout_in_failure},
              {"failure_speedup", c.failure_speedup},
              {"frame_rate_hz", c.frame_rate_hz},
              {"noise", Json{{"pose_sigma_m", c.noise.pose_sigma_m},
                             {"point_sigma_m", c.noise.point_sigma_m}}},
              {"rng_seed", c.rng_seed},
              {"trajectory", trajectory_json(c)},
              {"session", session_json(f.session)},
              {"full_connectivity", f.full_connectivity}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("path", "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(read_json_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

RunReport run_scenario(const ScenarioFile& file, Mode mode) {
  const World world = generate_world(file.scenario);
  RunReport report = run_session(world, file.session, mode, file.scenario.name);
  report.config_echo = scenario_to_json(file).dump();
  return report;
}

Json report_to_json(const RunReport& r) {
  Json merges = Json::array();
  for (const MergeRecord& m : r.merge_events) {
    merges.push_back(Json{{"frame_id", m.frame_id},     {"target", m.target},
                          {"source", m.source},         {"target_name", m.target_name},
                          {"source_name", m.source_name}, {"F", m.F},
                          {"M", m.M},                   {"theta_deg", m.theta_deg},
                          {"C", m.C},                   {"residual_rms", m.residual_rms},
                          {"scale", m.scale}});
  }
  Json submaps = Json::array();
  for (const SubmapStats& s : r.submaps) {
    submaps.push_back(Json{{"id", s.id},
                           {"name", s.name},
                           {"members", s.members},
                           {"keyframes", s.keyframes},
                           {"frames", s.frames},
                           {"map_points", s.map_points}});
  }
  Json trace = Json::array();
  for (const TraceRow& t : r.trace) {
    trace.push_back(Json{{"frame_id", t.frame_id}, {"L1", t.stack}, {"L2", t.current}});
  }
  Json events = Json::array();
  for (const EventRecord& e : r.events) {
    events.push_back(Json{{"frame_id", e.frame_id}, {"kind", e.kind}, {"details", e.details}});
  }
  Json nodes = Json::array();
  for (const GraphNode& n : r.graph.nodes) {
    nodes.push_back(Json{{"id", n.id}, {"name", n.name}, {"keyframes", n.keyframes}});
  }
  Json edges = Json::array();
  for (const GraphEdge& e : r.graph.edges) {
    edges.push_back(Json{{"a", e.a},   {"b", e.b},   {"F", e.F},     {"M", e.M},
                         {"theta_deg", e.theta_deg}, {"C", e.C},     {"mst", e.mst},
                         {"merged", e.merged}});
  }
  Json keyframes = Json::array();
  for (const KeyframeEntry& k : r.keyframes) {
    keyframes.push_back(Json{{"frame_id", k.frame_id},
                             {"timestamp", k.timestamp},
                             {"submap", k.submap},
                             {"estimated", pose_json(k.estimated)},
                             {"ground_truth", pose_json(k.ground_truth)}});
  }
  const FrameAccounting& a = r.accounting;
  Json j{{"schema_version", r.schema_version},
         {"scenario", r.scenario},
         {"mode", to_string(r.mode)},
         {"seed", r.seed},
         {"keyframes_retained", r.keyframes_retained},
         {"submap_count_final", r.submap_count_final},
         {"submaps_created", r.submaps_created},
         {"ate_rmse_cm", r.ate_rmse_cm},
         {"ate_components", r.ate_components},
         {"merge_events", merges},
         {"submaps", submaps},
         {"accounting", Json{{"frames_total", a.frames_total},
                             {"init_buffered", a.init_buffered},
                             {"tracked", a.tracked},
                             {"discarded_fail_streak", a.discarded_fail_streak},
                             {"discarded_pre_init", a.discarded_pre_init},
                             {"discarded_lost", a.discarded_lost}}},
         {"trace", trace},
         {"events", events},
         {"graph", Json{{"nodes", nodes}, {"edges", edges}}},
         {"keyframes", keyframes},
         {"config", r.config_echo.empty() ? Json() : Json::parse(r.config_echo)}};
  if (!r.generated_at.empty()) j["generated_at"] = r.generated_at;
  return j;
}

RunReport report_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.empty()) {
      throw Error(ErrorCode::kMalformedInput, "report must be a non-empty JSON object");
    }
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw Error(ErrorCode::kMalformedInput,
                  "unsupported report schema_version " + std::to_string(r.schema_version));
    }
    r.scenario = j.at("scenario").get<std::string>();
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.keyframes_retained = j.at("keyframes_retained").get<std::size_t>();
    r.submap_count_final = j.at("submap_count_final").get<std::size_t>();
    r.submaps_created = j.at("submaps_created").get<std::size_t>();
    r.ate_rmse_cm = j.at("ate_rmse_cm").get<double>();
    r.ate_components = j.at("ate_components").get<std::size_t>();
    for (const Json& m : j.at("merge_events")) {
      r.merge_events.push_back(MergeRecord{
          m.at("frame_id").get<FrameId>(), m.at("target").get<SubmapId>(),
          m.at("source").get<SubmapId>(), m.at("target_name").get<std::string>(),
          m.at("source_name").get<std::string>(), m.at("F").get<int>(), m.at("M").get<int>(),
          m.at("theta_deg").get<double>(), m.at("C").get<double>(),
          m.at("residual_rms").get<double>(), m.at("scale").get<double>()});
    }
    for (const Json& s : j.at("submaps")) {
      r.submaps.push_back(SubmapStats{s.at("id").get<SubmapId>(), s.at("name").get<std::string>(),
                                      s.at("members").get<std::vector<SubmapId>>(),
                                      s.at("keyframes").get<std::size_t>(),
                                      s.at("frames").get<std::size_t>(),
                                      s.at("map_points").get<std::size_t>()});
    }
    const Json& a = j.at("accounting");
    r.accounting.frames_total = a.at("frames_total").get<std::size_t>();
    r.accounting.init_buffered = a.at("init_buffered").get<std::size_t>();
    r.accounting.tracked = a.at("tracked").get<std::size_t>();
    r.accounting.discarded_fail_streak = a.at("discarded_fail_streak").get<std::size_t>();
    r.accounting.discarded_pre_init = a.at("discarded_pre_init").get<std::size_t>();
    r.accounting.discarded_lost = a.at("discarded_lost").get<std::size_t>();
    for (const Json& t : j.at("trace")) {
      r.trace.push_back(TraceRow{t.at("frame_id").get<FrameId>(),
                                 t.at("L1").get<std::vector<std::string>>(),
                                 t.at("L2").get<std::string>()});
    }
    for (const Json& e : j.at("events")) {
      r.events.push_back(EventRecord{e.at("frame_id").get<FrameId>(), e.at("kind").get<std::string>(),
                                     e.at("details").get<std::string>()});
    }
    const Json& g = j.at("graph");
    for (const Json& n : g.at("nodes")) {
      r.graph.nodes.push_back(GraphNode{n.at("id").get<SubmapId>(), n.at("name").get<std::string>(),
                                        n.at("keyframes").get<std::size_t>()});
    }
    for (const Json& e : g.at("edges")) {
      r.graph.edges.push_back(GraphEdge{e.at("a").get<SubmapId>(), e.at("b").get<SubmapId>(),
                                        e.at("F").get<int>(), e.at("M").get<int>(),
                                        e.at("theta_deg").get<double>(), e.at("C").get<double>(),
                                        e.at("mst").get<bool>(), e.at("merged").get<bool>()});
    }
    for (const Json& k : j.at("keyframes")) {
      r.keyframes.push_back(KeyframeEntry{k.at("frame_id").get<FrameId>(),
                                          k.at("timestamp").get<double>(),
                                          k.at("submap").get<SubmapId>(),
                                          pose_from_json(k.at("estimated")),
                                          pose_from_json(k.at("ground_truth"))});
    }
    const Json& cfg = j.at("config");
    if (!cfg.is_null()) r.config_echo = cfg.dump();
    if (auto it = j.find("generated_at"); it != j.end()) r.generated_at = it->get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedInput, std::string("malformed report: ") + e.what());
  }
}

Json world_to_json(const World& world) {
  Json landmarks = Json::array();
  for (const Landmark& l : world.landmarks) {
    landmarks.push_back(Json{{"id", l.id}, {"position", point_json(l.position)}, {"word_id", l.word_id}});
  }
  Json frames = Json::array();
  for (const Frame& f : world.frames) {
    std::vector<LandmarkId> ids;
    ids.reserve(f.observations.size());
    for (const Observation& o : f.observations) ids.push_back(o.landmark_id);
    frames.push_back(Json{{"id", f.id},
                          {"timestamp", f.timestamp},
                          {"gt_pose", pose_json(f.gt_pose)},
                          {"landmark_ids", ids}});
  }
  return Json{{"landmarks", landmarks}, {"frames", frames}};
}

void write_tum(std::ostream& out, const std::vector<TumPose>& poses) {
  out << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[256];
  for (const TumPose& p : poses) {
    Eigen::Quaterniond q(p.pose.rotation);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    const Vec3& t = p.pose.translation;
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", p.timestamp,
                  t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
    out << buf;
  }
}

std::vector<TumPose> read_tum(std::istream& in) {
  std::vector<TumPose> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v[8];
    for (double& x : v) {
      if (!(ss >> x)) {
        throw Error(ErrorCode::kMalformedInput,
                    "TUM line " + std::to_string(line_no) + " needs 8 numbers");
      }
    }
    TumPose p;
    p.timestamp = v[0];
    p.pose.translation = Vec3(v[1], v[2], v[3]);
    p.pose.rotation = Eigen::Quaterniond(v[7], v[4], v[5], v[6]).normalized().toRotationMatrix();
    out.push_back(p);
  }
  return out;
}

std::vector<TumPose> keyframe_trajectory(const RunReport& report, bool estimated) {
  std::vector<TumPose> out;
  out.reserve(report.keyframes.size());
  for (const KeyframeEntry& k : report.keyframes) {
    out.push_back(TumPose{k.timestamp, estimated ? k.estimated : k.ground_truth});
  }
  return out;
}

std::string to_dot(const GraphSnapshot& graph) {
  std::ostringstream out;
  char buf[256];
  out << "graph submaps {\n  node [shape=circle];\n";
  for (const GraphNode& n : graph.nodes) {
    out << "  \"" << n.name << "\" [label=\"" << n.name << "\\n" << n.keyframes << " kf\"];\n";
  }
  auto name_of = [&graph](SubmapId id) {
    for (const GraphNode& n : graph.nodes) {
      if (n.id == id) return n.name;
    }
    return submap_label(id);
  };
  for (const GraphEdge& e : graph.edges) {
    std::snprintf(buf, sizeof buf, "F=%d,M=%d,\xCE\xB8=%.2f,C=%.2f", e.F, e.M, e.theta_deg, e.C);
    out << "  \"" << name_of(e.a) << "\" -- \"" << name_of(e.b) << "\" [label=\"" << buf << "\"";
    if (e.mst) out << ", style=bold";
    if (!e.merged) out << ", color=gray40";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string format_events_jsonl(const RunReport& report) {
  std::string out;
  for (const EventRecord& e : report.events) {
    out += Json{{"frame_id", e.frame_id}, {"kind", e.kind}, {"details", e.details}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace smr
