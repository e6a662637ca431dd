#include "smr/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smr/errors.hpp"
#include "smr/rng.hpp"

namespace smr {
namespace {

constexpr std::uint64_t kLandmarkStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + why);
}

struct PathSample {
  Vec3 position;
  Mat3 rotation;
};

// Piecewise path of straight segments and circular arcs in the xy-plane.
class PlanarPath {
 public:
  void add_line(const Vec3& from, const Vec3& to) {
    Segment s;
    s.is_arc = false;
    s.start = from;
    s.end = to;
    s.length = (to - from).norm();
    segments_.push_back(s);
    total_ += s.length;
  }

  void add_arc(const Vec3& center, double radius, double start_angle, double sweep) {
    Segment s;
    s.is_arc = true;
    s.start = center;
    s.radius = radius;
    s.start_angle = start_angle;
    s.sweep = sweep;
    s.length = std::abs(sweep) * radius;
    segments_.push_back(s);
    total_ += s.length;
  }

  double length() const { return total_; }

  // Position and unit outward normal (pointing away from the loop interior
  // for counter-clockwise loops) at arc length s, wrapping around.
  void evaluate(double s, Vec3* position, Vec3* normal) const {
    if (total_ <= 0.0) {
      *position = segments_.empty() ? Vec3::Zero() : segments_.front().start;
      *normal = Vec3::UnitX();
      return;
    }
    s = std::fmod(s, total_);
    if (s < 0.0) s += total_;
    for (const Segment& seg : segments_) {
      if (s <= seg.length || &seg == &segments_.back()) {
        const double t = seg.length > 0.0 ? std::min(s / seg.length, 1.0) : 0.0;
        if (seg.is_arc) {
          const double a = seg.start_angle + t * seg.sweep;
          const Vec3 radial(std::cos(a), std::sin(a), 0.0);
          *position = seg.start + seg.radius * radial;
          *normal = radial;
        } else {
          const Vec3 dir = (seg.end - seg.start).normalized();
          *position = seg.start + t * (seg.end - seg.start);
          *normal = Vec3(dir.y(), -dir.x(), 0.0);
        }
        return;
      }
      s -= seg.length;
    }
  }

 private:
  struct Segment {
    bool is_arc = false;
    Vec3 start = Vec3::Zero();  // arc center for arcs
    Vec3 end = Vec3::Zero();
    double radius = 0.0;
    double start_angle = 0.0;
    double sweep = 0.0;
    double length = 0.0;
  };
  std::vector<Segment> segments_;
  double total_ = 0.0;
};

// Counter-clockwise rounded rectangle through four arc centers.
PlanarPath rounded_rectangle(double cx0, double cy0, double cx1, double cy1, double r, double z) {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  PlanarPath path;
  path.add_line(Vec3(cx0, cy0 - r, z), Vec3(cx1, cy0 - r, z));
  path.add_arc(Vec3(cx1, cy0, z), r, -kHalfPi, kHalfPi);
  path.add_line(Vec3(cx1 + r, cy0, z), Vec3(cx1 + r, cy1, z));
  path.add_arc(Vec3(cx1, cy1, z), r, 0.0, kHalfPi);
  path.add_line(Vec3(cx1, cy1 + r, z), Vec3(cx0, cy1 + r, z));
  path.add_arc(Vec3(cx0, cy1, z), r, kHalfPi, kHalfPi);
  path.add_line(Vec3(cx0 - r, cy1, z), Vec3(cx0 - r, cy0, z));
  path.add_arc(Vec3(cx0, cy0, z), r, std::numbers::pi, kHalfPi);
  return path;
}

// Arc-length position of every frame. Steps into a failure-window frame are
// stretched by failure_speedup so the camera covers more ground while blind.
std::vector<double> frame_arc_positions(const ScenarioConfig& config, double total_length) {
  const int n = config.frame_count;
  std::vector<double> s(static_cast<std::size_t>(std::max(n, 0)), 0.0);
  if (n <= 1) return s;
  std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i) {
    const double w = in_failure_window(config, i) ? config.failure_speedup : 1.0;
    cum[static_cast<std::size_t>(i)] = cum[static_cast<std::size_t>(i - 1)] + w;
  }
  const double total_w = cum.back();
  for (int i = 0; i < n; ++i) {
    s[static_cast<std::size_t>(i)] = total_length * cum[static_cast<std::size_t>(i)] / total_w;
  }
  return s;
}

PlanarPath uav_path(const UavParams& p) {
  PlanarPath path;
  for (int i = 0; i < p.strip_count; ++i) {
    const double y = i * p.strip_spacing_m;
    const bool forward = (i % 2) == 0;
    const Vec3 a(forward ? 0.0 : p.strip_length_m, y, p.height_m);
    const Vec3 b(forward ? p.strip_length_m : 0.0, y, p.height_m);
    path.add_line(a, b);
    if (i + 1 < p.strip_count) path.add_line(b, Vec3(b.x(), y + p.strip_spacing_m, p.height_m));
  }
  return path;
}

PlanarPath loop_path(TrajectoryKind kind, const LoopParams& p) {
  if (kind == TrajectoryKind::kStreetLoop) {
    return rounded_rectangle(0.0, 0.0, p.width_m, p.depth_m, p.standoff_m, p.camera_height_m);
  }
  const double inset = p.standoff_m + p.corner_radius_m;
  return rounded_rectangle(inset, inset, p.width_m - inset, p.depth_m - inset, p.corner_radius_m,
                           p.camera_height_m);
}

Vec3 waypoint_position(const std::vector<Waypoint>& wps, FrameId frame) {
  if (frame <= wps.front().frame) return wps.front().position;
  if (frame >= wps.back().frame) return wps.back().position;
  for (std::size_t i = 1; i < wps.size(); ++i) {
    if (frame <= wps[i].frame) {
      const Waypoint& a = wps[i - 1];
      const Waypoint& b = wps[i];
      const double t = static_cast<double>(frame - a.frame) / static_cast<double>(b.frame - a.frame);
      return a.position + t * (b.position - a.position);
    }
  }
  return wps.back().position;
}

std::vector<Landmark> scatter_ground(const ScenarioConfig& config, const std::vector<Pose>& traj,
                                     double margin, double relief, Rng& rng) {
  std::vector<Landmark> out;
  if (config.landmark_count == 0) return out;
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  if (!traj.empty()) {
    x0 = x1 = traj.front().translation.x();
    y0 = y1 = traj.front().translation.y();
    for (const Pose& p : traj) {
      x0 = std::min(x0, p.translation.x());
      x1 = std::max(x1, p.translation.x());
      y0 = std::min(y0, p.translation.y());
      y1 = std::max(y1, p.translation.y());
    }
  }
  x0 -= margin;
  x1 += margin;
  y0 -= margin;
  y1 += margin;
  out.reserve(static_cast<std::size_t>(config.landmark_count));
  for (int i = 0; i < config.landmark_count; ++i) {
    Landmark lm;
    lm.id = i;
    lm.position = Vec3(rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(-relief, relief));
    lm.word_id = static_cast<WordId>(rng.index(static_cast<std::uint64_t>(config.vocabulary_size)));
    out.push_back(lm);
  }
  return out;
}

// Landmarks on the four vertical faces of the rectangle [0,w] x [0,d].
std::vector<Landmark> scatter_walls(const ScenarioConfig& config, Rng& rng) {
  const LoopParams& p = config.loop;
  const double perimeter = 2.0 * (p.width_m + p.depth_m);
  std::vector<Landmark> out;
  out.reserve(static_cast<std::size_t>(config.landmark_count));
  for (int i = 0; i < config.landmark_count; ++i) {
    double u = rng.uniform(0.0, perimeter);
    const double z = rng.uniform(0.0, p.wall_height_m);
    const double jitter = rng.uniform(-p.wall_jitter_m, p.wall_jitter_m);
    Vec3 pos;
    if (u < p.width_m) {
      pos = Vec3(u, -jitter, z);
    } else if ((u -= p.width_m) < p.depth_m) {
      pos = Vec3(p.width_m + jitter, u, z);
    } else if ((u -= p.depth_m) < p.width_m) {
      pos = Vec3(p.width_m - u, p.depth_m + jitter, z);
    } else {
      u -= p.width_m;
      pos = Vec3(-jitter, p.depth_m - u, z);
    }
    Landmark lm;
    lm.id = i;
    lm.position = pos;
    lm.word_id = static_cast<WordId>(rng.index(static_cast<std::uint64_t>(config.vocabulary_size)));
    out.push_back(lm);
  }
  return out;
}

}  // namespace

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kUavSCurve: return "uav_s_curve";
    case TrajectoryKind::kStreetLoop: return "street_loop";
    case TrajectoryKind::kIndoorRoom: return "indoor_room";
    case TrajectoryKind::kWaypoints: return "waypoints";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "uav_s_curve") return TrajectoryKind::kUavSCurve;
  if (s == "street_loop") return TrajectoryKind::kStreetLoop;
  if (s == "indoor_room") return TrajectoryKind::kIndoorRoom;
  if (s == "waypoints") return TrajectoryKind::kWaypoints;
  invalid("trajectory_kind", "unknown kind '" + s + "'");
}

void validate(const ScenarioConfig& c) {
  if (c.frame_count < 0) invalid("frame_count", "must be >= 0");
  if (c.landmark_count < 0) invalid("landmark_count", "must be >= 0");
  if (c.vocabulary_size < 1) invalid("vocabulary_size", "must be >= 1");
  if (!(c.camera.fov_deg > 0.0 && c.camera.fov_deg < 180.0)) {
    invalid("camera.fov_deg", "must lie in (0, 180)");
  }
  if (!(c.camera.max_range_m > 0.0)) invalid("camera.max_range_m", "must be > 0");
  if (!(c.observation_dropout_in_failure >= 0.0 && c.observation_dropout_in_failure <= 1.0)) {
    invalid("observation_dropout_in_failure", "must lie in [0, 1]");
  }
  if (!(c.failure_speedup > 0.0)) invalid("failure_speedup", "must be > 0");
  if (!(c.frame_rate_hz > 0.0)) invalid("frame_rate_hz", "must be > 0");
  if (!(c.noise.pose_sigma_m >= 0.0)) invalid("noise.pose_sigma_m", "must be >= 0");
  if (!(c.noise.point_sigma_m >= 0.0)) invalid("noise.point_sigma_m", "must be >= 0");

  FrameId last_end = -1;
  for (const FailureWindow& w : c.failure_windows) {
    if (w.start_frame < 0 || w.end_frame < w.start_frame || w.end_frame >= c.frame_count) {
      invalid("failure_windows", "window [" + std::to_string(w.start_frame) + ", " +
                                     std::to_string(w.end_frame) + "] out of range");
    }
    if (w.start_frame <= last_end) {
      invalid("failure_windows", "windows must be sorted and disjoint");
    }
    last_end = w.end_frame;
  }

  switch (c.trajectory_kind) {
    case TrajectoryKind::kUavSCurve:
      if (!(c.uav.height_m > 0.0)) invalid("trajectory.height_m", "must be > 0");
      if (!(c.uav.strip_length_m > 0.0)) invalid("trajectory.strip_length_m", "must be > 0");
      if (!(c.uav.strip_spacing_m > 0.0)) invalid("trajectory.strip_spacing_m", "must be > 0");
      if (c.uav.strip_count < 1) invalid("trajectory.strip_count", "must be >= 1");
      if (!(c.uav.relief_m >= 0.0)) invalid("trajectory.relief_m", "must be >= 0");
      break;
    case TrajectoryKind::kStreetLoop:
    case TrajectoryKind::kIndoorRoom: {
      const LoopParams& p = c.loop;
      if (!(p.width_m > 0.0)) invalid("trajectory.width_m", "must be > 0");
      if (!(p.depth_m > 0.0)) invalid("trajectory.depth_m", "must be > 0");
      if (!(p.standoff_m > 0.0)) invalid("trajectory.standoff_m", "must be > 0");
      if (!(p.wall_height_m > 0.0)) invalid("trajectory.wall_height_m", "must be > 0");
      if (!(p.wall_jitter_m >= 0.0)) invalid("trajectory.wall_jitter_m", "must be >= 0");
      if (!(p.laps > 0.0)) invalid("trajectory.laps", "must be > 0");
      if (c.trajectory_kind == TrajectoryKind::kIndoorRoom) {
        if (!(p.corner_radius_m > 0.0)) invalid("trajectory.corner_radius_m", "must be > 0");
        const double inset = 2.0 * (p.standoff_m + p.corner_radius_m);
        if (p.width_m < inset || p.depth_m < inset) {
          invalid("trajectory.standoff_m", "room too small for standoff and corner radius");
        }
      }
      break;
    }
    case TrajectoryKind::kWaypoints: {
      const auto& wps = c.waypoints.waypoints;
      if (wps.empty()) invalid("trajectory.waypoints", "must not be empty");
      for (std::size_t i = 1; i < wps.size(); ++i) {
        if (wps[i].frame <= wps[i - 1].frame) {
          invalid("trajectory.waypoints", "frames must be strictly increasing");
        }
      }
      if (!(c.waypoints.ground_margin_m >= 0.0)) {
        invalid("trajectory.ground_margin_m", "must be >= 0");
      }
      if (!(c.waypoints.relief_m >= 0.0)) invalid("trajectory.relief_m", "must be >= 0");
      break;
    }
  }
}

bool in_failure_window(const ScenarioConfig& config, FrameId frame) {
  for (const FailureWindow& w : config.failure_windows) {
    if (frame >= w.start_frame && frame <= w.end_frame) return true;
  }
  return false;
}

Mat3 nadir_rotation() {
  Mat3 R;
  R.col(0) = Vec3::UnitX();
  R.col(1) = -Vec3::UnitY();
  R.col(2) = -Vec3::UnitZ();
  return R;
}

Mat3 look_rotation(const Vec3& look_direction) {
  const Vec3 z = look_direction.normalized();
  Vec3 y = -Vec3::UnitZ();
  y = (y - y.dot(z) * z).normalized();
  Mat3 R;
  R.col(0) = y.cross(z);
  R.col(1) = y;
  R.col(2) = z;
  return R;
}

std::vector<Pose> generate_trajectory(const ScenarioConfig& config) {
  std::vector<Pose> out;
  const int n = config.frame_count;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  switch (config.trajectory_kind) {
    case TrajectoryKind::kUavSCurve: {
      const PlanarPath path = uav_path(config.uav);
      const std::vector<double> s = frame_arc_positions(config, path.length());
      for (double si : s) {
        Vec3 pos, normal;
        path.evaluate(std::min(si, path.length() - 1e-12), &pos, &normal);
        out.push_back(Pose{nadir_rotation(), pos});
      }
      break;
    }
    case TrajectoryKind::kStreetLoop:
    case TrajectoryKind::kIndoorRoom: {
      const PlanarPath path = loop_path(config.trajectory_kind, config.loop);
      const std::vector<double> s = frame_arc_positions(config, path.length() * config.loop.laps);
      const double look_sign = config.trajectory_kind == TrajectoryKind::kStreetLoop ? -1.0 : 1.0;
      for (double si : s) {
        Vec3 pos, normal;
        path.evaluate(si, &pos, &normal);
        out.push_back(Pose{look_rotation(look_sign * normal), pos});
      }
      break;
    }
    case TrajectoryKind::kWaypoints: {
      for (int i = 0; i < n; ++i) {
        out.push_back(Pose{nadir_rotation(), waypoint_position(config.waypoints.waypoints, i)});
      }
      break;
    }
  }
  return out;
}

std::vector<Observation> observe(const Pose& pose, std::span<const Landmark> landmarks,
                                 const CameraModel& camera) {
  const double cos_half = std::cos(deg_to_rad(0.5 * camera.fov_deg));
  const Vec3 axis = pose.rotation.col(2);
  std::vector<Observation> out;
  for (const Landmark& lm : landmarks) {
    const Vec3 v = lm.position - pose.center();
    const double dist = v.norm();
    if (dist <= 0.0 || dist > camera.max_range_m) continue;
    const double depth = v.dot(axis);
    if (depth <= 0.0 || depth < cos_half * dist) continue;
    out.push_back(Observation{lm.id, pose.rotation.transpose() * (v / dist)});
  }
  std::sort(out.begin(), out.end(),
            [](const Observation& a, const Observation& b) { return a.landmark_id < b.landmark_id; });
  return out;
}

World generate_world(const ScenarioConfig& config) {
  validate(config);
  World world;
  world.gt_trajectory = generate_trajectory(config);

  Rng lm_rng = Rng::derive(config.rng_seed, {kLandmarkStream});
  switch (config.trajectory_kind) {
    case TrajectoryKind::kUavSCurve: {
      const double footprint =
          config.uav.height_m * std::tan(deg_to_rad(0.5 * config.camera.fov_deg));
      // The ground area is defined by the full path even when frame_count is 0.
      ScenarioConfig dense = config;
      dense.frame_count = 64;
      dense.failure_windows.clear();
      world.landmarks = scatter_ground(config, generate_trajectory(dense), footprint + 5.0,
                                       config.uav.relief_m, lm_rng);
      break;
    }
    case TrajectoryKind::kStreetLoop:
    case TrajectoryKind::kIndoorRoom:
      world.landmarks = scatter_walls(config, lm_rng);
      break;
    case TrajectoryKind::kWaypoints: {
      std::vector<Pose> anchors;
      for (const Waypoint& wp : config.waypoints.waypoints) anchors.push_back(Pose{nadir_rotation(), wp.position});
      world.landmarks = scatter_ground(config, anchors, config.waypoints.ground_margin_m,
                                       config.waypoints.relief_m, lm_rng);
      break;
    }
  }

  std::vector<WordId> word_of(world.landmarks.size());
  for (const Landmark& lm : world.landmarks) word_of[static_cast<std::size_t>(lm.id)] = lm.word_id;

  world.frames.reserve(world.gt_trajectory.size());
  for (std::size_t i = 0; i < world.gt_trajectory.size(); ++i) {
    Frame f;
    f.id = static_cast<FrameId>(i);
    f.timestamp = static_cast<double>(i) / config.frame_rate_hz;
    f.gt_pose = world.gt_trajectory[i];
    f.observations = observe(f.gt_pose, world.landmarks, config.camera);
    if (in_failure_window(config, f.id) && config.observation_dropout_in_failure > 0.0) {
      Rng drop = Rng::derive(config.rng_seed, {kDropoutStream, static_cast<std::uint64_t>(i)});
      std::vector<Observation> kept;
      for (const Observation& o : f.observations) {
        if (drop.uniform() >= config.observation_dropout_in_failure) kept.push_back(o);
      }
      f.observations = std::move(kept);
    }
    f.words.reserve(f.observations.size());
    for (const Observation& o : f.observations) {
      f.words.push_back(word_of[static_cast<std::size_t>(o.landmark_id)]);
    }
    std::sort(f.words.begin(), f.words.end());
    world.frames.push_back(std::move(f));
  }
  return world;
}

std::size_t shared_landmark_count(const Frame& a, const Frame& b) {
  std::size_t i = 0, j = 0, shared = 0;
  while (i < a.observations.size() && j < b.observations.size()) {
    const LandmarkId la = a.observations[i].landmark_id;
    const LandmarkId lb = b.observations[j].landmark_id;
    if (la == lb) {
      ++shared;
      ++i;
      ++j;
    } else if (la < lb) {
      ++i;
    } else {
      ++j;
    }
  }
  return shared;
}

double word_overlap_ratio(const Frame& a, const Frame& b) {
  if (a.observations.empty()) {
    throw Error(ErrorCode::kEmptyFrame, "frame " + std::to_string(a.id) + " has no observations");
  }
  return static_cast<double>(shared_landmark_count(a, b)) /
         static_cast<double>(a.observations.size());
}

}  // namespace smr
