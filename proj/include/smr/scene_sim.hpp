#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smr/geometry.hpp"

namespace smr {

using FrameId = std::int32_t;
using LandmarkId = std::int32_t;
using WordId = std::int32_t;

struct Landmark {
  LandmarkId id = 0;
  Point3 position = Point3::Zero();
  WordId word_id = 0;
};

struct Observation {
  LandmarkId landmark_id = 0;
  Vec3 bearing = Vec3::UnitZ();  // unit ray in the camera frame

  bool operator==(const Observation&) const = default;
};

struct Frame {
  FrameId id = 0;
  double timestamp = 0.0;
  Pose gt_pose;
  std::vector<Observation> observations;  // sorted by landmark id
  std::vector<WordId> words;              // sorted multiset

  bool operator==(const Frame&) const = default;
};

enum class TrajectoryKind { kUavSCurve, kStreetLoop, kIndoorRoom, kWaypoints };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

struct CameraModel {
  double fov_deg = 70.0;  // full cone angle
  double max_range_m = 80.0;
};

struct NoiseConfig {
  double pose_sigma_m = 0.0;
  double point_sigma_m = 0.0;
};

struct FailureWindow {
  FrameId start_frame = 0;  // inclusive
  FrameId end_frame = 0;    // inclusive
};

// Lawnmower strips along +x / -x at constant height, camera looking down.
struct UavParams {
  double height_m = 30.0;
  double strip_length_m = 150.0;
  double strip_spacing_m = 25.0;
  int strip_count = 4;
  double relief_m = 2.0;
};

// Rounded-rectangle loop. For street_loop the camera circles a building
// block of width x depth and looks inward at its facades; for indoor_room it
// circles inside a room of width x depth and looks outward at the walls.
struct LoopParams {
  double width_m = 60.0;
  double depth_m = 40.0;
  double standoff_m = 8.0;
  double corner_radius_m = 8.0;
  double camera_height_m = 1.5;
  double wall_height_m = 6.0;
  double wall_jitter_m = 0.3;
  double laps = 2.0;
};

struct Waypoint {
  FrameId frame = 0;
  Point3 position = Point3::Zero();
};

// Explicit per-frame keyed positions (linear interpolation), nadir camera.
struct WaypointParams {
  std::vector<Waypoint> waypoints;
  double ground_margin_m = 20.0;
  double relief_m = 1.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  TrajectoryKind trajectory_kind = TrajectoryKind::kUavSCurve;
  int frame_count = 0;
  int landmark_count = 0;
  int vocabulary_size = 1;
  CameraModel camera;
  std::vector<FailureWindow> failure_windows;
  double observation_dropout_in_failure = 1.0;
  // Camera speed multiplier inside failure windows (fast motion / blur).
  double failure_speedup = 1.0;
  double frame_rate_hz = 10.0;
  NoiseConfig noise;
  std::uint64_t rng_seed = 0;
  UavParams uav;
  LoopParams loop;
  WaypointParams waypoints;
};

/// Throws kInvalidConfig naming the offending field.
void validate(const ScenarioConfig& config);

bool in_failure_window(const ScenarioConfig& config, FrameId frame);

struct World {
  std::vector<Landmark> landmarks;
  std::vector<Pose> gt_trajectory;
  std::vector<Frame> frames;
};

World generate_world(const ScenarioConfig& config);

/// Camera poses along the configured path, one per frame.
std::vector<Pose> generate_trajectory(const ScenarioConfig& config);

/// Landmarks inside the camera cone and range, sorted by landmark id.
std::vector<Observation> observe(const Pose& pose, std::span<const Landmark> landmarks,
                                 const CameraModel& camera);

/// Nadir (straight down) and horizontal-looking camera orientations.
Mat3 nadir_rotation();
Mat3 look_rotation(const Vec3& look_direction);

/// |shared observed landmark ids| / |landmark ids of a|.
double word_overlap_ratio(const Frame& a, const Frame& b);

std::size_t shared_landmark_count(const Frame& a, const Frame& b);

}  // namespace smr
