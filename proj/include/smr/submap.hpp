#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "smr/geometry.hpp"
#include "smr/scene_sim.hpp"

namespace smr {

using SubmapId = std::int32_t;

/// Letter label by creation order: A..Z, then S26, S27, ...
std::string submap_label(SubmapId id);

struct MapPoint {
  Point3 position = Point3::Zero();  // local submap coordinates
  int observers = 0;                 // keyframes that observe it

  bool operator==(const MapPoint&) const = default;
};

/// A frame that was oriented in some submap.
struct FrameRecord {
  Frame frame;
  Pose pose;  // estimated, local submap coordinates
  bool keyframe = false;
  SubmapId origin = 0;  // submap that tracked the frame originally
};

/// A self-consistent local map in its own coordinate gauge.
class Submap {
 public:
  Submap() = default;
  Submap(SubmapId id, double gauge_scale);

  SubmapId id = 0;
  std::string name;
  std::vector<SubmapId> members;  // original submaps merged into this one
  // World -> local. Simulator-side only: the tracking front end uses it to
  // produce local poses, metrics and oracles use it for checks.
  SimilarityTransform gauge;
  bool initialized = false;

  std::vector<FrameRecord> frames;  // sorted by frame id
  std::map<LandmarkId, MapPoint> map_points;
  // Landmark -> earliest keyframe that saw it but has not triangulated it yet.
  std::map<LandmarkId, FrameId> pending;

  std::vector<Frame> init_buffer;
  int successes_since_keyframe = 0;

  const FrameRecord* find(FrameId frame_id) const;
  FrameRecord* find(FrameId frame_id);
  const FrameRecord* last_frame() const { return frames.empty() ? nullptr : &frames.back(); }

  std::size_t keyframe_count() const;
  std::vector<const FrameRecord*> keyframes() const;

  /// Number of the frame's observed landmarks that are map points here.
  std::size_t tracked_landmark_count(const Frame& frame) const;

  /// Appends a record; frame ids must increase.
  void append(FrameRecord record);
  /// Restores frame-id order after a merge.
  void sort_frames();
};

/// Name built from member labels in descending creation order, e.g. "D-C-B".
std::string composite_name(std::vector<SubmapId> members);

}  // namespace smr
