#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smr/graph_merge.hpp"
#include "smr/metrics.hpp"
#include "smr/retrieval.hpp"
#include "smr/scene_sim.hpp"
#include "smr/submap.hpp"

namespace smr {

struct SessionConfig {
  int fail_streak = 5;
  int keyframe_stride = 5;
  std::size_t min_init_landmarks = 30;
  double min_init_parallax_deg = 1.0;
  std::size_t init_buffer_max = 30;
  std::size_t min_track_landmarks = 15;
  int query_stride = 1;
  std::size_t nearby_window = 100;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  MergeConfig merge;
};

/// Throws kInvalidConfig naming the offending field.
void validate(const SessionConfig& cfg);

enum class Status { kInitializing, kTracking, kLost };

std::string to_string(Status status);

struct SessionState {
  Submap current_map;
  std::vector<Submap> stack_L;  // bottom first
  int consecutive_orientation_failures = 0;
  Mode mode = Mode::kProposed;
  Status status = Status::kInitializing;

  MergeBook book;
  SubmapId next_submap_id = 1;
  std::optional<FrameId> last_frame_id;
  int tracked_since_init = 0;
  FrameAccounting accounting;
  std::vector<TraceRow> trace;
};

enum class EventKind {
  kInitialized,
  kFrameTracked,
  kFrameDiscarded,
  kTrackingFailedSubmapPushed,
  kTrackingLost,
  kMerged,
  kRelocalized,
};

std::string to_string(EventKind kind);

struct SessionEvent {
  EventKind kind = EventKind::kFrameTracked;
  FrameId frame_id = 0;
  std::string details;
  std::vector<SubmapId> submaps;  // merged: {target, source}

  bool operator==(const SessionEvent&) const = default;
};

/// World -> local gauge that puts `first_pose` at the origin with identity
/// rotation and rescales by `scale`.
SimilarityTransform gauge_from_first_pose(const Pose& first_pose, double scale);

/// Randomness (gauge scale, pose and point noise) is keyed by cfg.seed, the
/// frame id, the landmark id and the map id, never by call order.
///
/// Buffers `frame` and looks for a pair with enough shared landmarks and
/// median parallax. On success the older frame of the pair is the local
/// origin, shared landmarks become map points and both frames keyframes.
bool try_initialize(Submap& map, const Frame& frame, std::span<const Landmark> landmarks,
                    const SessionConfig& cfg);

/// Orients `frame` against `map`. Returns nullopt (an orientation failure)
/// when fewer than cfg.min_track_landmarks observed landmarks are mapped.
/// On success the frame is appended and, every keyframe_stride-th success,
/// becomes a keyframe that triangulates newly co-observed landmarks.
std::optional<Pose> track_frame(Submap& map, const Frame& frame,
                                 std::span<const Landmark> landmarks, const SessionConfig& cfg);

/// Baseline relocalization: fixed-threshold retrieval against the single
/// map returns a match and enough observed landmarks are already mapped.
bool relocalize_baseline(const Submap& map, const Frame& frame, const SessionConfig& cfg);

class Session {
 public:
  Session(std::span<const Landmark> landmarks, SessionConfig cfg, Mode mode);

  /// Runs the tracking flowchart on one frame. Frame ids must increase.
  std::vector<SessionEvent> step(const Frame& frame);

  const SessionState& state() const { return state_; }
  const SessionConfig& config() const { return cfg_; }
  const std::vector<SessionEvent>& events() const { return events_; }

  /// Initialized maps still alive: the stack followed by the current map.
  std::vector<const Submap*> final_maps() const;

 private:
  void open_new_map();
  void query_and_merge(const Frame& frame, std::vector<SessionEvent>& out);
  void snapshot(FrameId frame_id);

  std::span<const Landmark> landmarks_;
  SessionConfig cfg_;
  SessionState state_;
  std::vector<SessionEvent> events_;
};

/// Drives a session over every frame of the world and assembles the report.
RunReport run_session(const World& world, const SessionConfig& cfg, Mode mode,
                      const std::string& scenario_name = "scenario");

}  // namespace smr
