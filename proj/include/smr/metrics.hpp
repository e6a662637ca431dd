#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smr/geometry.hpp"
#include "smr/graph_merge.hpp"
#include "smr/scene_sim.hpp"
#include "smr/submap.hpp"

namespace smr {

enum class Mode { kProposed, kBaseline };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct PoseSample {
  FrameId frame_id = 0;
  Pose pose;
};

struct KeyframeEntry {
  FrameId frame_id = 0;
  double timestamp = 0.0;
  SubmapId submap = 0;  // final map holding the keyframe
  Pose estimated;       // local coordinates of that map
  Pose ground_truth;

  bool operator==(const KeyframeEntry&) const = default;
};

struct SubmapStats {
  SubmapId id = 0;
  std::string name;
  std::vector<SubmapId> members;
  std::size_t keyframes = 0;
  std::size_t frames = 0;
  std::size_t map_points = 0;

  bool operator==(const SubmapStats&) const = default;
};

struct FrameAccounting {
  std::size_t frames_total = 0;
  std::size_t init_buffered = 0;
  std::size_t tracked = 0;
  std::size_t discarded_fail_streak = 0;
  std::size_t discarded_pre_init = 0;
  std::size_t discarded_lost = 0;

  std::size_t sum() const {
    return init_buffered + tracked + discarded_fail_streak + discarded_pre_init + discarded_lost;
  }
  bool operator==(const FrameAccounting&) const = default;
};

/// Snapshot of the stack and the current map after a step that initialized
/// or merged something. Mirrors the rows of a merge-process table.
struct TraceRow {
  FrameId frame_id = 0;
  std::vector<std::string> stack;  // bottom first
  std::string current;

  bool operator==(const TraceRow&) const = default;
};

struct GraphNode {
  SubmapId id = 0;
  std::string name;
  std::size_t keyframes = 0;

  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  SubmapId a = 0;
  SubmapId b = 0;
  int F = 0;
  int M = 0;
  double theta_deg = 0.0;
  double C = 0.0;
  bool mst = false;
  bool merged = false;

  bool operator==(const GraphEdge&) const = default;
};

struct GraphSnapshot {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  bool operator==(const GraphSnapshot&) const = default;
};

struct EventRecord {
  FrameId frame_id = 0;
  std::string kind;
  std::string details;

  bool operator==(const EventRecord&) const = default;
};

struct RunReport {
  int schema_version = 1;
  std::string scenario;
  Mode mode = Mode::kProposed;
  std::uint64_t seed = 0;
  std::size_t keyframes_retained = 0;
  std::size_t submap_count_final = 0;
  std::size_t submaps_created = 0;
  std::vector<MergeRecord> merge_events;
  double ate_rmse_cm = 0.0;
  std::size_t ate_components = 0;
  std::vector<SubmapStats> submaps;
  FrameAccounting accounting;
  std::vector<TraceRow> trace;
  std::vector<EventRecord> events;
  GraphSnapshot graph;
  std::vector<KeyframeEntry> keyframes;
  std::string config_echo;  // serialized JSON
  std::string generated_at;

  bool operator==(const RunReport&) const = default;
};

/// Total keyframes across the given maps.
std::size_t trajectory_integrity(std::span<const Submap> maps);

/// Camera-center ATE in centimeters after Sim(3) alignment of the estimated
/// centers onto ground truth, over the frame ids present in both lists.
double ate_rmse(std::span<const PoseSample> estimated, std::span<const PoseSample> ground_truth);

struct AteResult {
  double rmse_cm = 0.0;
  std::size_t samples = 0;
  std::size_t components = 0;
  std::size_t skipped_components = 0;
};

/// Aligns each final map independently and pools the squared residuals.
/// Keyframes outside `frame_filter` (when non-empty, sorted) are ignored.
/// Components with fewer than 3 samples or a collinear layout are skipped.
AteResult pooled_ate(std::span<const KeyframeEntry> keyframes,
                     std::span<const FrameId> frame_filter = {});

struct ComparisonRow {
  std::string scenario;
  std::size_t keyframes_proposed = 0;
  std::size_t keyframes_baseline = 0;
  std::size_t common_keyframes = 0;
  double rmse_proposed_cm = 0.0;
  double rmse_baseline_cm = 0.0;
  std::size_t components_proposed = 0;
  bool integrity_dominates = false;
  bool rmse_within_gate = false;
};

inline constexpr double kRmseGate = 1.15;

/// Side-by-side integrity and RMSE on the keyframes both runs retain.
/// Throws kScenarioMismatch unless scenario and seed agree.
ComparisonRow compare_modes(const RunReport& proposed, const RunReport& baseline);

std::string format_comparison_text(std::span<const ComparisonRow> rows);
std::string format_comparison_csv(std::span<const ComparisonRow> rows);

}  // namespace smr
