#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smr/geometry.hpp"
#include "smr/retrieval.hpp"
#include "smr/submap.hpp"

namespace smr {

// Intersection angles above this are clamped before entering the strength.
inline constexpr double kMaxConnectionThetaDeg = 45.0;

/// C = F + 0.1 M + 0.1 theta^2 for any field type (double, exact rationals).
/// Dividing by 10 rounds once, where multiplying by 0.1 would round twice.
template <class T>
constexpr T connection_strength_of(const T& F, const T& M, const T& theta_deg) {
  return F + M / T(10) + theta_deg * theta_deg / T(10);
}

/// Throws kOutOfRangeTheta unless 0 <= theta <= 45 degrees.
double connection_strength(double F, double M, double theta_deg);

/// One connected-frame pair and the map points both frames share.
struct PairMeasurement {
  FrameId frame_a = 0;
  FrameId frame_b = 0;
  std::vector<LandmarkId> shared;  // sorted
  double median_angle_deg = 0.0;

  bool operator==(const PairMeasurement&) const = default;
};

struct ConnectionEdge {
  SubmapId submap_a = 0;
  SubmapId submap_b = 0;
  std::vector<PairMeasurement> pairs;
  int F = 0;
  int M = 0;
  double theta_median_deg = 0.0;
  double C = 0.0;

  double weight() const { return -C; }
  std::pair<SubmapId, SubmapId> key() const {
    return {std::min(submap_a, submap_b), std::max(submap_a, submap_b)};
  }
  /// Distinct shared map-point ids over all pairs, sorted.
  std::vector<LandmarkId> shared_points() const;
};

/// Measures one pair: shared map points (observed by both frames and mapped
/// in both submaps) and the median intersection angle. Angles are evaluated
/// in the lower-id submap's frame, with the other camera center carried over
/// by a provisional similarity fitted to the shared points. Returns nullopt
/// below `min_shared` points or for a degenerate point set.
std::optional<PairMeasurement> measure_pair(const Submap& a, const Submap& b,
                                            const FrameRecord& frame_in_a,
                                            const FrameRecord& frame_in_b,
                                            std::size_t min_shared);

/// F, M, theta (median of pair medians, clamped to 45) and C from measured
/// pairs. Throws kNoValidPairs when `pairs` is empty.
ConnectionEdge assemble_edge(SubmapId a, SubmapId b, std::vector<PairMeasurement> pairs);

ConnectionEdge build_edge(const Submap& a, const Submap& b,
                          std::span<const ConnectedFrameMatch> matches,
                          std::size_t min_shared_points = 5);

/// Undirected weighted graph over submaps, one edge per unordered pair.
class SubmapGraph {
 public:
  void add_node(SubmapId id) { nodes_.insert(id); }
  /// Drops the node and every incident edge.
  void remove_node(SubmapId id);
  /// Inserts the edge or keeps whichever of old/new is stronger. Endpoints
  /// are added as nodes. Throws kInvariantViolation on self-loops.
  void upsert(const ConnectionEdge& edge);

  const std::set<SubmapId>& nodes() const { return nodes_; }
  const std::map<std::pair<SubmapId, SubmapId>, ConnectionEdge>& edges() const { return edges_; }
  const ConnectionEdge* find(SubmapId a, SubmapId b) const;

 private:
  std::set<SubmapId> nodes_;
  std::map<std::pair<SubmapId, SubmapId>, ConnectionEdge> edges_;
};

struct MstResult {
  std::vector<ConnectionEdge> edges;
  std::size_t components = 0;
  bool disconnected = false;
  double total_strength = 0.0;
};

/// Kruskal over weight = -C: minimum total weight, i.e. maximum total
/// strength. Disconnected graphs yield a spanning forest.
MstResult kruskal_mst(const SubmapGraph& graph);

struct MergeConfig {
  double strength_threshold = 12.0;
  double merge_residual_cap = 0.5;  // target-map units
  std::size_t min_shared_points = 5;
  bool robust = false;
  RobustOptions robust_options;
};

/// Similarity taking source-map coordinates into target-map coordinates,
/// fitted on the edge's shared map points.
SimilarityEstimate estimate_merge_transform(const Submap& target, const Submap& source,
                                            const ConnectionEdge& edge,
                                            const MergeConfig& cfg = {});

/// Transports the source into the target frame and fuses duplicate map
/// points by midpoint. Throws kResidualTooLarge above the cap.
Submap execute_merge(Submap target, const Submap& source, const SimilarityEstimate& estimate,
                     double residual_cap);

struct MergeDecision {
  SubmapId target = 0;
  SubmapId source = 0;
  ConnectionEdge edge;
  SimilarityTransform transform;
  double residual_rms = 0.0;
  bool accepted = false;
  std::string reason;
};

struct MergeRecord {
  FrameId frame_id = 0;
  SubmapId target = 0;
  SubmapId source = 0;
  std::string target_name;
  std::string source_name;
  int F = 0;
  int M = 0;
  double theta_deg = 0.0;
  double C = 0.0;
  double residual_rms = 0.0;
  double scale = 1.0;

  bool operator==(const MergeRecord&) const = default;
};

/// Connection bookkeeping kept across frames: the live graph over
/// {current map} + stack, the measured pairs per submap pair (edges are
/// rebuilt from their union), and the accepted-merge history.
struct MergeBook {
  SubmapGraph graph;
  std::map<std::pair<SubmapId, SubmapId>, std::vector<PairMeasurement>> pools;
  std::vector<MergeRecord> history;

  /// Re-points everything attached to `source` at `target` after a merge.
  void absorb(SubmapId target, SubmapId source);
};

/// Adds the new matches of `current` against stacked submaps to the book,
/// then repeatedly takes the strongest MST edge incident to the current map
/// and merges across it while it clears the strength threshold and the
/// residual cap. Merged submaps leave `stack`.
std::vector<MergeDecision> attempt_merges(Submap& current, std::vector<Submap>& stack,
                                          MergeBook& book,
                                          std::span<const ConnectedFrameMatch> new_matches,
                                          const MergeConfig& cfg, FrameId frame_id);

}  // namespace smr
