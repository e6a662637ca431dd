#include "smr/session.hpp"

#include <algorithm>
#include <set>

#include "smr/errors.hpp"

namespace smr {
namespace {

constexpr std::uint64_t kGaugeStream = 11;
constexpr std::uint64_t kPoseNoiseStream = 12;
constexpr std::uint64_t kPointNoiseStream = 13;

std::uint64_t tag(std::int64_t v) { return static_cast<std::uint64_t>(v); }

const Landmark& landmark_at(std::span<const Landmark> landmarks, LandmarkId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= landmarks.size() || landmarks[id].id != id) {
    throw Error(ErrorCode::kInvariantViolation,
                "landmark " + std::to_string(id) + " is not indexed by its id");
  }
  return landmarks[id];
}

const Observation* find_observation(const Frame& frame, LandmarkId id) {
  auto it = std::lower_bound(frame.observations.begin(), frame.observations.end(), id,
                             [](const Observation& o, LandmarkId v) { return o.landmark_id < v; });
  if (it == frame.observations.end() || it->landmark_id != id) return nullptr;
  return &*it;
}

std::vector<LandmarkId> shared_ids(const Frame& a, const Frame& b) {
  std::vector<LandmarkId> out;
  std::size_t i = 0, j = 0;
  while (i < a.observations.size() && j < b.observations.size()) {
    const LandmarkId la = a.observations[i].landmark_id;
    const LandmarkId lb = b.observations[j].landmark_id;
    if (la == lb) {
      out.push_back(la);
      ++i;
      ++j;
    } else if (la < lb) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

// Simulated front end: ground-truth center plus seeded noise, carried into
// the map gauge. The noise depends only on (seed, frame) so both modes see
// the same measurement for the same frame.
Pose local_pose(const Submap& map, const Frame& frame, const SessionConfig& cfg) {
  Pose world = frame.gt_pose;
  if (cfg.noise.pose_sigma_m > 0.0) {
    Rng rng = Rng::derive(cfg.seed, {kPoseNoiseStream, tag(frame.id)});
    const double s = cfg.noise.pose_sigma_m;
    const double x = rng.normal(s);
    const double y = rng.normal(s);
    const double z = rng.normal(s);
    world.translation += Vec3(x, y, z);
  }
  return apply_similarity_pose(map.gauge, world);
}

Point3 local_point(const Submap& map, const Point3& world_point, LandmarkId id,
                   const SessionConfig& cfg) {
  Point3 p = world_point;
  if (cfg.noise.point_sigma_m > 0.0) {
    Rng rng = Rng::derive(cfg.seed, {kPointNoiseStream, tag(id), tag(map.id)});
    const double s = cfg.noise.point_sigma_m;
    const double x = rng.normal(s);
    const double y = rng.normal(s);
    const double z = rng.normal(s);
    p += Vec3(x, y, z);
  }
  return map.gauge.apply(p);
}

// Adds the keyframe's observations to the map: existing points gain an
// observer, landmarks already pending on an earlier keyframe are
// triangulated, the rest become pending on this keyframe.
void register_keyframe(Submap& map, const FrameRecord& kf, const SessionConfig& cfg) {
  for (const Observation& o : kf.frame.observations) {
    if (auto mp = map.map_points.find(o.landmark_id); mp != map.map_points.end()) {
      ++mp->second.observers;
      continue;
    }
    auto pend = map.pending.find(o.landmark_id);
    if (pend == map.pending.end()) {
      map.pending.emplace(o.landmark_id, kf.frame.id);
      continue;
    }
    const FrameRecord* first = map.find(pend->second);
    const Observation* first_obs = first ? find_observation(first->frame, o.landmark_id) : nullptr;
    if (first_obs == nullptr) {
      pend->second = kf.frame.id;
      continue;
    }
    try {
      const Point3 p =
          triangulate(first->frame.gt_pose, kf.frame.gt_pose, first_obs->bearing, o.bearing);
      map.map_points.emplace(o.landmark_id, MapPoint{local_point(map, p, o.landmark_id, cfg), 2});
      map.pending.erase(pend);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParallelRays) throw;
    }
  }
}

}  // namespace

void validate(const SessionConfig& cfg) {
  auto require = [](bool ok, const char* field, const char* rule) {
    if (!ok) throw Error(ErrorCode::kInvalidConfig, std::string(field) + ": " + rule);
  };
  require(cfg.fail_streak >= 1, "session.fail_streak", "must be >= 1");
  require(cfg.keyframe_stride >= 1, "session.keyframe_stride", "must be >= 1");
  require(cfg.min_init_landmarks >= 3, "session.min_init_landmarks", "must be >= 3");
  require(cfg.min_init_parallax_deg >= 0.0 && cfg.min_init_parallax_deg < 90.0,
          "session.min_init_parallax_deg", "must be in [0, 90)");
  require(cfg.init_buffer_max >= 2, "session.init_buffer_max", "must be >= 2");
  require(cfg.min_track_landmarks >= 1, "session.min_track_landmarks", "must be >= 1");
  require(cfg.query_stride >= 1, "session.query_stride", "must be >= 1");
  require(cfg.noise.pose_sigma_m >= 0.0, "noise.pose_sigma_m", "must be >= 0");
  require(cfg.noise.point_sigma_m >= 0.0, "noise.point_sigma_m", "must be >= 0");
  require(cfg.merge.strength_threshold >= 0.0, "session.strength_threshold", "must be >= 0");
  require(cfg.merge.merge_residual_cap > 0.0, "session.merge_residual_cap", "must be > 0");
  require(cfg.merge.min_shared_points >= 3, "session.min_shared_points", "must be >= 3");
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kInitializing: return "initializing";
    case Status::kTracking: return "tracking";
    case Status::kLost: return "lost";
  }
  return "unknown";
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kInitialized: return "initialized";
    case EventKind::kFrameTracked: return "frame_tracked";
    case EventKind::kFrameDiscarded: return "frame_discarded";
    case EventKind::kTrackingFailedSubmapPushed: return "tracking_failed_submap_pushed";
    case EventKind::kTrackingLost: return "tracking_lost";
    case EventKind::kMerged: return "merged";
    case EventKind::kRelocalized: return "relocalized";
  }
  return "unknown";
}

SimilarityTransform gauge_from_first_pose(const Pose& first_pose, double scale) {
  SimilarityTransform g;
  g.scale = scale;
  g.rotation = first_pose.rotation.transpose();
  g.translation = -scale * (g.rotation * first_pose.translation);
  return g;
}

bool try_initialize(Submap& map, const Frame& frame, std::span<const Landmark> landmarks,
                    const SessionConfig& cfg) {
  if (map.initialized) {
    throw Error(ErrorCode::kInvariantViolation, "map " + map.name + " is already initialized");
  }
  const Frame* first = nullptr;
  std::vector<LandmarkId> shared;
  for (const Frame& candidate : map.init_buffer) {
    std::vector<LandmarkId> ids = shared_ids(candidate, frame);
    if (ids.size() < cfg.min_init_landmarks) continue;
    std::vector<double> angles;
    for (LandmarkId id : ids) {
      try {
        angles.push_back(intersection_angle(candidate.gt_pose.center(), frame.gt_pose.center(),
                                            landmark_at(landmarks, id).position));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateRay) throw;
      }
    }
    if (angles.empty() || median(std::move(angles)) < cfg.min_init_parallax_deg) continue;
    first = &candidate;
    shared = std::move(ids);
    break;
  }
  if (first == nullptr) {
    map.init_buffer.push_back(frame);
    if (map.init_buffer.size() > cfg.init_buffer_max) map.init_buffer.erase(map.init_buffer.begin());
    return false;
  }

  Rng gauge_rng = Rng::derive(cfg.seed, {kGaugeStream, tag(map.id)});
  map.gauge = gauge_from_first_pose(first->gt_pose, gauge_rng.uniform(0.5, 2.0));
  map.frames.clear();
  map.map_points.clear();
  map.pending.clear();
  map.append(FrameRecord{*first, Pose::identity(), true, map.id});
  map.append(FrameRecord{frame, local_pose(map, frame, cfg), true, map.id});
  const Frame& a = map.frames[0].frame;
  const Frame& b = map.frames[1].frame;

  for (LandmarkId id : shared) {
    const Observation* oa = find_observation(a, id);
    const Observation* ob = find_observation(b, id);
    try {
      const Point3 p = triangulate(a.gt_pose, b.gt_pose, oa->bearing, ob->bearing);
      map.map_points.emplace(id, MapPoint{local_point(map, p, id, cfg), 2});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParallelRays) throw;
      map.pending.emplace(id, a.id);
    }
  }
  for (const Frame* f : {&a, &b}) {
    for (const Observation& o : f->observations) {
      if (!map.map_points.contains(o.landmark_id)) map.pending.try_emplace(o.landmark_id, f->id);
    }
  }
  map.initialized = true;
  map.init_buffer.clear();
  map.successes_since_keyframe = 0;
  return true;
}

std::optional<Pose> track_frame(Submap& map, const Frame& frame,
                                std::span<const Landmark> /*landmarks*/, const SessionConfig& cfg) {
  if (!map.initialized) {
    throw Error(ErrorCode::kInvariantViolation, "map " + map.name + " is not initialized");
  }
  if (map.tracked_landmark_count(frame) < cfg.min_track_landmarks) return std::nullopt;
  FrameRecord rec{frame, local_pose(map, frame, cfg), false, map.id};
  if (++map.successes_since_keyframe >= cfg.keyframe_stride) {
    rec.keyframe = true;
    map.successes_since_keyframe = 0;
  }
  map.append(std::move(rec));
  if (map.frames.back().keyframe) register_keyframe(map, map.frames.back(), cfg);
  return map.frames.back().pose;
}

bool relocalize_baseline(const Submap& map, const Frame& frame, const SessionConfig& cfg) {
  if (map.tracked_landmark_count(frame) < cfg.min_track_landmarks) return false;
  const Submap* maps[] = {&map};
  const auto matches = retrieve_connected_frames(
      frame, maps, AdaptiveThresholds::fixed(kFixedCommonWordsRatio, kFixedScoreRatio));
  return !matches.empty();
}

Session::Session(std::span<const Landmark> landmarks, SessionConfig cfg, Mode mode)
    : landmarks_(landmarks), cfg_(std::move(cfg)) {
  validate(cfg_);
  state_.mode = mode;
  state_.current_map = Submap(0, 1.0);
  state_.book.graph.add_node(0);
}

std::vector<const Submap*> Session::final_maps() const {
  std::vector<const Submap*> out;
  for (const Submap& s : state_.stack_L) out.push_back(&s);
  if (state_.current_map.initialized) out.push_back(&state_.current_map);
  return out;
}

void Session::open_new_map() {
  state_.stack_L.push_back(std::move(state_.current_map));
  const SubmapId id = state_.next_submap_id++;
  state_.current_map = Submap(id, 1.0);
  state_.book.graph.add_node(id);
  state_.status = Status::kInitializing;
  state_.consecutive_orientation_failures = 0;
}

void Session::snapshot(FrameId frame_id) {
  TraceRow row;
  row.frame_id = frame_id;
  for (const Submap& s : state_.stack_L) row.stack.push_back(s.name);
  row.current = state_.current_map.name;
  state_.trace.push_back(std::move(row));
}

void Session::query_and_merge(const Frame& frame, std::vector<SessionEvent>& out) {
  Submap& current = state_.current_map;
  AdaptiveThresholds th;
  try {
    const AdjacentAndNearby sel = select_adjacent_and_nearby50(frame, current, cfg_.nearby_window);
    th = compute_thresholds(frame, sel.adjacent->frame, sel.nearby50->frame);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kInsufficientHistory:
      case ErrorCode::kZeroBaseline:
      case ErrorCode::kEmptyFrame:
        return;
      default:
        throw;
    }
  }
  std::vector<const Submap*> others;
  for (const Submap& s : state_.stack_L) others.push_back(&s);
  const auto matches = retrieve_connected_frames(frame, others, th);
  if (matches.empty()) return;

  const auto decisions =
      attempt_merges(current, state_.stack_L, state_.book, matches, cfg_.merge, frame.id);
  for (const MergeDecision& d : decisions) {
    if (!d.accepted) continue;
    const MergeRecord& rec = [&]() -> const MergeRecord& {
      for (const MergeRecord& r : state_.book.history) {
        if (r.frame_id == frame.id && r.source == d.source) return r;
      }
      throw Error(ErrorCode::kInvariantViolation, "merge without a history record");
    }();
    SessionEvent ev;
    ev.kind = EventKind::kMerged;
    ev.frame_id = frame.id;
    ev.submaps = {d.target, d.source};
    ev.details = rec.target_name + " <- " + rec.source_name;
    out.push_back(std::move(ev));
  }
}

std::vector<SessionEvent> Session::step(const Frame& frame) {
  if (state_.last_frame_id && frame.id <= *state_.last_frame_id) {
    throw Error(ErrorCode::kOutOfOrderFrame, "frame " + std::to_string(frame.id) +
                                                 " does not follow " +
                                                 std::to_string(*state_.last_frame_id));
  }
  state_.last_frame_id = frame.id;
  ++state_.accounting.frames_total;

  std::vector<SessionEvent> out;
  auto emit = [&](EventKind kind, std::string details) {
    out.push_back(SessionEvent{kind, frame.id, std::move(details), {}});
  };
  Submap& current = state_.current_map;

  switch (state_.status) {
    case Status::kInitializing: {
      if (frame.observations.size() < cfg_.min_init_landmarks) {
        ++state_.accounting.discarded_pre_init;
        emit(EventKind::kFrameDiscarded, "pre-initialization");
        break;
      }
      ++state_.accounting.init_buffered;
      if (try_initialize(current, frame, landmarks_, cfg_)) {
        state_.status = Status::kTracking;
        state_.consecutive_orientation_failures = 0;
        state_.tracked_since_init = 0;
        emit(EventKind::kInitialized, current.name);
      }
      break;
    }
    case Status::kTracking: {
      if (track_frame(current, frame, landmarks_, cfg_)) {
        state_.consecutive_orientation_failures = 0;
        ++state_.accounting.tracked;
        ++state_.tracked_since_init;
        emit(EventKind::kFrameTracked, current.name);
        if (state_.mode == Mode::kProposed && !state_.stack_L.empty() &&
            state_.tracked_since_init % cfg_.query_stride == 0) {
          query_and_merge(frame, out);
        }
        break;
      }
      ++state_.accounting.discarded_fail_streak;
      if (++state_.consecutive_orientation_failures < cfg_.fail_streak) {
        emit(EventKind::kFrameDiscarded,
             "orientation failure " + std::to_string(state_.consecutive_orientation_failures));
        break;
      }
      if (state_.mode == Mode::kProposed) {
        emit(EventKind::kTrackingFailedSubmapPushed, current.name);
        open_new_map();
      } else {
        state_.status = Status::kLost;
        emit(EventKind::kTrackingLost, current.name);
      }
      break;
    }
    case Status::kLost: {
      if (!relocalize_baseline(current, frame, cfg_)) {
        ++state_.accounting.discarded_lost;
        emit(EventKind::kFrameDiscarded, "lost");
        break;
      }
      state_.status = Status::kTracking;
      state_.consecutive_orientation_failures = 0;
      emit(EventKind::kRelocalized, current.name);
      if (!track_frame(current, frame, landmarks_, cfg_)) {
        throw Error(ErrorCode::kInvariantViolation, "relocalized frame failed to track");
      }
      ++state_.accounting.tracked;
      emit(EventKind::kFrameTracked, current.name);
      break;
    }
  }

  const bool changed = std::any_of(out.begin(), out.end(), [](const SessionEvent& e) {
    return e.kind == EventKind::kInitialized || e.kind == EventKind::kMerged;
  });
  if (changed) snapshot(frame.id);
  events_.insert(events_.end(), out.begin(), out.end());
  return out;
}

RunReport run_session(const World& world, const SessionConfig& cfg, Mode mode,
                      const std::string& scenario_name) {
  Session session(world.landmarks, cfg, mode);
  for (const Frame& f : world.frames) session.step(f);
  const SessionState& st = session.state();

  RunReport r;
  r.scenario = scenario_name;
  r.mode = mode;
  r.seed = cfg.seed;
  r.submaps_created = static_cast<std::size_t>(st.next_submap_id);
  r.merge_events = st.book.history;
  r.accounting = st.accounting;
  r.trace = st.trace;

  const std::vector<const Submap*> maps = session.final_maps();
  r.submap_count_final = maps.size();
  std::map<SubmapId, std::size_t> keyframes_by_origin;
  for (const Submap* m : maps) {
    SubmapStats s{m->id, m->name, m->members, 0, m->frames.size(), m->map_points.size()};
    for (const FrameRecord& fr : m->frames) {
      if (!fr.keyframe) continue;
      ++s.keyframes;
      ++keyframes_by_origin[fr.origin];
      r.keyframes.push_back(
          KeyframeEntry{fr.frame.id, fr.frame.timestamp, m->id, fr.pose, fr.frame.gt_pose});
    }
    r.keyframes_retained += s.keyframes;
    r.submaps.push_back(std::move(s));
  }
  std::sort(r.keyframes.begin(), r.keyframes.end(),
            [](const KeyframeEntry& a, const KeyframeEntry& b) { return a.frame_id < b.frame_id; });

  const AteResult ate = pooled_ate(r.keyframes);
  r.ate_rmse_cm = ate.rmse_cm;
  r.ate_components = ate.components;

  for (const SessionEvent& e : session.events()) {
    r.events.push_back(EventRecord{e.frame_id, to_string(e.kind), e.details});
  }

  for (SubmapId id = 0; id < st.next_submap_id; ++id) {
    auto it = keyframes_by_origin.find(id);
    r.graph.nodes.push_back(
        GraphNode{id, submap_label(id), it == keyframes_by_origin.end() ? 0 : it->second});
  }
  for (const MergeRecord& m : st.book.history) {
    r.graph.edges.push_back(GraphEdge{m.target, m.source, m.F, m.M, m.theta_deg, m.C, true, true});
  }
  const MstResult mst = kruskal_mst(st.book.graph);
  std::set<std::pair<SubmapId, SubmapId>> in_mst;
  for (const ConnectionEdge& e : mst.edges) in_mst.insert(e.key());
  for (const auto& [key, e] : st.book.graph.edges()) {
    r.graph.edges.push_back(GraphEdge{key.first, key.second, e.F, e.M, e.theta_median_deg, e.C,
                                      in_mst.contains(key), false});
  }
  return r;
}

}  // namespace smr
