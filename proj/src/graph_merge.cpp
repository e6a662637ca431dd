#include "smr/graph_merge.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "smr/errors.hpp"

namespace smr {
namespace {

std::pair<SubmapId, SubmapId> ordered(SubmapId a, SubmapId b) {
  return {std::min(a, b), std::max(a, b)};
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

}  // namespace

double connection_strength(double F, double M, double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg <= kMaxConnectionThetaDeg)) {
    throw Error(ErrorCode::kOutOfRangeTheta,
                "theta " + std::to_string(theta_deg) + " outside [0, 45] degrees");
  }
  return connection_strength_of(F, M, theta_deg);
}

std::vector<LandmarkId> ConnectionEdge::shared_points() const {
  std::vector<LandmarkId> out;
  for (const PairMeasurement& p : pairs) out.insert(out.end(), p.shared.begin(), p.shared.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<PairMeasurement> measure_pair(const Submap& a, const Submap& b,
                                            const FrameRecord& frame_in_a,
                                            const FrameRecord& frame_in_b,
                                            std::size_t min_shared) {
  PairMeasurement out;
  out.frame_a = frame_in_a.frame.id;
  out.frame_b = frame_in_b.frame.id;

  const auto& oa = frame_in_a.frame.observations;
  const auto& ob = frame_in_b.frame.observations;
  std::size_t i = 0, j = 0;
  while (i < oa.size() && j < ob.size()) {
    const LandmarkId la = oa[i].landmark_id;
    const LandmarkId lb = ob[j].landmark_id;
    if (la == lb) {
      if (a.map_points.contains(la) && b.map_points.contains(la)) out.shared.push_back(la);
      ++i;
      ++j;
    } else if (la < lb) {
      ++i;
    } else {
      ++j;
    }
  }
  if (out.shared.size() < std::max<std::size_t>(min_shared, 3)) return std::nullopt;

  // Angles are always measured in the lower-id submap so that the result
  // does not depend on argument order.
  const bool a_is_base = a.id <= b.id;
  const Submap& base = a_is_base ? a : b;
  const Submap& other = a_is_base ? b : a;
  const FrameRecord& base_frame = a_is_base ? frame_in_a : frame_in_b;
  const FrameRecord& other_frame = a_is_base ? frame_in_b : frame_in_a;

  std::vector<Vec3> src, dst;
  src.reserve(out.shared.size());
  dst.reserve(out.shared.size());
  for (LandmarkId id : out.shared) {
    src.push_back(other.map_points.at(id).position);
    dst.push_back(base.map_points.at(id).position);
  }
  SimilarityEstimate provisional;
  try {
    provisional = estimate_similarity(src, dst);
  } catch (const Error&) {
    return std::nullopt;
  }
  const Vec3 other_center = provisional.transform.apply(other_frame.pose.center());
  const Vec3 base_center = base_frame.pose.center();

  std::vector<double> angles;
  angles.reserve(dst.size());
  for (const Vec3& p : dst) {
    try {
      angles.push_back(intersection_angle(base_center, other_center, p));
    } catch (const Error&) {
      // point sits on a camera center; no defined angle
    }
  }
  if (angles.empty()) return std::nullopt;
  out.median_angle_deg = median(std::move(angles));
  return out;
}

ConnectionEdge assemble_edge(SubmapId a, SubmapId b, std::vector<PairMeasurement> pairs) {
  if (pairs.empty()) {
    throw Error(ErrorCode::kNoValidPairs, "no connected-frame pair between " + submap_label(a) +
                                              " and " + submap_label(b));
  }
  ConnectionEdge e;
  e.submap_a = a;
  e.submap_b = b;
  e.pairs = std::move(pairs);
  e.F = static_cast<int>(e.pairs.size());
  e.M = static_cast<int>(e.shared_points().size());
  std::vector<double> medians;
  medians.reserve(e.pairs.size());
  for (const PairMeasurement& p : e.pairs) medians.push_back(p.median_angle_deg);
  e.theta_median_deg = std::clamp(median(std::move(medians)), 0.0, kMaxConnectionThetaDeg);
  e.C = connection_strength(e.F, e.M, e.theta_median_deg);
  return e;
}

ConnectionEdge build_edge(const Submap& a, const Submap& b,
                          std::span<const ConnectedFrameMatch> matches,
                          std::size_t min_shared_points) {
  std::vector<PairMeasurement> pairs;
  for (const ConnectedFrameMatch& m : matches) {
    const bool matched_in_b = m.matched_submap_id == b.id;
    const FrameRecord* fa = matched_in_b ? a.find(m.query_frame_id) : a.find(m.matched_frame_id);
    const FrameRecord* fb = matched_in_b ? b.find(m.matched_frame_id) : b.find(m.query_frame_id);
    if (fa == nullptr || fb == nullptr) continue;
    if (auto p = measure_pair(a, b, *fa, *fb, min_shared_points)) pairs.push_back(std::move(*p));
  }
  return assemble_edge(a.id, b.id, std::move(pairs));
}

void SubmapGraph::remove_node(SubmapId id) {
  nodes_.erase(id);
  std::erase_if(edges_, [id](const auto& kv) {
    return kv.first.first == id || kv.first.second == id;
  });
}

void SubmapGraph::upsert(const ConnectionEdge& edge) {
  if (edge.submap_a == edge.submap_b) {
    throw Error(ErrorCode::kInvariantViolation,
                "self-loop on submap " + submap_label(edge.submap_a));
  }
  nodes_.insert(edge.submap_a);
  nodes_.insert(edge.submap_b);
  auto [it, inserted] = edges_.try_emplace(edge.key(), edge);
  if (!inserted && edge.C > it->second.C) it->second = edge;
}

const ConnectionEdge* SubmapGraph::find(SubmapId a, SubmapId b) const {
  auto it = edges_.find(ordered(a, b));
  return it == edges_.end() ? nullptr : &it->second;
}

MstResult kruskal_mst(const SubmapGraph& graph) {
  std::vector<const ConnectionEdge*> sorted;
  sorted.reserve(graph.edges().size());
  for (const auto& [key, e] : graph.edges()) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const ConnectionEdge* x, const ConnectionEdge* y) {
    return std::make_tuple(x->weight(), x->key()) < std::make_tuple(y->weight(), y->key());
  });

  std::map<SubmapId, std::size_t> index;
  for (SubmapId id : graph.nodes()) index.emplace(id, index.size());
  DisjointSets sets(index.size());

  MstResult out;
  for (const ConnectionEdge* e : sorted) {
    if (sets.unite(index.at(e->submap_a), index.at(e->submap_b))) {
      out.edges.push_back(*e);
      out.total_strength += e->C;
    }
  }
  out.components = index.size() - out.edges.size();
  out.disconnected = out.components > 1;
  return out;
}

SimilarityEstimate estimate_merge_transform(const Submap& target, const Submap& source,
                                            const ConnectionEdge& edge, const MergeConfig& cfg) {
  std::vector<Vec3> src, dst;
  for (LandmarkId id : edge.shared_points()) {
    auto s = source.map_points.find(id);
    auto t = target.map_points.find(id);
    if (s == source.map_points.end() || t == target.map_points.end()) continue;
    src.push_back(s->second.position);
    dst.push_back(t->second.position);
  }
  if (cfg.robust) return estimate_similarity_robust(src, dst, cfg.robust_options);
  return estimate_similarity(src, dst);
}

Submap execute_merge(Submap target, const Submap& source, const SimilarityEstimate& estimate,
                     double residual_cap) {
  if (target.id == source.id) {
    throw Error(ErrorCode::kInvariantViolation, "cannot merge submap " + target.name + " into itself");
  }
  if (estimate.residual_rms > residual_cap) {
    throw Error(ErrorCode::kResidualTooLarge,
                "residual " + std::to_string(estimate.residual_rms) + " exceeds cap " +
                    std::to_string(residual_cap));
  }
  const SimilarityTransform& T = estimate.transform;
  for (const FrameRecord& r : source.frames) {
    FrameRecord moved = r;
    moved.pose = apply_similarity_pose(T, r.pose);
    target.frames.push_back(std::move(moved));
  }
  target.sort_frames();

  for (const auto& [id, mp] : source.map_points) {
    const Vec3 p = T.apply(mp.position);
    auto [it, inserted] = target.map_points.try_emplace(id, MapPoint{p, mp.observers});
    if (!inserted) {
      it->second.position = 0.5 * (it->second.position + p);
      it->second.observers += mp.observers;
    }
  }
  for (const auto& [id, frame_id] : source.pending) {
    if (target.map_points.contains(id)) continue;
    auto [it, inserted] = target.pending.try_emplace(id, frame_id);
    if (!inserted) it->second = std::min(it->second, frame_id);
  }
  target.members.insert(target.members.end(), source.members.begin(), source.members.end());
  std::sort(target.members.begin(), target.members.end());
  target.name = composite_name(target.members);
  return target;
}

void MergeBook::absorb(SubmapId target, SubmapId source) {
  std::map<std::pair<SubmapId, SubmapId>, std::vector<PairMeasurement>> moved;
  for (auto it = pools.begin(); it != pools.end();) {
    const auto [lo, hi] = it->first;
    if (lo != source && hi != source) {
      ++it;
      continue;
    }
    const SubmapId other = lo == source ? hi : lo;
    if (other != target) {
      auto& dst = moved[ordered(target, other)];
      dst.insert(dst.end(), it->second.begin(), it->second.end());
    }
    it = pools.erase(it);
  }

  std::vector<ConnectionEdge> relabeled;
  for (const auto& [key, e] : graph.edges()) {
    if (key.first != source && key.second != source) continue;
    const SubmapId other = key.first == source ? key.second : key.first;
    if (other == target) continue;
    ConnectionEdge r = e;
    r.submap_a = target;
    r.submap_b = other;
    relabeled.push_back(std::move(r));
  }
  graph.remove_node(source);

  for (auto& [key, pairs] : moved) {
    auto& pool = pools[key];
    pool.insert(pool.end(), pairs.begin(), pairs.end());
    const SubmapId other = key.first == target ? key.second : key.first;
    graph.upsert(assemble_edge(target, other, pool));
  }
  for (const ConnectionEdge& e : relabeled) graph.upsert(e);
}

std::vector<MergeDecision> attempt_merges(Submap& current, std::vector<Submap>& stack,
                                          MergeBook& book,
                                          std::span<const ConnectedFrameMatch> new_matches,
                                          const MergeConfig& cfg, FrameId frame_id) {
  auto find_stacked = [&stack](SubmapId id) {
    return std::find_if(stack.begin(), stack.end(), [id](const Submap& s) { return s.id == id; });
  };

  book.graph.add_node(current.id);
  for (const Submap& s : stack) book.graph.add_node(s.id);

  std::set<SubmapId> touched;
  for (const ConnectedFrameMatch& m : new_matches) {
    auto s = find_stacked(m.matched_submap_id);
    if (s == stack.end()) continue;
    const FrameRecord* q = current.find(m.query_frame_id);
    const FrameRecord* f = s->find(m.matched_frame_id);
    if (q == nullptr || f == nullptr) continue;
    auto pair = measure_pair(current, *s, *q, *f, cfg.min_shared_points);
    if (!pair) continue;
    book.pools[ordered(current.id, s->id)].push_back(std::move(*pair));
    touched.insert(s->id);
  }
  for (SubmapId id : touched) {
    book.graph.upsert(assemble_edge(current.id, id, book.pools.at(ordered(current.id, id))));
  }

  std::vector<MergeDecision> decisions;
  std::set<SubmapId> rejected;
  for (;;) {
    const MstResult mst = kruskal_mst(book.graph);
    std::vector<ConnectionEdge> incident;
    for (const ConnectionEdge& e : mst.edges) {
      const SubmapId other = e.submap_a == current.id ? e.submap_b
                             : e.submap_b == current.id ? e.submap_a
                                                        : current.id;
      if (other != current.id && !rejected.contains(other)) incident.push_back(e);
    }
    std::sort(incident.begin(), incident.end(), [](const ConnectionEdge& x, const ConnectionEdge& y) {
      return std::make_tuple(-x.C, x.key()) < std::make_tuple(-y.C, y.key());
    });

    bool merged = false;
    for (const ConnectionEdge& e : incident) {
      const SubmapId other = e.submap_a == current.id ? e.submap_b : e.submap_a;
      auto s = find_stacked(other);
      if (s == stack.end()) {
        throw Error(ErrorCode::kInvariantViolation,
                    "graph node " + submap_label(other) + " is not in the stack");
      }
      MergeDecision d;
      d.target = current.id;
      d.source = other;
      d.edge = e;
      if (e.C < cfg.strength_threshold) {
        d.reason = "strength below threshold";
        rejected.insert(other);
        if (touched.contains(other)) decisions.push_back(std::move(d));
        continue;
      }
      SimilarityEstimate est;
      try {
        est = estimate_merge_transform(current, *s, e, cfg);
      } catch (const Error& err) {
        d.reason = err.what();
        rejected.insert(other);
        decisions.push_back(std::move(d));
        continue;
      }
      d.transform = est.transform;
      d.residual_rms = est.residual_rms;
      if (est.residual_rms > cfg.merge_residual_cap) {
        d.reason = "residual above cap";
        rejected.insert(other);
        decisions.push_back(std::move(d));
        continue;
      }

      MergeRecord rec;
      rec.frame_id = frame_id;
      rec.target = current.id;
      rec.source = other;
      rec.target_name = current.name;
      rec.source_name = s->name;
      rec.F = e.F;
      rec.M = e.M;
      rec.theta_deg = e.theta_median_deg;
      rec.C = e.C;
      rec.residual_rms = est.residual_rms;
      rec.scale = est.transform.scale;
      book.history.push_back(rec);

      current = execute_merge(std::move(current), *s, est, cfg.merge_residual_cap);
      stack.erase(s);
      book.absorb(current.id, other);
      for (const auto& [key, edge] : book.graph.edges()) {
        if (key.first == current.id) touched.insert(key.second);
        if (key.second == current.id) touched.insert(key.first);
      }
      d.accepted = true;
      d.reason = "merged";
      decisions.push_back(std::move(d));
      merged = true;
      break;
    }
    if (!merged) break;
  }
  return decisions;
}

}  // namespace smr
