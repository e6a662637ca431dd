#include <gtest/gtest.h>

#include <boost/rational.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "smr/errors.hpp"
#include "smr/graph_merge.hpp"

using namespace smr;
using Rational = boost::rational<long long>;

namespace {

void expect_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Frame frame_seeing(FrameId id, const std::vector<LandmarkId>& ids) {
  Frame f;
  f.id = id;
  for (LandmarkId l : ids) {
    f.observations.push_back(Observation{l, Vec3::UnitZ()});
    f.words.push_back(l);
  }
  return f;
}

// Adds a keyframe at world pose `world_pose`, expressed in the map's gauge.
void add_keyframe(Submap& m, FrameId id, const Pose& world_pose, const std::vector<LandmarkId>& ids) {
  FrameRecord r;
  r.frame = frame_seeing(id, ids);
  r.frame.gt_pose = world_pose;
  r.pose = apply_similarity_pose(m.gauge, world_pose);
  r.keyframe = true;
  r.origin = m.id;
  m.append(r);
}

void add_points(Submap& m, const std::vector<Vec3>& world, const std::vector<LandmarkId>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    m.map_points[ids[i]] = MapPoint{m.gauge.apply(world[i]), 2};
  }
}

// Two cameras 2d apart on the x axis; points on the bisector plane x = 0
// at radius d / tan(theta / 2) see the baseline under exactly theta.
struct BisectorScene {
  Submap a{0, 1.0};
  Submap b{1, 1.0};
  std::vector<LandmarkId> ids;
  ConnectedFrameMatch match;
};

BisectorScene bisector_scene(const std::vector<double>& angles_deg) {
  BisectorScene s;
  const double d = 2.0;
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < angles_deg.size(); ++i) {
    const double r = d / std::tan(deg_to_rad(angles_deg[i]) / 2.0);
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / angles_deg.size();
    pts.push_back(Vec3(0.0, r * std::cos(phi), r * std::sin(phi)));
    s.ids.push_back(static_cast<LandmarkId>(100 + i));
  }
  add_points(s.a, pts, s.ids);
  add_points(s.b, pts, s.ids);
  add_keyframe(s.a, 10, Pose{Mat3::Identity(), Vec3(-d, 0, 0)}, s.ids);
  add_keyframe(s.b, 20, Pose{Mat3::Identity(), Vec3(d, 0, 0)}, s.ids);
  s.match = ConnectedFrameMatch{10, 20, 1, s.ids.size(), 1.0};
  return s;
}

// Landmarks near the ground plane seen by two downward cameras 10 m apart.
struct MergeScene {
  std::vector<Vec3> world;
  std::vector<LandmarkId> ids;
  Pose pose_t{nadir_rotation(), Vec3(-5, 0, 20)};
  Pose pose_s{nadir_rotation(), Vec3(5, 0, 20)};
};

MergeScene merge_scene(std::uint64_t seed, int n = 50) {
  MergeScene s;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    s.world.push_back(Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-1, 1)));
    s.ids.push_back(i);
  }
  return s;
}

PairMeasurement pair_with(FrameId a, FrameId b, std::vector<LandmarkId> shared, double median) {
  return PairMeasurement{a, b, std::move(shared), median};
}

}  // namespace

TEST(ConnectionStrength, Examples) {
  EXPECT_EQ(connection_strength(10, 100, 10), 30.0);
  EXPECT_EQ(connection_strength(0, 0, 0), 0.0);
  EXPECT_EQ(connection_strength(5, 200, 45), 227.5);
  expect_error(ErrorCode::kOutOfRangeTheta, [] { connection_strength(1, 1, 45.5); });
  expect_error(ErrorCode::kOutOfRangeTheta, [] { connection_strength(1, 1, -0.1); });
}

TEST(ConnectionStrength, ExactIncrements) {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Rational F(static_cast<long long>(rng.index(50)));
    const Rational M(static_cast<long long>(rng.index(5000)));
    const Rational th(static_cast<long long>(rng.index(4501)), 100);
    const Rational c = connection_strength_of(F, M, th);
    EXPECT_EQ(connection_strength_of(F + 1, M, th) - c, Rational(1));
    EXPECT_EQ(connection_strength_of(F, M + 10, th) - c, Rational(1));
    const Rational dth(1, 4);
    EXPECT_EQ(connection_strength_of(F, M, th + dth) - c, (2 * th * dth + dth * dth) / 10);
  }
}

TEST(BuildEdge, MedianAngleOfOnePair) {
  const BisectorScene s = bisector_scene({8, 9, 10, 11, 40});
  const ConnectionEdge e = build_edge(s.a, s.b, std::vector{s.match});
  EXPECT_EQ(e.F, 1);
  EXPECT_EQ(e.M, 5);
  EXPECT_NEAR(e.theta_median_deg, 10.0, 1e-9);
  EXPECT_NEAR(e.C, 11.5, 1e-9);
  EXPECT_DOUBLE_EQ(e.weight(), -e.C);
}

TEST(BuildEdge, WideAnglesAreClamped) {
  const BisectorScene s = bisector_scene({60, 60, 60, 60, 60});
  const ConnectionEdge e = build_edge(s.a, s.b, std::vector{s.match});
  EXPECT_EQ(e.theta_median_deg, 45.0);
  EXPECT_EQ(e.C, 204.0);
}

TEST(BuildEdge, NoSharedPoints) {
  BisectorScene s = bisector_scene({10, 10, 10, 10, 10});
  s.b.map_points.clear();
  expect_error(ErrorCode::kNoValidPairs, [&] { build_edge(s.a, s.b, std::vector{s.match}); });
  expect_error(ErrorCode::kNoValidPairs, [&] { build_edge(s.a, s.b, {}); });
}

TEST(BuildEdge, SymmetricUnderArgumentSwap) {
  const MergeScene w = merge_scene(3);
  Submap a(0, 1.0), b(1, 1.0);
  Rng rng(4);
  a.gauge = oracle::random_similarity(rng);
  b.gauge = oracle::random_similarity(rng);
  add_points(a, w.world, w.ids);
  add_points(b, w.world, w.ids);
  add_keyframe(a, 1, w.pose_t, w.ids);
  add_keyframe(b, 9, w.pose_s, w.ids);
  const ConnectedFrameMatch ab{1, 9, 1, w.ids.size(), 1.0};
  const ConnectedFrameMatch ba{9, 1, 0, w.ids.size(), 1.0};
  const ConnectionEdge e1 = build_edge(a, b, std::vector{ab});
  const ConnectionEdge e2 = build_edge(b, a, std::vector{ba});
  EXPECT_EQ(e1.F, e2.F);
  EXPECT_EQ(e1.M, e2.M);
  EXPECT_EQ(e1.theta_median_deg, e2.theta_median_deg);
  EXPECT_EQ(e1.C, e2.C);
  EXPECT_EQ(e1.key(), e2.key());
  // Gauge-free: the median angle matches the world-frame value.
  std::vector<double> angles;
  for (const Vec3& p : w.world) angles.push_back(intersection_angle(w.pose_t.center(), w.pose_s.center(), p));
  EXPECT_NEAR(e1.theta_median_deg, median(angles), 1e-7);
}

TEST(Edge, StrongerUpsertKeepsGraphStrengthMonotone) {
  // A raw rebuilt edge can lose strength when a low-angle pair pulls the
  // median down; the graph keeps the stronger of old and new.
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    SubmapGraph g;
    std::vector<PairMeasurement> pool;
    double last = 0.0;
    for (int k = 0; k < 8; ++k) {
      std::vector<LandmarkId> shared;
      const int lo = static_cast<int>(rng.index(100));
      for (int i = lo; i < lo + 5 + static_cast<int>(rng.index(20)); ++i) shared.push_back(i);
      pool.push_back(pair_with(k, 100 + k, shared, rng.uniform(0.0, 60.0)));
      g.upsert(assemble_edge(0, 1, pool));
      const double now = g.find(0, 1)->C;
      EXPECT_GE(now, last);
      last = now;
    }
  }
}

TEST(Edge, AddingPairAtOrAboveMedianNeverWeakens) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PairMeasurement> pool;
    for (int k = 0; k < 1 + static_cast<int>(rng.index(6)); ++k) {
      pool.push_back(pair_with(k, 50 + k, {k, k + 1, k + 2}, rng.uniform(0.0, 50.0)));
    }
    const ConnectionEdge before = assemble_edge(0, 1, pool);
    pool.push_back(pair_with(40, 90, {7, 8, 9}, before.theta_median_deg + rng.uniform(0.0, 5.0)));
    EXPECT_GE(assemble_edge(0, 1, pool).C, before.C);
  }
}

TEST(Graph, SelfLoopRejected) {
  SubmapGraph g;
  ConnectionEdge e;
  e.submap_a = e.submap_b = 3;
  expect_error(ErrorCode::kInvariantViolation, [&] { g.upsert(e); });
}

TEST(Graph, OneEdgePerPairKeepsStrongest) {
  SubmapGraph g;
  ConnectionEdge e;
  e.submap_a = 2;
  e.submap_b = 1;
  e.C = 5;
  g.upsert(e);
  e.submap_a = 1;
  e.submap_b = 2;
  e.C = 3;
  g.upsert(e);
  ASSERT_EQ(g.edges().size(), 1u);
  EXPECT_EQ(g.find(2, 1)->C, 5);
  g.remove_node(1);
  EXPECT_TRUE(g.edges().empty());
  EXPECT_EQ(g.nodes(), std::set<SubmapId>{2});
}

namespace {

SubmapGraph graph_from(const std::vector<oracle::Edge>& edges, int n) {
  SubmapGraph g;
  for (int i = 0; i < n; ++i) g.add_node(i);
  for (const oracle::Edge& o : edges) {
    ConnectionEdge e;
    e.submap_a = o.a;
    e.submap_b = o.b;
    e.C = o.C;
    g.upsert(e);
  }
  return g;
}

}  // namespace

TEST(Kruskal, TwoNodes) {
  const MstResult r = kruskal_mst(graph_from({{0, 1, 7.0}}, 2));
  ASSERT_EQ(r.edges.size(), 1u);
  EXPECT_EQ(r.total_strength, 7.0);
  EXPECT_FALSE(r.disconnected);
}

TEST(Kruskal, TriangleDropsWeakest) {
  const MstResult r = kruskal_mst(graph_from({{0, 1, 30}, {1, 2, 20}, {0, 2, 10}}, 3));
  ASSERT_EQ(r.edges.size(), 2u);
  EXPECT_EQ(r.edges[0].C, 30);
  EXPECT_EQ(r.edges[1].C, 20);
}

TEST(Kruskal, DisconnectedGivesForest) {
  const MstResult r = kruskal_mst(graph_from({{0, 1, 3}, {2, 3, 4}}, 5));
  EXPECT_EQ(r.edges.size(), 2u);
  EXPECT_EQ(r.components, 3u);
  EXPECT_TRUE(r.disconnected);
}

TEST(Kruskal, MatchesBruteForce) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(5));
    const auto edges = oracle::random_connected_graph(rng, n, 12);
    const MstResult r = kruskal_mst(graph_from(edges, n));
    EXPECT_EQ(r.edges.size(), static_cast<std::size_t>(n - 1));
    EXPECT_EQ(r.total_strength, oracle::brute_force_max_spanning_strength(n, edges));
  }
}

TEST(Kruskal, EqualStrengthsBreakTiesByKey) {
  const MstResult r = kruskal_mst(graph_from({{1, 2, 5}, {0, 2, 5}, {0, 1, 5}}, 3));
  ASSERT_EQ(r.edges.size(), 2u);
  EXPECT_EQ(r.edges[0].key(), std::make_pair(0, 1));
  EXPECT_EQ(r.edges[1].key(), std::make_pair(0, 2));
}

namespace {

struct TwoMaps {
  Submap target{0, 1.0};
  Submap source{1, 1.0};
  ConnectionEdge edge;
};

TwoMaps two_maps(const SimilarityTransform& target_gauge, const SimilarityTransform& source_gauge) {
  const MergeScene w = merge_scene(5);
  TwoMaps m;
  m.target.gauge = target_gauge;
  m.source.gauge = source_gauge;
  add_points(m.target, w.world, w.ids);
  add_points(m.source, w.world, w.ids);
  add_keyframe(m.target, 1, w.pose_t, w.ids);
  add_keyframe(m.source, 2, w.pose_s, w.ids);
  m.edge = build_edge(m.target, m.source, std::vector{ConnectedFrameMatch{1, 2, 1, w.ids.size(), 1.0}});
  return m;
}

}  // namespace

TEST(MergeTransform, IdenticalGaugesGiveIdentity) {
  const TwoMaps m = two_maps({}, {});
  const SimilarityEstimate est = estimate_merge_transform(m.target, m.source, m.edge);
  EXPECT_NEAR(est.transform.scale, 1.0, 1e-12);
  EXPECT_LT((est.transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(est.transform.translation.norm(), 1e-10);
  EXPECT_LT(est.residual_rms, 1e-10);
}

TEST(MergeTransform, RecoversKnownGauge) {
  Rng rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    const SimilarityTransform gt = oracle::random_similarity(rng);
    const SimilarityTransform gs = oracle::random_similarity(rng);
    const TwoMaps m = two_maps(gt, gs);
    const SimilarityTransform want = gt * gs.inverse();  // source local -> target local
    const SimilarityEstimate est = estimate_merge_transform(m.target, m.source, m.edge);
    EXPECT_NEAR(est.transform.scale, want.scale, 1e-9);
    EXPECT_LT(oracle::rotation_angle_between(est.transform.rotation, want.rotation), 1e-9);
    EXPECT_LT((est.transform.translation - want.translation).norm(), 1e-9);
  }
}

TEST(MergeTransform, CollinearSharedPoints) {
  Submap t(0, 1.0), s(1, 1.0);
  const std::vector<Vec3> line = {{0, 0, 0}, {1, 1, 0}, {2, 2, 0}};
  add_points(t, line, {0, 1, 2});
  add_points(s, line, {0, 1, 2});
  ConnectionEdge e;
  e.submap_a = 0;
  e.submap_b = 1;
  e.pairs = {pair_with(1, 2, {0, 1, 2}, 10)};
  expect_error(ErrorCode::kDegenerateConfiguration, [&] { estimate_merge_transform(t, s, e); });
}

TEST(ExecuteMerge, DisjointUnionWithIdentity) {
  Submap t(0, 1.0), s(1, 1.0);
  add_points(t, {{0, 0, 0}, {1, 0, 0}}, {0, 1});
  add_points(s, {{5, 0, 0}, {6, 0, 0}, {7, 0, 0}}, {10, 11, 12});
  add_keyframe(t, 0, Pose{}, {0, 1});
  add_keyframe(t, 4, Pose{}, {0, 1});
  add_keyframe(s, 2, Pose{}, {10});
  const Submap m = execute_merge(t, s, SimilarityEstimate{}, 0.1);
  EXPECT_EQ(m.id, 0);
  EXPECT_EQ(m.map_points.size(), 5u);
  ASSERT_EQ(m.frames.size(), 3u);
  EXPECT_EQ(m.frames[1].frame.id, 2);
  EXPECT_EQ(m.frames[1].origin, 1);
  EXPECT_EQ(m.name, "B-A");
  EXPECT_EQ(m.members, (std::vector<SubmapId>{0, 1}));
}

TEST(ExecuteMerge, KnownGaugeLandsOnTargetGroundTruth) {
  Rng rng(31);
  const SimilarityTransform gt = oracle::random_similarity(rng);
  const SimilarityTransform gs = oracle::random_similarity(rng);
  const TwoMaps m = two_maps(gt, gs);
  const SimilarityEstimate est = estimate_merge_transform(m.target, m.source, m.edge);
  const Submap merged = execute_merge(m.target, m.source, est, 1e-6);
  const MergeScene w = merge_scene(5);
  for (std::size_t i = 0; i < w.ids.size(); ++i) {
    EXPECT_LT((merged.map_points.at(w.ids[i]).position - gt.apply(w.world[i])).norm(), 1e-8);
    EXPECT_EQ(merged.map_points.at(w.ids[i]).observers, 4);
  }
  const Pose moved = merged.find(2)->pose;
  EXPECT_LT((moved.center() - gt.apply(w.pose_s.center())).norm(), 1e-8);
  EXPECT_LT(oracle::rotation_angle_between(moved.rotation, gt.rotation * w.pose_s.rotation), 1e-9);
}

TEST(ExecuteMerge, Rejections) {
  Submap t(0, 1.0), s(1, 1.0);
  SimilarityEstimate bad;
  bad.residual_rms = 2.0;
  expect_error(ErrorCode::kResidualTooLarge, [&] { execute_merge(t, s, bad, 0.5); });
  expect_error(ErrorCode::kInvariantViolation, [&] { execute_merge(t, t, SimilarityEstimate{}, 0.5); });
}

namespace {

struct MergeFixture {
  Submap current{1, 1.0};
  std::vector<Submap> stack;
  MergeBook book;
  std::vector<ConnectedFrameMatch> matches;
};

MergeFixture merge_fixture() {
  const MergeScene w = merge_scene(6);
  MergeFixture f;
  Rng rng(7);
  Submap old(0, 1.0);
  old.gauge = oracle::random_similarity(rng);
  f.current.gauge = oracle::random_similarity(rng);
  add_points(old, w.world, w.ids);
  add_points(f.current, w.world, w.ids);
  add_keyframe(old, 3, w.pose_t, w.ids);
  add_keyframe(f.current, 30, w.pose_s, w.ids);
  f.stack.push_back(old);
  f.matches = {ConnectedFrameMatch{30, 3, 0, w.ids.size(), 1.0}};
  return f;
}

}  // namespace

TEST(AttemptMerges, StrongEdgeMerges) {
  MergeFixture f = merge_fixture();
  MergeConfig cfg;
  cfg.strength_threshold = 12.0;
  const auto decisions = attempt_merges(f.current, f.stack, f.book, f.matches, cfg, 30);
  ASSERT_EQ(decisions.size(), 1u);
  EXPECT_TRUE(decisions[0].accepted);
  EXPECT_GE(decisions[0].edge.C, 12.0);
  EXPECT_TRUE(f.stack.empty());
  EXPECT_EQ(f.current.name, "B-A");
  EXPECT_EQ(f.current.frames.size(), 2u);
  ASSERT_EQ(f.book.history.size(), 1u);
  EXPECT_EQ(f.book.history[0].target, 1);
  EXPECT_EQ(f.book.history[0].source, 0);
  EXPECT_TRUE(f.book.graph.edges().empty());
}

TEST(AttemptMerges, WeakEdgeStaysStacked) {
  MergeFixture f = merge_fixture();
  MergeConfig cfg;
  cfg.strength_threshold = 1e6;
  const auto decisions = attempt_merges(f.current, f.stack, f.book, f.matches, cfg, 30);
  ASSERT_EQ(decisions.size(), 1u);
  EXPECT_FALSE(decisions[0].accepted);
  EXPECT_EQ(f.stack.size(), 1u);
  EXPECT_EQ(f.current.name, "B");
  EXPECT_NE(f.book.graph.find(0, 1), nullptr);
  EXPECT_TRUE(f.book.history.empty());
}

TEST(AttemptMerges, ResidualCapBlocksMerge) {
  MergeFixture f = merge_fixture();
  // Corrupt half of the stacked map's points.
  int i = 0;
  for (auto& [id, mp] : f.stack[0].map_points) {
    if (i++ % 2 == 0) mp.position += Vec3(3, -2, 1);
  }
  MergeConfig cfg;
  cfg.strength_threshold = 0.0;
  cfg.merge_residual_cap = 0.01;
  const auto decisions = attempt_merges(f.current, f.stack, f.book, f.matches, cfg, 30);
  ASSERT_EQ(decisions.size(), 1u);
  EXPECT_FALSE(decisions[0].accepted);
  EXPECT_EQ(decisions[0].reason, "residual above cap");
  EXPECT_EQ(f.stack.size(), 1u);
}

TEST(MergeBook, AbsorbRelabelsEdges) {
  MergeBook book;
  book.pools[{0, 2}] = {pair_with(1, 20, {1, 2, 3, 4, 5}, 10)};
  book.pools[{1, 2}] = {pair_with(11, 21, {6, 7, 8, 9, 10}, 20)};
  book.graph.upsert(assemble_edge(0, 2, book.pools[{0, 2}]));
  book.graph.upsert(assemble_edge(1, 2, book.pools[{1, 2}]));
  book.absorb(2, 1);  // 2 absorbs 1
  EXPECT_FALSE(book.pools.contains({1, 2}));
  ASSERT_NE(book.graph.find(0, 2), nullptr);
  EXPECT_EQ(book.graph.find(0, 2)->F, 1);
  EXPECT_EQ(book.graph.nodes(), (std::set<SubmapId>{0, 2}));
  book.graph.upsert(assemble_edge(1, 3, {pair_with(12, 31, {1, 2, 3}, 5)}));
  book.pools[{1, 3}] = {pair_with(12, 31, {1, 2, 3}, 5)};
  book.pools[{0, 1}] = {pair_with(2, 13, {4, 5, 6}, 7)};
  book.absorb(0, 1);
  EXPECT_EQ(book.pools.at({0, 3}).size(), 1u);
  EXPECT_NE(book.graph.find(0, 3), nullptr);
  EXPECT_EQ(book.graph.find(1, 3), nullptr);
}
