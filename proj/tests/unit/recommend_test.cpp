#include <gtest/gtest.h>

#include <random>
#include <set>

#include "mtmc/error.hpp"
#include "mtmc/recommend.hpp"
#include "test_support.hpp"

namespace mtmc {
namespace {

using testing::timed;

CameraGraph line_graph(int n, double tt_min, double tt_max, double overlap = 0.0) {
  CameraGraph g;
  for (int i = 0; i < n; ++i) g.add_camera({"c" + std::to_string(i), {100.0 * i, 0}, i});
  for (int i = 0; i + 1 < n; ++i) {
    const auto a = "c" + std::to_string(i), b = "c" + std::to_string(i + 1);
    g.add_edge(a, b, {tt_min, tt_max});
    g.add_edge(b, a, {tt_min, tt_max});
    if (overlap > 0) g.set_overlap(a, b, overlap);
  }
  return g;
}

std::vector<TrajectoryRef> refs(const std::vector<Candidate>& cs) {
  std::vector<TrajectoryRef> out;
  for (const auto& c : cs) out.push_back(c.ref());
  return out;
}

TEST(Csg, InclusiveWindowSortedByOffsetThenId) {
  const std::vector<Trajectory> g{timed("b", 1, 15, 20), timed("b", 2, 10, 12),
                                  timed("b", 3, 20, 25), timed("b", 4, 20.5, 30),
                                  timed("b", 0, 15, 16), timed("b", 5, 9.99, 11)};
  const auto out = csg(10.0, g, {0.0, 10.0});
  EXPECT_EQ(refs(out), (std::vector<TrajectoryRef>{{"b", 2}, {"b", 0}, {"b", 1}, {"b", 3}}));
  EXPECT_DOUBLE_EQ(out[1].time_offset, 5.0);
}

TEST(Gallery, OverlapShiftsSearchStart) {
  auto g = line_graph(2, 1, 5);
  g.set_overlap("c0", "c1", 5.0);
  const auto q = timed("c0", 0, 100, 102);
  const std::map<CameraId, std::vector<Trajectory>> gal{{"c1", {timed("c1", 9, 99, 110)}}};
  const auto with = time_constrained_gallery(q, g, {"c1"}, gal, {0, 10});
  ASSERT_EQ(with.size(), 1u);
  EXPECT_DOUBLE_EQ(with[0].time_offset, 4.0);
  g.set_overlap("c0", "c1", 0.0);
  EXPECT_TRUE(time_constrained_gallery(q, g, {"c1"}, gal, {0, 10}).empty());
}

TEST(Gallery, UnknownCameraRejected) {
  const auto g = line_graph(2, 1, 5);
  EXPECT_THROW(time_constrained_gallery(timed("zz", 0, 0, 1), g, {}, {}, {0, 1}), InputError);
  EXPECT_THROW(time_constrained_gallery(timed("c0", 0, 0, 1), g, {"zz"}, {}, {0, 1}), InputError);
}

TEST(Gallery, ExtendMaxByQueryDuration) {
  const auto g = line_graph(2, 1, 5);
  const auto q = timed("c0", 0, 10, 18);
  const std::map<CameraId, std::vector<Trajectory>> gal{{"c1", {timed("c1", 1, 25, 30)}}};
  EXPECT_TRUE(time_constrained_gallery(q, g, {"c1"}, gal, {0, 10}).empty());
  GalleryOptions opts;
  opts.extend_max_by_query_duration = true;
  EXPECT_EQ(time_constrained_gallery(q, g, {"c1"}, gal, {0, 10}, opts).size(), 1u);
}

TEST(Gallery, MatchesExhaustiveScan) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> st(0, 100), dur(1, 10), ov(0, 6);
  std::uniform_int_distribution<int> count(0, 12);
  for (int trial = 0; trial < 100; ++trial) {
    auto graph = line_graph(4, 2, 8);
    graph.set_overlap("c0", "c1", ov(rng) < 3 ? 0.0 : ov(rng));
    graph.set_overlap("c1", "c2", ov(rng));
    std::map<CameraId, std::vector<Trajectory>> gal;
    for (const auto& [cam, c] : graph.cameras()) {
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        const double s = st(rng);
        gal[cam].push_back(timed(cam, i, s, s + dur(rng)));
      }
    }
    const double s = st(rng);
    const auto q = timed("c1", 99, s, s + dur(rng));
    const TimeWindow w{-5.0 + ov(rng), 10.0 + ov(rng)};
    const std::vector<CameraId> cams{"c0", "c2", "c3"};

    std::set<TrajectoryRef> expect;
    for (const auto& cam : cams) {
      const double o = graph.overlap(cam, "c1");
      for (const auto& t : gal[cam]) {
        const double d = t.st - (q.st - o);
        if (d >= w.min_offset && d <= w.max_offset) expect.insert(t.ref());
      }
    }
    const auto got = time_constrained_gallery(q, graph, cams, gal, w);
    const auto got_refs = refs(got);
    EXPECT_EQ(std::set<TrajectoryRef>(got_refs.begin(), got_refs.end()), expect) << trial;
    EXPECT_EQ(got_refs.size(), expect.size());
    for (std::size_t i = 1; i < got.size(); ++i) {
      const auto key = [](const Candidate& c) {
        return std::make_tuple(c.time_offset, c.camera_id, c.trajectory->trajectory_id);
      };
      EXPECT_LT(key(got[i - 1]), key(got[i]));
    }
  }
}

TEST(Graph, PathBoundsSumEdgesWithinHopBudget) {
  const auto g = line_graph(4, 2, 5);
  EXPECT_FALSE(g.path_bounds("c0", "c2", 1));
  const auto b = g.path_bounds("c0", "c2", 2);
  ASSERT_TRUE(b);
  EXPECT_DOUBLE_EQ(b->min_s, 4.0);
  EXPECT_DOUBLE_EQ(b->max_s, 10.0);
}

TEST(Graph, JsonRoundTrip) {
  auto g = line_graph(3, 1.5, 4.25, 2.0);
  const auto back = camera_graph_from_json(camera_graph_to_json(g));
  EXPECT_EQ(back.edges().size(), g.edges().size());
  EXPECT_DOUBLE_EQ(back.overlap("c1", "c0"), 2.0);
  EXPECT_EQ(back.camera("c2").zone_id, 2);
  EXPECT_THROW(camera_graph_from_json("{\"cameras\": 3}"), Error);
}

TEST(Prune, KeepsCandidatesWithinTravelTimes) {
  const auto g = line_graph(4, 2, 5);
  const auto q = timed("c1", 0, 100, 101);
  std::map<CameraId, std::vector<Trajectory>> gal{
      {"c0", {timed("c0", 1, 97, 99)}},   // d=-3, adjacent: kept
      {"c2", {timed("c2", 2, 103, 106),   // d=3: kept
              timed("c2", 3, 109, 110)}}, // d=9: too late
      {"c3", {timed("c3", 4, 104, 106)}}};  // two hops away
  const auto all = time_constrained_gallery(q, g, {"c0", "c2", "c3"}, gal, {-10, 10});
  ASSERT_EQ(all.size(), 4u);
  const auto pruned = topology_prune(all, q, g);
  EXPECT_EQ(refs(pruned), (std::vector<TrajectoryRef>{{"c0", 1}, {"c2", 2}}));
  PruneOptions two;
  two.max_hops = 2;
  EXPECT_EQ(topology_prune(all, q, g, two).size(), 3u);
}

TEST(Prune, ZoneHintRestrictsToRouteZones) {
  CameraGraph g;
  g.add_camera({"a", {}, 1});
  g.add_camera({"b", {}, 2});
  g.add_camera({"c", {}, 3});
  g.add_edge("a", "b", {1, 5});
  g.add_edge("b", "a", {1, 5});
  g.add_edge("a", "c", {1, 5});
  const auto q = timed("a", 0, 0, 1);
  std::map<CameraId, std::vector<Trajectory>> gal{{"b", {timed("b", 1, 2, 3)}},
                                                  {"c", {timed("c", 2, 2, 3)}}};
  const auto all = time_constrained_gallery(q, g, {"b", "c"}, gal, {0, 10});
  PruneOptions opts;
  opts.zone_hint = ZoneTransition{1, 2};
  EXPECT_EQ(refs(topology_prune(all, q, g, opts)), (std::vector<TrajectoryRef>{{"b", 1}}));
}

TEST(Rank, ModesOrderByTheirKey) {
  const auto q = timed("a", 0, 0, 1, {1, 0});
  const std::vector<Trajectory> g{timed("b", 1, 1, 2, {0, 1}), timed("b", 2, 8, 9, {1, 0.1})};
  const auto cands = csg(0.0, g, {0, 10});
  EXPECT_EQ(rank(cands, q, {RankMode::kTime}).front().ref(), (TrajectoryRef{"b", 1}));
  EXPECT_EQ(rank(cands, q, {RankMode::kAppearance}).front().ref(), (TrajectoryRef{"b", 2}));
  EXPECT_EQ(rank(cands, q, {RankMode::kBlend, 0.3, 10.0}).front().ref(), (TrajectoryRef{"b", 2}));
  EXPECT_EQ(rank(cands, q, {RankMode::kBlend, 0.95, 10.0}).front().ref(), (TrajectoryRef{"b", 1}));
  EXPECT_THROW(parse_rank_mode("random"), ConfigError);
  EXPECT_THROW(rank(cands, q, {RankMode::kBlend, 1.5, 1.0}), ConfigError);
}

TEST(Rank, TiesBrokenByRef) {
  const auto q = timed("a", 0, 0, 1, {1, 0});
  const std::vector<Trajectory> g{timed("c", 1, 3, 4), timed("b", 7, 3, 4), timed("b", 2, 3, 4)};
  const auto ranked = rank(csg(0.0, g, {0, 10}), q, {RankMode::kTime});
  EXPECT_EQ(refs(ranked), (std::vector<TrajectoryRef>{{"b", 2}, {"b", 7}, {"c", 1}}));
}

}  // namespace
}  // namespace mtmc
