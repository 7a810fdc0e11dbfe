#include <gtest/gtest.h>

#include <set>

#include "mtmc/error.hpp"
#include "mtmc/ingest.hpp"
#include "mtmc/scenario.hpp"
#include "test_support.hpp"

namespace mtmc {
namespace {

TEST(Scenario, DeterministicInSeed) {
  ScenarioConfig cfg;
  cfg.noise = {1.0, 0.05, 0.1, 0.3};
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  EXPECT_EQ(a.detections, b.detections);
  cfg.seed = 2;
  EXPECT_NE(generate(cfg).detections, a.detections);
}

TEST(Scenario, CorrespondenceIsPartition) {
  ScenarioConfig cfg;
  cfg.n_cameras = 5;
  cfg.topology = Topology::kGrid;
  cfg.frames_per_camera = 600;
  const auto s = generate(cfg);
  std::set<TrajectoryRef> seen;
  for (const auto& [v, members] : s.truth.correspondence()) {
    std::set<CameraId> cams;
    for (const auto& m : members) {
      EXPECT_TRUE(seen.insert(m).second);
      EXPECT_TRUE(cams.insert(m.camera_id).second);
    }
  }
  std::size_t total = 0;
  for (const auto& [cam, ts] : s.truth.trajectories) total += ts.size();
  EXPECT_EQ(seen.size(), total);
}

TEST(Scenario, TraversalsRespectEdgeBoundsAndOverlap) {
  ScenarioConfig cfg;
  cfg.n_cameras = 4;
  cfg.frames_per_camera = 700;
  cfg.overlap_seconds = 2.0;
  cfg.overlap_fraction = 0.5;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cfg.seed = seed;
    const auto s = generate(cfg);
    ASSERT_FALSE(s.truth.traversals.empty());
    for (const auto& t : s.truth.traversals) {
      const auto edge = s.graph.edge(t.from, t.to);
      ASSERT_TRUE(edge);
      const double gap = t.entry_to - t.entry_from;
      EXPECT_GE(gap, edge->min_s - 1e-9);
      EXPECT_LE(gap, edge->max_s + 1e-9);
      const double o = s.graph.overlap(t.from, t.to);
      if (o > 0) {
        EXPECT_LT(t.entry_to, t.exit_from);
        EXPECT_GE(t.entry_to, t.exit_from - o - 1e-9);
      } else {
        EXPECT_GT(t.entry_to, t.exit_from);
      }
    }
  }
}

TEST(Scenario, NoiselessDetectionsEqualTruthBoxes) {
  const auto s = generate({});
  for (const auto& [cam, dets] : s.detections) {
    const auto& labels = s.detection_labels.at(cam);
    std::map<std::int64_t, const Trajectory*> by_id;
    for (const auto& t : s.truth.trajectories.at(cam)) by_id[t.trajectory_id] = &t;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      ASSERT_GE(labels[i], 0);
      EXPECT_EQ(dets[i].box, by_id.at(labels[i])->boxes.at(dets[i].frame));
      EXPECT_EQ(dets[i].confidence, 1.0);
    }
  }
}

TEST(Scenario, ImpossibleBudgetIsConfigError) {
  ScenarioConfig cfg;
  cfg.frames_per_camera = 50;
  EXPECT_THROW(generate(cfg), ConfigError);
  cfg = {};
  cfg.n_vehicles = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Scenario, ConfigJsonRoundTrip) {
  ScenarioConfig cfg;
  cfg.seed = 99;
  cfg.topology = Topology::kCustom;
  cfg.custom_edges = {{0, 1}, {1, 2}};
  cfg.noise.dropout = 0.25;
  const auto back = scenario_config_from_json(scenario_config_to_json(cfg));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.topology, Topology::kCustom);
  EXPECT_EQ(back.custom_edges, cfg.custom_edges);
  EXPECT_EQ(back.noise.dropout, 0.25);
}

TEST(Scenario, WrittenFilesParseBack) {
  testing::TempDir dir;
  ScenarioConfig cfg;
  cfg.noise = {1.0, 0.05, 0.1, 0.3};
  const auto s = generate(cfg);
  write_scenario(dir.path(), s);
  for (const auto& [cam, meta] : s.metas) {
    EXPECT_EQ(read_camera_meta(dir / (cam + ".meta.json")), meta);
    const auto parsed = parse_detections(dir / (cam + ".csv"), meta);
    ASSERT_EQ(parsed.size(), s.detections.at(cam).size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      EXPECT_EQ(parsed[i].box, s.detections.at(cam)[i].box);
      EXPECT_EQ(parsed[i].frame, s.detections.at(cam)[i].frame);
    }
    const auto gt = read_trajectories_jsonl(dir / "gt" / (cam + ".jsonl"));
    EXPECT_EQ(gt.size(), s.truth.trajectories.at(cam).size());
  }
  EXPECT_EQ(read_camera_graph(dir / "graph.json").cameras().size(), 3u);
}

TEST(Sweep, ProducesOneRowPerInterval) {
  ScenarioConfig cfg;
  const auto rows = sweep_intervals(cfg, {1, 5});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].interval, 1);
  EXPECT_DOUBLE_EQ(rows[0].recall, 1.0);
  EXPECT_EQ(sweep_to_csv(rows).substr(0, 9), "interval,");
}

}  // namespace
}  // namespace mtmc
