#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mtmc/annotate.hpp"
#include "mtmc/error.hpp"
#include "test_support.hpp"

namespace mtmc {
namespace {

CameraVideoMeta cam_meta(const std::string& id) {
  return {id, "clips/" + id + ".mp4", 300, 1280, 960, 10.0};
}

TrajectoryRecord rec(const std::string& cam, std::int64_t id, int first = 0, int n = 10) {
  auto t = testing::make_track(cam, id, first, n, 10.0, 5.0 * id);
  t.feature = {0.25, 0.5, 0.125};
  t.orientation = {1, 0};
  return TrajectoryRecord::from_trajectory(t, "clips/" + cam + ".mp4");
}

AnnotationStore make_store(int cams = 3, int per_cam = 4, StoreOptions opts = {}) {
  std::int64_t tick = 1000;
  AnnotationStore store(opts, [tick]() mutable { return tick++; });
  for (int c = 0; c < cams; ++c) {
    const auto id = "c" + std::to_string(c);
    store.add_camera(cam_meta(id));
    for (int k = 0; k < per_cam; ++k) store.add_trajectory(rec(id, k));
  }
  return store;
}

TEST(RecordCodec, RoundTripIsExact) {
  const auto r = rec("cam:x", 42, 17, 25);
  const auto bytes = encode_record(r);
  EXPECT_EQ(decode_record(bytes), r);
  EXPECT_EQ(trajectory_record_from_json(trajectory_record_to_json(r)), r);
  EXPECT_THROW(decode_record(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_record("XXXX" + bytes.substr(4)), FormatError);
}

TEST(RecordCodec, SixteenBytesPerFrame) {
  EXPECT_EQ(encode_record(rec("c", 1, 0, 20)).size() - encode_record(rec("c", 1, 0, 10)).size(),
            160u);
}

TEST(RecordCodec, RequiresDenseTrajectory) {
  auto t = testing::make_track("c", 0, 0, 5, 10.0);
  t.boxes.erase(2);
  EXPECT_THROW(TrajectoryRecord::from_trajectory(t, ""), ContractViolation);
}

TEST(Store, MatchCreatesThenExtendsThenMerges) {
  auto store = make_store();
  const TrajectoryRef a{"c0", 0}, b{"c1", 0}, c{"c2", 0}, d{"c0", 1}, e{"c1", 1};
  const auto r1 = store.submit_match(a, b, "ann", 0);
  EXPECT_EQ(r1.version, 1);
  EXPECT_EQ(r1.members, (std::set<TrajectoryRef>{a, b}));
  const auto r2 = store.submit_match(c, a, "ann", 0);
  EXPECT_EQ(r2.global_id, r1.global_id);
  EXPECT_EQ(r2.version, 2);
  const auto r3 = store.submit_match(d, e, "ann");
  EXPECT_GT(r3.global_id, r1.global_id);
  // d's record is 1 but a's is 2: merging keeps the lower id at max+1.
  EXPECT_THROW(store.submit_match(d, c, "ann", 0), VersionConflict);
  EXPECT_THROW(store.submit_match(e, c, "ann"), InputError);  // c1 twice in one identity
}

TEST(Store, MergeKeepsLowerIdAndBumpsVersion) {
  auto store = make_store(4, 2);
  const auto r1 = store.submit_match({"c0", 0}, {"c1", 0}, "u");
  const auto r2 = store.submit_match({"c2", 0}, {"c3", 0}, "u");
  const auto merged = store.submit_match({"c2", 0}, {"c0", 0}, "u", std::nullopt);
  EXPECT_EQ(merged.global_id, std::min(r1.global_id, r2.global_id));
  EXPECT_EQ(merged.members.size(), 4u);
}

TEST(Store, ConflictCarriesCurrentVersionAndLeavesStateUnchanged) {
  auto store = make_store();
  store.submit_match({"c0", 0}, {"c1", 0}, "u", 0);
  const auto events_before = store.events().size();
  const auto partition_before = store.partition();
  try {
    store.submit_match({"c0", 0}, {"c2", 0}, "v", 0);
    FAIL();
  } catch (const VersionConflict& e) {
    EXPECT_EQ(e.current_version(), 1);
  }
  EXPECT_EQ(store.events().size(), events_before);
  EXPECT_EQ(store.partition(), partition_before);
}

TEST(Store, RejectsSelfAndRepeatedMatches) {
  auto store = make_store();
  EXPECT_THROW(store.submit_match({"c0", 0}, {"c0", 0}, "u"), InputError);
  EXPECT_THROW(store.submit_match({"c0", 0}, {"c9", 0}, "u"), NotFoundError);
  store.submit_match({"c0", 0}, {"c1", 0}, "u");
  EXPECT_THROW(store.submit_match({"c1", 0}, {"c0", 0}, "u"), InputError);
}

TEST(Store, MultiPassAllowsSameCameraTwice) {
  auto store = make_store(2, 2, {true});
  store.submit_match({"c0", 0}, {"c1", 0}, "u");
  EXPECT_NO_THROW(store.submit_match({"c0", 1}, {"c1", 0}, "u"));
}

TEST(Store, UnmatchShrinksAndFinallyDeletes) {
  auto store = make_store();
  const auto r = store.submit_match({"c0", 0}, {"c1", 0}, "u");
  EXPECT_THROW(store.unmatch({"c0", 0}, "u", 0), VersionConflict);
  const auto after = store.unmatch({"c0", 0}, "u", 1);
  ASSERT_TRUE(after);
  EXPECT_EQ(after->members, (std::set<TrajectoryRef>{{"c1", 0}}));
  EXPECT_EQ(after->version, 2);
  EXPECT_FALSE(store.unmatch({"c1", 0}, "u", 2));
  EXPECT_FALSE(store.records().contains(r.global_id));
  EXPECT_THROW(store.unmatch({"c1", 0}, "u", 0), NotFoundError);
}

TEST(Store, MatchOnlyPartitionEqualsUnionFind) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto store = make_store(5, 4, {true});
    std::vector<TrajectoryRef> all;
    for (const auto& [r, t] : store.trajectories()) all.push_back(r);
    std::vector<int> parent(all.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::uniform_int_distribution<int> pick(0, int(all.size()) - 1);
    for (int op = 0; op < 25; ++op) {
      const int i = pick(rng), j = pick(rng);
      try {
        store.submit_match(all[i], all[j], "u");
        parent[find(i)] = find(j);
      } catch (const InputError&) {
        EXPECT_TRUE(i == j || find(i) == find(j));
      }
    }
    std::map<int, std::set<TrajectoryRef>> groups;
    for (std::size_t k = 0; k < all.size(); ++k) groups[find(int(k))].insert(all[k]);
    std::set<std::set<TrajectoryRef>> expect;
    for (auto& [root, g] : groups) expect.insert(g);
    EXPECT_EQ(store.partition(), expect) << trial;
  }
}

TEST(Store, ReplayingEventsRebuildsState) {
  auto store = make_store();
  store.submit_match({"c0", 0}, {"c1", 0}, "a");
  store.submit_match({"c1", 0}, {"c2", 1}, "b", 1);
  store.unmatch({"c0", 0}, "a", 2);
  store.submit_match({"c0", 2}, {"c1", 2}, "a");
  AnnotationStore replay;
  for (const auto& e : store.events()) replay.apply(e);
  EXPECT_EQ(replay.partition(), store.partition());
  EXPECT_EQ(replay.records(), store.records());
  EXPECT_EQ(replay.events(), store.events());
}

TEST(Store, EventLineRoundTrip) {
  const StoreEvent e{7, "match", R"({"query":"a:1"})", "alice", 123};
  EXPECT_EQ(StoreEvent::from_json_line(e.to_json_line()), e);
  EXPECT_THROW(StoreEvent::from_json_line("{not json"), FormatError);
}

TEST(Store, ApplyRejectsOutOfOrderSeq) {
  auto store = make_store(1, 1);
  AnnotationStore other;
  EXPECT_THROW(other.apply(store.events().back()), FormatError);
}

TEST(Store, SnapshotPlusLogRecovery) {
  testing::TempDir dir;
  auto store = make_store();
  std::ofstream log(dir / "events.jsonl");
  store.set_event_sink(&log);
  store.submit_match({"c0", 0}, {"c1", 0}, "a");
  store.save_snapshot(dir.path());
  store.submit_match({"c2", 0}, {"c1", 0}, "a");
  store.unmatch({"c0", 0}, "a", 2);
  log.close();
  // Events before the snapshot were not streamed; the loader must not need them.
  const auto loaded = AnnotationStore::load(dir.path());
  EXPECT_EQ(loaded.partition(), store.partition());
  EXPECT_EQ(loaded.records(), store.records());
  EXPECT_EQ(loaded.trajectories(), store.trajectories());
}

TEST(Store, IdenticalRegistrationIsNoOpDifferentIsError) {
  auto store = make_store(1, 1);
  const auto n = store.events().size();
  store.add_camera(cam_meta("c0"));
  store.add_trajectory(rec("c0", 0));
  EXPECT_EQ(store.events().size(), n);
  EXPECT_THROW(store.add_trajectory(rec("c0", 0, 3)), InputError);
  EXPECT_THROW(store.add_trajectory(rec("zz", 0)), Error);
}

TEST(Overlay, BoxesWithinRangeColouredByIdentity) {
  auto store = make_store(2, 2);
  const auto r = store.submit_match({"c0", 0}, {"c1", 1}, "u");
  const auto payloads = store.build_overlay(TrajectoryRef{"c0", 0}, 0.2, 0.5);
  ASSERT_EQ(payloads.size(), 1u);
  const auto& p = payloads[0];
  EXPECT_EQ(p.camera_id, "c0");
  EXPECT_EQ(p.clip_uri, "clips/c0.mp4");
  ASSERT_EQ(p.frames.size(), 4u);
  EXPECT_EQ(p.frames.front().frame, 2);
  EXPECT_EQ(p.frames.back().frame, 5);
  for (const auto& f : p.frames) {
    ASSERT_EQ(f.boxes.size(), 1u);
    EXPECT_EQ(f.boxes[0].color, identity_color(r.global_id));
  }
  const auto by_id = store.build_overlay(r.global_id, -1e9, 1e9);
  ASSERT_EQ(by_id.size(), 2u);
  EXPECT_EQ(by_id[0].box_count() + by_id[1].box_count(), 20u);
  EXPECT_THROW(store.build_overlay(GlobalId{999}, 0, 1), NotFoundError);
  EXPECT_THROW(store.build_overlay(TrajectoryRef{"c0", 99}, 0, 1), NotFoundError);
  const auto json = nlohmann::json::parse(overlay_to_json(payloads));
  EXPECT_EQ(json["payloads"].size(), 1u);
}

TEST(Overlay, ColourIsStableHex) {
  const auto c = identity_color(12);
  EXPECT_EQ(c, identity_color(12));
  EXPECT_EQ(c.size(), 7u);
  EXPECT_EQ(c[0], '#');
  EXPECT_NE(identity_color(1), identity_color(2));
}

TEST(Export, ImportRecoversPartitionOfMatchedIdentities) {
  testing::TempDir dir;
  auto store = make_store(3, 3);
  store.submit_match({"c0", 0}, {"c1", 1}, "u");
  store.submit_match({"c2", 2}, {"c1", 1}, "u");
  store.submit_match({"c0", 1}, {"c2", 0}, "u");
  const auto files = store.export_dataset(dir.path());
  EXPECT_EQ(files.size(), 4u);  // three cameras + index
  const auto imported = import_dataset(dir.path());
  std::set<std::set<TrajectoryRef>> got;
  for (const auto& [gid, members] : imported) got.insert(members);
  std::set<std::set<TrajectoryRef>> want;
  for (const auto& [gid, r] : store.records()) want.insert(r.members);
  EXPECT_EQ(got, want);
  const auto csv = testing::slurp(dir / "c1.csv");
  EXPECT_EQ(csv.rfind("frame,id,x,y,w,h,conf,wx,wy,wz\n", 0), 0u);
}

TEST(Storage, RatiosAgainstBaselines) {
  auto store = make_store(1, 1);
  const auto r = store.measure_storage();
  EXPECT_EQ(r.naive_render_bytes, 10ull * 1280 * 960 * 3);
  EXPECT_EQ(r.bitrate_render_bytes, 250000u);  // 1 s of video at 2 Mbit/s
  EXPECT_EQ(r.annotation_bytes, encode_record(rec("c0", 0)).size());
  EXPECT_DOUBLE_EQ(r.ratio, double(r.annotation_bytes) / r.naive_render_bytes);
}

}  // namespace
}  // namespace mtmc
