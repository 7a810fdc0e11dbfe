#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mtmc/annotate.hpp"
#include "mtmc/error.hpp"
#include "mtmc/evaluate.hpp"
#include "mtmc/ingest.hpp"
#include "mtmc/recommend.hpp"
#include "mtmc/scenario.hpp"
#include "mtmc/service/annotation_service.hpp"
#include "mtmc/service/broker.hpp"
#include "mtmc/service/http_api.hpp"
#include "mtmc/service/pipeline.hpp"
#include "mtmc/tracker.hpp"

namespace fs = std::filesystem;
using namespace mtmc;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Trajectory> read_all(const std::vector<std::string>& paths) {
  std::vector<Trajectory> out;
  for (const auto& p : paths) {
    auto part = read_trajectories_jsonl(fs::path(p));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void add_association_options(CLI::App* cmd, AssociationConfig& cfg) {
  cmd->add_option("--lambda", cfg.lambda, "IoU weight in the association cost");
  cmd->add_option("--gate-iou", cfg.gate_iou, "Minimum IoU for a match");
  cmd->add_option("--gate-cos", cfg.gate_cos, "Maximum cosine distance for a match");
  cmd->add_option("--max-age", cfg.max_age, "Key frames a track may go unmatched");
  cmd->add_option("--min-duration", cfg.min_duration_s, "Drop trajectories shorter than this (s)");
  cmd->add_option("--static-iou", cfg.static_iou_threshold,
                  "First/last box IoU above which a trajectory counts as parked");
  cmd->add_flag("--normalize-features", cfg.normalize_features,
                "L2-normalise per-frame features before averaging");
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-automatic multi-camera vehicle annotation toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic multi-camera scenario");
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--config", gen_config, "Scenario config JSON (defaults if omitted)");
  gen->add_option("--seed", gen_seed, "Override the config seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // track
  auto* track = app.add_subcommand("track", "Sample, associate and interpolate one camera");
  std::string tr_det, tr_meta, tr_out;
  SamplingConfig tr_sampling;
  AssociationConfig tr_assoc;
  track->add_option("--detections", tr_det, "Detection CSV")->required();
  track->add_option("--meta", tr_meta, "Camera metadata JSON")->required();
  track->add_option("--interval", tr_sampling.interval, "Key-frame interval f");
  track->add_option("--threshold", tr_sampling.confidence_threshold, "Confidence threshold");
  track->add_option("--out", tr_out, "Trajectory JSONL output")->required();
  add_association_options(track, tr_assoc);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Identity precision/recall per camera");
  std::vector<std::string> ev_pred, ev_gt;
  std::string ev_scene, ev_format = "csv";
  ClassifyConfig ev_cfg;
  eval->add_option("--pred", ev_pred, "Predicted trajectory JSONL files")->required();
  eval->add_option("--gt", ev_gt, "Ground-truth trajectory JSONL files")->required();
  eval->add_option("--scene", ev_scene, "Scene label for the report");
  eval->add_option("--high", ev_cfg.high, "Matching degree for a true positive");
  eval->add_option("--low", ev_cfg.low, "Matching degree below which a prediction is unmatched");
  eval->add_option("--iou", ev_cfg.iou_min, "Per-frame IoU threshold");
  eval->add_option("--format", ev_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // recommend
  auto* rec = app.add_subcommand("recommend", "Ranked cross-camera candidates for one trajectory");
  std::vector<std::string> rc_traj;
  std::string rc_graph, rc_query, rc_mode = "blend";
  double rc_min = 0.0, rc_max = 0.0, rc_alpha = 0.3;
  int rc_hops = 0;
  rec->add_option("--trajectories", rc_traj, "Trajectory JSONL files")->required();
  rec->add_option("--graph", rc_graph, "Camera graph JSON")->required();
  rec->add_option("--query", rc_query, "Query as camera:id")->required();
  rec->add_option("--min", rc_min, "Window lower bound (s)");
  rec->add_option("--max", rc_max, "Window upper bound (s)");
  rec->add_option("--mode", rc_mode, "time, appearance or blend");
  rec->add_option("--alpha", rc_alpha, "Time weight in blend mode");
  rec->add_option("--hops", rc_hops, "Topology pruning hop budget (0 disables)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Recall and wall time across sample intervals");
  std::string sw_config;
  std::vector<int> sw_intervals{1, 2, 5, 10};
  SweepOptions sw_options;
  sweep->add_option("--config", sw_config, "Scenario config JSON");
  sweep->add_option("--intervals", sw_intervals, "Intervals to run")->delimiter(',');
  sweep->add_option("--repeats", sw_options.repeats, "Timing repeats (minimum is kept)");
  sweep->add_option("--threshold", sw_options.confidence_threshold, "Confidence threshold");
  add_association_options(sweep, sw_options.association);

  // import
  auto* imp = app.add_subcommand("import", "Register cameras and trajectories in a store");
  std::string im_store;
  std::vector<std::string> im_meta, im_traj;
  imp->add_option("--store", im_store, "Store directory")->required();
  imp->add_option("--meta", im_meta, "Camera metadata JSON files")->required();
  imp->add_option("--trajectories", im_traj, "Trajectory JSONL files");

  // storage
  auto* storage = app.add_subcommand("storage", "Annotation size versus rendered-video baselines");
  std::string st_store;
  storage->add_option("--store", st_store, "Store directory")->required();

  // export
  auto* exp = app.add_subcommand("export", "Write the annotated dataset");
  std::string ex_store, ex_out;
  exp->add_option("--store", ex_store, "Store directory")->required();
  exp->add_option("--out", ex_out, "Output directory")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP annotation service");
  std::optional<std::string> sv_config;
  std::string sv_graph;
  int sv_workers = 2;
  SamplingConfig sv_sampling;
  serve->add_option("--config", sv_config, "Service config JSON");
  serve->add_option("--graph", sv_graph, "Camera graph JSON")->required();
  serve->add_option("--workers", sv_workers, "Pipeline worker threads");
  serve->add_option("--interval", sv_sampling.interval, "Pipeline key-frame interval");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      ScenarioConfig cfg;
      if (!gen_config.empty()) cfg = scenario_config_from_json(read_text(gen_config));
      if (gen_seed) cfg.seed = *gen_seed;
      write_scenario(gen_out, generate(cfg));
    } else if (*track) {
      const auto meta = read_camera_meta(tr_meta);
      tr_sampling.fps = meta.fps;
      const auto dets = parse_detections(fs::path(tr_det), meta);
      const auto trajs =
          track_camera(sample_and_filter(dets, tr_sampling), tr_sampling, tr_assoc, meta.frame_count);
      write_trajectories_jsonl(fs::path(tr_out), trajs);
      std::cerr << trajs.size() << " trajectories\n";
    } else if (*eval) {
      const auto report = evaluate(read_all(ev_pred), read_all(ev_gt), ev_cfg, ev_scene);
      std::cout << (ev_format == "csv" ? report.to_csv() : report.to_json() + "\n");
    } else if (*rec) {
      const auto graph = read_camera_graph(rc_graph);
      const auto all = read_all(rc_traj);
      const auto query_ref = TrajectoryRef::parse(rc_query);
      const Trajectory* query = nullptr;
      std::map<CameraId, std::vector<Trajectory>> galleries;
      for (const auto& t : all) {
        if (t.ref() == query_ref) query = &t;
        else if (t.camera_id != query_ref.camera_id) galleries[t.camera_id].push_back(t);
      }
      if (!query) throw NotFoundError("query " + rc_query + " not found");
      std::vector<CameraId> cams;
      for (const auto& [cam, list] : galleries) cams.push_back(cam);
      const TimeWindow window{rc_min, rc_max};
      auto cands = time_constrained_gallery(*query, graph, cams, galleries, window);
      if (rc_hops > 0) cands = topology_prune(cands, *query, graph, {rc_hops, std::nullopt});
      RankOptions ro{parse_rank_mode(rc_mode), rc_alpha,
                     std::max({std::abs(rc_min), std::abs(rc_max), 1e-9})};
      std::cout << "trajectory,d,appearance_distance\n";
      for (const auto& c : rank(std::move(cands), *query, ro)) {
        std::cout << c.ref().str() << ',' << c.time_offset << ',' << c.appearance_distance << '\n';
      }
    } else if (*sweep) {
      ScenarioConfig cfg;
      if (!sw_config.empty()) cfg = scenario_config_from_json(read_text(sw_config));
      std::cout << sweep_to_csv(sweep_intervals(cfg, sw_intervals, sw_options));
    } else if (*imp) {
      fs::create_directories(im_store);
      auto store = AnnotationStore::load(im_store);
      std::ofstream events(fs::path(im_store) / "events.jsonl", std::ios::app);
      store.set_event_sink(&events);
      std::map<CameraId, CameraVideoMeta> metas;
      for (const auto& m : im_meta) {
        const auto meta = read_camera_meta(m);
        store.add_camera(meta);
        metas[meta.camera_id] = meta;
      }
      for (const auto& t : read_all(im_traj)) {
        const auto it = metas.find(t.camera_id);
        const std::string clip = it == metas.end() ? "" : it->second.clip_uri;
        store.add_trajectory(TrajectoryRecord::from_trajectory(t, clip));
      }
      store.set_event_sink(nullptr);
      events.close();
      store.save_snapshot(im_store);
    } else if (*storage) {
      const auto r = AnnotationStore::load(st_store).measure_storage();
      std::cout << "annotation_bytes," << r.annotation_bytes << '\n'
                << "raw_render_bytes," << r.naive_render_bytes << '\n'
                << "raw_ratio," << r.ratio << '\n'
                << "bitrate_render_bytes," << r.bitrate_render_bytes << '\n'
                << "bitrate_ratio," << r.bitrate_ratio << '\n';
    } else if (*exp) {
      for (const auto& p : AnnotationStore::load(ex_store).export_dataset(ex_out)) {
        std::cout << p.string() << '\n';
      }
    } else if (*serve) {
      using namespace mtmc::service;
      const auto config = ServiceConfig::load(sv_config ? std::optional<fs::path>(*sv_config)
                                                        : std::nullopt);
      fs::create_directories(config.store_path);
      auto store = AnnotationStore::load(config.store_path);
      std::ofstream events(config.store_path / "events.jsonl", std::ios::app);
      store.set_event_sink(&events);
      AnnotationService annotations(std::move(store));
      auto broker = make_broker(config.broker_uri);
      PipelineOptions popts;
      popts.sampling = sv_sampling;
      Pipeline pipeline(*broker, config.store_path / "jobs", popts,
                        [&](const CameraVideoMeta& meta, const std::vector<TrajectoryRecord>& recs) {
                          annotations
                              .write([&](AnnotationStore& s) {
                                s.add_camera(meta);
                                for (const auto& r : recs) s.add_trajectory(r);
                              })
                              .get();
                        });
      pipeline.start_workers(sv_workers);
      ApiServer server(annotations, read_camera_graph(sv_graph), &pipeline);
      const int port = server.start(config.listen_address, config.port);
      std::cerr << "listening on " << config.listen_address << ':' << port << '\n';
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      server.stop();
      pipeline.stop();
      annotations.read([&](const AnnotationStore& s) { s.save_snapshot(config.store_path); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
