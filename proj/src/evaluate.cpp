#include "mtmc/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "mtmc/error.hpp"

namespace mtmc {

IdCounts& IdCounts::operator+=(const IdCounts& other) {
  idtp += other.idtp;
  idfp += other.idfp;
  idfn += other.idfn;
  ambiguous += other.ambiguous;
  return *this;
}

double matching_degree(const Trajectory& pred, const Trajectory& gt, double iou_min) {
  if (pred.camera_id != gt.camera_id) {
    throw InputError("matching_degree across cameras " + pred.camera_id + " and " + gt.camera_id);
  }
  if (gt.boxes.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [frame, box] : gt.boxes) {
    const auto it = pred.boxes.find(frame);
    if (it != pred.boxes.end() && iou(it->second, box) >= iou_min) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gt.boxes.size());
}

IdCounts classify(const std::vector<Trajectory>& preds, const std::vector<Trajectory>& gts,
                  const ClassifyConfig& config) {
  struct Pair {
    double degree;
    std::size_t pred;
    std::size_t gt;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const auto& a = preds[p];
      const auto& b = gts[g];
      if (a.boxes.empty() || b.boxes.empty()) continue;
      if (a.last_frame() < b.first_frame() || b.last_frame() < a.first_frame()) continue;
      const double d = matching_degree(a, b, config.iou_min);
      if (d > 0.0) pairs.push_back({d, p, g});
    }
  }
  // Ties resolve by smaller ids so that input order does not matter.
  auto key = [&](const Pair& x) {
    return std::make_tuple(-x.degree, preds[x.pred].camera_id, preds[x.pred].trajectory_id,
                           gts[x.gt].camera_id, gts[x.gt].trajectory_id);
  };
  std::sort(pairs.begin(), pairs.end(),
            [&](const Pair& a, const Pair& b) { return key(a) < key(b); });

  std::vector<double> assigned(preds.size(), 0.0);
  std::vector<char> pred_used(preds.size(), 0), gt_used(gts.size(), 0);
  for (const auto& pr : pairs) {
    if (pred_used[pr.pred] || gt_used[pr.gt]) continue;
    pred_used[pr.pred] = gt_used[pr.gt] = 1;
    assigned[pr.pred] = pr.degree;
  }

  IdCounts counts;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (assigned[p] > config.high) {
      ++counts.idtp;
    } else {
      ++counts.idfp;
      if (assigned[p] > config.low) ++counts.ambiguous;
    }
  }
  counts.idfn = static_cast<std::int64_t>(gts.size()) - counts.idtp;
  return counts;
}

PrecisionRecall precision_recall(const IdCounts& counts) {
  if (counts.idtp < 0 || counts.idfp < 0 || counts.idfn < 0) {
    throw InputError("identity counts must be non-negative");
  }
  PrecisionRecall pr;
  const auto pden = counts.idtp + counts.idfp;
  const auto rden = counts.idtp + counts.idfn;
  pr.precision = pden > 0 ? static_cast<double>(counts.idtp) / static_cast<double>(pden) : 0.0;
  pr.recall = rden > 0 ? static_cast<double>(counts.idtp) / static_cast<double>(rden) : 0.0;
  return pr;
}

EvalReport evaluate(const std::vector<Trajectory>& preds, const std::vector<Trajectory>& gts,
                    const ClassifyConfig& config, const std::string& scene) {
  std::map<CameraId, std::pair<std::vector<Trajectory>, std::vector<Trajectory>>> by_camera;
  for (const auto& p : preds) by_camera[p.camera_id].first.push_back(p);
  for (const auto& g : gts) by_camera[g.camera_id].second.push_back(g);

  EvalReport report;
  for (const auto& [camera, sets] : by_camera) {
    CameraReport row;
    row.scene = scene;
    row.camera_id = camera;
    row.predicted = static_cast<std::int64_t>(sets.first.size());
    row.ground_truth = static_cast<std::int64_t>(sets.second.size());
    row.counts = classify(sets.first, sets.second, config);
    row.scores = precision_recall(row.counts);
    report.total += row.counts;
    report.cameras.push_back(std::move(row));
  }
  report.total_scores = precision_recall(report.total);
  return report;
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "scene,camera,algorithm,ground_truth,precision_pct,recall_pct\n";
  for (const auto& c : cameras) {
    out << c.scene << ',' << c.camera_id << ',' << c.predicted << ',' << c.ground_truth << ','
        << pct(c.scores.precision) << ',' << pct(c.scores.recall) << '\n';
  }
  return out.str();
}

std::string EvalReport::to_json() const {
  auto counts_json = [](const IdCounts& c) {
    return nlohmann::json{{"idtp", c.idtp}, {"idfp", c.idfp}, {"idfn", c.idfn},
                          {"ambiguous", c.ambiguous}};
  };
  nlohmann::json cams = nlohmann::json::array();
  for (const auto& c : cameras) {
    cams.push_back({{"scene", c.scene},
                    {"camera", c.camera_id},
                    {"algorithm", c.predicted},
                    {"ground_truth", c.ground_truth},
                    {"counts", counts_json(c.counts)},
                    {"precision", c.scores.precision},
                    {"recall", c.scores.recall}});
  }
  return nlohmann::json{{"cameras", cams},
                        {"total", counts_json(total)},
                        {"precision", total_scores.precision},
                        {"recall", total_scores.recall}}
      .dump(2);
}

}  // namespace mtmc
