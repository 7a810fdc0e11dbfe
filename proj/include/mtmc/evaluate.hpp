#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtmc/trajectory.hpp"

namespace mtmc {

struct IdCounts {
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;
  /// Predictions whose assigned degree lies in (low, high]; counted in idfp.
  std::int64_t ambiguous = 0;

  IdCounts& operator+=(const IdCounts& other);
  friend bool operator==(const IdCounts&, const IdCounts&) = default;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

struct ClassifyConfig {
  double high = 0.8;
  double low = 0.2;
  double iou_min = 0.5;
};

/// Fraction of gt frames where pred has a box with IoU >= iou_min.
double matching_degree(const Trajectory& pred, const Trajectory& gt, double iou_min);

/// Greedy descending-degree assignment of predictions to ground truth.
IdCounts classify(const std::vector<Trajectory>& preds, const std::vector<Trajectory>& gts,
                  const ClassifyConfig& config = {});

/// IDTP/(IDTP+IDFP) and IDTP/(IDTP+IDFN); 0 for an empty denominator.
PrecisionRecall precision_recall(const IdCounts& counts);

struct CameraReport {
  std::string scene;
  CameraId camera_id;
  std::int64_t predicted = 0;
  std::int64_t ground_truth = 0;
  IdCounts counts;
  PrecisionRecall scores;
};

struct EvalReport {
  std::vector<CameraReport> cameras;
  IdCounts total;
  PrecisionRecall total_scores;

  /// scene,camera,algorithm,ground_truth,precision_pct,recall_pct
  std::string to_csv() const;
  std::string to_json() const;
};

/// Evaluates each camera present in either input.
EvalReport evaluate(const std::vector<Trajectory>& preds, const std::vector<Trajectory>& gts,
                    const ClassifyConfig& config = {}, const std::string& scene = "");

}  // namespace mtmc
