#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radar_mrf/core.hpp"
#include "radar_mrf/geometry.hpp"

namespace radar_mrf {

/// A scored box in a frame. Ground truth uses the same type; its score is
/// ignored.
struct Detection {
  std::string frame;
  Box3D box;
  double score = 1.0;
};

/// Named evaluation region. Without bounds the region is the whole frame,
/// unless it is a placeholder whose bounds the user has yet to set.
struct EvalRegion {
  std::string name;
  std::optional<Roi3D> bounds;
  bool placeholder = false;
};

struct EvalConfig {
  std::vector<std::string> class_names;
  std::vector<double> iou_thresholds;  // per class, in (0, 1]
  std::vector<EvalRegion> regions{{"entire", std::nullopt}};
  std::size_t recall_positions = 40;
  std::optional<double> max_range_m;
  /// Drop ground truths that contain no radar point.
  bool require_points_in_gt = false;

  void validate() const;
};

/// Copy of `cfg` restricted to the named regions, in the given order. An empty
/// list keeps every region except placeholders. Unknown names and placeholders
/// are a ConfigError.
EvalConfig select_regions(const EvalConfig& cfg, std::span<const std::string> names);

struct MatchResult {
  std::vector<double> scores;  // descending
  std::vector<bool> tp;        // parallel to scores
  std::size_t n_gt = 0;
};

using IouFn = std::function<double(const Box3D&, const Box3D&)>;

/// Greedy matching of one class: detections in descending score order each
/// take the unmatched same-frame ground truth with the highest IoU (lowest
/// index on ties) when that IoU reaches `threshold`.
MatchResult match_detections(std::span<const Detection> dets, std::span<const Detection> gts, const IouFn& iou_fn,
                             double threshold);

/// Interpolated AP. For 11 positions the recall grid is {0, 0.1, ..., 1};
/// otherwise {1/R, 2/R, ..., 1}. Returns nullopt when n_gt is 0.
std::optional<double> average_precision(const std::vector<bool>& tp, std::span<const double> scores, std::size_t n_gt,
                                        std::size_t recall_positions);

struct ClassAP {
  std::optional<double> ap_3d;
  std::optional<double> ap_bev;
  std::size_t n_gt = 0;
};

struct RegionReport {
  std::string name;
  std::vector<ClassAP> classes;
  std::optional<double> map_3d;
  std::optional<double> map_bev;
};

struct APReport {
  std::vector<std::string> class_names;
  std::vector<RegionReport> regions;
};

/// Per region: drop boxes whose center is outside the region or beyond
/// max_range_m (BEV distance from the sensor), then per class compute AP with
/// iou_3d and iou_bev. Boxes with class_id outside the class list are ignored.
/// Placeholder regions are a ConfigError.
/// `points` maps frame ids to scans and is needed only with
/// require_points_in_gt.
APReport evaluate(std::span<const Detection> dets, std::span<const Detection> gts, const EvalConfig& cfg,
                  const std::map<std::string, PointCloud>* points = nullptr);

std::string report_to_json(const APReport& r);
/// Plain-text table: one row per region, AP columns per class then mAPs.
std::string report_to_table(const APReport& r);

}  // namespace radar_mrf
