#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "radar_mrf/core.hpp"
#include "radar_mrf/geometry.hpp"

namespace radar_mrf {

struct AnchorSpec {
  int class_id = 0;
  std::string name;
  double w = 1, l = 1, h = 1;
  double z_bottom = 0;
  std::vector<double> rotations{0.0, std::numbers::pi / 2};
  double match_thr = 0.6;
  double unmatch_thr = 0.45;

  void validate() const;
};

/// Anchors laid out as (spec, row, col, rotation), spec-major.
struct AnchorGrid {
  std::vector<Box3D> boxes;
  std::vector<std::size_t> spec_index;  // per anchor, index into the spec list
  std::size_t height = 0;
  std::size_t width = 0;
  double stride_x = 0;
  double stride_y = 0;
};

/// One box per spec, cell and rotation, centered at the BEV cell center with
/// cz = z_bottom + h / 2.
AnchorGrid generate_anchors(std::span<const AnchorSpec> specs, std::size_t height, std::size_t width, const Roi3D& roi);

inline constexpr int kNegative = -1;
inline constexpr int kIgnore = -2;

struct Assignment {
  /// Per anchor: class id (>= 0) when positive, kNegative or kIgnore.
  std::vector<int> labels;
  /// Per anchor: matched ground-truth index, -1 unless positive.
  std::vector<int> matched_gt;
  /// Ascending anchor indices of the positives; targets follow this order.
  std::vector<std::size_t> positives;
  std::vector<std::array<double, 7>> reg_targets;
  std::vector<int> dir_targets;

  std::size_t n_pos() const { return positives.size(); }
};

/// IoU matching per class. Anchors at or above match_thr become positive
/// (argmax ground truth, lowest index on ties), at or below unmatch_thr
/// negative, otherwise ignored. Each ground truth's best anchor (lowest index
/// on ties) is then forced positive for it, provided that IoU is above zero.
Assignment assign_targets(const AnchorGrid& anchors, std::span<const Box3D> gts, std::span<const AnchorSpec> specs,
                          IouKind kind = IouKind::bev);

/// Residual (dx, dy, dz, dw, dl, dh, dtheta) of gt against anchor.
std::array<double, 7> encode_box(const Box3D& anchor, const Box3D& gt);

/// Inverse of encode_box on the arcsin branch, flipped by pi when the
/// decoded heading falls in the other direction bin. Throws ArgumentError if
/// |dtheta| > 1.
Box3D decode_box(const Box3D& anchor, const std::array<double, 7>& delta, int dir_bin);

/// 0 if theta_gt - theta_anchor, wrapped into [0, 2pi), is below pi; else 1.
int direction_target(double theta_gt, double theta_anchor);

/// Run-length JSON export of an assignment.
std::string assignment_to_json(const Assignment& a, const std::string& frame);

}  // namespace radar_mrf
