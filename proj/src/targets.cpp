#include "radar_mrf/targets.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace radar_mrf {

void AnchorSpec::validate() const {
  if (!(w > 0 && l > 0 && h > 0)) throw ArgumentError("anchor dimensions must be positive");
  if (!(0.0 <= unmatch_thr && unmatch_thr <= match_thr && match_thr <= 1.0)) {
    throw ArgumentError("anchor thresholds need 0 <= unmatch_thr <= match_thr <= 1");
  }
  if (rotations.empty()) throw ArgumentError("anchor spec needs at least one rotation");
}

AnchorGrid generate_anchors(std::span<const AnchorSpec> specs, std::size_t height, std::size_t width,
                            const Roi3D& roi) {
  if (height == 0 || width == 0) throw ArgumentError("anchor grid needs H, W >= 1");
  roi.validate();
  AnchorGrid g;
  g.height = height;
  g.width = width;
  g.stride_x = (roi.x_max - roi.x_min) / static_cast<double>(width);
  g.stride_y = (roi.y_max - roi.y_min) / static_cast<double>(height);
  std::size_t total = 0;
  for (const auto& s : specs) total += height * width * s.rotations.size();
  g.boxes.reserve(total);
  g.spec_index.reserve(total);
  for (std::size_t si = 0; si < specs.size(); ++si) {
    const AnchorSpec& s = specs[si];
    s.validate();
    for (std::size_t r = 0; r < height; ++r) {
      const double cy = roi.y_min + (static_cast<double>(r) + 0.5) * g.stride_y;
      for (std::size_t c = 0; c < width; ++c) {
        const double cx = roi.x_min + (static_cast<double>(c) + 0.5) * g.stride_x;
        for (double rot : s.rotations) {
          g.boxes.push_back({cx, cy, s.z_bottom + 0.5 * s.h, s.w, s.l, s.h, normalize_angle(rot), s.class_id});
          g.spec_index.push_back(si);
        }
      }
    }
  }
  return g;
}

Assignment assign_targets(const AnchorGrid& anchors, std::span<const Box3D> gts, std::span<const AnchorSpec> specs,
                          IouKind kind) {
  const std::size_t na = anchors.boxes.size();
  Assignment out;
  out.labels.assign(na, kNegative);
  out.matched_gt.assign(na, -1);

  for (std::size_t si = 0; si < specs.size(); ++si) {
    const AnchorSpec& spec = specs[si];
    std::vector<std::size_t> anchor_ids;
    for (std::size_t a = 0; a < na; ++a) {
      if (anchors.spec_index[a] == si) anchor_ids.push_back(a);
    }
    std::vector<Box3D> class_anchors;
    class_anchors.reserve(anchor_ids.size());
    for (std::size_t a : anchor_ids) class_anchors.push_back(anchors.boxes[a]);
    std::vector<std::size_t> gt_ids;
    std::vector<Box3D> class_gts;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id == spec.class_id) {
        gt_ids.push_back(g);
        class_gts.push_back(gts[g]);
      }
    }
    if (class_gts.empty()) continue;  // anchors stay negative

    const Matrix table = iou_table(class_anchors, class_gts, kind);
    for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
      double best = -1.0;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < class_gts.size(); ++j) {
        if (table(i, j) > best) {
          best = table(i, j);
          arg = j;
        }
      }
      const std::size_t a = anchor_ids[i];
      if (best >= spec.match_thr && best > 0.0) {
        out.labels[a] = spec.class_id;
        out.matched_gt[a] = static_cast<int>(gt_ids[arg]);
      } else if (best <= spec.unmatch_thr) {
        out.labels[a] = kNegative;
      } else {
        out.labels[a] = kIgnore;
      }
    }
    for (std::size_t j = 0; j < class_gts.size(); ++j) {
      double best = 0.0;
      std::size_t arg = anchor_ids.size();
      for (std::size_t i = 0; i < anchor_ids.size(); ++i) {
        if (table(i, j) > best) {
          best = table(i, j);
          arg = i;
        }
      }
      if (arg == anchor_ids.size()) continue;  // no overlapping anchor at all
      const std::size_t a = anchor_ids[arg];
      out.labels[a] = spec.class_id;
      out.matched_gt[a] = static_cast<int>(gt_ids[j]);
    }
  }

  for (std::size_t a = 0; a < na; ++a) {
    if (out.labels[a] < 0) continue;
    const Box3D& gt = gts[static_cast<std::size_t>(out.matched_gt[a])];
    out.positives.push_back(a);
    out.reg_targets.push_back(encode_box(anchors.boxes[a], gt));
    out.dir_targets.push_back(direction_target(gt.theta, anchors.boxes[a].theta));
  }
  return out;
}

std::array<double, 7> encode_box(const Box3D& anchor, const Box3D& gt) {
  if (!(anchor.w > 0 && anchor.l > 0 && anchor.h > 0 && gt.w > 0 && gt.l > 0 && gt.h > 0)) {
    throw ArgumentError("encode_box needs positive dimensions");
  }
  const double diag = std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l);
  return {(gt.cx - anchor.cx) / diag,
          (gt.cy - anchor.cy) / diag,
          (gt.cz - anchor.cz) / anchor.h,
          std::log(gt.w / anchor.w),
          std::log(gt.l / anchor.l),
          std::log(gt.h / anchor.h),
          std::sin(gt.theta - anchor.theta)};
}

Box3D decode_box(const Box3D& anchor, const std::array<double, 7>& delta, int dir_bin) {
  if (!(std::abs(delta[6]) <= 1.0)) throw ArgumentError("decode_box needs |dtheta| <= 1");
  const double diag = std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l);
  Box3D b;
  b.cx = anchor.cx + delta[0] * diag;
  b.cy = anchor.cy + delta[1] * diag;
  b.cz = anchor.cz + delta[2] * anchor.h;
  b.w = anchor.w * std::exp(delta[3]);
  b.l = anchor.l * std::exp(delta[4]);
  b.h = anchor.h * std::exp(delta[5]);
  double theta = anchor.theta + std::asin(delta[6]);
  if (direction_target(theta, anchor.theta) != dir_bin) theta += std::numbers::pi;
  b.theta = normalize_angle(theta);
  b.class_id = anchor.class_id;
  return b;
}

int direction_target(double theta_gt, double theta_anchor) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double d = std::fmod(theta_gt - theta_anchor, two_pi);
  if (d < 0.0) d += two_pi;
  if (d >= two_pi) d -= two_pi;
  return d < std::numbers::pi ? 0 : 1;
}

std::string assignment_to_json(const Assignment& a, const std::string& frame) {
  using nlohmann::json;
  json runs = json::array();
  for (std::size_t i = 0; i < a.labels.size();) {
    std::size_t j = i;
    while (j < a.labels.size() && a.labels[j] == a.labels[i]) ++j;
    runs.push_back({a.labels[i], j - i});
    i = j;
  }
  json reg = json::array();
  for (const auto& t : a.reg_targets) reg.push_back(t);
  return json{{"frame", frame},
              {"num_anchors", a.labels.size()},
              {"label_codes", {{"negative", kNegative}, {"ignore", kIgnore}}},
              {"labels_rle", runs},
              {"positives", a.positives},
              {"matched_gt", [&] {
                 std::vector<int> m;
                 for (std::size_t p : a.positives) m.push_back(a.matched_gt[p]);
                 return m;
               }()},
              {"reg_targets", reg},
              {"dir_targets", a.dir_targets},
              {"n_pos", a.n_pos()}}
      .dump();
}

}  // namespace radar_mrf
