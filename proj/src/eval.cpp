#include "radar_mrf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

namespace radar_mrf {

namespace {

auto canonical_key(const Detection& d) {
  const Box3D& b = d.box;
  return std::make_tuple(-d.score, std::cref(d.frame), b.class_id, b.cx, b.cy, b.cz, b.w, b.l, b.h, b.theta);
}

// Sort into a canonical order so results do not depend on input order.
std::vector<Detection> canonical(std::span<const Detection> in) {
  std::vector<Detection> out(in.begin(), in.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& a, const Detection& b) { return canonical_key(a) < canonical_key(b); });
  return out;
}

bool in_region(const Box3D& b, const EvalRegion& region, const std::optional<double>& max_range) {
  if (region.bounds && !region.bounds->contains(b.cx, b.cy, b.cz)) return false;
  if (max_range && std::hypot(b.cx, b.cy) > *max_range) return false;
  return true;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& v) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

void EvalConfig::validate() const {
  if (iou_thresholds.size() != class_names.size()) {
    throw ConfigError("need one IoU threshold per class (" + std::to_string(class_names.size()) + " classes, " +
                      std::to_string(iou_thresholds.size()) + " thresholds)");
  }
  for (double t : iou_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("IoU thresholds must lie in (0, 1]");
  }
  if (recall_positions < 2) throw ConfigError("recall_positions must be >= 2");
  for (const auto& r : regions) {
    if (r.bounds) r.bounds->validate();
  }
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const Detection> gts, const IouFn& iou_fn,
                             double threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::unordered_map<std::string, std::vector<std::size_t>> by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) by_frame[gts[g].frame].push_back(g);
  std::vector<bool> used(gts.size(), false);

  MatchResult out;
  out.n_gt = gts.size();
  for (std::size_t k : order) {
    const Detection& d = dets[k];
    double best = -1.0;
    std::size_t arg = gts.size();
    if (auto it = by_frame.find(d.frame); it != by_frame.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const double v = iou_fn(d.box, gts[g].box);
        if (v > best) {
          best = v;
          arg = g;
        }
      }
    }
    const bool hit = arg < gts.size() && best >= threshold;
    if (hit) used[arg] = true;
    out.scores.push_back(d.score);
    out.tp.push_back(hit);
  }
  return out;
}

std::optional<double> average_precision(const std::vector<bool>& tp, std::span<const double> scores, std::size_t n_gt,
                                        std::size_t recall_positions) {
  if (tp.size() != scores.size()) throw ArgumentError("flags and scores differ in length");
  if (recall_positions < 2) throw ArgumentError("recall_positions must be >= 2");
  if (n_gt == 0) return std::nullopt;

  std::vector<std::size_t> order(tp.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> recall(tp.size());
  std::vector<double> precision(tp.size());
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (tp[order[k]]) ++hits;
    recall[k] = static_cast<double>(hits) / static_cast<double>(n_gt);
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  // Running max from the tail gives max precision over recall >= r.
  std::vector<double> envelope(precision);
  for (std::size_t k = envelope.size(); k-- > 1;) envelope[k - 1] = std::max(envelope[k - 1], envelope[k]);

  const bool eleven = recall_positions == 11;
  double sum = 0.0;
  std::size_t cursor = 0;
  for (std::size_t s = 0; s < recall_positions; ++s) {
    const double r = eleven ? static_cast<double>(s) / static_cast<double>(recall_positions - 1)
                            : static_cast<double>(s + 1) / static_cast<double>(recall_positions);
    while (cursor < recall.size() && recall[cursor] < r) ++cursor;
    if (cursor < recall.size()) sum += envelope[cursor];
  }
  return sum / static_cast<double>(recall_positions);
}

EvalConfig select_regions(const EvalConfig& cfg, std::span<const std::string> names) {
  EvalConfig out = cfg;
  out.regions.clear();
  if (names.empty()) {
    for (const auto& r : cfg.regions) {
      if (!r.placeholder) out.regions.push_back(r);
    }
    return out;
  }
  for (const auto& name : names) {
    auto it = std::find_if(cfg.regions.begin(), cfg.regions.end(), [&](const EvalRegion& r) { return r.name == name; });
    if (it == cfg.regions.end()) throw ConfigError("unknown evaluation region '" + name + "'");
    if (it->placeholder) {
      throw ConfigError("region '" + name + "' has no bounds; set eval.regions." + name + " in the config file");
    }
    out.regions.push_back(*it);
  }
  return out;
}

APReport evaluate(std::span<const Detection> dets_in, std::span<const Detection> gts_in, const EvalConfig& cfg,
                  const std::map<std::string, PointCloud>* points) {
  cfg.validate();
  if (cfg.require_points_in_gt && points == nullptr) {
    throw ConfigError("require_points_in_gt is set but no point clouds were supplied");
  }
  const auto dets = canonical(dets_in);
  auto gts = canonical(gts_in);
  if (cfg.require_points_in_gt) {
    std::erase_if(gts, [&](const Detection& g) {
      auto it = points->find(g.frame);
      if (it == points->end()) return true;
      const PointCloud& pc = it->second;
      for (std::size_t i = 0; i < pc.size(); ++i) {
        if (g.box.contains(pc.x(i), pc.y(i), pc.z(i))) return false;
      }
      return true;
    });
  }

  APReport report;
  report.class_names = cfg.class_names;
  for (const auto& region : cfg.regions) {
    if (region.placeholder) {
      throw ConfigError("region '" + region.name + "' has no bounds; set eval.regions." + region.name +
                        " in the config file");
    }
    RegionReport rr;
    rr.name = region.name;
    std::vector<std::optional<double>> ap3, apb;
    for (std::size_t c = 0; c < cfg.class_names.size(); ++c) {
      std::vector<Detection> cd, cg;
      for (const auto& d : dets) {
        if (d.box.class_id == static_cast<int>(c) && in_region(d.box, region, cfg.max_range_m)) cd.push_back(d);
      }
      for (const auto& g : gts) {
        if (g.box.class_id == static_cast<int>(c) && in_region(g.box, region, cfg.max_range_m)) cg.push_back(g);
      }
      const double thr = cfg.iou_thresholds[c];
      const auto m3 = match_detections(cd, cg, iou_3d, thr);
      const auto mb = match_detections(cd, cg, iou_bev, thr);
      ClassAP ap;
      ap.n_gt = cg.size();
      ap.ap_3d = average_precision(m3.tp, m3.scores, m3.n_gt, cfg.recall_positions);
      ap.ap_bev = average_precision(mb.tp, mb.scores, mb.n_gt, cfg.recall_positions);
      ap3.push_back(ap.ap_3d);
      apb.push_back(ap.ap_bev);
      rr.classes.push_back(ap);
    }
    rr.map_3d = mean_of(ap3);
    rr.map_bev = mean_of(apb);
    report.regions.push_back(std::move(rr));
  }
  return report;
}

std::string report_to_json(const APReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) -> json { return v ? json(*v) : json(nullptr); };
  json regions = json::object();
  for (const auto& rr : r.regions) {
    json classes = json::object();
    for (std::size_t c = 0; c < rr.classes.size(); ++c) {
      classes[r.class_names[c]] = {
          {"ap_3d", opt(rr.classes[c].ap_3d)}, {"ap_bev", opt(rr.classes[c].ap_bev)}, {"n_gt", rr.classes[c].n_gt}};
    }
    regions[rr.name] = {{"classes", classes}, {"mAP_3d", opt(rr.map_3d)}, {"mAP_bev", opt(rr.map_bev)}};
  }
  return json{{"classes", r.class_names}, {"regions", regions}}.dump(2) + "\n";
}

std::string report_to_table(const APReport& r) {
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("     -");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * *v);
    return std::string(buf);
  };
  std::ostringstream os;
  for (const char* metric : {"3D", "BEV"}) {
    const bool is3d = metric[0] == '3';
    os << "AP_" << metric << " (%)\n";
    os << "region      ";
    for (const auto& name : r.class_names) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %10s", name.substr(0, 10).c_str());
      os << buf;
    }
    os << "        mAP\n";
    for (const auto& rr : r.regions) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%-12s", rr.name.substr(0, 12).c_str());
      os << buf;
      for (const auto& c : rr.classes) os << "     " << cell(is3d ? c.ap_3d : c.ap_bev);
      os << "     " << cell(is3d ? rr.map_3d : rr.map_bev) << "\n";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace radar_mrf
