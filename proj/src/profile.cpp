#include "radar_mrf/profile.hpp"

#include <set>

#include <json.hpp>

namespace radar_mrf {

using nlohmann::json;

namespace {

AnchorSpec anchor(int id, std::string name, double w, double l, double h, double z_bottom, double match,
                  double unmatch) {
  AnchorSpec s;
  s.class_id = id;
  s.name = std::move(name);
  s.w = w;
  s.l = l;
  s.h = h;
  s.z_bottom = z_bottom;
  s.match_thr = match;
  s.unmatch_thr = unmatch;
  return s;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + where + "." + k + "'");
  }
}

Roi3D roi_from_json(const json& j, const std::string& where) {
  check_keys(j, {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"}, where);
  Roi3D r;
  try {
    r.x_min = j.at("x_min").get<double>();
    r.x_max = j.at("x_max").get<double>();
    r.y_min = j.at("y_min").get<double>();
    r.y_max = j.at("y_max").get<double>();
    r.z_min = j.at("z_min").get<double>();
    r.z_max = j.at("z_max").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return r;
}

json roi_to_json(const Roi3D& r) {
  return {{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min},
          {"y_max", r.y_max}, {"z_min", r.z_min}, {"z_max", r.z_max}};
}

int class_index(const PipelineConfig& cfg, const std::string& name) {
  const auto& names = cfg.class_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("unknown class '" + name + "'");
}

}  // namespace

std::vector<KdeConfig> PipelineConfig::kde_configs() const {
  std::vector<KdeConfig> out;
  for (double r : bandwidths) {
    KdeConfig k;
    k.radius = r;
    k.kernel_dims = default_kernel_dims(schema, doppler_field);
    k.epsilon = kde_epsilon;
    k.exclude_self = kde_exclude_self;
    out.push_back(std::move(k));
  }
  return out;
}

void PipelineConfig::sync() {
  pillar.roi = roi;
  pillar.seed = seed;
  voxel.roi = roi;
}

void PipelineConfig::validate() const {
  roi.validate();
  if (bandwidths.empty()) throw ConfigError("at least one KDE bandwidth is required");
  for (const auto& k : kde_configs()) {
    try {
      k.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    pillar.validate();
    (void)voxel.dims();
    for (const auto& a : anchors) a.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  eval.validate();
}

PipelineConfig make_profile(std::string_view name) {
  PipelineConfig c;
  if (name == "vod" || name == "custom") {
    c.profile = std::string(name);
    c.schema = FeatureSchema::vod();
    c.doppler_field = "v_rc";
    c.roi = {0.0, 51.2, -25.6, 25.6, -3.0, 2.0};
    c.bandwidths = {1.5, 2.0};
    c.anchors = {anchor(0, "Car", 1.6, 3.9, 1.56, -1.78, 0.6, 0.45),
                 anchor(1, "Pedestrian", 0.6, 0.8, 1.73, -0.6, 0.5, 0.35),
                 anchor(2, "Cyclist", 0.6, 1.76, 1.73, -0.6, 0.5, 0.35)};
    c.eval.class_names = {"Car", "Pedestrian", "Cyclist"};
    c.eval.iou_thresholds = {0.5, 0.25, 0.25};
  } else if (name == "tj4d") {
    c.profile = "tj4d";
    c.schema = FeatureSchema::tj4d();
    c.doppler_field = "v_r";
    c.roi = {0.0, 69.12, -39.68, 39.68, -4.0, 2.0};
    c.bandwidths = {0.6, 1.0};
    c.anchors = {anchor(0, "Car", 1.84, 4.56, 1.70, -1.363, 0.6, 0.45),
                 anchor(1, "Pedestrian", 0.6, 0.8, 1.69, -1.163, 0.5, 0.35),
                 anchor(2, "Cyclist", 0.78, 1.77, 1.60, -1.353, 0.5, 0.35),
                 anchor(3, "Truck", 2.66, 10.76, 3.47, -1.403, 0.6, 0.45)};
    c.eval.class_names = {"Car", "Pedestrian", "Cyclist", "Truck"};
    c.eval.iou_thresholds = {0.5, 0.25, 0.25, 0.5};
    c.eval.max_range_m = 70.0;
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "' (expected vod, tj4d or custom)");
  }
  c.pillar.cell_x = 0.16;
  c.pillar.cell_y = 0.16;
  c.voxel.cell_x = 0.16;
  c.voxel.cell_y = 0.16;
  c.voxel.cell_z = 0.24;
  c.eval.regions = {{"entire", std::nullopt, false}, {"corridor", std::nullopt, true}};
  c.sync();
  return c;
}

void apply_config_json(PipelineConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"profile", "schema", "doppler_field", "roi", "bandwidths", "kde", "pillar", "voxel", "anchors", "eval",
                 "channels", "seed"},
             "config");
  if (j.contains("profile")) {
    if (!j["profile"].is_string()) throw ConfigError("config: profile must be a string");
    const auto name = j["profile"].get<std::string>();
    if (name != cfg.profile) cfg = make_profile(name);
  }
  try {
    if (j.contains("schema")) {
      std::vector<FieldSpec> fields;
      for (const auto& f : j["schema"]) fields.push_back({f.at("name").get<std::string>(), f.value("unit", "")});
      cfg.schema = FeatureSchema(std::move(fields));
    }
    if (j.contains("doppler_field")) cfg.doppler_field = j["doppler_field"].get<std::string>();
    if (j.contains("roi")) cfg.roi = roi_from_json(j["roi"], "roi");
    if (j.contains("bandwidths")) cfg.bandwidths = j["bandwidths"].get<std::vector<double>>();
    if (j.contains("kde")) {
      const auto& k = j["kde"];
      check_keys(k, {"epsilon", "exclude_self"}, "kde");
      cfg.kde_epsilon = k.value("epsilon", cfg.kde_epsilon);
      cfg.kde_exclude_self = k.value("exclude_self", cfg.kde_exclude_self);
    }
    if (j.contains("pillar")) {
      const auto& p = j["pillar"];
      check_keys(p, {"cell_x", "cell_y", "max_points"}, "pillar");
      cfg.pillar.cell_x = p.value("cell_x", cfg.pillar.cell_x);
      cfg.pillar.cell_y = p.value("cell_y", cfg.pillar.cell_y);
      cfg.pillar.max_points = p.value("max_points", cfg.pillar.max_points);
    }
    if (j.contains("voxel")) {
      const auto& v = j["voxel"];
      check_keys(v, {"cell_x", "cell_y", "cell_z", "reduce"}, "voxel");
      cfg.voxel.cell_x = v.value("cell_x", cfg.voxel.cell_x);
      cfg.voxel.cell_y = v.value("cell_y", cfg.voxel.cell_y);
      cfg.voxel.cell_z = v.value("cell_z", cfg.voxel.cell_z);
      if (v.contains("reduce")) cfg.voxel.reduce = parse_voxel_reduce(v["reduce"].get<std::string>());
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      check_keys(e, {"classes", "iou_thresholds", "recall_positions", "max_range_m", "regions", "require_points_in_gt"},
                 "eval");
      if (e.contains("classes")) cfg.eval.class_names = e["classes"].get<std::vector<std::string>>();
      if (e.contains("iou_thresholds")) {
        const auto& t = e["iou_thresholds"];
        std::vector<double> thr(cfg.eval.class_names.size(), 0.0);
        for (const auto& [name, value] : t.items()) thr[static_cast<std::size_t>(class_index(cfg, name))] = value;
        for (std::size_t c = 0; c < thr.size(); ++c) {
          if (!t.contains(cfg.eval.class_names[c])) {
            throw ConfigError("missing IoU threshold for class '" + cfg.eval.class_names[c] + "'");
          }
        }
        cfg.eval.iou_thresholds = thr;
      }
      cfg.eval.recall_positions = e.value("recall_positions", cfg.eval.recall_positions);
      if (e.contains("max_range_m")) {
        cfg.eval.max_range_m =
            e["max_range_m"].is_null() ? std::nullopt : std::optional<double>(e["max_range_m"].get<double>());
      }
      if (e.contains("regions")) {
        if (!e["regions"].is_object()) throw ConfigError("eval.regions must be a JSON object");
        for (const auto& [name, bounds] : e["regions"].items()) {
          // null = whole frame, "unset" = placeholder, object = bounds
          EvalRegion region{name, std::nullopt, false};
          if (bounds.is_string()) {
            if (bounds.get<std::string>() != "unset") {
              throw ConfigError("eval.regions." + name + " must be null, \"unset\" or an ROI object");
            }
            region.placeholder = true;
          } else if (!bounds.is_null()) {
            region.bounds = roi_from_json(bounds, "eval.regions." + name);
          }
          auto it = std::find_if(cfg.eval.regions.begin(), cfg.eval.regions.end(),
                                 [&](const EvalRegion& r) { return r.name == name; });
          if (it != cfg.eval.regions.end()) {
            *it = region;
          } else {
            cfg.eval.regions.push_back(region);
          }
        }
      }
      cfg.eval.require_points_in_gt = e.value("require_points_in_gt", cfg.eval.require_points_in_gt);
    }
    if (j.contains("anchors")) {
      cfg.anchors.clear();
      for (const auto& a : j["anchors"]) {
        check_keys(a, {"class", "w", "l", "h", "z_bottom", "rotations", "match_thr", "unmatch_thr"}, "anchors[]");
        const std::string name = a.at("class").get<std::string>();
        AnchorSpec s = anchor(class_index(cfg, name), name, a.at("w"), a.at("l"), a.at("h"), a.at("z_bottom"),
                              a.value("match_thr", 0.6), a.value("unmatch_thr", 0.45));
        if (a.contains("rotations")) s.rotations = a["rotations"].get<std::vector<double>>();
        cfg.anchors.push_back(std::move(s));
      }
    }
    if (j.contains("channels")) {
      const auto& ch = j["channels"];
      check_keys(ch, {"c1", "c2_1", "c2_2", "cm"}, "channels");
      cfg.channels.c1 = ch.value("c1", cfg.channels.c1);
      cfg.channels.c2_1 = ch.value("c2_1", cfg.channels.c2_1);
      cfg.channels.c2_2 = ch.value("c2_2", cfg.channels.c2_2);
      cfg.channels.cm = ch.value("cm", cfg.channels.cm);
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.sync();
  cfg.validate();
}

std::string config_to_json(const PipelineConfig& cfg) {
  json fields = json::array();
  for (const auto& f : cfg.schema.fields()) fields.push_back({{"name", f.name}, {"unit", f.unit}});
  json anchors = json::array();
  for (const auto& a : cfg.anchors) {
    anchors.push_back({{"class", a.name},
                       {"w", a.w},
                       {"l", a.l},
                       {"h", a.h},
                       {"z_bottom", a.z_bottom},
                       {"rotations", a.rotations},
                       {"match_thr", a.match_thr},
                       {"unmatch_thr", a.unmatch_thr}});
  }
  json thresholds = json::object();
  for (std::size_t c = 0; c < cfg.eval.class_names.size(); ++c) {
    thresholds[cfg.eval.class_names[c]] = cfg.eval.iou_thresholds[c];
  }
  json regions = json::object();
  for (const auto& r : cfg.eval.regions) {
    regions[r.name] = r.placeholder ? json("unset") : r.bounds ? roi_to_json(*r.bounds) : json(nullptr);
  }
  json j{{"profile", cfg.profile},
         {"schema", fields},
         {"doppler_field", cfg.doppler_field},
         {"roi", roi_to_json(cfg.roi)},
         {"bandwidths", cfg.bandwidths},
         {"kde", {{"epsilon", cfg.kde_epsilon}, {"exclude_self", cfg.kde_exclude_self}}},
         {"pillar", {{"cell_x", cfg.pillar.cell_x}, {"cell_y", cfg.pillar.cell_y}, {"max_points", cfg.pillar.max_points}}},
         {"voxel",
          {{"cell_x", cfg.voxel.cell_x},
           {"cell_y", cfg.voxel.cell_y},
           {"cell_z", cfg.voxel.cell_z},
           {"reduce", to_string(cfg.voxel.reduce)}}},
         {"anchors", anchors},
         {"eval",
          {{"classes", cfg.eval.class_names},
           {"iou_thresholds", thresholds},
           {"recall_positions", cfg.eval.recall_positions},
           {"max_range_m", cfg.eval.max_range_m ? json(*cfg.eval.max_range_m) : json(nullptr)},
           {"regions", regions},
           {"require_points_in_gt", cfg.eval.require_points_in_gt}}},
         {"channels", {{"c1", cfg.channels.c1}, {"c2_1", cfg.channels.c2_1}, {"c2_2", cfg.channels.c2_2}, {"cm", cfg.channels.cm}}},
         {"seed", cfg.seed}};
  return j.dump(2) + "\n";
}

}  // namespace radar_mrf
