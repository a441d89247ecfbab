// radar-mrf: batch front end for density features, grid encodings, target
// assignment, evaluation, synthetic scenes and preprocessing timings.
//
// Exit codes: 0 ok, 1 internal error, 2 input format error, 3 configuration error.

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "radar_mrf/eval.hpp"
#include "radar_mrf/io.hpp"
#include "radar_mrf/pipeline.hpp"
#include "radar_mrf/profile.hpp"
#include "radar_mrf/random.hpp"
#include "radar_mrf/synth.hpp"
#include "radar_mrf/targets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radar_mrf;

namespace {

constexpr int kOk = 0;
constexpr int kInternal = 1;
constexpr int kFormat = 2;
constexpr int kConfig = 3;

// Runs `fn`, mapping exceptions to exit codes with a diagnostic on stderr.
template <typename Fn>
int guarded(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    std::cerr << what << ": input error: " << e.what() << "\n";
    return kFormat;
  } catch (const ConfigError& e) {
    std::cerr << what << ": configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const ArgumentError& e) {
    std::cerr << what << ": configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << what << ": internal error: " << e.what() << "\n";
    return kInternal;
  }
}

struct CommonOptions {
  std::string config_path;
  std::string profile;
  std::string bandwidths;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config file (overrides the profile)");
  cmd->add_option("-p,--profile", o.profile, "Dataset profile: vod, tj4d or custom (default vod)");
  cmd->add_option("--bandwidths", o.bandwidths, "Comma-separated KDE bandwidths in meters, e.g. 0.6,1.0");
  cmd->add_option("--seed", o.seed, "Seed for pillar subsampling and synthetic scenes");
  cmd->add_option("--set", o.sets, "Override any config value: dotted.key=JSON, e.g. pillar.max_points=16");
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

json set_to_json(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  json node = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) node = json{{*it, node}};
  return node;
}

// Precedence: flag > config file > profile default.
PipelineConfig build_config(const CommonOptions& o) {
  std::optional<json> file;
  if (!o.config_path.empty()) {
    json j = json::parse(read_text(o.config_path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError(o.config_path + " is not a JSON object");
    file = std::move(j);
  }
  std::string profile = "vod";
  if (file && file->contains("profile") && (*file)["profile"].is_string()) profile = (*file)["profile"];
  if (!o.profile.empty()) profile = o.profile;
  PipelineConfig cfg = make_profile(profile);
  if (file) {
    file->erase("profile");
    apply_config_json(cfg, file->dump());
  }
  for (const auto& s : o.sets) apply_config_json(cfg, set_to_json(s).dump());
  if (!o.bandwidths.empty()) cfg.bandwidths = parse_list(o.bandwidths, "--bandwidths");
  if (o.seed) cfg.seed = *o.seed;
  cfg.sync();
  cfg.validate();
  return cfg;
}

void apply_thread_cap() {
  const char* env = std::getenv("RADAR_MRF_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("RADAR_MRF_THREADS must be a positive integer, got '") + env + "'");
  omp_set_num_threads(static_cast<int>(std::min<long>(n, omp_get_max_threads())));
}

bool is_artifact(const fs::path& p) {
  const std::string name = p.filename().string();
  for (const char* tag : {".pillars.", ".voxels.", ".density.", ".tmp"}) {
    if (name.find(tag) != std::string::npos) return true;
  }
  return false;
}

// Scan stems from files (`a.bin` or `a`) and directories (every scan inside).
std::vector<fs::path> scan_stems(const std::vector<std::string>& inputs) {
  std::vector<fs::path> stems;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".bin" && !is_artifact(entry.path())) {
          found.push_back(entry.path().parent_path() / entry.path().stem());
        }
      }
      std::sort(found.begin(), found.end());
      stems.insert(stems.end(), found.begin(), found.end());
    } else if (p.extension() == ".bin") {
      stems.push_back(p.parent_path() / p.stem());
    } else {
      stems.push_back(p);
    }
  }
  return stems;
}

fs::path sibling(const fs::path& dir, const fs::path& stem, const std::string& suffix) {
  return dir / (stem.filename().string() + suffix);
}

std::pair<std::size_t, std::size_t> parse_resolution(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    const long h = std::stol(text.substr(0, x));
    const long w = std::stol(text.substr(x + 1));
    if (h < 1 || w < 1) throw std::invalid_argument(text);
    return {static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
  } catch (const std::exception&) {
    throw ConfigError("resolution must look like HxW, got '" + text + "'");
  }
}

// ---- encode ---------------------------------------------------------------

struct EncodeOptions {
  CommonOptions common;
  std::vector<std::string> inputs;
  std::string out_dir;
  std::optional<std::size_t> max_points;
  std::string reduce;
  bool append_density = false;
};

void encode_one(const fs::path& stem, const fs::path& out_dir, const PipelineConfig& cfg) {
  const PointCloud pc = load_scan(stem, cfg.schema);
  const ScanEncoding e = encode_scan(pc, cfg);
  write_file_atomic(sibling(out_dir, stem, ".pillars.bin"), pillars_bytes(e.pillars));
  write_file_atomic(sibling(out_dir, stem, ".pillars.meta.json"), pillars_meta_json(e, cfg));
  write_file_atomic(sibling(out_dir, stem, ".voxels.bin"), voxels_bytes(e, cfg));
  write_file_atomic(sibling(out_dir, stem, ".density.bin"), density_bytes(e.density));
  write_file_atomic(sibling(out_dir, stem, ".density.json"), density_meta_json(e, cfg));
}

int run_encode(const EncodeOptions& o) {
  PipelineConfig cfg;
  if (const int rc = guarded("encode", [&] {
        cfg = build_config(o.common);
        if (o.max_points) cfg.pillar.max_points = *o.max_points;
        if (!o.reduce.empty()) cfg.voxel.reduce = parse_voxel_reduce(o.reduce);
        cfg.pillar.append_density = cfg.pillar.append_density || o.append_density;
        cfg.validate();
        return kOk;
      });
      rc != kOk) {
    return rc;
  }
  const auto stems = scan_stems(o.inputs);
  if (stems.empty()) {
    std::cerr << "encode: no input scans\n";
    return kFormat;
  }
  std::vector<int> codes(stems.size(), kOk);
  std::vector<std::string> messages(stems.size());
  const auto n = static_cast<std::int64_t>(stems.size());
#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& stem = stems[static_cast<std::size_t>(i)];
    codes[static_cast<std::size_t>(i)] = [&] {
      try {
        encode_one(stem, o.out_dir, cfg);
        return kOk;
      } catch (const FormatError& e) {
        messages[static_cast<std::size_t>(i)] = std::string("input error: ") + e.what();
        return kFormat;
      } catch (const ConfigError& e) {
        messages[static_cast<std::size_t>(i)] = std::string("configuration error: ") + e.what();
        return kConfig;
      } catch (const ArgumentError& e) {
        messages[static_cast<std::size_t>(i)] = std::string("configuration error: ") + e.what();
        return kConfig;
      } catch (const std::exception& e) {
        messages[static_cast<std::size_t>(i)] = std::string("internal error: ") + e.what();
        return kInternal;
      }
    }();
  }
  int rc = kOk;
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (codes[i] == kOk) continue;
    std::cerr << "encode: " << stems[i].string() << ": " << messages[i] << "\n";
    if (rc == kOk) rc = codes[i];
  }
  return rc;
}

// ---- kde-heatmap ----------------------------------------------------------

struct HeatmapOptions {
  CommonOptions common;
  std::string scan;
  std::string out_prefix;
  std::string resolution;
  std::size_t band = 0;
};

int run_heatmap(const HeatmapOptions& o) {
  return guarded("kde-heatmap", [&] {
    const PipelineConfig cfg = build_config(o.common);
    if (o.band >= cfg.bandwidths.size()) throw ConfigError("--band is out of range");
    std::size_t h = cfg.pillar.height(), w = cfg.pillar.width();
    if (!o.resolution.empty()) std::tie(h, w) = parse_resolution(o.resolution);
    const PointCloud pc = filter_roi(load_scan(scan_stems({o.scan}).front(), cfg.schema), cfg.roi);
    const auto kde = cfg.kde_configs();
    for (const auto& d : kde[o.band].kernel_dims) pc.schema().require(d);
    const auto column = normalize_densities(kde_densities(pc, kde[o.band]), cfg.kde_epsilon);
    const Matrix grid = bev_max_grid(pc, column, cfg.roi, h, w, 0.0);
    write_file_atomic(fs::path(o.out_prefix + ".pgm"), grid_to_pgm(grid));
    write_file_atomic(fs::path(o.out_prefix + ".csv"), grid_to_csv(grid));
    return kOk;
  });
}

// ---- assign ---------------------------------------------------------------

struct AssignOptions {
  CommonOptions common;
  std::string labels;
  std::string out;
  std::string grid;
  std::string iou = "bev";
};

int run_assign(const AssignOptions& o) {
  return guarded("assign", [&] {
    const PipelineConfig cfg = build_config(o.common);
    if (o.iou != "bev" && o.iou != "3d") throw ConfigError("--iou must be bev or 3d");
    std::size_t h = cfg.pillar.height(), w = cfg.pillar.width();
    if (!o.grid.empty()) std::tie(h, w) = parse_resolution(o.grid);
    const auto boxes = load_boxes(o.labels, cfg.class_names(), false);
    std::map<std::string, std::vector<Box3D>> frames;
    for (const auto& b : boxes) {
      auto& list = frames[b.frame];
      if (b.box.class_id >= 0) list.push_back(b.box);
    }
    const AnchorGrid anchors = generate_anchors(cfg.anchors, h, w, cfg.roi);
    std::string out;
    for (const auto& [frame, gts] : frames) {
      const auto a = assign_targets(anchors, gts, cfg.anchors, o.iou == "bev" ? IouKind::bev : IouKind::box3d);
      out += assignment_to_json(a, frame) + "\n";
    }
    if (o.out.empty()) {
      std::cout << out;
    } else {
      write_file_atomic(o.out, out);
    }
    return kOk;
  });
}

// ---- eval -----------------------------------------------------------------

struct EvalOptions {
  CommonOptions common;
  std::string dets;
  std::string labels;
  std::vector<std::string> regions;
  std::optional<std::size_t> recall_positions;
  std::optional<double> max_range;
  std::string out;
  std::string points_dir;
  bool require_points = false;
  bool json_stdout = false;
};

std::vector<Detection> to_detections(const std::vector<LabeledBox>& boxes) {
  std::vector<Detection> out;
  for (const auto& b : boxes) out.push_back({b.frame, b.box, b.score});
  return out;
}

int run_eval(const EvalOptions& o) {
  return guarded("eval", [&] {
    PipelineConfig cfg = build_config(o.common);
    if (o.recall_positions) cfg.eval.recall_positions = *o.recall_positions;
    if (o.max_range) cfg.eval.max_range_m = *o.max_range;
    cfg.eval.require_points_in_gt = cfg.eval.require_points_in_gt || o.require_points;
    const EvalConfig ecfg = select_regions(cfg.eval, o.regions);
    ecfg.validate();
    const auto gts = to_detections(load_boxes(o.labels, cfg.class_names(), false));
    const auto dets = to_detections(load_boxes(o.dets, cfg.class_names(), true));

    std::map<std::string, PointCloud> points;
    if (ecfg.require_points_in_gt) {
      if (o.points_dir.empty()) throw ConfigError("require_points_in_gt needs --points DIR");
      for (const auto& g : gts) {
        if (!points.count(g.frame)) points.emplace(g.frame, load_scan(fs::path(o.points_dir) / g.frame, cfg.schema));
      }
    }
    const APReport report = evaluate(dets, gts, ecfg, ecfg.require_points_in_gt ? &points : nullptr);
    const std::string js = report_to_json(report);
    if (!o.out.empty()) write_file_atomic(o.out, js);
    std::cout << (o.json_stdout ? js : report_to_table(report));
    return kOk;
  });
}

// ---- synth ----------------------------------------------------------------

struct SynthOptions {
  CommonOptions common;
  std::string out_dir;
  std::size_t count = 1;
  std::optional<std::size_t> points;
};

int run_synth(const SynthOptions& o) {
  return guarded("synth", [&] {
    const PipelineConfig cfg = build_config(o.common);
    const auto& names = cfg.class_names();
    std::string labels;
    for (std::size_t i = 0; i < o.count; ++i) {
      const std::uint64_t seed = mix_seed(cfg.seed ^ mix_seed(i));
      const Scene sc = o.points ? synth_scan(cfg.roi, cfg.schema, *o.points, seed)
                                : gen_scene(default_scene_spec(cfg.roi, cfg.schema, seed));
      char frame[16];
      std::snprintf(frame, sizeof frame, "%06zu", i);
      save_pointcloud(fs::path(o.out_dir) / frame, sc.cloud);
      for (const auto& b : sc.boxes) {
        LabeledBox lb;
        lb.frame = frame;
        lb.class_name = static_cast<std::size_t>(b.class_id) < names.size() ? names[static_cast<std::size_t>(b.class_id)]
                                                                            : std::to_string(b.class_id);
        lb.box = b;
        labels += box_to_json_line(lb, false) + "\n";
      }
    }
    write_file_atomic(fs::path(o.out_dir) / "labels.jsonl", labels);
    return kOk;
  });
}

// ---- bench ----------------------------------------------------------------

struct BenchOptions {
  CommonOptions common;
  std::vector<std::string> inputs;
  std::size_t repetitions = 20;
  std::size_t warmup = 2;
  std::optional<std::size_t> synth_points;
  std::string out;
};

json summarize(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const double median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  // nearest-rank percentile
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  return {{"median_ms", median}, {"p95_ms", samples[std::max<std::size_t>(rank, 1) - 1]}, {"samples", n}};
}

int run_bench(const BenchOptions& o) {
  return guarded("bench", [&] {
    const PipelineConfig cfg = build_config(o.common);
    if (o.repetitions == 0) throw ConfigError("--repetitions must be at least 1");
    std::vector<PointCloud> scans;
    std::vector<std::string> names;
    for (const auto& stem : scan_stems(o.inputs)) {
      scans.push_back(filter_roi(load_scan(stem, cfg.schema), cfg.roi));
      names.push_back(stem.string());
    }
    if (o.synth_points) {
      scans.push_back(filter_roi(synth_scan(cfg.roi, cfg.schema, *o.synth_points, cfg.seed).cloud, cfg.roi));
      names.push_back("synthetic:" + std::to_string(*o.synth_points));
    }
    if (scans.empty()) throw FormatError("bench needs at least one scan (or --synth-points)");

    std::vector<double> kde, pil, vox, total;
    for (const auto& pc : scans) {
      for (std::size_t w = 0; w < o.warmup; ++w) (void)time_preprocessing(pc, cfg);
      for (std::size_t r = 0; r < o.repetitions; ++r) {
        const StageTimes t = time_preprocessing(pc, cfg);
        kde.push_back(t.kde_ms);
        pil.push_back(t.pillarize_ms);
        vox.push_back(t.voxelize_ms);
        total.push_back(t.total_ms());
      }
    }
    json points = json::array();
    for (const auto& pc : scans) points.push_back(pc.size());
    const json report{{"profile", cfg.profile},
                      {"scans", names},
                      {"points", points},
                      {"repetitions", o.repetitions},
                      {"threads", omp_get_max_threads()},
                      {"stages", {{"kde", summarize(kde)}, {"pillarize", summarize(pil)}, {"voxelize", summarize(vox)}}},
                      {"total", summarize(total)}};
    const std::string text = report.dump(2) + "\n";
    if (o.out.empty()) {
      std::cout << text;
    } else {
      write_file_atomic(o.out, text);
    }
    return kOk;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radar-mrf: density features, grid encodings, targets and evaluation for 4D radar point clouds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "radar-mrf 0.1.0");

  EncodeOptions enc;
  auto* c_enc = app.add_subcommand("encode", "Write pillar, voxel and density artifacts for each scan");
  add_common(c_enc, enc.common);
  c_enc->add_option("inputs", enc.inputs, "Scan files (<stem>.bin), stems or directories")->required();
  c_enc->add_option("-o,--out", enc.out_dir, "Output directory")->required();
  c_enc->add_option("--max-points", enc.max_points, "Points kept per pillar (N)");
  c_enc->add_option("--reduce", enc.reduce, "Voxel reduction: mean or max");
  c_enc->add_flag("--append-density", enc.append_density, "Append density columns to the pillar features");

  HeatmapOptions hm;
  auto* c_hm = app.add_subcommand("kde-heatmap", "BEV heatmap of normalized density (PGM + CSV)");
  add_common(c_hm, hm.common);
  c_hm->add_option("scan", hm.scan, "Scan file or stem")->required();
  c_hm->add_option("-o,--out", hm.out_prefix, "Output prefix; writes <prefix>.pgm and <prefix>.csv")->required();
  c_hm->add_option("--resolution", hm.resolution, "Grid size HxW (default: the pillar canvas)");
  c_hm->add_option("--band", hm.band, "Bandwidth index (default 0)");

  AssignOptions as;
  auto* c_as = app.add_subcommand("assign", "Anchor target assignment per frame (JSON lines)");
  add_common(c_as, as.common);
  c_as->add_option("labels", as.labels, "Label file (JSON lines)")->required();
  c_as->add_option("-o,--out", as.out, "Output file (default: standard output)");
  c_as->add_option("--grid", as.grid, "Anchor lattice HxW (default: the pillar canvas)");
  c_as->add_option("--iou", as.iou, "Matching IoU: bev or 3d");

  EvalOptions ev;
  auto* c_ev = app.add_subcommand("eval", "AP_3D / AP_BEV per class and region");
  add_common(c_ev, ev.common);
  c_ev->add_option("detections", ev.dets, "Detection file (JSON lines with score)")->required();
  c_ev->add_option("labels", ev.labels, "Label file (JSON lines)")->required();
  c_ev->add_option("--region", ev.regions, "Region to evaluate (repeatable; default every configured region)");
  c_ev->add_option("--recall-positions", ev.recall_positions, "Recall sample count (40 or 11)");
  c_ev->add_option("--max-range", ev.max_range, "Drop boxes farther than this (m)");
  c_ev->add_option("-o,--out", ev.out, "Also write the JSON report here");
  c_ev->add_option("--points", ev.points_dir, "Directory of <frame>.bin scans for --require-points-in-gt");
  c_ev->add_flag("--require-points-in-gt", ev.require_points, "Drop ground truths containing no radar point");
  c_ev->add_flag("--json", ev.json_stdout, "Print the JSON report instead of the table");

  SynthOptions sy;
  auto* c_sy = app.add_subcommand("synth", "Write seeded synthetic scenes and labels");
  add_common(c_sy, sy.common);
  c_sy->add_option("-o,--out", sy.out_dir, "Output directory")->required();
  c_sy->add_option("-n,--count", sy.count, "Number of scenes");
  c_sy->add_option("--points", sy.points, "Exact points per scene (dense timing scenes)");

  BenchOptions be;
  auto* c_be = app.add_subcommand("bench", "Per-stage preprocessing timings (JSON)");
  add_common(c_be, be.common);
  c_be->add_option("inputs", be.inputs, "Scan files, stems or directories");
  c_be->add_option("-r,--repetitions", be.repetitions, "Timed repetitions per scan");
  c_be->add_option("--warmup", be.warmup, "Untimed repetitions per scan");
  c_be->add_option("--synth-points", be.synth_points, "Add a synthetic scan with this many points");
  c_be->add_option("-o,--out", be.out, "Report file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  if (const int rc = guarded("radar-mrf", [] {
        apply_thread_cap();
        return kOk;
      });
      rc != kOk) {
    return rc;
  }

  if (c_enc->parsed()) return run_encode(enc);
  if (c_hm->parsed()) return run_heatmap(hm);
  if (c_as->parsed()) return run_assign(as);
  if (c_ev->parsed()) return run_eval(ev);
  if (c_sy->parsed()) return run_synth(sy);
  if (c_be->parsed()) return run_bench(be);
  return kInternal;
}
