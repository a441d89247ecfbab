#include "radar_mrf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "radar_mrf/io.hpp"

namespace radar_mrf {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename T>
void put_le(std::vector<char>& out, T v) {
  static_assert(sizeof(T) == 4);
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xFFu));
}

void check_kernel_fields(const PointCloud& pc, const std::vector<KdeConfig>& cfgs) {
  for (const auto& k : cfgs) {
    for (const auto& d : k.kernel_dims) pc.schema().require(d);
  }
}

// Pillars and voxels from an ROI-filtered cloud and its densities.
void assemble(ScanEncoding& e, const PipelineConfig& cfg, StageTimes* times) {
  auto t0 = Clock::now();
  e.pillars = pillarize(e.points, &e.density, cfg.pillar);
  if (times) times->pillarize_ms = ms_since(t0);

  t0 = Clock::now();
  e.voxels.clear();
  std::vector<double> column(e.points.size());
  for (std::size_t b = 0; b < e.density.bands(); ++b) {
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = e.density.normalized(i, b);
    e.voxels.push_back(voxelize(e.points, column, cfg.voxel));
  }
  if (times) times->voxelize_ms = ms_since(t0);
}

}  // namespace

ScanEncoding encode_scan(const PointCloud& pc, const PipelineConfig& cfg, StageTimes* times) {
  const auto kde_cfgs = cfg.kde_configs();
  check_kernel_fields(pc, kde_cfgs);
  ScanEncoding e;
  e.input_points = pc.size();
  e.points = filter_roi(pc, cfg.roi);

  const auto t0 = Clock::now();
  e.density = kde_multiband(e.points, kde_cfgs);
  if (times) times->kde_ms = ms_since(t0);
  assemble(e, cfg, times);
  return e;
}

StageTimes time_preprocessing(const PointCloud& filtered, const PipelineConfig& cfg) {
  const auto kde_cfgs = cfg.kde_configs();
  check_kernel_fields(filtered, kde_cfgs);
  StageTimes t;
  ScanEncoding e;
  e.input_points = filtered.size();
  e.points = filtered;
  const auto t0 = Clock::now();
  e.density = kde_multiband(e.points, kde_cfgs);
  t.kde_ms = ms_since(t0);
  assemble(e, cfg, &t);
  return t;
}

std::vector<std::string> pillar_feature_names(const FeatureSchema& schema, const DensityField* appended) {
  std::vector<std::string> names;
  for (const auto& f : schema.fields()) names.push_back(f.name);
  if (appended != nullptr) {
    for (std::size_t b = 0; b < appended->bands(); ++b) names.push_back("density_" + std::to_string(b));
  }
  for (const char* n : {"x_c", "y_c", "z_c", "x_p", "y_p", "z_p"}) names.emplace_back(n);
  return names;
}

std::vector<char> pillars_bytes(const PillarTensor& t) { return encode_f32(t.values); }

std::string pillars_meta_json(const ScanEncoding& e, const PipelineConfig& cfg) {
  const auto& t = e.pillars;
  json coords = json::array();
  for (const auto& c : t.coords) coords.push_back({c.row, c.col});
  json j{{"layout", "float32 little-endian, index (d * P + p) * N + n, zero padded"},
         {"D", t.features},
         {"P", t.pillars},
         {"N", t.max_points},
         {"H", cfg.pillar.height()},
         {"W", cfg.pillar.width()},
         {"cell", {cfg.pillar.cell_x, cfg.pillar.cell_y}},
         {"features", pillar_feature_names(e.points.schema(), cfg.pillar.append_density ? &e.density : nullptr)},
         {"coords", coords},
         {"counts", t.counts},
         {"sources", t.sources},
         {"seed", cfg.pillar.seed},
         {"points", e.points.size()},
         {"input_points", e.input_points},
         {"channels",
          {{"c1", cfg.channels.c1},
           {"c2_1", cfg.channels.c2_1},
           {"c2_2", cfg.channels.c2_2},
           {"cf", cfg.channels.cf()},
           {"cm", cfg.channels.cm}}}};
  return j.dump() + "\n";
}

std::vector<char> voxels_bytes(const ScanEncoding& e, const PipelineConfig& cfg) {
  const std::size_t bands = e.voxels.size();
  const std::size_t count = bands == 0 ? 0 : e.voxels[0].coords.size();
  const VoxelDims dims = cfg.voxel.dims();
  const json header{{"layout", "int32 (d, h, w) x V, float32 values V x B, uint32 counts x V"},
                    {"dims", {dims.depth, dims.height, dims.width}},
                    {"cells", {cfg.voxel.cell_x, cfg.voxel.cell_y, cfg.voxel.cell_z}},
                    {"roi",
                     {cfg.voxel.roi.x_min, cfg.voxel.roi.x_max, cfg.voxel.roi.y_min, cfg.voxel.roi.y_max,
                      cfg.voxel.roi.z_min, cfg.voxel.roi.z_max}},
                    {"reduce", to_string(cfg.voxel.reduce)},
                    {"voxels", count},
                    {"bands", bands},
                    {"radii", e.density.radii}};
  const std::string h = header.dump();
  std::vector<char> out;
  out.reserve(4 + h.size() + count * (16 + 4 * bands));
  put_le(out, static_cast<std::uint32_t>(h.size()));
  out.insert(out.end(), h.begin(), h.end());
  if (bands == 0) return out;
  for (const auto& c : e.voxels[0].coords) {
    put_le(out, c.d);
    put_le(out, c.h);
    put_le(out, c.w);
  }
  for (std::size_t v = 0; v < count; ++v) {
    for (std::size_t b = 0; b < bands; ++b) put_le(out, static_cast<float>(e.voxels[b].values[v]));
  }
  for (auto n : e.voxels[0].counts) put_le(out, n);
  return out;
}

std::vector<char> density_bytes(const DensityField& f) { return encode_f32(f.normalized.data); }

std::string density_meta_json(const ScanEncoding& e, const PipelineConfig& cfg) {
  const auto kde = cfg.kde_configs();
  const json j{{"layout", "float32 little-endian, N x B row-major, normalized densities"},
               {"N", e.density.raw.rows},
               {"B", e.density.bands()},
               {"radii", e.density.radii},
               {"kernel_dims", kde.empty() ? std::vector<std::string>{} : kde[0].kernel_dims},
               {"epsilon", cfg.kde_epsilon},
               {"exclude_self", cfg.kde_exclude_self}};
  return j.dump() + "\n";
}

std::string grid_to_pgm(const Matrix& grid) {
  double scale = 0;
  for (double v : grid.data) scale = std::max(scale, std::abs(v));
  std::string out = "P2\n" + std::to_string(grid.cols) + " " + std::to_string(grid.rows) + "\n255\n";
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      long g = 128;
      if (scale > 0) g = std::lround(127.5 + 127.5 * grid(r, c) / scale);
      out += std::to_string(std::clamp(g, 0L, 255L));
      out += c + 1 == grid.cols ? '\n' : ' ';
    }
  }
  return out;
}

std::string grid_to_csv(const Matrix& grid) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", grid(r, c));
      out += buf;
      out += c + 1 == grid.cols ? '\n' : ',';
    }
  }
  return out;
}

}  // namespace radar_mrf
