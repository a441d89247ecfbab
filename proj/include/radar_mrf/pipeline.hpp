#pragma once

#include <string>
#include <vector>

#include "radar_mrf/kde.hpp"
#include "radar_mrf/pillars.hpp"
#include "radar_mrf/profile.hpp"
#include "radar_mrf/voxels.hpp"

namespace radar_mrf {

/// Wall time of each preprocessing stage, milliseconds.
struct StageTimes {
  double kde_ms = 0;
  double pillarize_ms = 0;
  double voxelize_ms = 0;
  double total_ms() const { return kde_ms + pillarize_ms + voxelize_ms; }
};

/// Everything the encode command writes for one scan.
struct ScanEncoding {
  std::size_t input_points = 0;
  PointCloud points;  // ROI-filtered; row i is density row i and pillar source i
  DensityField density;
  PillarTensor pillars;
  /// One grid per bandwidth; all share the same coords and counts.
  std::vector<SparseVoxelGrid> voxels;
};

/// ROI filter, multi-bandwidth KDE, pillarize and voxelize. The scan must carry
/// every kernel field of the config (FormatError naming the field otherwise).
ScanEncoding encode_scan(const PointCloud& pc, const PipelineConfig& cfg, StageTimes* times = nullptr);

/// kde_multiband + pillarize + voxelize on an already filtered cloud.
StageTimes time_preprocessing(const PointCloud& filtered, const PipelineConfig& cfg);

/// `<stem>.pillars.bin`: float32 values, index (d * P + p) * N + n.
std::vector<char> pillars_bytes(const PillarTensor& t);
/// `<stem>.pillars.meta.json`: D, P, N, H, W, feature names, coords, counts.
std::string pillars_meta_json(const ScanEncoding& e, const PipelineConfig& cfg);

/// `<stem>.voxels.bin`: uint32 header length, JSON header, int32 (d, h, w)
/// per voxel, float32 values (V x B row-major), uint32 counts. Little-endian.
std::vector<char> voxels_bytes(const ScanEncoding& e, const PipelineConfig& cfg);

/// `<stem>.density.bin`: float32 normalized densities, N x B row-major.
std::vector<char> density_bytes(const DensityField& f);
/// `<stem>.density.json`: N, B, radii and the kernel settings.
std::string density_meta_json(const ScanEncoding& e, const PipelineConfig& cfg);

/// Plain (P2) PGM of a grid: 0 maps to mid-gray 128, the largest magnitude to
/// 0 or 255. Row 0 of the grid is the first image row.
std::string grid_to_pgm(const Matrix& grid);
/// One CSV line per grid row, values in round-trip precision.
std::string grid_to_csv(const Matrix& grid);

/// Names of the pillar feature rows for `schema`.
std::vector<std::string> pillar_feature_names(const FeatureSchema& schema, const DensityField* appended);

}  // namespace radar_mrf
