#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "radar_mrf/core.hpp"
#include "radar_mrf/kde.hpp"

namespace radar_mrf {

struct PillarConfig {
  double cell_x = 0.16;
  double cell_y = 0.16;
  std::size_t max_points = 32;
  Roi3D roi;
  std::uint64_t seed = 0;
  /// Append the normalized density columns to the raw features.
  bool append_density = false;

  /// Canvas size; throws ArgumentError unless the ROI extent is a whole
  /// number of cells (within 1e-6).
  std::size_t height() const;
  std::size_t width() const;
  void validate() const;
};

struct PillarCoord {
  std::int32_t row = 0;  // y index
  std::int32_t col = 0;  // x index
  auto operator<=>(const PillarCoord&) const = default;
};

/// Sparse (D, P, N) pillar tensor. values[(d * P + p) * N + n].
struct PillarTensor {
  std::size_t features = 0;  // D
  std::size_t pillars = 0;   // P
  std::size_t max_points = 0;  // N
  std::vector<double> values;
  std::vector<PillarCoord> coords;
  std::vector<std::uint32_t> counts;
  /// Source point per slot (P x N), -1 for padding.
  std::vector<std::int64_t> sources;

  double at(std::size_t d, std::size_t p, std::size_t n) const { return values[(d * pillars + p) * max_points + n]; }
};

/// Feature-row layout: raw schema fields, optional density columns, then
/// x_c, y_c, z_c (offsets from the kept-point centroid) and x_p, y_p, z_p
/// (offsets from the pillar center; z relative to the ROI z midpoint).
/// Pillars are ordered by (row, col). Throws ArgumentError if any point lies
/// outside the ROI.
PillarTensor pillarize(const PointCloud& pc, const DensityField* densities, const PillarConfig& cfg);
/// Single-threaded reference; identical output.
PillarTensor pillarize_serial(const PointCloud& pc, const DensityField* densities, const PillarConfig& cfg);

/// D x P matrix: per-feature max over each pillar's kept points. A fixed,
/// non-learned reduction for feeding raw features to scatter_to_canvas.
Matrix pillar_max_features(const PillarTensor& t);

/// Dense (C, H, W) BEV map with cell metadata.
struct PseudoImage {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  double cell_x = 0;
  double cell_y = 0;
  std::vector<double> data;

  double& at(std::size_t c, std::size_t r, std::size_t k) { return data[(c * height + r) * width + k]; }
  double at(std::size_t c, std::size_t r, std::size_t k) const { return data[(c * height + r) * width + k]; }
};

/// Writes column p of the C x P `features` at coords[p]. Throws ArgumentError
/// on out-of-range or duplicate coordinates.
PseudoImage scatter_to_canvas(const Matrix& features, std::span<const PillarCoord> coords, std::size_t height,
                              std::size_t width, double cell_x = 0, double cell_y = 0);

/// Channel concatenation in argument order. Throws ArgumentError on any
/// height/width/cell mismatch.
PseudoImage concat_channels(std::span<const PseudoImage> maps);

}  // namespace radar_mrf
