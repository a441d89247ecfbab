#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radar_mrf/core.hpp"
#include "radar_mrf/pillars.hpp"

namespace radar_mrf {

enum class VoxelReduce { mean, max };

std::string to_string(VoxelReduce r);
VoxelReduce parse_voxel_reduce(const std::string& s);

struct VoxelDims {
  std::size_t depth = 0;   // z
  std::size_t height = 0;  // y
  std::size_t width = 0;   // x
  bool operator==(const VoxelDims&) const = default;
};

struct VoxelConfig {
  double cell_x = 0.16;
  double cell_y = 0.16;
  double cell_z = 0.24;
  Roi3D roi;
  VoxelReduce reduce = VoxelReduce::mean;

  /// x/y extents must be whole multiples of their cells; the z axis rounds
  /// up and the top layer is truncated at z_max.
  VoxelDims dims() const;
};

struct VoxelCoord {
  std::int32_t d = 0, h = 0, w = 0;
  auto operator<=>(const VoxelCoord&) const = default;
};

/// COO voxel grid with one value channel, coords sorted by (d, h, w).
struct SparseVoxelGrid {
  VoxelDims dims;
  std::vector<VoxelCoord> coords;
  std::vector<double> values;
  std::vector<std::uint32_t> counts;  // member points per voxel
};

/// Bins points by floor division per axis and reduces each voxel's member
/// densities. Throws ArgumentError when `density` does not have one entry
/// per point or a point lies outside the ROI.
SparseVoxelGrid voxelize(const PointCloud& pc, std::span<const double> density, const VoxelConfig& cfg);
/// Single-threaded reference; identical output.
SparseVoxelGrid voxelize_serial(const PointCloud& pc, std::span<const double> density, const VoxelConfig& cfg);

/// 1 x D x H x W dense tensor, index (d * H + h) * W + w.
std::vector<double> to_dense(const SparseVoxelGrid& grid);

/// (1, H, W) map of the max voxel value along depth, 0 where no voxel is
/// occupied. Stands in for the learned collapse of the density volume.
PseudoImage bev_max_projection(const SparseVoxelGrid& grid, double cell_x, double cell_y);

}  // namespace radar_mrf
