#include "radar_mrf/voxels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace radar_mrf {

namespace {

std::size_t exact_cells(double extent, double cell, const char* axis) {
  const double ratio = extent / cell;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6) {
    throw ArgumentError(std::string("voxel ROI ") + axis + " extent is not a whole number of cells");
  }
  return static_cast<std::size_t>(rounded);
}

std::size_t cell_index(double offset, double cell, std::size_t count) {
  const auto i = static_cast<std::int64_t>(std::floor(offset / cell));
  return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(count) - 1));
}

template <bool Parallel>
SparseVoxelGrid voxelize_impl(const PointCloud& pc, std::span<const double> density, const VoxelConfig& cfg) {
  if (density.size() != pc.size()) {
    throw ArgumentError("density length " + std::to_string(density.size()) + " does not match point count " +
                        std::to_string(pc.size()));
  }
  SparseVoxelGrid grid;
  grid.dims = cfg.dims();
  const auto [depth, height, width] = grid.dims;
  const auto n = static_cast<std::int64_t>(pc.size());
  std::vector<std::uint64_t> key(pc.size());
  bool outside = false;

#pragma omp parallel for schedule(static) if (Parallel) reduction(|| : outside)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto i = static_cast<std::size_t>(s);
    if (!cfg.roi.contains(pc.x(i), pc.y(i), pc.z(i))) {
      outside = true;
      continue;
    }
    const std::size_t w = cell_index(pc.x(i) - cfg.roi.x_min, cfg.cell_x, width);
    const std::size_t h = cell_index(pc.y(i) - cfg.roi.y_min, cfg.cell_y, height);
    const std::size_t d = cell_index(pc.z(i) - cfg.roi.z_min, cfg.cell_z, depth);
    key[i] = (static_cast<std::uint64_t>(d) * height + h) * width + w;
  }
  if (outside) throw ArgumentError("voxelize requires ROI-filtered input");

  std::vector<std::uint32_t> order(pc.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return key[a] < key[b]; });

  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || key[order[k]] != key[order[k - 1]]) starts.push_back(k);
  }
  starts.push_back(order.size());

  const std::size_t voxels = starts.size() - 1;
  grid.coords.resize(voxels);
  grid.values.resize(voxels);
  grid.counts.resize(voxels);
  const auto nv = static_cast<std::int64_t>(voxels);
#pragma omp parallel for schedule(static) if (Parallel)
  for (std::int64_t s = 0; s < nv; ++s) {
    const auto v = static_cast<std::size_t>(s);
    const std::uint64_t k = key[order[starts[v]]];
    grid.coords[v] = {static_cast<std::int32_t>(k / (height * width)),
                      static_cast<std::int32_t>((k / width) % height), static_cast<std::int32_t>(k % width)};
    double acc = cfg.reduce == VoxelReduce::max ? density[order[starts[v]]] : 0.0;
    for (std::size_t m = starts[v]; m < starts[v + 1]; ++m) {
      const double val = density[order[m]];
      acc = cfg.reduce == VoxelReduce::max ? std::max(acc, val) : acc + val;
    }
    const std::size_t count = starts[v + 1] - starts[v];
    grid.values[v] = cfg.reduce == VoxelReduce::mean ? acc / static_cast<double>(count) : acc;
    grid.counts[v] = static_cast<std::uint32_t>(count);
  }
  return grid;
}

}  // namespace

std::string to_string(VoxelReduce r) { return r == VoxelReduce::mean ? "mean" : "max"; }

VoxelReduce parse_voxel_reduce(const std::string& s) {
  if (s == "mean") return VoxelReduce::mean;
  if (s == "max") return VoxelReduce::max;
  throw ConfigError("voxel reduce must be 'mean' or 'max', got '" + s + "'");
}

VoxelDims VoxelConfig::dims() const {
  if (!(cell_x > 0 && cell_y > 0 && cell_z > 0)) throw ArgumentError("voxel cell sizes must be positive");
  roi.validate();
  VoxelDims d;
  d.width = exact_cells(roi.x_max - roi.x_min, cell_x, "x");
  d.height = exact_cells(roi.y_max - roi.y_min, cell_y, "y");
  const double zr = (roi.z_max - roi.z_min) / cell_z;
  const double zr_round = std::round(zr);
  d.depth = static_cast<std::size_t>(std::abs(zr - zr_round) <= 1e-6 ? zr_round : std::ceil(zr));
  return d;
}

SparseVoxelGrid voxelize(const PointCloud& pc, std::span<const double> density, const VoxelConfig& cfg) {
  return voxelize_impl<true>(pc, density, cfg);
}

SparseVoxelGrid voxelize_serial(const PointCloud& pc, std::span<const double> density, const VoxelConfig& cfg) {
  return voxelize_impl<false>(pc, density, cfg);
}

std::vector<double> to_dense(const SparseVoxelGrid& grid) {
  const auto& [depth, height, width] = grid.dims;
  std::vector<double> dense(depth * height * width, 0.0);
  for (std::size_t v = 0; v < grid.coords.size(); ++v) {
    const auto& c = grid.coords[v];
    dense[(static_cast<std::size_t>(c.d) * height + static_cast<std::size_t>(c.h)) * width +
          static_cast<std::size_t>(c.w)] = grid.values[v];
  }
  return dense;
}

PseudoImage bev_max_projection(const SparseVoxelGrid& grid, double cell_x, double cell_y) {
  const auto& [depth, height, width] = grid.dims;
  PseudoImage img{1, height, width, cell_x, cell_y, std::vector<double>(height * width, 0.0)};
  std::vector<bool> seen(height * width, false);
  for (std::size_t v = 0; v < grid.coords.size(); ++v) {
    const auto& c = grid.coords[v];
    const std::size_t cell = static_cast<std::size_t>(c.h) * width + static_cast<std::size_t>(c.w);
    img.data[cell] = seen[cell] ? std::max(img.data[cell], grid.values[v]) : grid.values[v];
    seen[cell] = true;
  }
  return img;
}

}  // namespace radar_mrf
