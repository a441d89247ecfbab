#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "radar_mrf/core.hpp"

namespace radar_mrf {

/// Configuration of one density channel.
struct KdeConfig {
  /// Bandwidth R in meters: spatial gate half-width and kernel scale.
  double radius = 1.0;
  /// Fields entering the kernel product. Must contain x, y, z.
  std::vector<std::string> kernel_dims{"x", "y", "z"};
  double epsilon = 1e-5;
  bool exclude_self = true;
  /// Optional per-dimension kernel scales, parallel to `kernel_dims`. Empty
  /// means every dimension uses `radius`. The gate always uses `radius`.
  std::vector<double> dim_bandwidths;

  void validate() const;
};

/// x, y, z, plus `doppler_field` when the schema has it.
std::vector<std::string> default_kernel_dims(const FeatureSchema& schema, std::string_view doppler_field);

struct CellKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const CellKey&) const = default;
  auto operator<=>(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept;
};

/// Uniform 3D hash grid over point indices.
class GridIndex {
 public:
  GridIndex() = default;

  double cell_size() const { return cell_size_; }
  CellKey key_of(double x, double y, double z) const;
  /// Indices of points in `key`, ascending; empty if the cell is vacant.
  std::span<const std::uint32_t> cell(const CellKey& key) const;
  /// Occupied cells in ascending key order.
  const std::vector<CellKey>& keys() const { return keys_; }
  std::span<const std::uint32_t> cell_at(std::size_t slot) const {
    return {indices_.data() + offsets_[slot], offsets_[slot + 1] - offsets_[slot]};
  }
  std::size_t cell_count() const { return keys_.size(); }
  /// Point indices grouped by cell; cell `slot` occupies [offset(slot), offset(slot + 1)).
  const std::vector<std::uint32_t>& point_order() const { return indices_; }
  std::size_t offset(std::size_t slot) const { return offsets_[slot]; }
  /// First slot whose key is not below `key`.
  std::size_t lower_slot(const CellKey& key) const;

 private:
  friend GridIndex build_grid_index(const PointCloud& pc, double cell_size);

  double cell_size_ = 1.0;
  std::vector<CellKey> keys_;
  std::vector<std::uint32_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::unordered_map<CellKey, std::uint32_t, CellKeyHash> slots_;
};

/// Bins point i into (floor(x/c), floor(y/c), floor(z/c)).
GridIndex build_grid_index(const PointCloud& pc, double cell_size);

/// Raw Gaussian-product densities using a grid index, parallel over cells.
/// Each point's neighbor sum runs in a fixed order, so the output does not
/// depend on the thread count.
std::vector<double> kde_densities(const PointCloud& pc, const KdeConfig& cfg);

/// O(N^2) pairwise reference for kde_densities.
std::vector<double> kde_bruteforce(const PointCloud& pc, const KdeConfig& cfg);

/// Per-column z-score: (rho - mean) / sqrt(var + epsilon), population variance.
std::vector<double> normalize_densities(std::span<const double> raw, double epsilon);

struct DensityField {
  Matrix raw;         // N_p x B
  Matrix normalized;  // N_p x B
  std::vector<double> radii;

  std::size_t bands() const { return raw.cols; }
};

/// One column per config, each normalized independently.
DensityField kde_multiband(const PointCloud& pc, std::span<const KdeConfig> cfgs);

/// H x W BEV grid holding the max of `values` over the points in each cell;
/// cells without points hold `empty_value`. Row index follows y, column x.
Matrix bev_max_grid(const PointCloud& pc, std::span<const double> values, const Roi3D& roi, std::size_t height,
                    std::size_t width, double empty_value = 0.0);

}  // namespace radar_mrf
