#include "radar_mrf/pillars.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "radar_mrf/random.hpp"

namespace radar_mrf {

namespace {

std::size_t whole_cells(double extent, double cell, const char* axis) {
  const double ratio = extent / cell;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-6) {
    throw ArgumentError(std::string("ROI ") + axis + " extent is not a whole number of cells");
  }
  return static_cast<std::size_t>(rounded);
}

std::size_t clamp_index(double offset, double cell, std::size_t count) {
  const auto i = static_cast<std::int64_t>(std::floor(offset / cell));
  return static_cast<std::size_t>(std::clamp<std::int64_t>(i, 0, static_cast<std::int64_t>(count) - 1));
}

struct Binning {
  std::vector<std::uint32_t> order;     // point indices grouped by pillar
  std::vector<std::size_t> group_start;  // size P + 1
  std::vector<std::uint64_t> group_key;  // row * W + col
};

Binning bin_points(const PointCloud& pc, const PillarConfig& cfg, std::size_t width, std::size_t height) {
  const std::size_t n = pc.size();
  std::vector<std::uint64_t> key(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!cfg.roi.contains(pc.x(i), pc.y(i), pc.z(i))) {
      throw ArgumentError("pillarize requires ROI-filtered input; point " + std::to_string(i) + " is outside the ROI");
    }
    const std::size_t col = clamp_index(pc.x(i) - cfg.roi.x_min, cfg.cell_x, width);
    const std::size_t row = clamp_index(pc.y(i) - cfg.roi.y_min, cfg.cell_y, height);
    key[i] = static_cast<std::uint64_t>(row) * width + col;
  }
  Binning b;
  b.order.resize(n);
  std::iota(b.order.begin(), b.order.end(), 0u);
  std::stable_sort(b.order.begin(), b.order.end(), [&](std::uint32_t a, std::uint32_t c) { return key[a] < key[c]; });
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0 || key[b.order[k]] != key[b.order[k - 1]]) {
      b.group_start.push_back(k);
      b.group_key.push_back(key[b.order[k]]);
    }
  }
  b.group_start.push_back(n);
  return b;
}

class Assembler {
 public:
  Assembler(const PointCloud& pc, const DensityField* dens, const PillarConfig& cfg)
      : pc_(pc), dens_(cfg.append_density ? dens : nullptr), cfg_(cfg) {
    cfg.validate();
    if (cfg.append_density && dens == nullptr) throw ArgumentError("append_density set but no density field given");
    if (dens_ != nullptr && dens_->normalized.rows != pc.size()) {
      throw ArgumentError("density rows do not match point count");
    }
    width_ = cfg.width();
    height_ = cfg.height();
    bins_ = bin_points(pc, cfg, width_, height_);

    out_.pillars = bins_.group_key.size();
    out_.max_points = cfg.max_points;
    const std::size_t dens_cols = dens_ != nullptr ? dens_->normalized.cols : 0;
    out_.features = pc.channels() + dens_cols + 6;
    out_.values.assign(out_.features * out_.pillars * out_.max_points, 0.0);
    out_.coords.resize(out_.pillars);
    out_.counts.resize(out_.pillars);
    out_.sources.assign(out_.pillars * out_.max_points, -1);
    centroid_.resize(3 * out_.pillars);
    z_mid_ = 0.5 * (cfg.roi.z_min + cfg.roi.z_max);
  }

  std::size_t pillar_count() const { return out_.pillars; }

  std::size_t feature_count() const { return out_.features; }

  // Picks the kept points of pillar p and its centroid.
  void select(std::size_t p) {
    const std::size_t begin = bins_.group_start[p];
    const std::size_t count = bins_.group_start[p + 1] - begin;
    const std::size_t cap = cfg_.max_points;
    const auto first = bins_.order.begin() + static_cast<std::ptrdiff_t>(begin);
    std::int64_t* slots = out_.sources.data() + p * cap;
    std::size_t kept = count;
    if (count <= cap) {
      std::copy(first, first + static_cast<std::ptrdiff_t>(count), slots);
    } else {
      // Seeded Fisher-Yates prefix; the per-pillar stream depends only on
      // the seed and the pillar key.
      std::vector<std::uint32_t> members(first, first + static_cast<std::ptrdiff_t>(count));
      Rng rng(mix_seed(cfg_.seed ^ mix_seed(bins_.group_key[p])));
      for (std::size_t k = 0; k < cap; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.below(count - k));
        std::swap(members[k], members[j]);
      }
      std::copy(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cap), slots);
      kept = cap;
    }

    const std::uint64_t key = bins_.group_key[p];
    const std::size_t row = key / width_;
    const std::size_t col = key % width_;
    out_.coords[p] = {static_cast<std::int32_t>(row), static_cast<std::int32_t>(col)};
    out_.counts[p] = static_cast<std::uint32_t>(kept);

    double mx = 0, my = 0, mz = 0;
    for (std::size_t n = 0; n < kept; ++n) {
      const auto i = static_cast<std::size_t>(slots[n]);
      mx += pc_.x(i);
      my += pc_.y(i);
      mz += pc_.z(i);
    }
    const double inv = 1.0 / static_cast<double>(kept);
    centroid_[3 * p] = mx * inv;
    centroid_[3 * p + 1] = my * inv;
    centroid_[3 * p + 2] = mz * inv;
  }

  // Writes feature row d of every pillar; call after select().
  void fill(std::size_t d) {
    const std::size_t raw = pc_.channels();
    const std::size_t dcols = dens_ != nullptr ? dens_->normalized.cols : 0;
    const std::size_t cap = cfg_.max_points;
    double* plane = out_.values.data() + d * out_.pillars * cap;
    for (std::size_t p = 0; p < out_.pillars; ++p) {
      const std::int64_t* slots = out_.sources.data() + p * cap;
      const auto [row, col] = out_.coords[p];
      const double gx = cfg_.roi.x_min + (static_cast<double>(col) + 0.5) * cfg_.cell_x;
      const double gy = cfg_.roi.y_min + (static_cast<double>(row) + 0.5) * cfg_.cell_y;
      for (std::size_t n = 0; n < out_.counts[p]; ++n) {
        const auto i = static_cast<std::size_t>(slots[n]);
        double v;
        if (d < raw) {
          v = pc_.at(i, d);
        } else if (d < raw + dcols) {
          v = dens_->normalized(i, d - raw);
        } else {
          switch (d - raw - dcols) {
            case 0: v = pc_.x(i) - centroid_[3 * p]; break;
            case 1: v = pc_.y(i) - centroid_[3 * p + 1]; break;
            case 2: v = pc_.z(i) - centroid_[3 * p + 2]; break;
            case 3: v = pc_.x(i) - gx; break;
            case 4: v = pc_.y(i) - gy; break;
            default: v = pc_.z(i) - z_mid_; break;
          }
        }
        plane[p * cap + n] = v;
      }
    }
  }

  PillarTensor take() { return std::move(out_); }

 private:
  const PointCloud& pc_;
  const DensityField* dens_;
  const PillarConfig& cfg_;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  double z_mid_ = 0;
  Binning bins_;
  std::vector<double> centroid_;  // 3 per pillar
  PillarTensor out_;
};

}  // namespace

std::size_t PillarConfig::width() const { return whole_cells(roi.x_max - roi.x_min, cell_x, "x"); }
std::size_t PillarConfig::height() const { return whole_cells(roi.y_max - roi.y_min, cell_y, "y"); }

void PillarConfig::validate() const {
  if (!(cell_x > 0 && cell_y > 0)) throw ArgumentError("pillar cell sizes must be positive");
  if (max_points < 1) throw ArgumentError("max_points must be at least 1");
  roi.validate();
  (void)width();
  (void)height();
}

PillarTensor pillarize(const PointCloud& pc, const DensityField* densities, const PillarConfig& cfg) {
  Assembler a(pc, densities, cfg);
  const auto count = static_cast<std::int64_t>(a.pillar_count());
  const auto features = static_cast<std::int64_t>(a.feature_count());
#pragma omp parallel
  {
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t p = 0; p < count; ++p) a.select(static_cast<std::size_t>(p));
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t d = 0; d < features; ++d) a.fill(static_cast<std::size_t>(d));
  }
  return a.take();
}

PillarTensor pillarize_serial(const PointCloud& pc, const DensityField* densities, const PillarConfig& cfg) {
  Assembler a(pc, densities, cfg);
  for (std::size_t p = 0; p < a.pillar_count(); ++p) a.select(p);
  for (std::size_t d = 0; d < a.feature_count(); ++d) a.fill(d);
  return a.take();
}

Matrix pillar_max_features(const PillarTensor& t) {
  Matrix out(t.features, t.pillars);
  for (std::size_t d = 0; d < t.features; ++d) {
    for (std::size_t p = 0; p < t.pillars; ++p) {
      double best = t.at(d, p, 0);
      for (std::size_t n = 1; n < t.counts[p]; ++n) best = std::max(best, t.at(d, p, n));
      out(d, p) = best;
    }
  }
  return out;
}

PseudoImage scatter_to_canvas(const Matrix& features, std::span<const PillarCoord> coords, std::size_t height,
                              std::size_t width, double cell_x, double cell_y) {
  if (features.cols != coords.size()) throw ArgumentError("feature columns do not match coordinate count");
  PseudoImage img{features.rows, height, width, cell_x, cell_y, {}};
  img.data.assign(features.rows * height * width, 0.0);
  std::vector<bool> used(height * width, false);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    const auto [row, col] = coords[p];
    if (row < 0 || col < 0 || static_cast<std::size_t>(row) >= height || static_cast<std::size_t>(col) >= width) {
      throw ArgumentError("pillar coordinate (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") outside canvas");
    }
    const std::size_t cell = static_cast<std::size_t>(row) * width + static_cast<std::size_t>(col);
    if (used[cell]) {
      throw ArgumentError("duplicate pillar coordinate (" + std::to_string(row) + ", " + std::to_string(col) + ")");
    }
    used[cell] = true;
    for (std::size_t c = 0; c < features.rows; ++c) img.data[c * height * width + cell] = features(c, p);
  }
  return img;
}

PseudoImage concat_channels(std::span<const PseudoImage> maps) {
  if (maps.empty()) throw ArgumentError("concat_channels needs at least one map");
  PseudoImage out = maps.front();
  for (std::size_t m = 1; m < maps.size(); ++m) {
    const auto& img = maps[m];
    if (img.height != out.height || img.width != out.width || img.cell_x != out.cell_x || img.cell_y != out.cell_y) {
      throw ArgumentError("pseudo-image shape mismatch at input " + std::to_string(m));
    }
    out.channels += img.channels;
    out.data.insert(out.data.end(), img.data.begin(), img.data.end());
  }
  return out;
}

}  // namespace radar_mrf
