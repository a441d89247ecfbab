#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radar_mrf/errors.hpp"

namespace radar_mrf {

/// Row-major dense matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

struct FieldSpec {
  std::string name;
  std::string unit;
  bool operator==(const FieldSpec&) const = default;
};

/// Ordered list of per-point fields. x, y, z always occupy columns 0..2.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  /// Throws FormatError unless names are unique, there are at least three
  /// fields and the first three are x, y, z.
  explicit FeatureSchema(std::vector<FieldSpec> fields);

  /// 7 fields: x, y, z, rcs, v_r, v_rc, time.
  static FeatureSchema vod();
  /// 5 fields: x, y, z, v_r, snr.
  static FeatureSchema tj4d();

  std::size_t size() const { return fields_.size(); }
  const std::vector<FieldSpec>& fields() const { return fields_; }
  const FieldSpec& operator[](std::size_t i) const { return fields_[i]; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Like index_of but throws FormatError naming the missing field.
  std::size_t require(std::string_view name) const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FieldSpec> fields_;
};

/// A radar scan: N_p rows, one column per schema field.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(FeatureSchema schema) : schema_(std::move(schema)) {}
  /// Throws FormatError if `values.size()` is not a multiple of the schema
  /// length or any value is non-finite.
  PointCloud(FeatureSchema schema, std::vector<double> values);

  const FeatureSchema& schema() const { return schema_; }
  std::size_t size() const { return schema_.size() == 0 ? 0 : values_.size() / schema_.size(); }
  std::size_t channels() const { return schema_.size(); }
  bool empty() const { return values_.empty(); }

  double x(std::size_t i) const { return values_[i * channels()]; }
  double y(std::size_t i) const { return values_[i * channels() + 1]; }
  double z(std::size_t i) const { return values_[i * channels() + 2]; }
  double at(std::size_t i, std::size_t c) const { return values_[i * channels() + c]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * channels(), channels()}; }
  const std::vector<double>& values() const { return values_; }

  void push_back(std::span<const double> row);

  bool operator==(const PointCloud&) const = default;

 private:
  FeatureSchema schema_;
  std::vector<double> values_;
};

struct Roi3D {
  double x_min = 0, x_max = 0;
  double y_min = 0, y_max = 0;
  double z_min = 0, z_max = 0;

  /// Throws ArgumentError unless min < max on every axis.
  void validate() const;
  /// Half-open membership [min, max) per axis.
  bool contains(double x, double y, double z) const {
    return x >= x_min && x < x_max && y >= y_min && y < y_max && z >= z_min && z < z_max;
  }
  bool operator==(const Roi3D&) const = default;
};

/// Oriented 3D box. (cx, cy, cz) is the volumetric center; `l` runs along the
/// heading direction `theta`, `w` across it.
struct Box3D {
  double cx = 0, cy = 0, cz = 0;
  double w = 1, l = 1, h = 1;
  double theta = 0;
  int class_id = 0;

  void validate() const;
  double volume() const { return w * l * h; }
  double bottom() const { return cz - 0.5 * h; }
  double top() const { return cz + 0.5 * h; }
  bool contains(double x, double y, double z) const;
  bool operator==(const Box3D&) const = default;
};

/// Maps any angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

/// Points inside `roi` (half-open), order preserved.
PointCloud filter_roi(const PointCloud& pc, const Roi3D& roi);

}  // namespace radar_mrf
