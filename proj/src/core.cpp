#include "radar_mrf/core.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

namespace radar_mrf {

FeatureSchema::FeatureSchema(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.size() < 3) {
    throw FormatError("schema needs at least x, y, z; got " + std::to_string(fields_.size()) + " fields");
  }
  static constexpr std::array<std::string_view, 3> kSpatial{"x", "y", "z"};
  for (std::size_t i = 0; i < 3; ++i) {
    if (fields_[i].name != kSpatial[i]) {
      throw FormatError("schema field " + std::to_string(i) + " must be '" + std::string(kSpatial[i]) + "', got '" +
                        fields_[i].name + "'");
    }
  }
  std::unordered_set<std::string> seen;
  for (const auto& f : fields_) {
    if (!seen.insert(f.name).second) throw FormatError("duplicate schema field '" + f.name + "'");
  }
}

FeatureSchema FeatureSchema::vod() {
  return FeatureSchema({{"x", "m"},
                        {"y", "m"},
                        {"z", "m"},
                        {"rcs", "dBsm"},
                        {"v_r", "m/s"},
                        {"v_rc", "m/s"},
                        {"time", "scan"}});
}

FeatureSchema FeatureSchema::tj4d() {
  return FeatureSchema({{"x", "m"}, {"y", "m"}, {"z", "m"}, {"v_r", "m/s"}, {"snr", "dB"}});
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw FormatError("unknown field '" + std::string(name) + "' (not in point-cloud schema)");
}

PointCloud::PointCloud(FeatureSchema schema, std::vector<double> values)
    : schema_(std::move(schema)), values_(std::move(values)) {
  if (schema_.size() == 0) throw FormatError("point cloud requires a non-empty schema");
  if (values_.size() % schema_.size() != 0) {
    throw FormatError("value count " + std::to_string(values_.size()) + " is not a multiple of schema length " +
                      std::to_string(schema_.size()));
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw FormatError("non-finite value at point " + std::to_string(k / schema_.size()) + ", field '" +
                        schema_[k % schema_.size()].name + "'");
    }
  }
}

void PointCloud::push_back(std::span<const double> row) {
  if (row.size() != schema_.size()) throw ArgumentError("row length does not match schema");
  for (double v : row) {
    if (!std::isfinite(v)) throw FormatError("non-finite point value");
  }
  values_.insert(values_.end(), row.begin(), row.end());
}

void Roi3D::validate() const {
  if (!(x_min < x_max && y_min < y_max && z_min < z_max)) {
    throw ArgumentError("ROI requires min < max on every axis");
  }
}

void Box3D::validate() const {
  if (!(w > 0 && l > 0 && h > 0)) throw ArgumentError("box dimensions must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(cz) || !std::isfinite(theta)) {
    throw ArgumentError("box fields must be finite");
  }
}

bool Box3D::contains(double x, double y, double z) const {
  if (z < bottom() || z > top()) return false;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double dx = x - cx;
  const double dy = y - cy;
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return std::abs(along) <= 0.5 * l && std::abs(across) <= 0.5 * w;
}

PointCloud filter_roi(const PointCloud& pc, const Roi3D& roi) {
  std::vector<double> kept;
  kept.reserve(pc.values().size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (roi.contains(pc.x(i), pc.y(i), pc.z(i))) {
      auto r = pc.row(i);
      kept.insert(kept.end(), r.begin(), r.end());
    }
  }
  return PointCloud(pc.schema(), std::move(kept));
}

}  // namespace radar_mrf
