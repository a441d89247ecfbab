#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radar_mrf/core.hpp"

namespace radar_mrf {

/// Reads a little-endian float32 N x C record file. Throws FormatError when
/// the byte count is not a whole number of records or a value is non-finite.
PointCloud load_pointcloud(const std::filesystem::path& path, const FeatureSchema& schema);

/// Reads `<stem>.schema.json`: {"fields": [{"name": ..., "unit": ...}, ...]}.
FeatureSchema load_schema(const std::filesystem::path& path);
std::string schema_to_json(const FeatureSchema& schema);

/// Writes `<stem>.bin` and `<stem>.schema.json`.
void save_pointcloud(const std::filesystem::path& stem, const PointCloud& pc);

/// `<stem>.bin` + `<stem>.schema.json`. Falls back to `fallback` when no
/// sidecar exists.
PointCloud load_scan(const std::filesystem::path& stem, const std::optional<FeatureSchema>& fallback = std::nullopt);

enum class ZRef { bottom, center };

/// One record of a label or detection JSON-lines file. `box.cz` is always the
/// volumetric center after parsing; `z_ref` records what the file carried.
struct LabeledBox {
  std::string frame;
  std::string class_name;
  Box3D box;
  double score = 1.0;
  ZRef z_ref = ZRef::center;
};

/// Parses JSON lines. Blank lines are skipped. Throws FormatError with the
/// 1-based line number on malformed input. `class_names` resolves
/// `box.class_id`; records of unlisted classes get class_id -1. With
/// `with_score`, a missing score reads as 1, so label files double as
/// perfect detections.
std::vector<LabeledBox> parse_boxes(std::istream& in, std::span<const std::string> class_names, bool with_score);
std::vector<LabeledBox> load_boxes(const std::filesystem::path& path, std::span<const std::string> class_names,
                                   bool with_score);
/// Serializes with `"z_ref": "center"`.
std::string box_to_json_line(const LabeledBox& b, bool with_score);

/// Writes `bytes` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const char> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

/// Little-endian float32 encoding of `values`.
std::vector<char> encode_f32(std::span<const double> values);

}  // namespace radar_mrf
