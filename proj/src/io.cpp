#include "radar_mrf/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

namespace radar_mrf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

float load_f32_le(const char* p) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

void store_f32_le(char* p, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  std::memcpy(p, &bits, 4);
}

fs::path with_suffix(const fs::path& stem, const std::string& suffix) { return fs::path(stem.string() + suffix); }

}  // namespace

PointCloud load_pointcloud(const fs::path& path, const FeatureSchema& schema) {
  const auto bytes = read_bytes(path);
  const std::size_t record = 4 * schema.size();
  if (record == 0 || bytes.size() % record != 0) {
    throw FormatError(path.string() + ": " + std::to_string(bytes.size()) + " bytes is not a whole number of " +
                      std::to_string(schema.size()) + "-field float32 records");
  }
  std::vector<double> values(bytes.size() / 4);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = load_f32_le(bytes.data() + 4 * k);
  return PointCloud(schema, std::move(values));
}

FeatureSchema load_schema(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json j;
  try {
    in >> j;
    std::vector<FieldSpec> fields;
    for (const auto& f : j.at("fields")) {
      fields.push_back({f.at("name").get<std::string>(), f.value("unit", std::string{})});
    }
    return FeatureSchema(std::move(fields));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string schema_to_json(const FeatureSchema& schema) {
  json fields = json::array();
  for (const auto& f : schema.fields()) fields.push_back({{"name", f.name}, {"unit", f.unit}});
  return json{{"fields", fields}}.dump(2) + "\n";
}

std::vector<char> encode_f32(std::span<const double> values) {
  std::vector<char> out(values.size() * 4);
  for (std::size_t k = 0; k < values.size(); ++k) store_f32_le(out.data() + 4 * k, static_cast<float>(values[k]));
  return out;
}

void save_pointcloud(const fs::path& stem, const PointCloud& pc) {
  write_file_atomic(with_suffix(stem, ".bin"), encode_f32(pc.values()));
  write_file_atomic(with_suffix(stem, ".schema.json"), schema_to_json(pc.schema()));
}

PointCloud load_scan(const fs::path& stem, const std::optional<FeatureSchema>& fallback) {
  const auto sidecar = with_suffix(stem, ".schema.json");
  FeatureSchema schema;
  if (fs::exists(sidecar)) {
    schema = load_schema(sidecar);
  } else if (fallback) {
    schema = *fallback;
  } else {
    throw FormatError("missing schema sidecar " + sidecar.string());
  }
  return load_pointcloud(with_suffix(stem, ".bin"), schema);
}

std::vector<LabeledBox> parse_boxes(std::istream& in, std::span<const std::string> class_names, bool with_score) {
  std::vector<LabeledBox> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LabeledBox b;
      b.frame = j.at("frame").get<std::string>();
      b.class_name = j.at("class").get<std::string>();
      b.box.cx = j.at("x").get<double>();
      b.box.cy = j.at("y").get<double>();
      b.box.w = j.at("w").get<double>();
      b.box.l = j.at("l").get<double>();
      b.box.h = j.at("h").get<double>();
      b.box.theta = normalize_angle(j.at("theta").get<double>());
      const double z = j.at("z").get<double>();
      const std::string ref = j.value("z_ref", std::string("center"));
      if (ref == "bottom") {
        b.z_ref = ZRef::bottom;
        b.box.cz = z + 0.5 * b.box.h;
      } else if (ref == "center") {
        b.z_ref = ZRef::center;
        b.box.cz = z;
      } else {
        throw FormatError("z_ref must be \"bottom\" or \"center\", got \"" + ref + "\"");
      }
      if (with_score) {
        b.score = j.value("score", 1.0);
        if (!std::isfinite(b.score)) throw FormatError("score must be finite");
      }
      b.box.validate();
      b.box.class_id = -1;
      for (std::size_t c = 0; c < class_names.size(); ++c) {
        if (class_names[c] == b.class_name) b.box.class_id = static_cast<int>(c);
      }
      out.push_back(std::move(b));
    } catch (const std::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<LabeledBox> load_boxes(const fs::path& path, std::span<const std::string> class_names, bool with_score) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return parse_boxes(in, class_names, with_score);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string box_to_json_line(const LabeledBox& b, bool with_score) {
  json j{{"frame", b.frame}, {"class", b.class_name}, {"x", b.box.cx},     {"y", b.box.cy},
         {"z", b.box.cz},    {"w", b.box.w},          {"l", b.box.l},      {"h", b.box.h},
         {"theta", b.box.theta}, {"z_ref", "center"}};
  if (with_score) j["score"] = b.score;
  return j.dump();
}

void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace radar_mrf
