#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "radar_mrf/core.hpp"
#include "radar_mrf/eval.hpp"
#include "radar_mrf/kde.hpp"
#include "radar_mrf/pillars.hpp"
#include "radar_mrf/targets.hpp"
#include "radar_mrf/voxels.hpp"

namespace radar_mrf {

/// Channel counts of the fused BEV maps. Carried as export metadata only.
struct ChannelMeta {
  std::size_t c1 = 64;   // pillar branch
  std::size_t c2_1 = 1;  // density branch, first bandwidth
  std::size_t c2_2 = 1;  // density branch, second bandwidth
  std::size_t cm = 384;  // multi-scale neck output

  std::size_t cf() const { return c1 + c2_1 + c2_2; }
};

struct PipelineConfig {
  std::string profile = "custom";
  FeatureSchema schema = FeatureSchema::vod();
  /// Doppler field used as an extra kernel dimension; empty disables it.
  std::string doppler_field;
  Roi3D roi;
  std::vector<double> bandwidths;
  double kde_epsilon = 1e-5;
  bool kde_exclude_self = true;
  PillarConfig pillar;
  VoxelConfig voxel;
  std::vector<AnchorSpec> anchors;
  EvalConfig eval;
  ChannelMeta channels;
  std::uint64_t seed = 0;

  const std::vector<std::string>& class_names() const { return eval.class_names; }
  std::vector<KdeConfig> kde_configs() const;
  /// Copies the ROI and seed into the pillar and voxel configs.
  void sync();
  void validate() const;
};

/// "vod", "tj4d" or "custom" (VoD values, free to override). Throws
/// ConfigError for any other name.
PipelineConfig make_profile(std::string_view name);

/// Applies a JSON config document on top of `cfg`. A "profile" key naming a
/// different profile first resets `cfg` to it. Unknown keys and an invalid
/// result are a ConfigError.
void apply_config_json(PipelineConfig& cfg, const std::string& json_text);

std::string config_to_json(const PipelineConfig& cfg);

}  // namespace radar_mrf
