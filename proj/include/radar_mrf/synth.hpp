#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radar_mrf/core.hpp"

namespace radar_mrf {

template <typename T>
struct Range {
  T lo{};
  T hi{};
};

/// One object to place in a synthetic scene.
struct ObjectSpec {
  int class_id = 0;
  Range<double> w{1.5, 2.0};
  Range<double> l{3.5, 4.5};
  Range<double> h{1.4, 1.7};
  Range<std::int64_t> points{20, 60};
  double cluster_std = 0.4;  // meters
  double doppler_mean = 0.0;
  double doppler_std = 0.3;
};

struct SceneSpec {
  Roi3D roi;
  FeatureSchema schema = FeatureSchema::vod();
  std::vector<ObjectSpec> objects;
  Range<std::int64_t> clutter{0, 0};
  double clutter_doppler_abs = 10.0;  // clutter Doppler ~ U(-a, a)
  std::uint64_t seed = 0;

  void validate() const;
};

struct Scene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
  /// Per point: generating object index, or -1 for clutter.
  std::vector<int> provenance;
};

/// Draws every object's box uniformly inside the ROI, its points from a
/// Gaussian around the box center truncated to the box, then uniform clutter.
/// One generator, fixed draw order.
Scene gen_scene(const SceneSpec& spec);

/// A car, a pedestrian and a cyclist plus 50-150 clutter points; `seed`
/// selects everything else.
SceneSpec default_scene_spec(const Roi3D& roi, const FeatureSchema& schema, std::uint64_t seed);

/// Exactly `n_points` points: twelve car/pedestrian/cyclist clusters holding
/// about half of them, uniform clutter for the rest. Used for timing runs.
Scene synth_scan(const Roi3D& roi, const FeatureSchema& schema, std::size_t n_points, std::uint64_t seed);

}  // namespace radar_mrf
