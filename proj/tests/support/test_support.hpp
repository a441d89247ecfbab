#pragma once

// Test-only oracles and generators. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "radar_mrf/core.hpp"
#include "radar_mrf/random.hpp"

namespace radar_mrf::testing {

// Point-in-rotated-rectangle test written from scratch.
inline bool in_bev_rect(const Box3D& b, double x, double y) {
  const double dx = x - b.cx;
  const double dy = y - b.cy;
  const double u = dx * std::cos(b.theta) + dy * std::sin(b.theta);
  const double v = -dx * std::sin(b.theta) + dy * std::cos(b.theta);
  return std::abs(u) <= 0.5 * b.l && std::abs(v) <= 0.5 * b.w;
}

// Hit-rate estimate of BEV IoU from uniform samples over the joint bounding
// rectangle of both boxes.
inline double monte_carlo_iou_bev(const Box3D& a, const Box3D& b, std::size_t samples, std::uint64_t seed) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const Box3D* box : {&a, &b}) {
    const double ex = 0.5 * (std::abs(box->l * std::cos(box->theta)) + std::abs(box->w * std::sin(box->theta)));
    const double ey = 0.5 * (std::abs(box->l * std::sin(box->theta)) + std::abs(box->w * std::cos(box->theta)));
    x0 = std::min(x0, box->cx - ex);
    x1 = std::max(x1, box->cx + ex);
    y0 = std::min(y0, box->cy - ey);
    y1 = std::max(y1, box->cy + ey);
  }
  const double ca = std::cos(a.theta), sa = std::sin(a.theta);
  const double cb = std::cos(b.theta), sb = std::sin(b.theta);
  const auto inside = [](const Box3D& r, double c, double s, double x, double y) {
    const double dx = x - r.cx, dy = y - r.cy;
    return std::abs(dx * c + dy * s) <= 0.5 * r.l && std::abs(-dx * s + dy * c) <= 0.5 * r.w;
  };
  Rng rng(seed);
  std::size_t inter = 0, uni = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double x = rng.uniform(x0, x1);
    const double y = rng.uniform(y0, y1);
    const bool ia = inside(a, ca, sa, x, y);
    const bool ib = inside(b, cb, sb, x, y);
    inter += (ia && ib) ? 1 : 0;
    uni += (ia || ib) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline FeatureSchema xyzv_schema() {
  return FeatureSchema({{"x", "m"}, {"y", "m"}, {"z", "m"}, {"v_r", "m/s"}});
}

// Uniform cloud with a Doppler column, inside [0, extent) x [-extent/2,
// extent/2) x [-2, 2).
inline PointCloud random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v;
  v.reserve(n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(rng.uniform(0.0, extent));
    v.push_back(rng.uniform(-0.5 * extent, 0.5 * extent));
    v.push_back(rng.uniform(-2.0, 2.0));
    v.push_back(rng.normal(0.0, 2.0));
  }
  return PointCloud(xyzv_schema(), std::move(v));
}

inline Box3D random_box(Rng& rng, double spread = 4.0) {
  Box3D b;
  b.cx = rng.uniform(-spread, spread);
  b.cy = rng.uniform(-spread, spread);
  b.cz = rng.uniform(-1.0, 1.0);
  b.w = rng.uniform(0.5, 4.0);
  b.l = rng.uniform(0.5, 6.0);
  b.h = rng.uniform(0.5, 3.0);
  b.theta = normalize_angle(rng.uniform(-4.0, 4.0));
  return b;
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("radar_mrf_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace radar_mrf::testing
