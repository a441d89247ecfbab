#include "radar_mrf/synth.hpp"

#include <algorithm>
#include <cmath>

#include "radar_mrf/random.hpp"

namespace radar_mrf {

namespace {

// Keeps sampled boxes and clamped points strictly inside half-open bounds.
constexpr double kMargin = 1e-3;

double draw(Rng& rng, const Range<double>& r) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

std::int64_t draw(Rng& rng, const Range<std::int64_t>& r) { return rng.between(r.lo, r.hi); }

bool is_doppler(const std::string& name) { return name == "v_r" || name == "v_rc" || name == "doppler"; }

void fill_extra_fields(Rng& rng, const FeatureSchema& schema, std::vector<double>& row, double doppler, bool object) {
  for (std::size_t c = 3; c < schema.size(); ++c) {
    const std::string& name = schema[c].name;
    if (is_doppler(name)) {
      row[c] = doppler;
    } else if (name == "rcs") {
      row[c] = object ? rng.normal(5.0, 3.0) : rng.normal(-5.0, 5.0);
    } else if (name == "snr") {
      row[c] = object ? rng.uniform(10.0, 25.0) : rng.uniform(3.0, 12.0);
    } else {
      row[c] = 0.0;
    }
  }
}

}  // namespace

void SceneSpec::validate() const {
  roi.validate();
  if (clutter.lo < 0 || clutter.hi < clutter.lo) throw ArgumentError("invalid clutter count range");
  for (const auto& o : objects) {
    if (o.points.lo < 0 || o.points.hi < o.points.lo) throw ArgumentError("invalid object point range");
    if (!(o.cluster_std > 0) || !(o.doppler_std >= 0)) throw ArgumentError("object std must be positive");
    if (!(o.w.lo > 0 && o.l.lo > 0 && o.h.lo > 0) || o.w.hi < o.w.lo || o.l.hi < o.l.lo || o.h.hi < o.h.lo) {
      throw ArgumentError("invalid object dimension range");
    }
    if (o.h.hi + 2 * kMargin >= roi.z_max - roi.z_min) throw ArgumentError("object taller than the ROI");
  }
}

Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;
  scene.cloud = PointCloud(spec.schema);
  const std::size_t channels = spec.schema.size();
  std::vector<double> row(channels, 0.0);

  for (std::size_t oi = 0; oi < spec.objects.size(); ++oi) {
    const ObjectSpec& o = spec.objects[oi];
    Box3D b;
    b.class_id = o.class_id;
    b.w = draw(rng, o.w);
    b.l = draw(rng, o.l);
    b.h = draw(rng, o.h);
    b.theta = normalize_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    const double half_diag = 0.5 * std::hypot(b.w, b.l) + kMargin;
    const double x_lo = spec.roi.x_min + half_diag;
    const double x_hi = std::max(x_lo, spec.roi.x_max - half_diag);
    const double y_lo = spec.roi.y_min + half_diag;
    const double y_hi = std::max(y_lo, spec.roi.y_max - half_diag);
    b.cx = rng.uniform(x_lo, x_hi);
    b.cy = rng.uniform(y_lo, y_hi);
    b.cz = rng.uniform(spec.roi.z_min + 0.5 * b.h + kMargin, spec.roi.z_max - 0.5 * b.h - kMargin);
    scene.boxes.push_back(b);

    const std::int64_t count = draw(rng, o.points);
    const double c = std::cos(b.theta);
    const double s = std::sin(b.theta);
    for (std::int64_t k = 0; k < count; ++k) {
      double x = b.cx, y = b.cy, z = b.cz;
      bool accepted = false;
      for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
        x = b.cx + rng.normal(0.0, o.cluster_std);
        y = b.cy + rng.normal(0.0, o.cluster_std);
        z = b.cz + rng.normal(0.0, o.cluster_std);
        accepted = b.contains(x, y, z) && spec.roi.contains(x, y, z);
      }
      if (!accepted) {
        // clamp in the box frame
        const double dx = x - b.cx;
        const double dy = y - b.cy;
        const double along = std::clamp(c * dx + s * dy, -0.5 * b.l + kMargin, 0.5 * b.l - kMargin);
        const double across = std::clamp(-s * dx + c * dy, -0.5 * b.w + kMargin, 0.5 * b.w - kMargin);
        x = b.cx + c * along - s * across;
        y = b.cy + s * along + c * across;
        z = std::clamp(z, b.bottom() + kMargin, b.top() - kMargin);
      }
      row[0] = x;
      row[1] = y;
      row[2] = z;
      fill_extra_fields(rng, spec.schema, row, rng.normal(o.doppler_mean, o.doppler_std), true);
      scene.cloud.push_back(row);
      scene.provenance.push_back(static_cast<int>(oi));
    }
  }

  const std::int64_t clutter = draw(rng, spec.clutter);
  for (std::int64_t k = 0; k < clutter; ++k) {
    row[0] = rng.uniform(spec.roi.x_min, spec.roi.x_max);
    row[1] = rng.uniform(spec.roi.y_min, spec.roi.y_max);
    row[2] = rng.uniform(spec.roi.z_min, spec.roi.z_max);
    fill_extra_fields(rng, spec.schema, row, rng.uniform(-spec.clutter_doppler_abs, spec.clutter_doppler_abs), false);
    scene.cloud.push_back(row);
    scene.provenance.push_back(-1);
  }
  return scene;
}

SceneSpec default_scene_spec(const Roi3D& roi, const FeatureSchema& schema, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  SceneSpec spec;
  spec.roi = roi;
  spec.schema = schema;
  spec.seed = seed;
  spec.clutter = {50, 150};

  ObjectSpec car;
  car.class_id = 0;
  car.points = {20, 60};
  car.cluster_std = 0.6;
  car.doppler_mean = rng.uniform(-8.0, 8.0);

  ObjectSpec ped;
  ped.class_id = 1;
  ped.w = {0.5, 0.7};
  ped.l = {0.6, 0.9};
  ped.h = {1.5, 1.8};
  ped.points = {20, 30};
  ped.cluster_std = 0.2;
  ped.doppler_mean = rng.uniform(-2.0, 2.0);

  ObjectSpec cyc;
  cyc.class_id = 2;
  cyc.w = {0.5, 0.7};
  cyc.l = {1.6, 1.9};
  cyc.h = {1.5, 1.8};
  cyc.points = {20, 40};
  cyc.cluster_std = 0.3;
  cyc.doppler_mean = rng.uniform(-5.0, 5.0);

  spec.objects = {car, ped, cyc};
  return spec;
}

Scene synth_scan(const Roi3D& roi, const FeatureSchema& schema, std::size_t n_points, std::uint64_t seed) {
  const SceneSpec base = default_scene_spec(roi, schema, seed);
  SceneSpec spec = base;
  spec.objects.clear();
  constexpr std::size_t kObjects = 12;
  const auto per_object = static_cast<std::int64_t>(n_points / (2 * kObjects));
  for (std::size_t k = 0; k < kObjects; ++k) {
    ObjectSpec o = base.objects[k % base.objects.size()];
    o.points = {per_object, per_object};
    spec.objects.push_back(o);
  }
  const auto clutter = static_cast<std::int64_t>(n_points) - per_object * static_cast<std::int64_t>(kObjects);
  spec.clutter = {clutter, clutter};
  return gen_scene(spec);
}

}  // namespace radar_mrf
