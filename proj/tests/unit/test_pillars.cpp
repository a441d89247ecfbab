#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "radar_mrf/pillars.hpp"
#include "test_support.hpp"

using namespace radar_mrf;

namespace {

const Roi3D kVodRoi{0.0, 51.2, -25.6, 25.6, -3.0, 2.0};

PillarConfig vod_cfg(std::uint64_t seed = 0) {
  PillarConfig c;
  c.roi = kVodRoi;
  c.seed = seed;
  return c;
}

PointCloud xyzv(const std::vector<double>& v) { return PointCloud(testing::xyzv_schema(), v); }

PointCloud roi_cloud(std::size_t n, std::uint64_t seed, double x_hi = 8.0, double y_span = 4.0) {
  Rng rng(seed);
  std::vector<double> v;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(rng.uniform(0.0, x_hi));
    v.push_back(rng.uniform(-y_span, y_span));
    v.push_back(rng.uniform(-3.0, 2.0));
    v.push_back(rng.normal());
  }
  return xyzv(v);
}

// Feature rows for a 4-field schema: raw 0..3, x_c 4, y_c 5, z_c 6, x_p 7, y_p 8, z_p 9.
constexpr std::size_t kXc = 4, kXp = 7;

}  // namespace

TEST_CASE("canvas size follows the ROI") {
  CHECK(vod_cfg().height() == 320);
  CHECK(vod_cfg().width() == 320);
  PillarConfig tj;
  tj.roi = Roi3D{0, 69.12, -39.68, 39.68, -4, 2};
  CHECK(tj.width() == 432);
  CHECK(tj.height() == 496);
  PillarConfig odd;
  odd.roi = Roi3D{0, 1.0, 0, 1.0, 0, 1};
  CHECK_THROWS_AS(odd.width(), ArgumentError);
}

TEST_CASE("point at a pillar center has all-zero offsets") {
  // Pillar (row 160, col 0) spans x in [0, 0.16), y in [0, 0.16); ROI z midpoint -0.5.
  const auto t = pillarize(xyzv({0.08, 0.08, -0.5, 1.0}), nullptr, vod_cfg());
  REQUIRE(t.pillars == 1);
  CHECK(t.features == 10);
  CHECK(t.coords[0].row == 160);
  CHECK(t.coords[0].col == 0);
  for (std::size_t d = kXc; d < 10; ++d) CHECK(std::abs(t.at(d, 0, 0)) < 1e-12);
  CHECK(t.at(3, 0, 0) == 1.0);
}

TEST_CASE("point on a pillar corner is offset by half a cell") {
  const auto t = pillarize(xyzv({0.0, 0.0, -0.5, 0.0}), nullptr, vod_cfg());
  REQUIRE(t.pillars == 1);
  CHECK(t.at(kXp, 0, 0) == doctest::Approx(-0.08).epsilon(1e-12));
  CHECK(t.at(kXp + 1, 0, 0) == doctest::Approx(-0.08).epsilon(1e-12));
}

TEST_CASE("a pillar over capacity keeps N distinct points, reproducibly") {
  std::vector<double> v;
  for (int i = 0; i < 40; ++i) v.insert(v.end(), {0.01 + 0.003 * i, 0.05, 0.0, static_cast<double>(i)});
  const auto pc = xyzv(v);
  const auto a = pillarize(pc, nullptr, vod_cfg(5));
  const auto b = pillarize(pc, nullptr, vod_cfg(5));
  REQUIRE(a.pillars == 1);
  CHECK(a.counts[0] == 32);
  std::set<std::int64_t> src(a.sources.begin(), a.sources.end());
  CHECK(src.size() == 32);
  CHECK(*src.begin() >= 0);
  CHECK(a.values == b.values);
  CHECK(a.sources == b.sources);
  const auto c = pillarize(pc, nullptr, vod_cfg(6));
  CHECK(c.sources != a.sources);
}

TEST_CASE("padding slots are exactly zero and marked") {
  const auto t = pillarize(roi_cloud(300, 3), nullptr, vod_cfg());
  for (std::size_t p = 0; p < t.pillars; ++p) {
    for (std::size_t n = t.counts[p]; n < t.max_points; ++n) {
      CHECK(t.sources[p * t.max_points + n] == -1);
      for (std::size_t d = 0; d < t.features; ++d) CHECK(t.at(d, p, n) == 0.0);
    }
  }
}

TEST_CASE("pillar tensor invariants on random clouds") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    // A narrow strip so several pillars overflow.
    const auto pc = roi_cloud(2000, 100 + seed, 0.64, 0.16);
    auto cfg = vod_cfg(seed);
    cfg.max_points = 8;
    const auto t = pillarize(pc, nullptr, cfg);

    std::map<std::pair<int, int>, std::size_t> occupancy;
    for (std::size_t i = 0; i < pc.size(); ++i)
      ++occupancy[{static_cast<int>(std::floor((pc.y(i) + 25.6) / 0.16)), static_cast<int>(std::floor(pc.x(i) / 0.16))}];
    CHECK(t.pillars == occupancy.size());

    std::size_t expected_total = 0;
    for (auto& [k, c] : occupancy) expected_total += std::min<std::size_t>(c, 8);
    CHECK(std::accumulate(t.counts.begin(), t.counts.end(), std::size_t{0}) == expected_total);
    CHECK(std::is_sorted(t.coords.begin(), t.coords.end()));
    CHECK(std::adjacent_find(t.coords.begin(), t.coords.end()) == t.coords.end());

    for (std::size_t p = 0; p < t.pillars; ++p) {
      CHECK(t.counts[p] >= 1);
      CHECK(t.counts[p] <= 8);
      double sx = 0, sy = 0, sz = 0;
      for (std::size_t n = 0; n < t.counts[p]; ++n) {
        sx += t.at(kXc, p, n);
        sy += t.at(kXc + 1, p, n);
        sz += t.at(kXc + 2, p, n);
        CHECK(t.at(kXp, p, n) >= -0.08 - 1e-12);
        CHECK(t.at(kXp, p, n) < 0.08 + 1e-12);
        CHECK(t.at(kXp + 1, p, n) >= -0.08 - 1e-12);
        CHECK(t.at(kXp + 1, p, n) < 0.08 + 1e-12);
      }
      CHECK(std::abs(sx) < 1e-9);
      CHECK(std::abs(sy) < 1e-9);
      CHECK(std::abs(sz) < 1e-9);
    }
  }
}

TEST_CASE("parallel pillarize is identical to the serial reference") {
  const auto pc = roi_cloud(3000, 7, 2.0, 1.0);
  auto cfg = vod_cfg(99);
  cfg.max_points = 4;
  const auto a = pillarize(pc, nullptr, cfg);
  const auto b = pillarize_serial(pc, nullptr, cfg);
  CHECK(a.values == b.values);
  CHECK(a.coords == b.coords);
  CHECK(a.counts == b.counts);
  CHECK(a.sources == b.sources);
}

TEST_CASE("permuting the input keeps P, coords and counts") {
  const auto pc = roi_cloud(500, 8, 1.0, 0.5);
  std::vector<std::size_t> perm(pc.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  PointCloud rev(pc.schema());
  for (auto i : perm) rev.push_back(pc.row(i));
  const auto a = pillarize(pc, nullptr, vod_cfg());
  const auto b = pillarize(rev, nullptr, vod_cfg());
  CHECK(a.pillars == b.pillars);
  CHECK(a.coords == b.coords);
  CHECK(a.counts == b.counts);
}

TEST_CASE("density columns can be appended before the offsets") {
  const auto pc = roi_cloud(50, 9);
  DensityField f;
  f.raw = Matrix(pc.size(), 2);
  f.normalized = Matrix(pc.size(), 2);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    f.normalized(i, 0) = static_cast<double>(i);
    f.normalized(i, 1) = -static_cast<double>(i);
  }
  f.radii = {1.5, 2.0};
  auto cfg = vod_cfg();
  cfg.append_density = true;
  const auto t = pillarize(pc, &f, cfg);
  CHECK(t.features == 12);
  for (std::size_t p = 0; p < t.pillars; ++p)
    for (std::size_t n = 0; n < t.counts[p]; ++n) {
      const auto src = static_cast<std::size_t>(t.sources[p * t.max_points + n]);
      CHECK(t.at(4, p, n) == static_cast<double>(src));
      CHECK(t.at(5, p, n) == -static_cast<double>(src));
    }
}

TEST_CASE("pillarize rejects unfiltered input") {
  CHECK_THROWS_AS(pillarize(xyzv({60, 0, 0, 0}), nullptr, vod_cfg()), ArgumentError);
  CHECK(pillarize(xyzv({}), nullptr, vod_cfg()).pillars == 0);
}

TEST_CASE("scatter_to_canvas") {
  SUBCASE("single value") {
    Matrix f(1, 1);
    f(0, 0) = 7;
    const std::vector<PillarCoord> c{{2, 3}};
    const auto img = scatter_to_canvas(f, c, 4, 4);
    double sum = 0;
    for (double v : img.data) sum += v;
    CHECK(sum == 7.0);
    CHECK(img.at(0, 2, 3) == 7.0);
  }
  SUBCASE("no pillars") {
    const auto img = scatter_to_canvas(Matrix(3, 0), {}, 4, 5);
    CHECK(img.data.size() == 60);
    CHECK(std::all_of(img.data.begin(), img.data.end(), [](double v) { return v == 0.0; }));
  }
  SUBCASE("mass is conserved") {
    const auto t = pillarize(roi_cloud(400, 10), nullptr, vod_cfg());
    const Matrix m = pillar_max_features(t);
    const auto img = scatter_to_canvas(m, t.coords, 320, 320, 0.16, 0.16);
    CHECK(std::accumulate(img.data.begin(), img.data.end(), 0.0) ==
          doctest::Approx(std::accumulate(m.data.begin(), m.data.end(), 0.0)).epsilon(1e-12));
  }
  SUBCASE("errors") {
    Matrix f(1, 2);
    const std::vector<PillarCoord> dup{{0, 0}, {0, 0}};
    CHECK_THROWS_AS(scatter_to_canvas(f, dup, 2, 2), ArgumentError);
    const std::vector<PillarCoord> out{{0, 0}, {2, 0}};
    CHECK_THROWS_AS(scatter_to_canvas(f, out, 2, 2), ArgumentError);
  }
}

TEST_CASE("concat_channels stacks in argument order") {
  auto make = [](std::size_t c, std::size_t h, std::size_t w, double fill) {
    PseudoImage p{c, h, w, 0.16, 0.16, std::vector<double>(c * h * w, fill)};
    return p;
  };
  const std::vector<PseudoImage> maps{make(64, 320, 320, 1), make(1, 320, 320, 2), make(1, 320, 320, 3)};
  const auto out = concat_channels(maps);
  CHECK(out.channels == 66);
  CHECK(out.height == 320);
  CHECK(out.at(63, 5, 5) == 1.0);
  CHECK(out.at(64, 5, 5) == 2.0);
  CHECK(out.at(65, 5, 5) == 3.0);

  const std::vector<PseudoImage> one{make(2, 3, 4, 5)};
  CHECK(concat_channels(one).data == one[0].data);

  const std::vector<PseudoImage> bad{make(1, 320, 320, 0), make(1, 319, 320, 0)};
  CHECK_THROWS_AS(concat_channels(bad), ArgumentError);
}
