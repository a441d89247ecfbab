#include <doctest.h>

#include "radar_mrf/geometry.hpp"
#include "test_support.hpp"

using namespace radar_mrf;

namespace {

Box3D box(double cx, double cy, double cz, double w, double l, double h, double theta = 0) {
  Box3D b;
  b.cx = cx;
  b.cy = cy;
  b.cz = cz;
  b.w = w;
  b.l = l;
  b.h = h;
  b.theta = theta;
  return b;
}

Box3D rotate_about(const Box3D& b, double px, double py, double phi) {
  Box3D r = b;
  const double dx = b.cx - px, dy = b.cy - py;
  r.cx = px + dx * std::cos(phi) - dy * std::sin(phi);
  r.cy = py + dx * std::sin(phi) + dy * std::cos(phi);
  r.theta = normalize_angle(b.theta + phi);
  return r;
}

}  // namespace

TEST_CASE("iou_bev hand cases") {
  const Box3D a = box(0, 0, 0, 2, 2, 1);
  CHECK(iou_bev(a, a) == 1.0);
  CHECK(iou_bev(box(0, 0, 0, 1, 1, 1), box(100, 0, 0, 1, 1, 1)) == 0.0);
  CHECK(std::abs(iou_bev(a, box(1, 0, 0, 2, 2, 1)) - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("iou_3d hand cases") {
  const Box3D a = box(0, 0, 0, 2, 3, 2);
  CHECK(iou_3d(a, a) == 1.0);
  CHECK(std::abs(iou_3d(a, box(0, 0, 1, 2, 3, 2)) - 1.0 / 3.0) < 1e-12);
  CHECK(iou_3d(a, box(0, 0, 2, 2, 3, 2)) == 0.0);
  CHECK(iou_3d(a, box(0, 0, 5, 2, 3, 2)) == 0.0);
}

TEST_CASE("rotated square inside itself and at 45 degrees") {
  const Box3D a = box(0, 0, 0, 2, 2, 1);
  // Square rotated by 45 degrees: intersection is a regular octagon.
  const double oct = 8.0 * (std::sqrt(2.0) - 1.0);
  const double expect = oct / (8.0 - oct);
  CHECK(std::abs(iou_bev(a, box(0, 0, 0, 2, 2, 1, std::numbers::pi / 4)) - expect) < 1e-12);
  // Quarter turn maps a square onto itself.
  CHECK(std::abs(iou_bev(a, box(0, 0, 0, 2, 2, 1, std::numbers::pi / 2)) - 1.0) < 1e-12);
}

TEST_CASE("touching boxes have zero IoU") {
  CHECK(iou_bev(box(0, 0, 0, 1, 1, 1), box(1, 0, 0, 1, 1, 1)) == doctest::Approx(0.0));
}

TEST_CASE("IoU is symmetric, bounded and exactly 1 on itself") {
  Rng rng(11);
  for (int k = 0; k < 500; ++k) {
    const Box3D a = testing::random_box(rng, 2.0);
    const Box3D b = testing::random_box(rng, 2.0);
    const double ab = iou_bev(a, b), ba = iou_bev(b, a);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(std::abs(iou_3d(a, b) - iou_3d(b, a)) < 1e-12);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(iou_3d(a, b) <= ab + 1e-12);
    CHECK(iou_bev(a, a) == 1.0);
    CHECK(iou_3d(a, a) == 1.0);
  }
}

TEST_CASE("iou_bev is invariant under a common rigid rotation") {
  Rng rng(12);
  for (int k = 0; k < 300; ++k) {
    const Box3D a = testing::random_box(rng, 2.0);
    const Box3D b = testing::random_box(rng, 2.0);
    const double phi = rng.uniform(-3.0, 3.0);
    const double px = rng.uniform(-5, 5), py = rng.uniform(-5, 5);
    const double before = iou_bev(a, b);
    const double after = iou_bev(rotate_about(a, px, py, phi), rotate_about(b, px, py, phi));
    CHECK(std::abs(before - after) < 1e-9);
  }
}

TEST_CASE("iou_bev agrees with a Monte-Carlo hit rate") {
  Rng rng(13);
  for (int k = 0; k < 10; ++k) {
    const Box3D a = testing::random_box(rng, 1.5);
    const Box3D b = testing::random_box(rng, 1.5);
    const double mc = testing::monte_carlo_iou_bev(a, b, 200000, 100 + k);
    CHECK(std::abs(iou_bev(a, b) - mc) < 6e-3);
  }
}

TEST_CASE("bev_corners are counter-clockwise with the box area") {
  Rng rng(14);
  for (int k = 0; k < 100; ++k) {
    const Box3D b = testing::random_box(rng);
    const auto c = bev_corners(b);
    CHECK(polygon_area(c) == doctest::Approx(b.w * b.l).epsilon(1e-12));
  }
}

TEST_CASE("parallel IoU table equals the serial reference") {
  Rng rng(15);
  std::vector<Box3D> a, b;
  for (int k = 0; k < 40; ++k) a.push_back(testing::random_box(rng, 3.0));
  for (int k = 0; k < 25; ++k) b.push_back(testing::random_box(rng, 3.0));
  for (IouKind kind : {IouKind::bev, IouKind::box3d}) {
    const Matrix par = iou_table(a, b, kind);
    const Matrix ser = iou_table_serial(a, b, kind);
    CHECK(par == ser);
    CHECK(par.rows == 40);
    CHECK(par.cols == 25);
  }
  CHECK(iou_table({}, b, IouKind::bev).rows == 0);
}
