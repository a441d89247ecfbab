#pragma once

#include <array>
#include <span>
#include <vector>

#include "radar_mrf/core.hpp"

namespace radar_mrf {

struct Vec2 {
  double x = 0;
  double y = 0;
};

/// Counter-clockwise BEV corners of a box.
std::array<Vec2, 4> bev_corners(const Box3D& b);

/// Shoelace area of a simple polygon; positive for counter-clockwise order.
double polygon_area(std::span<const Vec2> poly);

/// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Area of the intersection of the two rotated BEV rectangles.
double bev_intersection_area(const Box3D& a, const Box3D& b);

/// BEV intersection-over-union in [0, 1].
double iou_bev(const Box3D& a, const Box3D& b);
/// 3D intersection-over-union in [0, 1].
double iou_3d(const Box3D& a, const Box3D& b);

enum class IouKind { bev, box3d };

double iou(const Box3D& a, const Box3D& b, IouKind kind);

/// |a| x |b| IoU table, row-major. OpenMP over rows.
Matrix iou_table(std::span<const Box3D> a, std::span<const Box3D> b, IouKind kind);
/// Single-threaded reference for iou_table.
Matrix iou_table_serial(std::span<const Box3D> a, std::span<const Box3D> b, IouKind kind);

}  // namespace radar_mrf
