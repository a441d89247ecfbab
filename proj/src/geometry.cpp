#include "radar_mrf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace radar_mrf {

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Intersection of segment p-q with the infinite line through a-b.
Vec2 line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
  const double cp = cross(a, b, p);
  const double cq = cross(a, b, q);
  const double t = cp / (cp - cq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

// Cheap reject: BEV circumcircles do not touch.
bool circles_disjoint(const Box3D& a, const Box3D& b) {
  const double ra = 0.5 * std::hypot(a.w, a.l);
  const double rb = 0.5 * std::hypot(b.w, b.l);
  const double dx = a.cx - b.cx;
  const double dy = a.cy - b.cy;
  const double r = ra + rb;
  return dx * dx + dy * dy > r * r;
}

}  // namespace

std::array<Vec2, 4> bev_corners(const Box3D& b) {
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  // local (along, across) offsets in CCW order
  const std::array<Vec2, 4> local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {b.cx + c * local[i].x - s * local[i].y, b.cy + s * local[i].x + c * local[i].y};
  }
  return out;
}

double polygon_area(std::span<const Vec2> poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  std::vector<Vec2> input;
  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    input.swap(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(line_intersection(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(line_intersection(prev, cur, a, b));
      }
    }
  }
  return output;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  if (circles_disjoint(a, b)) return 0.0;
  const auto pa = bev_corners(a);
  const auto pb = bev_corners(b);
  const auto inter = clip_convex(pa, pb);
  return std::max(0.0, polygon_area(inter));
}

namespace {

// Coincident footprints skip clipping so self-IoU is exactly 1.
bool same_footprint(const Box3D& a, const Box3D& b) {
  return a.cx == b.cx && a.cy == b.cy && a.w == b.w && a.l == b.l && a.theta == b.theta;
}

}  // namespace

double iou_bev(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b)) return 1.0;
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.w * a.l + b.w * b.l - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b) && a.cz == b.cz && a.h == b.h) return 1.0;
  const double dz = std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom());
  if (dz <= 0.0) return 0.0;
  const double area = bev_intersection_area(a, b);
  if (area <= 0.0) return 0.0;
  const double inter = area * dz;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::bev ? iou_bev(a, b) : iou_3d(a, b);
}

Matrix iou_table(std::span<const Box3D> a, std::span<const Box3D> b, IouKind kind) {
  Matrix out(a.size(), b.size());
  const auto n = static_cast<std::int64_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out(static_cast<std::size_t>(i), j) = iou(a[static_cast<std::size_t>(i)], b[j], kind);
    }
  }
  return out;
}

Matrix iou_table_serial(std::span<const Box3D> a, std::span<const Box3D> b, IouKind kind) {
  Matrix out(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out(i, j) = iou(a[i], b[j], kind);
  }
  return out;
}

}  // namespace radar_mrf
