#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cfgconf {

struct Point {
  double x = 0;
  double y = 0;

  bool operator==(const Point&) const = default;
};

/// Axis-aligned rectangle; y grows downward.
struct Rect {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + w / 2; }
  double cy() const { return y + h / 2; }
  Rect inflated(double pad) const { return {x - pad, y - pad, w + 2 * pad, h + 2 * pad}; }
  bool overlaps(const Rect& o) const {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }
  bool contains(const Rect& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }
  bool operator==(const Rect&) const = default;
};

inline Rect bounding_box(const Rect& a, const Rect& b) {
  const double x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  return {x0, y0, std::max(a.right(), b.right()) - x0, std::max(a.bottom(), b.bottom()) - y0};
}

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Convex hull in counter-clockwise order (in a y-up frame), no collinear points.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(const std::vector<Point>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

/// True when `p` lies strictly inside the convex polygon (boundary excluded).
inline bool strictly_inside_convex(const std::vector<Point>& poly, const Point& p, double eps = 1e-9) {
  if (poly.size() < 3) return false;
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const double c = cross(poly[i], poly[(i + 1) % poly.size()], p);
    if (std::abs(c) <= eps) return false;
    (c > 0 ? pos : neg) = true;
  }
  return pos != neg;
}

/// True when `p` lies inside or on the convex polygon.
inline bool inside_convex(const std::vector<Point>& poly, const Point& p, double eps = 1e-9) {
  if (poly.size() < 3) return false;
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const double c = cross(poly[i], poly[(i + 1) % poly.size()], p);
    if (c > eps) pos = true;
    if (c < -eps) neg = true;
  }
  return !(pos && neg);
}

/// Whether segment a-b passes through the interior of a convex polygon.
inline bool segment_enters_convex(const std::vector<Point>& poly, const Point& a, const Point& b) {
  if (poly.size() < 3) return false;
  // Clip the segment against each edge's inner half-plane (Cyrus-Beck).
  double t0 = 0, t1 = 1;
  const double orient = cross(poly[0], poly[1], poly[2]) > 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    const double fa = orient * cross(p, q, a);
    const double fb = orient * cross(p, q, b);
    if (fa <= 1e-9 && fb <= 1e-9) return false;
    if (fa < 0 || fb < 0) {
      const double t = fa / (fa - fb);
      if (fa < 0)
        t0 = std::max(t0, t);
      else
        t1 = std::min(t1, t);
    }
    if (t0 >= t1 - 1e-12) return false;
  }
  const Point mid{a.x + (b.x - a.x) * (t0 + t1) / 2, a.y + (b.y - a.y) * (t0 + t1) / 2};
  return strictly_inside_convex(poly, mid);
}

inline bool rect_intersects_convex(const std::vector<Point>& poly, const Rect& r) {
  const Point corners[4] = {{r.x, r.y}, {r.right(), r.y}, {r.right(), r.bottom()}, {r.x, r.bottom()}};
  for (const auto& c : corners)
    if (strictly_inside_convex(poly, c)) return true;
  for (const auto& p : poly)
    if (p.x > r.x && p.x < r.right() && p.y > r.y && p.y < r.bottom()) return true;
  for (int i = 0; i < 4; ++i)
    if (segment_enters_convex(poly, corners[i], corners[(i + 1) % 4])) return true;
  return false;
}

/// Splits a label on real newlines and the dot escapes \n, \l and \r.
inline std::vector<std::string> label_lines(std::string_view label) {
  std::vector<std::string> lines(1);
  for (std::size_t i = 0; i < label.size(); ++i) {
    const char c = label[i];
    if (c == '\n') {
      lines.emplace_back();
    } else if (c == '\\' && i + 1 < label.size() &&
               (label[i + 1] == 'n' || label[i + 1] == 'l' || label[i + 1] == 'r')) {
      lines.emplace_back();
      ++i;
    } else {
      lines.back() += c;
    }
  }
  if (lines.size() > 1 && lines.back().empty()) lines.pop_back();
  return lines;
}

/// Number of code points in a UTF-8 string.
inline std::size_t display_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

}  // namespace cfgconf
