#pragma once

#include <algorithm>
#include <cmath>

namespace sgg {

/// Axis-aligned box, top-left origin: (x, y) is the left/top corner in
/// pixels, w and h are extents. Areas are continuous (w * h), not pixel counts.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double area() const noexcept { return w * h; }
  bool valid() const noexcept { return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w > 0.0 && h > 0.0; }

  bool operator==(const Box&) const = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
}

inline double union_area(const Box& a, const Box& b) { return a.area() + b.area() - intersection_area(a, b); }

inline double box_iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return std::clamp(inter / (a.area() + b.area() - inter), 0.0, 1.0);
}

/// Smallest axis-aligned box covering both.
inline Box union_box(const Box& a, const Box& b) {
  const double x0 = std::min(a.x, b.x);
  const double y0 = std::min(a.y, b.y);
  return {x0, y0, std::max(a.right(), b.right()) - x0, std::max(a.bottom(), b.bottom()) - y0};
}

}  // namespace sgg
