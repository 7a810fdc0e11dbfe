#include "mtmc/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "mtmc/error.hpp"

namespace mtmc {

double BoundingBox::area() const {
  return std::max(0.0, x2 - x1) * std::max(0.0, y2 - y1);
}

bool BoundingBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 <= x2 && y1 <= y2;
}

Vec2 center(const BoundingBox& box) {
  return {(box.x1 + box.x2) / 2.0, (box.y1 + box.y2) / 2.0};
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

BoundingBox clamp_to_image(const BoundingBox& box, double width, double height) {
  return {std::clamp(box.x1, 0.0, width), std::clamp(box.y1, 0.0, height),
          std::clamp(box.x2, 0.0, width), std::clamp(box.y2, 0.0, height)};
}

BoundingBox lerp(const BoundingBox& a, const BoundingBox& b, double t) {
  return {a.x1 + t * (b.x1 - a.x1), a.y1 + t * (b.y1 - a.y1), a.x2 + t * (b.x2 - a.x2),
          a.y2 + t * (b.y2 - a.y2)};
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: dimension " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double d = dot(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 1.0;
  return std::clamp(1.0 - d / (na * nb), 0.0, 2.0);
}

Feature l2_normalized(std::span<const double> v) {
  Feature out(v.begin(), v.end());
  const double n = norm(v);
  if (n > 0.0) {
    for (auto& x : out) x /= n;
  }
  return out;
}

}  // namespace mtmc
