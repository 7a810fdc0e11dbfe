#pragma once

#include <span>
#include <vector>

namespace mtmc {

/// Axis-aligned box in corner form, pixel units of one camera image.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const;
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

using Feature = std::vector<double>;

Vec2 center(const BoundingBox& box);

/// Intersection over union; 0 when both boxes are degenerate.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Clamp every coordinate to [0,width]x[0,height].
BoundingBox clamp_to_image(const BoundingBox& box, double width, double height);

/// Linear blend a + t * (b - a), each coordinate independently.
BoundingBox lerp(const BoundingBox& a, const BoundingBox& b, double t);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// 1 - cosine similarity, in [0,2]. Zero-norm inputs are treated as
/// maximally uninformative and give distance 1.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Returns a unit-length copy; zero vectors are returned unchanged.
Feature l2_normalized(std::span<const double> v);

}  // namespace mtmc
