#pragma once

#include <Eigen/Core>
#include <limits>
#include <optional>

namespace navgym {

using Vec3 = Eigen::Vector3d;

// Axis-aligned box, closed intervals on all axes. Up axis is +y.
struct Box {
  Vec3 min{0, 0, 0};
  Vec3 max{0, 0, 0};

  bool valid() const { return (min.array() < max.array()).all(); }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extents() const { return max - min; }

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool contains_box(const Box& b) const {
    return (b.min.array() >= min.array()).all() && (b.max.array() <= max.array()).all();
  }
};

// Closed-interval overlap: surface contact counts.
inline bool boxes_overlap(const Box& a, const Box& b) {
  return (a.min.array() <= b.max.array()).all() && (b.min.array() <= a.max.array()).all();
}

// Positive-volume overlap: boundary contact does not count. Occupancy baking
// uses this so a solid spanning whole cells marks exactly those cells.
inline bool boxes_overlap_open(const Box& a, const Box& b) {
  return (a.min.array() < b.max.array()).all() && (b.min.array() < a.max.array()).all();
}

inline Box box_around(const Vec3& center, const Vec3& half) {
  return Box{center - half, center + half};
}

// Slab intersection. Returns the parameter interval [t_enter, t_exit] of
// the ray origin + t*dir against the box, or nullopt when disjoint.
inline std::optional<std::pair<double, double>> ray_box_interval(const Vec3& origin,
                                                                 const Vec3& dir,
                                                                 const Box& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (dir[k] == 0.0) {
      if (origin[k] < box.min[k] || origin[k] > box.max[k]) return std::nullopt;
      continue;
    }
    double inv = 1.0 / dir[k];
    double a = (box.min[k] - origin[k]) * inv;
    double b = (box.max[k] - origin[k]) * inv;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

inline double horizontal_distance(const Vec3& a, const Vec3& b) {
  double dx = a.x() - b.x();
  double dz = a.z() - b.z();
  return std::sqrt(dx * dx + dz * dz);
}

}  // namespace navgym
