#include "navgym/world.hpp"

#include <algorithm>
#include <vector>

namespace navgym {

std::optional<double> raycast(const MapDef& map, const Vec3& origin, const Vec3& dir,
                              double max_dist) {
  double best = std::numeric_limits<double>::infinity();
  for (const Box& s : map.solids) {
    auto iv = ray_box_interval(origin, dir, s);
    if (!iv) continue;
    auto [t0, t1] = *iv;
    if (t1 < 0.0) continue;
    if (t0 > 0.0 && t0 <= max_dist) best = std::min(best, t0);
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

bool box_overlap(const MapDef& map, const Box& query) {
  for (const Box& s : map.solids)
    if (boxes_overlap(query, s)) return true;
  return false;
}

std::optional<double> support_height(const MapDef& map, double x, double z, double y_from) {
  double best = map.bounds.min.y();  // bounds floor always supports
  for (const Box& s : map.solids) {
    if (x < s.min.x() || x > s.max.x() || z < s.min.z() || z > s.max.z()) continue;
    if (s.max.y() <= y_from && s.max.y() > best) best = s.max.y();
  }
  if (best > y_from) return std::nullopt;
  return best;
}

namespace {

bool standable_at(const MapDef& map, const Vec3& feet, const Vec3& half) {
  if (!map.bounds.contains(feet)) return false;
  Box body = agent_box_at(feet, half);
  if (body.max.y() > map.bounds.max.y()) return false;
  return !box_overlap(map, body);
}

}  // namespace

void standable_heights_in_column(const MapDef& map, double x, double z, double y_lo, double y_hi,
                                 const Vec3& agent_half_extents, std::vector<double>& out) {
  out.clear();
  auto consider = [&](double top) {
    double y = top + kContactSkin;
    if (y < y_lo || y > y_hi) return;
    if (!standable_at(map, Vec3(x, y, z), agent_half_extents)) return;
    out.push_back(y);
  };
  consider(map.bounds.min.y());
  for (const Box& s : map.solids) {
    if (x < s.min.x() || x > s.max.x() || z < s.min.z() || z > s.max.z()) continue;
    consider(s.max.y());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

std::optional<WalkableSample> sample_walkable_point(const MapDef& map, const Box& region,
                                                    const Vec3& agent_half_extents, Rng& rng,
                                                    int max_rejections) {
  std::vector<double> heights;
  for (int it = 0; it < max_rejections; ++it) {
    double x = rng.uniform(region.min.x(), region.max.x());
    double z = rng.uniform(region.min.z(), region.max.z());
    standable_heights_in_column(map, x, z, region.min.y(), region.max.y(), agent_half_extents,
                                heights);
    if (heights.empty()) continue;
    double y = heights.size() == 1 ? heights[0]
                                   : heights[rng.uniform_index(heights.size())];
    return WalkableSample{Vec3(x, y, z)};
  }
  return std::nullopt;
}

bool spawn_region_has_walkable_surface(const MapDef& map) {
  const Vec3 half(0.4, 0.9, 0.4);
  const Box& r = map.spawn_region;
  const int n = 24;
  std::vector<double> heights;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      double x = r.min.x() + (r.max.x() - r.min.x()) * i / n;
      double z = r.min.z() + (r.max.z() - r.min.z()) * j / n;
      standable_heights_in_column(map, x, z, r.min.y(), r.max.y(), half, heights);
      if (!heights.empty()) return true;
    }
  }
  return false;
}

}  // namespace navgym
