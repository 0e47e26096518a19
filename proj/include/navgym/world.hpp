#pragma once

#include <optional>

#include "navgym/geometry.hpp"
#include "navgym/map.hpp"
#include "navgym/rng.hpp"

namespace navgym {

// Vertical gap left between a resting agent and its support so that the
// closed-interval overlap test stays false for a standing agent.
inline constexpr double kContactSkin = 1e-6;

// Agent bounding box with the agent position at the bottom-center (feet).
inline Box agent_box_at(const Vec3& feet, const Vec3& half_extents) {
  return Box{feet - Vec3(half_extents.x(), 0.0, half_extents.z()),
             feet + Vec3(half_extents.x(), 2.0 * half_extents.y(), half_extents.z())};
}

// Smallest t in (0, max_dist] at which the ray enters a solid, or nullopt on
// miss. A ray starting inside a solid never "enters" it.
std::optional<double> raycast(const MapDef& map, const Vec3& origin, const Vec3& dir,
                              double max_dist);

// Closed-interval overlap of the query against any solid.
bool box_overlap(const MapDef& map, const Box& query);

// Top-face support height directly at (x, z): highest solid top <= y_from
// among solids whose footprint covers the point. Ground level is the bounds
// floor when nothing else supports.
std::optional<double> support_height(const MapDef& map, double x, double z, double y_from);

struct WalkableSample {
  Vec3 point;  // y is the surface height + kContactSkin
};

// Uniform sample of a standable point inside `region`: on a top face of a
// solid (or the bounds floor), with agent clearance above. Fails after
// max_rejections rejected draws.
std::optional<WalkableSample> sample_walkable_point(const MapDef& map, const Box& region,
                                                    const Vec3& agent_half_extents, Rng& rng,
                                                    int max_rejections = 1000);

// True when at least one standable point exists in the spawn region (probed
// on a coarse deterministic grid).
bool spawn_region_has_walkable_surface(const MapDef& map);

// Candidate surface heights in the column (x, z) whose support lies within
// [y_lo, y_hi] and which have agent clearance.
void standable_heights_in_column(const MapDef& map, double x, double z, double y_lo, double y_hi,
                                 const Vec3& agent_half_extents, std::vector<double>& out);

}  // namespace navgym
