#pragma once

#include <string>
#include <vector>

#include "navgym/geometry.hpp"

namespace navgym {

// Trigger volume that launches the agent vertically.
struct JumpPad {
  Box trigger;
  double launch_speed = 0.0;  // m/s, straight up
};

// Static world description. Immutable after load; safe to share across threads.
struct MapDef {
  std::string name;
  Box bounds;
  std::vector<Box> solids;
  std::vector<JumpPad> pads;
  Box spawn_region;
  double goal_epsilon = 1.0;  // m
};

// Checks every MapDef invariant; throws ValidationError naming the violation.
void validate_map(const MapDef& map);

MapDef load_map(const std::string& path);
MapDef map_from_json_text(const std::string& text);
std::string map_to_json_text(const MapDef& map);
void save_map(const MapDef& map, const std::string& path);

}  // namespace navgym
