#include "navgym/map.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "navgym/error.hpp"
#include "navgym/world.hpp"

namespace navgym {
namespace {

using nlohmann::json;

Vec3 parse_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(where + ": expected an array of 3 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw ParseError(where + ": expected numeric components");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Box parse_box(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("min") || !j.contains("max"))
    throw ParseError(where + ": expected an object with min/max");
  Box b;
  b.min = parse_vec3(j.at("min"), where + ".min");
  b.max = parse_vec3(j.at("max"), where + ".max");
  return b;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json box_to_json(const Box& b) {
  return json{{"min", vec3_to_json(b.min)}, {"max", vec3_to_json(b.max)}};
}

void check_box(const Box& b, const std::string& what) {
  for (int k = 0; k < 3; ++k) {
    if (!(b.min[k] < b.max[k])) {
      static const char axis[3] = {'x', 'y', 'z'};
      throw ValidationError(what + ": min." + axis[k] + std::string(" must be < max.") + axis[k]);
    }
  }
}

}  // namespace

void validate_map(const MapDef& map) {
  check_box(map.bounds, "bounds");
  check_box(map.spawn_region, "spawn_region");
  for (size_t i = 0; i < map.solids.size(); ++i) {
    check_box(map.solids[i], "solid " + std::to_string(i));
    if (!map.bounds.contains_box(map.solids[i]))
      throw ValidationError("solid " + std::to_string(i) + " outside bounds");
  }
  for (size_t i = 0; i < map.pads.size(); ++i) {
    check_box(map.pads[i].trigger, "pad " + std::to_string(i) + " trigger");
    if (!map.bounds.contains_box(map.pads[i].trigger))
      throw ValidationError("pad " + std::to_string(i) + " outside bounds");
    if (!(map.pads[i].launch_speed > 0))
      throw ValidationError("pad " + std::to_string(i) + " launch_speed must be > 0");
  }
  if (!(map.goal_epsilon > 0)) throw ValidationError("goal_epsilon must be > 0");
  if (!map.bounds.contains_box(map.spawn_region))
    throw ValidationError("spawn_region outside bounds");
  if (!spawn_region_has_walkable_surface(map))
    throw ValidationError("spawn_region intersects no walkable surface");
}

MapDef map_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("map parse error: ") + e.what());
  }
  MapDef map;
  try {
    map.name = j.at("name").get<std::string>();
    map.bounds = parse_box(j.at("bounds"), "bounds");
    for (size_t i = 0; i < j.at("solids").size(); ++i)
      map.solids.push_back(parse_box(j.at("solids")[i], "solids[" + std::to_string(i) + "]"));
    if (j.contains("pads")) {
      for (size_t i = 0; i < j.at("pads").size(); ++i) {
        const auto& p = j.at("pads")[i];
        JumpPad pad;
        pad.trigger = parse_box(p.at("trigger"), "pads[" + std::to_string(i) + "].trigger");
        pad.launch_speed = p.at("launch_speed").get<double>();
        map.pads.push_back(pad);
      }
    }
    map.spawn_region = parse_box(j.at("spawn_region"), "spawn_region");
    map.goal_epsilon = j.at("goal_epsilon").get<double>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("map field error: ") + e.what());
  }
  validate_map(map);
  return map;
}

MapDef load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open map file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return map_from_json_text(ss.str());
}

std::string map_to_json_text(const MapDef& map) {
  json j;
  j["name"] = map.name;
  j["bounds"] = box_to_json(map.bounds);
  j["solids"] = json::array();
  for (const auto& s : map.solids) j["solids"].push_back(box_to_json(s));
  j["pads"] = json::array();
  for (const auto& p : map.pads)
    j["pads"].push_back(json{{"trigger", box_to_json(p.trigger)}, {"launch_speed", p.launch_speed}});
  j["spawn_region"] = box_to_json(map.spawn_region);
  j["goal_epsilon"] = map.goal_epsilon;
  return j.dump(2) + "\n";
}

void save_map(const MapDef& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write map file: " + path);
  out << map_to_json_text(map);
}

}  // namespace navgym
