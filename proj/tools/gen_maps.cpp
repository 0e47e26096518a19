// Generates the shipped map fixtures and the faithful-geometry manual-link
// file. Run from the repo root: ./build/gen_maps maps/

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "navgym/map.hpp"

using namespace navgym;
using nlohmann::json;

namespace {

json vec3_json(double x, double y, double z) { return json::array({x, y, z}); }
json box_json(double x0, double y0, double z0, double x1, double y1, double z1) {
  return json{{"min", vec3_json(x0, y0, z0)}, {"max", vec3_json(x1, y1, z1)}};
}

// Desk-scale acceptance map: open floor, a double-jump-only roof, a pad-only
// roof, one single-jump platform.
json toy_desk() {
  json j;
  j["name"] = "toy_desk";
  j["bounds"] = box_json(-20, -1, -20, 20, 11, 20);
  j["solids"] = json::array({
      box_json(-20, -1, -20, 20, 0, 20),   // ground slab, top at y=0
      box_json(-12, 0, -14, -4, 2.5, -6),  // building A: double-jump roof
      box_json(6, 0, 4, 14, 4.4, 12),      // building B: pad-only roof
      box_json(4, 0, -12, 10, 1.2, -8),    // low platform: single jump
  });
  j["pads"] = json::array({json{
      {"trigger", box_json(14.1, 0, 6.8, 15.3, 0.8, 9.2)},
      {"launch_speed", 16.0},
  }});
  j["spawn_region"] = box_json(-19, -0.5, -19, 19, 9, 19);
  j["goal_epsilon"] = 1.0;
  return j;
}

// Faithful-geometry variant: 120x120x30, nine tiered buildings, two pads,
// rooftops reachable only by double jump from the top floor or by pad.
void toy_faithful(json& map_out, json& links_out) {
  json j;
  j["name"] = "toy_faithful";
  j["bounds"] = box_json(-60, -1, -60, 60, 29, 60);
  json solids = json::array();
  solids.push_back(box_json(-60, -1, -60, 60, 0, 60));  // ground

  json links = json::array();
  json pads = json::array();

  const double spacing = 40.0;
  for (int b = 0; b < 9; ++b) {
    double cx = spacing * (b % 3 - 1);
    double cz = spacing * (b / 3 - 1);
    int tiers = 2 + b % 3;
    double base_half = 8.0;
    double tier_rise = 1.4;

    double prev_y = 0.0;
    double prev_half = 0.0;  // 0 = ground
    for (int t = 0; t < tiers; ++t) {
      double half = base_half - t;
      double top = tier_rise * (t + 1);
      solids.push_back(box_json(cx - half, 0, cz - half, cx + half, top, cz + half));
      double takeoff_r = prev_half > 0 ? prev_half - 0.25 : half + 0.75;
      links.push_back(json{{"takeoff", vec3_json(cx + takeoff_r, prev_y + 1e-6, cz)},
                           {"landing", vec3_json(cx + half - 0.25, top + 1e-6, cz)},
                           {"ability", "jump"}});
      prev_y = top;
      prev_half = half;
    }
    // Rooftop: set back one meter, a double-jump rise above the top floor.
    double roof_half = prev_half - 1.0;
    double roof_top = prev_y + 2.1;
    solids.push_back(
        box_json(cx - roof_half, 0, cz - roof_half, cx + roof_half, roof_top, cz + roof_half));
    links.push_back(json{{"takeoff", vec3_json(cx + prev_half - 0.25, prev_y + 1e-6, cz)},
                         {"landing", vec3_json(cx + roof_half - 0.25, roof_top + 1e-6, cz)},
                         {"ability", "double_jump"}});

    // Two pads on the tallest buildings, mounted against the east wall.
    if (tiers == 4 && (b == 2 || b == 5)) {
      pads.push_back(json{{"trigger", box_json(cx + base_half + 0.1, 0, cz - 1.2,
                                               cx + base_half + 1.3, 0.8, cz + 1.2)},
                          {"launch_speed", 20.0}});
      links.push_back(json{{"takeoff", vec3_json(cx + base_half + 0.7, 1e-6, cz)},
                           {"landing", vec3_json(cx + roof_half - 0.25, roof_top + 1e-6, cz)},
                           {"ability", "pad"}});
    }
  }
  j["solids"] = solids;
  j["pads"] = pads;
  j["spawn_region"] = box_json(-59, -0.5, -59, 59, 27, 59);
  j["goal_epsilon"] = 1.0;
  map_out = j;
  links_out = links;
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir = argc > 1 ? argv[1] : "maps";
  std::filesystem::create_directories(out_dir);

  {
    json j = toy_desk();
    std::ofstream f(out_dir + "/toy_desk.map.json");
    f << j.dump(2) << "\n";
  }
  {
    json map_j, links_j;
    toy_faithful(map_j, links_j);
    std::ofstream f(out_dir + "/toy_faithful.map.json");
    f << map_j.dump(2) << "\n";
    std::ofstream g(out_dir + "/toy_faithful.links.json");
    g << links_j.dump(2) << "\n";
  }

  // Sanity: both maps must load and validate.
  load_map(out_dir + "/toy_desk.map.json");
  load_map(out_dir + "/toy_faithful.map.json");
  std::cout << "wrote fixtures to " << out_dir << "\n";
  return 0;
}
