#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "navgym/error.hpp"
#include "navgym/map.hpp"
#include "navgym/voxel.hpp"
#include "navgym/world.hpp"

using namespace navgym;

namespace {

MapDef make_floor_map() {
  MapDef m;
  m.name = "floor";
  m.bounds = Box{Vec3(-10, -1, -10), Vec3(10, 9, 10)};
  m.solids = {Box{Vec3(-10, -1, -10), Vec3(10, 0, 10)}};
  m.spawn_region = Box{Vec3(-9, -0.5, -9), Vec3(9, 5, 9)};
  m.goal_epsilon = 1.0;
  validate_map(m);
  return m;
}

MapDef random_box_map(Rng& rng, int n_solids) {
  MapDef m;
  m.name = "random";
  m.bounds = Box{Vec3(-20, -2, -20), Vec3(20, 18, 20)};
  for (int i = 0; i < n_solids; ++i) {
    Vec3 lo(rng.uniform(-18, 14), rng.uniform(-1, 12), rng.uniform(-18, 14));
    Vec3 size(rng.uniform(0.5, 5), rng.uniform(0.5, 4), rng.uniform(0.5, 5));
    m.solids.push_back(Box{lo, lo + size});
  }
  m.spawn_region = Box{Vec3(-19, -1.5, -19), Vec3(19, 16, 19)};
  m.goal_epsilon = 1.0;
  return m;
}

// Independent raycast oracle: intersect the ray with each of the six face
// rectangles of every solid; an entry is a crossing against the face normal.
std::optional<double> raycast_faces_oracle(const MapDef& map, const Vec3& o, const Vec3& d,
                                           double max_dist) {
  double best = std::numeric_limits<double>::infinity();
  for (const Box& s : map.solids) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        double plane = side == 0 ? s.min[axis] : s.max[axis];
        double outward = side == 0 ? -1.0 : 1.0;
        if (d[axis] * outward >= 0) continue;  // not entering through this face
        if (d[axis] == 0.0) continue;
        double t = (plane - o[axis]) / d[axis];
        if (t <= 0 || t > max_dist) continue;
        Vec3 p = o + t * d;
        int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        if (p[a1] < s.min[a1] || p[a1] > s.max[a1]) continue;
        if (p[a2] < s.min[a2] || p[a2] > s.max[a2]) continue;
        best = std::min(best, t);
      }
    }
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

bool interval_overlap_oracle(const Box& a, const Box& b) {
  for (int k = 0; k < 3; ++k)
    if (a.max[k] < b.min[k] || b.max[k] < a.min[k]) return false;
  return true;
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("load_map: minimal document") {
  std::string text = R"({
    "name": "mini",
    "bounds": {"min": [-5, -1, -5], "max": [5, 5, 5]},
    "solids": [{"min": [-5, -1, -5], "max": [5, 0, 5]}],
    "spawn_region": {"min": [-4, -0.5, -4], "max": [4, 3, 4]},
    "goal_epsilon": 1.0
  })";
  MapDef m = map_from_json_text(text);
  CHECK(m.solids.size() == 1);
  CHECK(m.pads.empty());
  CHECK(m.name == "mini");
}

TEST_CASE("load_map: solid outside bounds is a validation error") {
  MapDef m = make_floor_map();
  m.solids.push_back(Box{Vec3(5, 0, 5), Vec3(30, 2, 8)});
  CHECK_THROWS_WITH_AS(validate_map(m), "solid 1 outside bounds", ValidationError);
}

TEST_CASE("load_map: parse error names the problem") {
  CHECK_THROWS_AS(map_from_json_text("{not json"), ParseError);
  CHECK_THROWS_AS(map_from_json_text(R"({"name":"x"})"), ParseError);
}

TEST_CASE("load_map: shipped toy_desk fixture") {
  MapDef m = load_map(std::string(NAVGYM_MAPS_DIR) + "/toy_desk.map.json");
  CHECK(m.solids.size() == 4);
  CHECK(m.pads.size() == 1);
  CHECK(m.name == "toy_desk");
  // Authored fixture, pinned by content hash.
  uint64_t h = fnv1a(read_file(std::string(NAVGYM_MAPS_DIR) + "/toy_desk.map.json"));
  CHECK(h == UINT64_C(0xd6c921f46a6e7f73));
}

TEST_CASE("raycast: axis-aligned hit distance") {
  MapDef m = make_floor_map();
  auto t = raycast(m, Vec3(0, 1, 0), Vec3(0, -1, 0), 10.0);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("raycast: parallel ray outside boxes misses") {
  MapDef m = make_floor_map();
  CHECK(!raycast(m, Vec3(0, 1, 0), Vec3(1, 0, 0), 100.0).has_value());
}

TEST_CASE("raycast: 1000 random rays match the face-intersection oracle") {
  Rng rng = Rng::seeded(42);
  MapDef m = random_box_map(rng, 12);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec3 o(rng.uniform(-19, 19), rng.uniform(-1.9, 17), rng.uniform(-19, 19));
    Vec3 d;
    if (i % 2 == 0) {
      d = Vec3(rng.normal(), rng.normal(), rng.normal());
    } else {
      // Aim at a random solid so a good share of rays actually hit.
      const Box& s = m.solids[rng.uniform_index(m.solids.size())];
      Vec3 inside(rng.uniform(s.min.x(), s.max.x()), rng.uniform(s.min.y(), s.max.y()),
                  rng.uniform(s.min.z(), s.max.z()));
      d = inside - o;
    }
    if (d.norm() < 1e-6) continue;
    d.normalize();
    auto a = raycast(m, o, d, 50.0);
    auto b = raycast_faces_oracle(m, o, d, 50.0);
    REQUIRE(a.has_value() == b.has_value());
    if (a) {
      CHECK(*a == doctest::Approx(*b).epsilon(1e-9));
      ++hits;
    }
  }
  CHECK(hits > 300);  // the aimed half keeps the check meaningful
}

TEST_CASE("box_overlap: containment and face contact") {
  MapDef m = make_floor_map();
  CHECK(box_overlap(m, Box{Vec3(-1, -0.5, -1), Vec3(1, -0.2, 1)}));
  // Query resting exactly on the floor top: closed-interval contact counts.
  CHECK(box_overlap(m, Box{Vec3(-1, 0, -1), Vec3(1, 1, 1)}));
  CHECK(!box_overlap(m, Box{Vec3(-1, 0.1, -1), Vec3(1, 1, 1)}));
}

TEST_CASE("box_overlap: 1000 random queries match the interval oracle") {
  Rng rng = Rng::seeded(7);
  MapDef m = random_box_map(rng, 12);
  for (int i = 0; i < 1000; ++i) {
    Vec3 lo(rng.uniform(-20, 18), rng.uniform(-2, 16), rng.uniform(-20, 18));
    Vec3 size(rng.uniform(0.1, 4), rng.uniform(0.1, 4), rng.uniform(0.1, 4));
    Box q{lo, lo + size};
    bool expect = false;
    for (const Box& s : m.solids) expect = expect || interval_overlap_oracle(q, s);
    CHECK(box_overlap(m, q) == expect);
  }
}

TEST_CASE("bake_occupancy: empty map bakes all clear") {
  MapDef m;
  m.name = "empty";
  m.bounds = Box{Vec3(0, 0, 0), Vec3(4, 2, 4)};
  m.spawn_region = Box{Vec3(0.5, 0, 0.5), Vec3(3.5, 1.5, 3.5)};
  m.goal_epsilon = 0.5;
  VoxelGrid g = bake_occupancy(m, 0.5);
  CHECK(g.popcount() == 0);
  CHECK(g.cell_count() == 8 * 4 * 8);
}

TEST_CASE("bake_occupancy: solid spanning 2x2x1 cells sets exactly 4 bits") {
  MapDef m;
  m.name = "span";
  m.bounds = Box{Vec3(0, 0, 0), Vec3(4, 2, 4)};
  m.solids = {Box{Vec3(1.0, 0.0, 1.0), Vec3(2.0, 0.5, 2.0)}};
  m.spawn_region = Box{Vec3(0.5, 0, 0.5), Vec3(3.5, 1.5, 3.5)};
  m.goal_epsilon = 0.5;
  VoxelGrid g = bake_occupancy(m, 0.5);
  CHECK(g.popcount() == 4);
  CHECK(g.get(2, 0, 2));
  CHECK(g.get(3, 0, 3));
  CHECK(!g.get(1, 0, 2));
}

TEST_CASE("bake_occupancy: memory cap names required vs allowed") {
  MapDef m = make_floor_map();
  CHECK_THROWS_AS(bake_occupancy(m, 0.5, 100), ValidationError);
  try {
    bake_occupancy(m, 0.5, 100);
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("100") != std::string::npos);
    CHECK(msg.find("cells") != std::string::npos);
  }
}

TEST_CASE("bake_occupancy: toy_desk bit count matches the per-cell oracle") {
  MapDef m = load_map(std::string(NAVGYM_MAPS_DIR) + "/toy_desk.map.json");
  VoxelGrid g = bake_occupancy(m, 0.5);
  uint64_t expect = 0;
  for (uint32_t k = 0; k < g.dims()[2]; ++k)
    for (uint32_t j = 0; j < g.dims()[1]; ++j)
      for (uint32_t i = 0; i < g.dims()[0]; ++i) {
        Box cell = g.cell_aabb(int(i), int(j), int(k));
        bool occ = false;
        for (const Box& s : m.solids) occ = occ || boxes_overlap_open(cell, s);
        if (occ) {
          ++expect;
          CHECK(g.get(int(i), int(j), int(k)));
        }
      }
  CHECK(g.popcount() == expect);
}

TEST_CASE("bake_occupancy: order independent and idempotent") {
  Rng rng = Rng::seeded(3);
  MapDef m = random_box_map(rng, 8);
  VoxelGrid a = bake_occupancy(m, 0.5);
  MapDef shuffled = m;
  std::reverse(shuffled.solids.begin(), shuffled.solids.end());
  VoxelGrid b = bake_occupancy(shuffled, 0.5);
  CHECK(a == b);
  VoxelGrid c = bake_occupancy(m, 0.5);
  CHECK(a == c);
}

TEST_CASE("bake_occupancy: cell centers strictly inside solids are set") {
  Rng rng = Rng::seeded(11);
  for (int trial = 0; trial < 5; ++trial) {
    MapDef m = random_box_map(rng, 6);
    VoxelGrid g = bake_occupancy(m, 0.5);
    for (uint32_t k = 0; k < g.dims()[2]; k += 3)
      for (uint32_t j = 0; j < g.dims()[1]; j += 3)
        for (uint32_t i = 0; i < g.dims()[0]; i += 3) {
          Vec3 center = g.cell_center(int(i), int(j), int(k));
          for (const Box& s : m.solids) {
            bool strictly_inside = (center.array() > s.min.array()).all() &&
                                   (center.array() < s.max.array()).all();
            if (strictly_inside) CHECK(g.get(int(i), int(j), int(k)));
          }
        }
  }
}

TEST_CASE("voxel cache: save/load round-trips bit-exactly") {
  Rng rng = Rng::seeded(13);
  MapDef m = random_box_map(rng, 10);
  VoxelGrid g = bake_occupancy(m, 0.5);
  std::string path = "test_voxel_cache.bin";
  save_voxel_grid(g, path);
  VoxelGrid g2 = load_voxel_grid(path);
  CHECK(g == g2);
  std::remove(path.c_str());
}

TEST_CASE("sample_walkable_point: open floor lands on the floor top") {
  MapDef m = make_floor_map();
  Rng rng = Rng::seeded(5);
  Box region{Vec3(-3, -0.5, -3), Vec3(3, 2, 3)};
  auto s = sample_walkable_point(m, region, Vec3(0.4, 0.9, 0.4), rng);
  REQUIRE(s.has_value());
  CHECK(std::abs(s->point.y() - 0.0) <= 1e-6);
}

TEST_CASE("sample_walkable_point: region inside a solid fails") {
  MapDef m = make_floor_map();
  m.solids.push_back(Box{Vec3(-3, 0, -3), Vec3(3, 3, 3)});
  Rng rng = Rng::seeded(6);
  Box region{Vec3(-2.5, 0.5, -2.5), Vec3(2.5, 2.5, 2.5)};
  auto s = sample_walkable_point(m, region, Vec3(0.4, 0.9, 0.4), rng);
  CHECK(!s.has_value());
}

TEST_CASE("sample_walkable_point: uniform over two equal platforms") {
  MapDef m;
  m.name = "two_platforms";
  m.bounds = Box{Vec3(-10, -1, -10), Vec3(10, 9, 10)};
  m.solids = {Box{Vec3(-10, -1, -10), Vec3(10, 0, 10)},
              Box{Vec3(-6, 0, -2), Vec3(-2, 2, 2)},   // platform A, top at 2
              Box{Vec3(2, 0, -2), Vec3(6, 3, 2)}};    // platform B, top at 3
  m.spawn_region = Box{Vec3(-9, -0.5, -9), Vec3(9, 5, 9)};
  m.goal_epsilon = 1.0;
  validate_map(m);
  Rng rng = Rng::seeded(17);
  Box region{Vec3(-8, 1.5, -4), Vec3(8, 3.5, 4)};  // excludes the floor
  int a = 0, b = 0;
  for (int i = 0; i < 10000; ++i) {
    auto s = sample_walkable_point(m, region, Vec3(0.4, 0.9, 0.4), rng);
    REQUIRE(s.has_value());
    if (s->point.x() < 0)
      ++a;
    else
      ++b;
  }
  double frac = double(a) / double(a + b);
  CHECK(frac > 0.47);
  CHECK(frac < 0.53);
}

TEST_CASE("sample_walkable_point: agent box never overlaps solids") {
  Rng rng = Rng::seeded(23);
  for (int trial = 0; trial < 20; ++trial) {
    MapDef m = random_box_map(rng, 10);
    if (!spawn_region_has_walkable_surface(m)) continue;
    for (int i = 0; i < 50; ++i) {
      auto s = sample_walkable_point(m, m.spawn_region, Vec3(0.4, 0.9, 0.4), rng);
      if (!s) continue;
      CHECK(!box_overlap(m, agent_box_at(s->point, Vec3(0.4, 0.9, 0.4))));
    }
  }
}

TEST_CASE("raycast/box_overlap consistency") {
  Rng rng = Rng::seeded(31);
  MapDef m = random_box_map(rng, 12);
  int checked = 0;
  for (int i = 0; i < 20000 && checked < 300; ++i) {
    Vec3 o(rng.uniform(-19, 19), rng.uniform(-1.9, 17), rng.uniform(-19, 19));
    const Box& s = m.solids[rng.uniform_index(m.solids.size())];
    Vec3 inside(rng.uniform(s.min.x(), s.max.x()), rng.uniform(s.min.y(), s.max.y()),
                rng.uniform(s.min.z(), s.max.z()));
    Vec3 d = inside - o;
    if (d.norm() < 1e-6) continue;
    d.normalize();
    auto t = raycast(m, o, d, 50.0);
    if (!t) continue;
    Vec3 p = o + (*t + 1e-6) * d;
    Box probe{p, p};
    CHECK(box_overlap(m, probe));
    ++checked;
  }
  CHECK(checked >= 300);
}
