#include "navgym/obs.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "navgym/error.hpp"
#include "navgym/world.hpp"

namespace navgym {

void ObsConfig::validate() const {
  if (occ_x < 1 || occ_y < 1 || occ_z < 1) throw ValidationError("occ dims must be >= 1");
  if (rays_h < 1 || rays_v < 1) throw ValidationError("ray counts must be >= 1");
  if (!(occ_cell > 0)) throw ValidationError("occ_cell must be > 0");
  if (!(fov_h > 0 && fov_h <= 2 * M_PI)) throw ValidationError("fov_h must be in (0, 2pi]");
  if (!(fov_v > 0 && fov_v <= 2 * M_PI)) throw ValidationError("fov_v must be in (0, 2pi]");
  if (!(max_range > 0)) throw ValidationError("max_range must be > 0");
}

namespace {

// Window origin cell so the agent's cell sits at index dims/2.
std::array<int, 3> window_origin(const VoxelGrid& grid, const Vec3& center,
                                 const ObsConfig& cfg) {
  auto cell = grid.cell_of(center);
  return {cell[0] - cfg.occ_x / 2, cell[1] - cfg.occ_y / 2, cell[2] - cfg.occ_z / 2};
}

void crop_bits(const VoxelGrid& grid, const Vec3& center, const ObsConfig& cfg,
               std::vector<uint64_t>& bits) {
  bits.assign((size_t(cfg.occ_count()) + 63) / 64, 0);
  auto o = window_origin(grid, center, cfg);
  size_t idx = 0;
  for (int k = 0; k < cfg.occ_z; ++k)
    for (int j = 0; j < cfg.occ_y; ++j)
      for (int i = 0; i < cfg.occ_x; ++i, ++idx)
        if (grid.get_clamped(o[0] + i, o[1] + j, o[2] + k))
          bits[idx >> 6] |= uint64_t(1) << (idx & 63);
}

double ray_angle(int i, int n, double fov) {
  return n == 1 ? 0.0 : -0.5 * fov + fov * double(i) / double(n - 1);
}

// World -> yaw frame: x right, y up, z forward.
Vec3 to_yaw_frame(const Vec3& v, double yaw) {
  double s = std::sin(yaw), c = std::cos(yaw);
  return Vec3(c * v.x() - s * v.z(), v.y(), s * v.x() + c * v.z());
}

Vec3 half_extent_scale(const MapDef& map, const ObsConfig& cfg) {
  if (cfg.position_scale > 0)
    return Vec3::Constant(cfg.position_scale);
  Vec3 half = 0.5 * map.bounds.extents();
  return half;
}

}  // namespace

Eigen::VectorXf crop_occupancy(const VoxelGrid& grid, const Vec3& center, const ObsConfig& cfg) {
  std::vector<uint64_t> bits;
  crop_bits(grid, center, cfg, bits);
  Eigen::VectorXf out(cfg.occ_count());
  for (int idx = 0; idx < cfg.occ_count(); ++idx)
    out[idx] = (bits[idx >> 6] >> (idx & 63)) & 1u ? 1.0f : 0.0f;
  return out;
}

Eigen::VectorXf cast_depth_rays(const MapDef& map, const AgentState& agent, const ObsConfig& cfg) {
  Eigen::VectorXf out(cfg.depth_count());
  Vec3 eye = agent.position + Vec3(0.0, cfg.eye_height, 0.0);
  int idx = 0;
  for (int v = 0; v < cfg.rays_v; ++v) {
    double pitch = ray_angle(v, cfg.rays_v, cfg.fov_v);
    double cp = std::cos(pitch), sp = std::sin(pitch);
    for (int h = 0; h < cfg.rays_h; ++h, ++idx) {
      double az = agent.yaw + ray_angle(h, cfg.rays_h, cfg.fov_h);
      Vec3 dir(cp * std::sin(az), sp, cp * std::cos(az));
      auto t = raycast(map, eye, dir, cfg.max_range);
      out[idx] = t ? float(*t / cfg.max_range) : 1.0f;
    }
  }
  return out;
}

StateSnapshot make_snapshot(const AgentState& agent, const VoxelGrid& grid, const MapDef& map,
                            const ObsConfig& cfg) {
  StateSnapshot snap;
  crop_bits(grid, agent.position, cfg, snap.occ_bits);
  Eigen::VectorXf depth = cast_depth_rays(map, agent, cfg);
  snap.depth.assign(depth.data(), depth.data() + depth.size());
  snap.position = agent.position;
  snap.velocity = agent.velocity;
  snap.accel = agent.accel;
  snap.yaw = agent.yaw;
  snap.prev_action = agent.prev_action;
  return snap;
}

void fill_observation(const StateSnapshot& snapshot, const Vec3& goal, const MapDef& map,
                      const ObsConfig& cfg, std::span<float> occ, std::span<float> depth,
                      std::span<float> scalars, std::span<float> abs_positions) {
  if (cfg.zero_occupancy) {
    std::fill(occ.begin(), occ.end(), 0.0f);
  } else {
    for (size_t idx = 0; idx < occ.size(); ++idx)
      occ[idx] = (snapshot.occ_bits[idx >> 6] >> (idx & 63)) & 1u ? 1.0f : 0.0f;
  }
  if (cfg.zero_depth) {
    std::fill(depth.begin(), depth.end(), 0.0f);
  } else {
    std::copy(snapshot.depth.begin(), snapshot.depth.end(), depth.begin());
  }

  Vec3 vel = to_yaw_frame(snapshot.velocity, snapshot.yaw) / cfg.velocity_scale;
  Vec3 acc = to_yaw_frame(snapshot.accel, snapshot.yaw) / cfg.accel_scale;
  Vec3 half = half_extent_scale(map, cfg);
  double rel_scale = half.maxCoeff();
  Vec3 rel = to_yaw_frame(goal - snapshot.position, snapshot.yaw) / rel_scale;
  for (int k = 0; k < 3; ++k) {
    scalars[k] = float(vel[k]);
    scalars[3 + k] = float(acc[k]);
    scalars[6 + k] = float(rel[k]);
  }
  scalars[9] = float(snapshot.prev_action.jump);
  scalars[10] = float(snapshot.prev_action.forward);
  scalars[11] = float(snapshot.prev_action.strafe);
  scalars[12] = float(snapshot.prev_action.rotate);

  if (cfg.zero_abs_positions) {
    std::fill(abs_positions.begin(), abs_positions.end(), 0.0f);
  } else {
    Vec3 center = map.bounds.center();
    for (int k = 0; k < 3; ++k) {
      abs_positions[k] = float((snapshot.position[k] - center[k]) / half[k]);
      abs_positions[3 + k] = float((goal[k] - center[k]) / half[k]);
    }
  }
}

Observation observation_from_snapshot(const StateSnapshot& snapshot, const Vec3& goal,
                                      const MapDef& map, const ObsConfig& cfg) {
  Observation obs;
  obs.occupancy.resize(cfg.occ_count());
  obs.depth.resize(cfg.depth_count());
  obs.scalars.resize(ObsConfig::kScalarCount);
  obs.abs_positions.resize(ObsConfig::kAbsCount);
  fill_observation(snapshot, goal, map, cfg, {obs.occupancy.data(), size_t(obs.occupancy.size())},
                   {obs.depth.data(), size_t(obs.depth.size())},
                   {obs.scalars.data(), size_t(obs.scalars.size())},
                   {obs.abs_positions.data(), size_t(obs.abs_positions.size())});
  return obs;
}

Observation build_observation(const AgentState& agent, const Vec3& goal, const VoxelGrid& grid,
                              const MapDef& map, const ObsConfig& cfg) {
  return observation_from_snapshot(make_snapshot(agent, grid, map, cfg), goal, map, cfg);
}

void write_observation_f32(const Observation& obs, std::ostream& out) {
  auto write_block = [&](const Eigen::VectorXf& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
  };
  write_block(obs.occupancy);
  write_block(obs.depth);
  write_block(obs.scalars);
  write_block(obs.abs_positions);
}

Observation read_observation_f32(std::istream& in, const ObsConfig& cfg) {
  Observation obs;
  auto read_block = [&](Eigen::VectorXf& v, int n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(float)));
  };
  read_block(obs.occupancy, cfg.occ_count());
  read_block(obs.depth, cfg.depth_count());
  read_block(obs.scalars, ObsConfig::kScalarCount);
  read_block(obs.abs_positions, ObsConfig::kAbsCount);
  if (!in) throw ParseError("truncated observation record");
  return obs;
}

}  // namespace navgym
