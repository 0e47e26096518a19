#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "navgym/sim.hpp"
#include "navgym/voxel.hpp"

namespace navgym {

struct ObsConfig {
  // Local occupancy window, world-axis-aligned, cropped from the baked grid.
  int occ_x = 16, occ_y = 8, occ_z = 16;
  double occ_cell = 0.5;  // m, must match the baked grid

  // Ray-fan depth map in the agent's yaw frame.
  int rays_h = 12, rays_v = 4;
  double fov_h = 2.0 * M_PI / 3.0;
  double fov_v = M_PI / 3.0;
  double max_range = 30.0;  // m
  double eye_height = 1.5;  // m above the feet

  double velocity_scale = 10.0;
  double accel_scale = 100.0;
  double position_scale = 0.0;  // 0 = derive from map bounds half-extent

  // State-ablation masks: zeroed channels keep their shape.
  bool zero_occupancy = false;
  bool zero_depth = false;
  bool zero_abs_positions = false;

  int occ_count() const { return occ_x * occ_y * occ_z; }
  int depth_count() const { return rays_h * rays_v; }
  static constexpr int kScalarCount = 13;  // velocity 3, accel 3, relative goal 3, prev action 4
  static constexpr int kAbsCount = 6;      // agent position 3, goal position 3

  void validate() const;
};

struct Observation {
  Eigen::VectorXf occupancy;      // {0,1}, occ_x*occ_y*occ_z, x-fastest layout
  Eigen::VectorXf depth;          // [0,1], rays_h*rays_v, horizontal-fastest
  Eigen::VectorXf scalars;        // kScalarCount
  Eigen::VectorXf abs_positions;  // kAbsCount
};

// Goal-independent per-step data; observations under any goal (hindsight
// relabeling included) are rebuilt from this.
struct StateSnapshot {
  std::vector<uint64_t> occ_bits;  // packed window bits
  std::vector<float> depth;
  Vec3 position{0, 0, 0};
  Vec3 velocity{0, 0, 0};
  Vec3 accel{0, 0, 0};
  double yaw = 0.0;
  Action prev_action;
};

Eigen::VectorXf crop_occupancy(const VoxelGrid& grid, const Vec3& center, const ObsConfig& cfg);

Eigen::VectorXf cast_depth_rays(const MapDef& map, const AgentState& agent, const ObsConfig& cfg);

StateSnapshot make_snapshot(const AgentState& agent, const VoxelGrid& grid, const MapDef& map,
                            const ObsConfig& cfg);

// Writes the four observation blocks for `snapshot` under `goal`. Output
// spans must have exactly occ_count / depth_count / kScalarCount / kAbsCount
// elements. Ablation masks are applied here.
void fill_observation(const StateSnapshot& snapshot, const Vec3& goal, const MapDef& map,
                      const ObsConfig& cfg, std::span<float> occ, std::span<float> depth,
                      std::span<float> scalars, std::span<float> abs_positions);

Observation build_observation(const AgentState& agent, const Vec3& goal, const VoxelGrid& grid,
                              const MapDef& map, const ObsConfig& cfg);

Observation observation_from_snapshot(const StateSnapshot& snapshot, const Vec3& goal,
                                      const MapDef& map, const ObsConfig& cfg);

// Debug record: all blocks as little-endian f32 in the order occupancy,
// depth, scalars, abs_positions.
void write_observation_f32(const Observation& obs, std::ostream& out);
Observation read_observation_f32(std::istream& in, const ObsConfig& cfg);

}  // namespace navgym
