#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "navgym/map.hpp"

namespace navgym {

// Offline-baked occupancy field over the whole map. A cell is set iff its
// AABB and a solid share positive volume; face contact alone leaves the cell
// clear, so a solid spanning whole cells marks exactly those cells.
// Immutable after bake.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(const Vec3& origin, double cell_size, std::array<uint32_t, 3> dims);

  const Vec3& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  const std::array<uint32_t, 3>& dims() const { return dims_; }
  uint64_t cell_count() const {
    return uint64_t(dims_[0]) * dims_[1] * dims_[2];
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < int(dims_[0]) && j < int(dims_[1]) &&
           k < int(dims_[2]);
  }

  uint64_t index(int i, int j, int k) const {
    return uint64_t(i) + uint64_t(dims_[0]) * (uint64_t(j) + uint64_t(dims_[1]) * uint64_t(k));
  }

  bool get(int i, int j, int k) const {
    uint64_t idx = index(i, j, k);
    return (bits_[idx >> 6] >> (idx & 63)) & 1u;
  }

  // Out-of-range cells read as occupied.
  bool get_clamped(int i, int j, int k) const {
    if (!in_bounds(i, j, k)) return true;
    return get(i, j, k);
  }

  void set(int i, int j, int k, bool v) {
    uint64_t idx = index(i, j, k);
    if (v)
      bits_[idx >> 6] |= (uint64_t(1) << (idx & 63));
    else
      bits_[idx >> 6] &= ~(uint64_t(1) << (idx & 63));
  }

  Box cell_aabb(int i, int j, int k) const {
    Vec3 lo = origin_ + cell_size_ * Vec3(i, j, k);
    return Box{lo, lo + Vec3(cell_size_, cell_size_, cell_size_)};
  }

  Vec3 cell_center(int i, int j, int k) const {
    return origin_ + cell_size_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }

  // Cell indices containing p (floor; points on the max face map outside).
  std::array<int, 3> cell_of(const Vec3& p) const {
    return {int(std::floor((p.x() - origin_.x()) / cell_size_)),
            int(std::floor((p.y() - origin_.y()) / cell_size_)),
            int(std::floor((p.z() - origin_.z()) / cell_size_))};
  }

  uint64_t popcount() const;
  const std::vector<uint64_t>& words() const { return bits_; }

  bool operator==(const VoxelGrid& other) const;

 private:
  friend VoxelGrid load_voxel_grid(const std::string& path);

  Vec3 origin_{0, 0, 0};
  double cell_size_ = 0.0;
  std::array<uint32_t, 3> dims_{0, 0, 0};
  std::vector<uint64_t> bits_;
};

// Bakes the occupancy of map.bounds at the given resolution. Throws
// ValidationError when the grid would exceed max_cells.
VoxelGrid bake_occupancy(const MapDef& map, double cell_size,
                         uint64_t max_cells = uint64_t(1) << 28);

// Binary cache: header (magic "NAVB", version u32, origin 3xf64, cell_size
// f64, dims 3xu32) followed by little-endian packed bits. Round-trips
// bit-exactly.
void save_voxel_grid(const VoxelGrid& grid, const std::string& path);
VoxelGrid load_voxel_grid(const std::string& path);

}  // namespace navgym
