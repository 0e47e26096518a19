#include "navgym/voxel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "navgym/error.hpp"

namespace navgym {

VoxelGrid::VoxelGrid(const Vec3& origin, double cell_size, std::array<uint32_t, 3> dims)
    : origin_(origin), cell_size_(cell_size), dims_(dims) {
  bits_.assign((cell_count() + 63) / 64, 0);
}

uint64_t VoxelGrid::popcount() const {
  uint64_t n = 0;
  for (uint64_t w : bits_) n += std::popcount(w);
  return n;
}

bool VoxelGrid::operator==(const VoxelGrid& other) const {
  return origin_ == other.origin_ && cell_size_ == other.cell_size_ && dims_ == other.dims_ &&
         bits_ == other.bits_;
}

VoxelGrid bake_occupancy(const MapDef& map, double cell_size, uint64_t max_cells) {
  if (!(cell_size > 0)) throw ValidationError("cell_size must be > 0");
  Vec3 span = map.bounds.extents();
  std::array<uint32_t, 3> dims;
  for (int k = 0; k < 3; ++k) dims[k] = uint32_t(std::ceil(span[k] / cell_size - 1e-12));
  uint64_t count = uint64_t(dims[0]) * dims[1] * dims[2];
  if (count > max_cells)
    throw ValidationError("occupancy grid needs " + std::to_string(count) +
                          " cells, memory cap allows " + std::to_string(max_cells));
  VoxelGrid grid(map.bounds.min, cell_size, dims);

  // Per solid, cover the touched index range; the +-1 fringe plus the exact
  // closed-interval test keeps boundary cells correct.
  for (const Box& s : map.solids) {
    int lo[3], hi[3];
    for (int k = 0; k < 3; ++k) {
      lo[k] = int(std::floor((s.min[k] - map.bounds.min[k]) / cell_size)) - 1;
      hi[k] = int(std::floor((s.max[k] - map.bounds.min[k]) / cell_size)) + 1;
      lo[k] = std::max(lo[k], 0);
      hi[k] = std::min(hi[k], int(dims[k]) - 1);
    }
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i)
          if (boxes_overlap_open(grid.cell_aabb(i, j, k), s)) grid.set(i, j, k, true);
  }
  return grid;
}

namespace {

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_voxel_grid(const VoxelGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write occupancy cache: " + path);
  out.write("NAVB", 4);
  write_raw<uint32_t>(out, 1);
  for (int k = 0; k < 3; ++k) write_raw<double>(out, grid.origin()[k]);
  write_raw<double>(out, grid.cell_size());
  for (int k = 0; k < 3; ++k) write_raw<uint32_t>(out, grid.dims()[k]);
  uint64_t nbytes = (grid.cell_count() + 7) / 8;
  out.write(reinterpret_cast<const char*>(grid.words().data()), std::streamsize(nbytes));
}

VoxelGrid load_voxel_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open occupancy cache: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NAVB", 4) != 0)
    throw ParseError("bad occupancy cache magic in " + path);
  uint32_t version = read_raw<uint32_t>(in);
  if (version != 1) throw ParseError("unsupported occupancy cache version");
  Vec3 origin;
  for (int k = 0; k < 3; ++k) origin[k] = read_raw<double>(in);
  double cell_size = read_raw<double>(in);
  std::array<uint32_t, 3> dims;
  for (int k = 0; k < 3; ++k) dims[k] = read_raw<uint32_t>(in);
  VoxelGrid grid(origin, cell_size, dims);
  uint64_t nbytes = (grid.cell_count() + 7) / 8;
  in.read(reinterpret_cast<char*>(grid.bits_.data()), std::streamsize(nbytes));
  if (!in) throw ParseError("truncated occupancy cache: " + path);
  return grid;
}

}  // namespace navgym
