#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "arti/geometry.hpp"

namespace arti {

enum class Cell : uint8_t { exterior = 0, surface = 1, interior = 2 };

// Regular grid over the normalized cube [-0.5,0.5]^3.
struct VoxelGrid {
  int res = 64;
  std::vector<Cell> cells;  // x-fastest: x + res*(y + res*z)

  double cell_size() const { return 1.0 / res; }
  double voxel_diagonal() const { return std::sqrt(3.0) / res; }
  int index(int x, int y, int z) const { return x + res * (y + res * z); }
  Cell at(int x, int y, int z) const { return cells[index(x, y, z)]; }
  Vec3 center(int x, int y, int z) const {
    return Vec3((x + 0.5) / res - 0.5, (y + 0.5) / res - 0.5, (z + 0.5) / res - 0.5);
  }
  // clamped containing cell of a point
  std::array<int, 3> cell_of(const Vec3& p) const;
  int count(Cell kind) const;
};

// Conservative surface marking (triangle-box SAT) + border flood fill.
VoxelGrid voxelize(const Mesh& mesh, int resolution);

// Raw volumetric geodesic distances, v x n. Per joint: Dijkstra over
// surface+interior cells, 26-connectivity, Euclidean edge costs, with
// Euclidean snap corrections at both ends. Unreachable pairs are +inf.
Mat volumetric_geodesic(const VoxelGrid& grid, const Mesh& mesh, const Skeleton& skeleton);

struct GeodesicPrior {
  Mat weights;  // v x n, rows sum to 1 over valid joints
  Mat raw;      // v x n raw distances (possibly Euclidean-fallback rows)
  std::vector<bool> joint_mask;
  std::vector<int> fallback_vertices;  // rows that fell back to Euclidean distances
};

// Inverse-power simplex normalization: G_ij = d_ij^-sharpness / sum_k, with
// distances clamped below at clamp_floor (one voxel edge). Vertices with all
// distances infinite fall back to Euclidean distances and are flagged.
GeodesicPrior build_prior(const Mat& raw, const std::vector<bool>& joint_mask, double sharpness,
                          double clamp_floor, const std::vector<Vec3>& vertices,
                          const std::vector<Vec3>& joints);

// Keep the k geodesically nearest valid joints per vertex, renormalize.
Mat gvb_baseline(const GeodesicPrior& prior, int k_nearest);

// Axis-aligned box vs triangle overlap (separating axis test), inclusive.
bool triangle_box_overlap(const Vec3& box_center, const Vec3& box_half, const Vec3& a,
                          const Vec3& b, const Vec3& c);

}  // namespace arti
