#pragma once

#include <cstdint>
#include <vector>

#include "arti/geometry.hpp"

namespace arti {

// Per-joint rigid transform in a common frame, applied about the joint's rest
// position: v -> R*(v - rest) + rest + t.
struct Pose {
  std::vector<Eigen::Matrix3d> rotations;
  std::vector<Vec3> translations;

  static Pose identity(int joint_count);
  void validate() const;
};

struct RiggedAsset {
  Mesh mesh;
  Skeleton skeleton;
  Mat skin;  // v x n, rows on the simplex
  NormalizationTransform transform;

  void validate() const;
};

// Linear blend skinning.
Mesh lbs_deform(const RiggedAsset& asset, const Pose& pose);

// Per joint: rotation about a uniform random axis by an angle uniform in
// [-max_angle, max_angle] degrees. Hierarchical composition when the skeleton
// carries a parent map; free per-joint transforms otherwise.
std::vector<Pose> random_poses(const Skeleton& skeleton, int count, double max_angle_deg,
                               uint64_t seed);

// Compose per-joint local rotations (about rest positions) along the
// hierarchy into global rigid transforms.
Pose compose_hierarchical(const Skeleton& skeleton,
                          const std::vector<Eigen::Matrix3d>& local_rotations);

}  // namespace arti
