#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace arti {

using Vec3 = Eigen::Vector3d;
using Mat = Eigen::MatrixXd;

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  // Throws Error(data) on any structural violation.
  void validate() const;
};

struct Skeleton {
  std::vector<Vec3> joints;
  std::vector<std::pair<int, int>> bones;
  std::optional<int> root;
  std::map<int, int> parent;  // child joint -> parent joint, empty if unknown

  void validate() const;
  bool has_hierarchy() const { return root.has_value(); }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;        // per-point face normal, unit length
  std::vector<int> source_vertex;   // nearest mesh vertex per point
};

// normalized = (p + translate) * scale
struct NormalizationTransform {
  Vec3 translate = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p + translate) * scale; }
  Vec3 invert(const Vec3& p) const { return p / scale - translate; }
};

struct NormalizedScene {
  Mesh mesh;
  std::optional<Skeleton> skeleton;
  NormalizationTransform transform;
};

// Uniform scale + recenter so the mesh bbox fits in [-0.5,0.5]^3 with the
// longest axis spanning exactly [-0.5,0.5]. Recenters on the bbox center.
NormalizedScene normalize_to_unit_cube(const Mesh& mesh,
                                       const std::optional<Skeleton>& skeleton = std::nullopt);

// Area-weighted surface sampling, deterministic per seed. Each point carries
// its face normal and the index of the nearest mesh vertex (ties -> lowest).
PointCloud sample_surface(const Mesh& mesh, int count, uint64_t seed);

// Row i of the result is per_vertex_data.row(points.source_vertex[i]).
Mat nearest_vertex_transfer(const PointCloud& points, const Mat& per_vertex_data);

// Exact nearest vertex by Euclidean distance, ties broken by lowest index.
int nearest_vertex(const std::vector<Vec3>& vertices, const Vec3& query);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace arti
