#include "arti/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "arti/error.hpp"

namespace arti {

void Mesh::validate() const {
  if (vertices.size() < 3) throw_data("mesh needs at least 3 vertices");
  if (faces.empty()) throw_data("mesh needs at least 1 face");
  const int v = static_cast<int>(vertices.size());
  for (const auto& f : faces) {
    for (int idx : f)
      if (idx < 0 || idx >= v) throw_data("face index out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw_data("degenerate face (repeated vertex index)");
  }
}

void Skeleton::validate() const {
  const int j = static_cast<int>(joints.size());
  if (j < 2) throw_data("skeleton needs at least 2 joints");
  if (bones.empty()) throw_data("skeleton needs at least 1 bone");
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : bones) {
    if (a < 0 || a >= j || b < 0 || b >= j) throw_data("bone index out of range");
    if (a == b) throw_data("self-loop bone");
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second) throw_data("duplicate bone");
  }
  if (root) {
    if (*root < 0 || *root >= j) throw_data("root index out of range");
    // parent map must encode a forest reachable from root: walking up from
    // any child terminates without revisiting a node.
    for (const auto& [child, par] : parent) {
      if (child < 0 || child >= j || par < 0 || par >= j)
        throw_data("parent map index out of range");
      std::set<int> visited{child};
      int cur = child;
      while (true) {
        auto it = parent.find(cur);
        if (it == parent.end()) break;
        cur = it->second;
        if (!visited.insert(cur).second) throw_data("cycle in parent map");
      }
    }
  }
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

NormalizedScene normalize_to_unit_cube(const Mesh& mesh,
                                       const std::optional<Skeleton>& skeleton) {
  mesh.validate();
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const auto& p : mesh.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = hi - lo;
  const double longest = extent.maxCoeff();
  if (longest <= 0.0) throw_data("degenerate mesh: zero extent in all axes");

  NormalizationTransform tf;
  tf.translate = -0.5 * (lo + hi);
  tf.scale = 1.0 / longest;

  NormalizedScene out;
  out.transform = tf;
  out.mesh.faces = mesh.faces;
  out.mesh.vertices.reserve(mesh.vertices.size());
  for (const auto& p : mesh.vertices) out.mesh.vertices.push_back(tf.apply(p));
  if (skeleton) {
    Skeleton s = *skeleton;
    for (auto& p : s.joints) p = tf.apply(p);
    out.skeleton = std::move(s);
  }
  return out;
}

int nearest_vertex(const std::vector<Vec3>& vertices, const Vec3& query) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(vertices.size()); ++i) {
    double d = (vertices[i] - query).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

PointCloud sample_surface(const Mesh& mesh, int count, uint64_t seed) {
  mesh.validate();
  if (count <= 0) throw_data("sample count must be positive");

  std::vector<double> cum;
  cum.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    cum.push_back(total);
  }
  if (total <= 0.0) throw_data("mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  PointCloud pc;
  pc.points.reserve(count);
  pc.normals.reserve(count);
  pc.source_vertex.reserve(count);
  for (int i = 0; i < count; ++i) {
    double r = uni(rng) * total;
    int fi = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
    if (fi >= static_cast<int>(mesh.faces.size())) fi = static_cast<int>(mesh.faces.size()) - 1;
    const auto& f = mesh.faces[fi];
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
    // uniform barycentric via sqrt trick
    double su = std::sqrt(uni(rng));
    double v = uni(rng);
    double w0 = 1.0 - su, w1 = su * (1.0 - v), w2 = su * v;
    Vec3 p = w0 * a + w1 * b + w2 * c;
    Vec3 n = (b - a).cross(c - a);
    double nn = n.norm();
    pc.points.push_back(p);
    pc.normals.push_back(nn > 0 ? Vec3(n / nn) : Vec3(0, 0, 1));
    pc.source_vertex.push_back(nearest_vertex(mesh.vertices, p));
  }
  return pc;
}

Mat nearest_vertex_transfer(const PointCloud& points, const Mat& per_vertex_data) {
  Mat out(points.points.size(), per_vertex_data.cols());
  for (int i = 0; i < static_cast<int>(points.points.size()); ++i) {
    int sv = points.source_vertex[i];
    if (sv < 0 || sv >= per_vertex_data.rows())
      throw_data("source_vertex index out of range for per-vertex data");
    out.row(i) = per_vertex_data.row(sv);
  }
  return out;
}

}  // namespace arti
