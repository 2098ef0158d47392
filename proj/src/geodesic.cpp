#include "arti/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "arti/error.hpp"

namespace arti {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

bool axis_test(const Vec3& axis, const Vec3& v0, const Vec3& v1, const Vec3& v2,
               const Vec3& half) {
  double p0 = axis.dot(v0), p1 = axis.dot(v1), p2 = axis.dot(v2);
  double lo = std::min({p0, p1, p2}), hi = std::max({p0, p1, p2});
  double r = half.x() * std::abs(axis.x()) + half.y() * std::abs(axis.y()) +
             half.z() * std::abs(axis.z());
  return lo <= r && hi >= -r;
}
}  // namespace

bool triangle_box_overlap(const Vec3& box_center, const Vec3& box_half, const Vec3& a,
                          const Vec3& b, const Vec3& c) {
  Vec3 v0 = a - box_center, v1 = b - box_center, v2 = c - box_center;
  // box face normals
  for (int i = 0; i < 3; ++i) {
    double lo = std::min({v0[i], v1[i], v2[i]}), hi = std::max({v0[i], v1[i], v2[i]});
    if (lo > box_half[i] || hi < -box_half[i]) return false;
  }
  // triangle normal
  Vec3 e0 = v1 - v0, e1 = v2 - v1, e2 = v0 - v2;
  Vec3 n = e0.cross(e1);
  if (!axis_test(n, v0, v1, v2, box_half)) return false;
  // nine cross-product axes
  const Vec3 axes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (const Vec3& u : axes)
    for (const Vec3& e : {e0, e1, e2}) {
      Vec3 axis = u.cross(e);
      if (axis.squaredNorm() < 1e-30) continue;
      if (!axis_test(axis, v0, v1, v2, box_half)) return false;
    }
  return true;
}

std::array<int, 3> VoxelGrid::cell_of(const Vec3& p) const {
  std::array<int, 3> out;
  for (int i = 0; i < 3; ++i) {
    int c = static_cast<int>(std::floor((p[i] + 0.5) * res));
    out[i] = std::clamp(c, 0, res - 1);
  }
  return out;
}

int VoxelGrid::count(Cell kind) const {
  return static_cast<int>(std::count(cells.begin(), cells.end(), kind));
}

VoxelGrid voxelize(const Mesh& mesh, int resolution) {
  mesh.validate();
  if (resolution < 8) throw_data("voxelize: resolution must be >= 8");
  VoxelGrid grid;
  grid.res = resolution;
  grid.cells.assign(static_cast<size_t>(resolution) * resolution * resolution, Cell::exterior);
  const double cs = grid.cell_size();
  const Vec3 half = Vec3::Constant(0.5 * cs);

  for (const auto& f : mesh.faces) {
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
    Vec3 lo = a.cwiseMin(b).cwiseMin(c), hi = a.cwiseMax(b).cwiseMax(c);
    auto clo = grid.cell_of(lo), chi = grid.cell_of(hi);
    for (int z = clo[2]; z <= chi[2]; ++z)
      for (int y = clo[1]; y <= chi[1]; ++y)
        for (int x = clo[0]; x <= chi[0]; ++x) {
          int idx = grid.index(x, y, z);
          if (grid.cells[idx] == Cell::surface) continue;
          if (triangle_box_overlap(grid.center(x, y, z), half, a, b, c))
            grid.cells[idx] = Cell::surface;
        }
  }

  // flood fill exterior from the grid border through non-surface cells
  std::vector<uint8_t> outside(grid.cells.size(), 0);
  std::queue<std::array<int, 3>> q;
  auto push = [&](int x, int y, int z) {
    int idx = grid.index(x, y, z);
    if (outside[idx] || grid.cells[idx] == Cell::surface) return;
    outside[idx] = 1;
    q.push({x, y, z});
  };
  for (int a1 = 0; a1 < resolution; ++a1)
    for (int a2 = 0; a2 < resolution; ++a2) {
      push(0, a1, a2);
      push(resolution - 1, a1, a2);
      push(a1, 0, a2);
      push(a1, resolution - 1, a2);
      push(a1, a2, 0);
      push(a1, a2, resolution - 1);
    }
  const int dx[6] = {1, -1, 0, 0, 0, 0};
  const int dy[6] = {0, 0, 1, -1, 0, 0};
  const int dz[6] = {0, 0, 0, 0, 1, -1};
  while (!q.empty()) {
    auto [x, y, z] = q.front();
    q.pop();
    for (int d = 0; d < 6; ++d) {
      int nx = x + dx[d], ny = y + dy[d], nz = z + dz[d];
      if (nx < 0 || ny < 0 || nz < 0 || nx >= resolution || ny >= resolution || nz >= resolution)
        continue;
      push(nx, ny, nz);
    }
  }
  for (size_t i = 0; i < grid.cells.size(); ++i)
    if (grid.cells[i] != Cell::surface && !outside[i]) grid.cells[i] = Cell::interior;
  return grid;
}

namespace {

// nearest cell of the given kinds to a point, by center distance, lowest index ties
int nearest_cell(const VoxelGrid& grid, const Vec3& p, bool surface_only) {
  int best = -1;
  double best_d = kInf;
  for (int z = 0; z < grid.res; ++z)
    for (int y = 0; y < grid.res; ++y)
      for (int x = 0; x < grid.res; ++x) {
        Cell c = grid.at(x, y, z);
        if (c == Cell::exterior) continue;
        if (surface_only && c != Cell::surface) continue;
        double d = (grid.center(x, y, z) - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = grid.index(x, y, z);
        }
      }
  return best;
}

// non-exterior cells in the 3^3 neighborhood of the point's containing cell
std::vector<int> cell_neighborhood(const VoxelGrid& grid, const Vec3& p) {
  auto [cx, cy, cz] = grid.cell_of(p);
  std::vector<int> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int x = cx + dx, y = cy + dy, z = cz + dz;
        if (x < 0 || y < 0 || z < 0 || x >= grid.res || y >= grid.res || z >= grid.res)
          continue;
        if (grid.at(x, y, z) != Cell::exterior) out.push_back(grid.index(x, y, z));
      }
  return out;
}

std::vector<double> dijkstra(const VoxelGrid& grid,
                             const std::vector<std::pair<int, double>>& seeds) {
  const int res = grid.res;
  std::vector<double> dist(grid.cells.size(), kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (auto [idx, d] : seeds)
    if (d < dist[idx]) {
      dist[idx] = d;
      pq.emplace(d, idx);
    }
  const double cs = grid.cell_size();
  while (!pq.empty()) {
    auto [d, idx] = pq.top();
    pq.pop();
    if (d > dist[idx]) continue;
    int x = idx % res, y = (idx / res) % res, z = idx / (res * res);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          int nx = x + dx, ny = y + dy, nz = z + dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= res || ny >= res || nz >= res) continue;
          int nidx = grid.index(nx, ny, nz);
          if (grid.cells[nidx] == Cell::exterior) continue;
          double w = cs * std::sqrt(double(dx * dx + dy * dy + dz * dz));
          if (dist[idx] + w < dist[nidx]) {
            dist[nidx] = dist[idx] + w;
            pq.emplace(dist[nidx], nidx);
          }
        }
  }
  return dist;
}

}  // namespace

Mat volumetric_geodesic(const VoxelGrid& grid, const Mesh& mesh, const Skeleton& skeleton) {
  if (grid.count(Cell::surface) == 0 && grid.count(Cell::interior) == 0)
    throw_data("volumetric_geodesic: grid has no surface or interior cells");
  const int v = static_cast<int>(mesh.vertices.size());
  const int n = static_cast<int>(skeleton.joints.size());

  auto center_of = [&](int idx) {
    return grid.center(idx % grid.res, (idx / grid.res) % grid.res,
                       idx / (grid.res * grid.res));
  };

  // candidate read-out cells per vertex: the 3^3 neighborhood, or the nearest
  // surface cell when the vertex landed fully outside
  std::vector<std::vector<int>> vertex_cells(v);
  for (int i = 0; i < v; ++i) {
    vertex_cells[i] = cell_neighborhood(grid, mesh.vertices[i]);
    if (vertex_cells[i].empty())
      vertex_cells[i].push_back(nearest_cell(grid, mesh.vertices[i], true));
  }

  Mat raw(v, n);
  for (int j = 0; j < n; ++j) {
    // seed every nearby cell with its Euclidean offset from the joint; this
    // keeps the estimate within the chamfer-metric error of the true geodesic
    std::vector<std::pair<int, double>> seeds;
    for (int idx : cell_neighborhood(grid, skeleton.joints[j]))
      seeds.emplace_back(idx, (skeleton.joints[j] - center_of(idx)).norm());
    if (seeds.empty()) {
      int idx = nearest_cell(grid, skeleton.joints[j], false);
      seeds.emplace_back(idx, (skeleton.joints[j] - center_of(idx)).norm());
    }
    auto dist = dijkstra(grid, seeds);
    for (int i = 0; i < v; ++i) {
      double best = kInf;
      for (int idx : vertex_cells[i])
        best = std::min(best, dist[idx] + (mesh.vertices[i] - center_of(idx)).norm());
      raw(i, j) = best;
    }
  }
  return raw;
}

GeodesicPrior build_prior(const Mat& raw, const std::vector<bool>& joint_mask, double sharpness,
                          double clamp_floor, const std::vector<Vec3>& vertices,
                          const std::vector<Vec3>& joints) {
  if (sharpness <= 0) throw_data("build_prior: sharpness must be positive");
  if (static_cast<int>(joint_mask.size()) != raw.cols())
    throw_data("build_prior: joint mask size mismatch");
  const int v = static_cast<int>(raw.rows()), n = static_cast<int>(raw.cols());
  int valid = 0;
  for (bool m : joint_mask) valid += m;
  if (valid == 0) throw_data("build_prior: no valid joints");

  GeodesicPrior prior;
  prior.joint_mask = joint_mask;
  prior.raw = raw;
  prior.weights = Mat::Zero(v, n);
  for (int i = 0; i < v; ++i) {
    bool all_inf = true;
    for (int j = 0; j < n; ++j)
      if (joint_mask[j] && std::isfinite(raw(i, j))) all_inf = false;
    if (all_inf) {
      if (static_cast<int>(vertices.size()) != v || static_cast<int>(joints.size()) != n)
        throw_data("build_prior: disconnected vertex but no positions for fallback");
      for (int j = 0; j < n; ++j)
        if (joint_mask[j]) prior.raw(i, j) = (vertices[i] - joints[j]).norm();
      prior.fallback_vertices.push_back(i);
    }
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!joint_mask[j]) continue;
      double d = std::max(prior.raw(i, j), clamp_floor);
      double w = std::isfinite(d) ? std::pow(d, -sharpness) : 0.0;
      prior.weights(i, j) = w;
      total += w;
    }
    if (total <= 0) throw_data("build_prior: degenerate row (no finite distances)");
    prior.weights.row(i) /= total;
  }
  return prior;
}

Mat gvb_baseline(const GeodesicPrior& prior, int k_nearest) {
  if (k_nearest < 1) throw_data("gvb_baseline: k_nearest must be >= 1");
  const int v = static_cast<int>(prior.weights.rows()), n = static_cast<int>(prior.weights.cols());
  Mat out = Mat::Zero(v, n);
  for (int i = 0; i < v; ++i) {
    std::vector<int> order;
    for (int j = 0; j < n; ++j)
      if (prior.joint_mask[j]) order.push_back(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return prior.raw(i, a) < prior.raw(i, b); });
    int k = std::min<int>(k_nearest, static_cast<int>(order.size()));
    double total = 0.0;
    for (int r = 0; r < k; ++r) total += prior.weights(i, order[r]);
    if (total <= 0) {
      // prior carried no mass on the kept joints; split evenly
      for (int r = 0; r < k; ++r) out(i, order[r]) = 1.0 / k;
    } else {
      for (int r = 0; r < k; ++r) out(i, order[r]) = prior.weights(i, order[r]) / total;
    }
  }
  return out;
}

}  // namespace arti
