#include "arti/geodesic.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

#include "arti/error.hpp"

using namespace arti;

namespace {

Mesh box(const Vec3& lo, const Vec3& hi) {
  Mesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(),
                            i & 4 ? hi.z() : lo.z());
  m.faces = {{0, 1, 3}, {0, 3, 2}, {4, 7, 5}, {4, 6, 7}, {0, 5, 1}, {0, 4, 5},
             {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
  return m;
}

void append_box(Mesh& m, const Vec3& lo, const Vec3& hi) {
  Mesh b = box(lo, hi);
  int base = static_cast<int>(m.vertices.size());
  m.vertices.insert(m.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (auto f : b.faces) m.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

Mesh uv_sphere(double r, int stacks = 24, int slices = 32) {
  Mesh m;
  m.vertices.emplace_back(0, 0, r);
  for (int s = 1; s < stacks; ++s) {
    double phi = M_PI * s / stacks;
    for (int t = 0; t < slices; ++t) {
      double th = 2 * M_PI * t / slices;
      m.vertices.emplace_back(r * std::sin(phi) * std::cos(th),
                              r * std::sin(phi) * std::sin(th), r * std::cos(phi));
    }
  }
  m.vertices.emplace_back(0, 0, -r);
  int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](int s, int t) { return 1 + (s - 1) * slices + (t % slices); };
  for (int t = 0; t < slices; ++t) m.faces.push_back({0, ring(1, t), ring(1, t + 1)});
  for (int s = 1; s + 1 < stacks; ++s)
    for (int t = 0; t < slices; ++t) {
      m.faces.push_back({ring(s, t), ring(s + 1, t), ring(s, t + 1)});
      m.faces.push_back({ring(s, t + 1), ring(s + 1, t), ring(s + 1, t + 1)});
    }
  for (int t = 0; t < slices; ++t) m.faces.push_back({south, ring(stacks - 1, t + 1), ring(stacks - 1, t)});
  return m;
}

// Independent oracle: Bellman-Ford relaxation over the same voxel graph,
// repeated until fixpoint, plus the same snap rules as the implementation.
Mat bellman_ford_geodesic(const VoxelGrid& grid, const Mesh& mesh, const Skeleton& skeleton) {
  const int res = grid.res;
  const double cs = grid.cell_size();
  auto passable = [&](int idx) { return grid.cells[idx] != Cell::exterior; };
  auto nearest = [&](const Vec3& p, bool surface_only) {
    int best = -1;
    double bd = 1e300;
    for (int z = 0; z < res; ++z)
      for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) {
          Cell c = grid.at(x, y, z);
          if (c == Cell::exterior) continue;
          if (surface_only && c != Cell::surface) continue;
          double d = (grid.center(x, y, z) - p).squaredNorm();
          if (d < bd) {
            bd = d;
            best = grid.index(x, y, z);
          }
        }
    return best;
  };
  auto center = [&](int idx) {
    return grid.center(idx % res, (idx / res) % res, idx / (res * res));
  };

  auto neighborhood = [&](const Vec3& p) {
    auto [cx, cy, cz] = grid.cell_of(p);
    std::vector<int> out;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int x = cx + dx, y = cy + dy, z = cz + dz;
          if (x < 0 || y < 0 || z < 0 || x >= res || y >= res || z >= res) continue;
          if (passable(grid.index(x, y, z))) out.push_back(grid.index(x, y, z));
        }
    return out;
  };

  Mat raw(mesh.vertices.size(), skeleton.joints.size());
  for (size_t j = 0; j < skeleton.joints.size(); ++j) {
    std::vector<double> dist(grid.cells.size(), 1e300);
    auto seeds = neighborhood(skeleton.joints[j]);
    if (seeds.empty()) seeds.push_back(nearest(skeleton.joints[j], false));
    for (int idx : seeds)
      dist[idx] = std::min(dist[idx], (skeleton.joints[j] - center(idx)).norm());
    bool changed = true;
    while (changed) {
      changed = false;
      for (int cz = 0; cz < res; ++cz)
        for (int cy = 0; cy < res; ++cy)
          for (int cx = 0; cx < res; ++cx) {
            int idx = grid.index(cx, cy, cz);
            if (!passable(idx) || dist[idx] >= 1e300) continue;
            for (int dz = -1; dz <= 1; ++dz)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                  if (!dx && !dy && !dz) continue;
                  int nx = cx + dx, ny = cy + dy, nz = cz + dz;
                  if (nx < 0 || ny < 0 || nz < 0 || nx >= res || ny >= res || nz >= res)
                    continue;
                  int nidx = grid.index(nx, ny, nz);
                  if (!passable(nidx)) continue;
                  double w = cs * std::sqrt(double(dx * dx + dy * dy + dz * dz));
                  if (dist[idx] + w < dist[nidx]) {
                    dist[nidx] = dist[idx] + w;
                    changed = true;
                  }
                }
          }
    }
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
      auto cells = neighborhood(mesh.vertices[i]);
      if (cells.empty()) cells.push_back(nearest(mesh.vertices[i], true));
      double best = 1e300;
      for (int idx : cells)
        best = std::min(best, dist[idx] + (mesh.vertices[i] - center(idx)).norm());
      raw(i, j) = best >= 1e300 ? std::numeric_limits<double>::infinity() : best;
    }
  }
  return raw;
}

Skeleton two_joints(const Vec3& a, const Vec3& b) {
  Skeleton s;
  s.joints = {a, b};
  s.bones = {{0, 1}};
  return s;
}

}  // namespace

TEST_CASE("triangle-box SAT: direct cases") {
  Vec3 half(0.5, 0.5, 0.5);
  // triangle through the box
  CHECK(triangle_box_overlap(Vec3::Zero(), half, Vec3(-2, 0, 0), Vec3(2, 0.1, 0),
                             Vec3(0, 0, 2)));
  // triangle fully outside
  CHECK_FALSE(triangle_box_overlap(Vec3::Zero(), half, Vec3(2, 2, 2), Vec3(3, 2, 2),
                                   Vec3(2, 3, 2)));
  // triangle touching a face (inclusive)
  CHECK(triangle_box_overlap(Vec3::Zero(), half, Vec3(0.5, -1, -1), Vec3(0.5, 1, -1),
                             Vec3(0.5, 0, 1)));
  // plane separates: triangle beyond +x face
  CHECK_FALSE(triangle_box_overlap(Vec3::Zero(), half, Vec3(0.51, -1, -1), Vec3(0.51, 1, -1),
                                   Vec3(0.51, 0, 1)));
  // cross-axis separation
  CHECK_FALSE(triangle_box_overlap(Vec3::Zero(), half, Vec3(1.2, 1.2, 0), Vec3(0, 2.4, 0),
                                   Vec3(2.4, 0, 0)));
}

TEST_CASE("voxelize: resolution guard and solid cube volume") {
  Mesh cube = box(Vec3(-0.25, -0.25, -0.25), Vec3(0.25, 0.25, 0.25));
  CHECK_THROWS_AS(voxelize(cube, 7), Error);

  VoxelGrid grid = voxelize(cube, 32);
  // the cube spans 16 cells per axis; interior within one voxel shell of 16^3
  int interior = grid.count(Cell::interior);
  CHECK(interior >= 12 * 12 * 12);
  CHECK(interior <= 16 * 16 * 16);
  int solid = interior + grid.count(Cell::surface);
  CHECK(solid >= 16 * 16 * 16);
  CHECK(solid <= 18 * 18 * 18);
}

TEST_CASE("voxelize: open surface encloses nothing") {
  Mesh tri;
  tri.vertices = {Vec3(-0.4, -0.4, 0), Vec3(0.4, -0.4, 0), Vec3(0, 0.4, 0.1)};
  tri.faces = {{0, 1, 2}};
  VoxelGrid grid = voxelize(tri, 16);
  CHECK(grid.count(Cell::interior) == 0);
  CHECK(grid.count(Cell::surface) > 0);
}

TEST_CASE("voxelize: sphere volume fraction within 10% at 64^3") {
  Mesh sphere = uv_sphere(0.5);
  VoxelGrid grid = voxelize(sphere, 64);
  double total = 64.0 * 64 * 64;
  double analytic = (4.0 / 3.0) * M_PI * 0.125;  // ~0.5236 of the unit cube
  double solid = (grid.count(Cell::interior) + grid.count(Cell::surface)) / total;
  CHECK(solid == doctest::Approx(analytic).epsilon(0.10));
}

TEST_CASE("geodesic on a straight bar is Euclidean up to a voxel diagonal") {
  // resolution 16: the 26-connectivity chamfer error (<= ~8% of path length)
  // stays under one voxel diagonal for paths inside the unit cube
  Mesh bar = box(Vec3(-0.5, -0.1, -0.1), Vec3(0.5, 0.1, 0.1));
  VoxelGrid grid = voxelize(bar, 16);
  Skeleton s = two_joints(Vec3(-0.45, 0, 0), Vec3(0.45, 0, 0));
  Mat raw = volumetric_geodesic(grid, bar, s);
  for (size_t i = 0; i < bar.vertices.size(); ++i)
    for (int j = 0; j < 2; ++j) {
      double euclid = (bar.vertices[i] - s.joints[j]).norm();
      CHECK(std::abs(raw(i, j) - euclid) <= grid.voxel_diagonal() + 1e-12);
      // lower bound invariant
      CHECK(raw(i, j) >= euclid - grid.voxel_diagonal());
    }
}

TEST_CASE("L-shape: matches the Bellman-Ford oracle and exceeds Euclidean") {
  Mesh L;
  append_box(L, Vec3(-0.5, -0.1, -0.5), Vec3(-0.3, 0.1, 0.5));   // vertical arm
  append_box(L, Vec3(-0.5, -0.1, -0.5), Vec3(0.5, 0.1, -0.3));   // horizontal arm
  VoxelGrid grid = voxelize(L, 16);
  Skeleton s = two_joints(Vec3(-0.4, 0, 0.45), Vec3(0.45, 0, -0.4));
  Mat raw = volumetric_geodesic(grid, L, s);
  Mat oracle = bellman_ford_geodesic(grid, L, s);
  for (int i = 0; i < raw.rows(); ++i)
    for (int j = 0; j < raw.cols(); ++j) CHECK(raw(i, j) == oracle(i, j));

  // tip of one arm to joint at the other tip must route around the corner
  int far_tip = 0;
  double best = -1;
  for (size_t i = 0; i < L.vertices.size(); ++i) {
    double d = (L.vertices[i] - Vec3(0.5, 0, -0.3)).squaredNorm();
    if (L.vertices[i].x() > 0.4 && d < 0.1 && L.vertices[i].z() > -0.35) {
      far_tip = static_cast<int>(i);
      best = d;
    }
  }
  REQUIRE(best >= 0);
  double euclid = (L.vertices[far_tip] - s.joints[0]).norm();
  CHECK(raw(far_tip, 0) > euclid + grid.voxel_diagonal());
}

TEST_CASE("random solid shapes match the Bellman-Ford oracle exactly") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(-0.45, 0.45);
  for (int trial = 0; trial < 6; ++trial) {
    Mesh m;
    int boxes = 1 + static_cast<int>(rng() % 2);
    for (int b = 0; b < boxes; ++b) {
      Vec3 a(uni(rng), uni(rng), uni(rng)), c(uni(rng), uni(rng), uni(rng));
      Vec3 lo = a.cwiseMin(c), hi = a.cwiseMax(c);
      for (int i = 0; i < 3; ++i)
        if (hi[i] - lo[i] < 0.15) hi[i] = std::min(0.5, lo[i] + 0.15);
      append_box(m, lo, hi);
    }
    int res = 8 + static_cast<int>(rng() % 9);  // 8..16
    VoxelGrid grid = voxelize(m, res);
    Skeleton s = two_joints(Vec3(uni(rng), uni(rng), uni(rng)),
                            Vec3(uni(rng), uni(rng), uni(rng)));
    Mat raw = volumetric_geodesic(grid, m, s);
    Mat oracle = bellman_ford_geodesic(grid, m, s);
    for (int i = 0; i < raw.rows(); ++i)
      for (int j = 0; j < raw.cols(); ++j) {
        if (std::isinf(oracle(i, j)))
          CHECK(std::isinf(raw(i, j)));
        else
          CHECK(raw(i, j) == oracle(i, j));
      }
  }
}

TEST_CASE("joint sharing a vertex cell gives a sub-diagonal distance") {
  Mesh cube = box(Vec3(-0.3, -0.3, -0.3), Vec3(0.3, 0.3, 0.3));
  VoxelGrid grid = voxelize(cube, 16);
  Vec3 corner = cube.vertices[0];
  Skeleton s = two_joints(corner + Vec3(0.001, 0.001, 0.001), Vec3(0, 0, 0));
  Mat raw = volumetric_geodesic(grid, cube, s);
  CHECK(raw(0, 0) <= grid.voxel_diagonal());
}

TEST_CASE("triangle inequality on probed vertex pairs") {
  Mesh cube = box(Vec3(-0.4, -0.2, -0.3), Vec3(0.4, 0.2, 0.3));
  VoxelGrid grid = voxelize(cube, 16);
  Skeleton s;
  s.joints = {Vec3(-0.3, 0, 0), Vec3(0.3, 0, 0), Vec3(0, 0.1, 0.2)};
  s.bones = {{0, 1}, {1, 2}};
  Mat raw = volumetric_geodesic(grid, cube, s);
  // d(j0 -> v) <= d(j0 -> j1-cell) + d(j1-cell -> v): approximate the middle
  // leg by treating joint 1 as a probe vertex of its own
  Mesh probes = cube;
  probes.vertices.push_back(s.joints[1]);
  Mat raw2 = volumetric_geodesic(grid, probes, s);
  int pj = static_cast<int>(probes.vertices.size()) - 1;
  for (size_t i = 0; i < cube.vertices.size(); ++i)
    CHECK(raw2(static_cast<int>(i), 0) <=
          raw2(pj, 0) + raw2(static_cast<int>(i), 1) + 2 * grid.voxel_diagonal() + 1e-12);
}

TEST_CASE("build_prior: closed-form rows") {
  std::vector<Vec3> verts = {Vec3::Zero()};
  std::vector<Vec3> joints = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};

  // equidistant pair, third masked
  Mat raw(1, 3);
  raw << 2.0, 2.0, 0.5;
  GeodesicPrior p = build_prior(raw, {true, true, false}, 2.0, 1e-3, verts, joints);
  CHECK(p.weights(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.weights(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.weights(0, 2) == 0.0);

  // single valid joint
  p = build_prior(raw, {false, true, false}, 2.0, 1e-3, verts, joints);
  CHECK(p.weights(0, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // d = (1, 2), sharpness 2 -> (0.8, 0.2)
  Mat d2(1, 2);
  d2 << 1.0, 2.0;
  p = build_prior(d2, {true, true}, 2.0, 1e-3, verts, {joints[0], joints[1]});
  CHECK(p.weights(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(p.weights(0, 1) == doctest::Approx(0.2).epsilon(1e-12));

  // clamp floor: distances below the floor behave as the floor
  Mat tiny(1, 2);
  tiny << 1e-12, 1.0;
  p = build_prior(tiny, {true, true}, 2.0, 0.1, verts, {joints[0], joints[1]});
  double w0 = std::pow(0.1, -2.0), w1 = 1.0;
  CHECK(p.weights(0, 0) == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-12));

  CHECK_THROWS_AS(build_prior(d2, {true, true}, -1.0, 1e-3, verts, joints), Error);
  CHECK_THROWS_AS(build_prior(d2, {false, false}, 2.0, 1e-3, verts, joints), Error);
}

TEST_CASE("build_prior: Euclidean fallback for disconnected vertices") {
  std::vector<Vec3> verts = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  std::vector<Vec3> joints = {Vec3(0, 1, 0), Vec3(0, 0, 2)};
  Mat raw(2, 2);
  double inf = std::numeric_limits<double>::infinity();
  raw << 1.0, 2.0, inf, inf;
  GeodesicPrior p = build_prior(raw, {true, true}, 2.0, 1e-3, verts, joints);
  REQUIRE(p.fallback_vertices == std::vector<int>{1});
  CHECK(p.raw(1, 0) == doctest::Approx((verts[1] - joints[0]).norm()).epsilon(1e-12));
  CHECK(p.weights.row(1).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("prior rows are simplex points and monotone in distance") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> uni(0.1, 3.0);
  Mat raw(20, 5);
  for (int i = 0; i < raw.size(); ++i) raw(i / 5, i % 5) = uni(rng);
  std::vector<Vec3> verts(20, Vec3::Zero());
  std::vector<Vec3> joints(5, Vec3::Zero());
  std::vector<bool> mask = {true, true, false, true, true};
  GeodesicPrior p = build_prior(raw, mask, 2.0, 1e-3, verts, joints);
  for (int i = 0; i < 20; ++i) {
    CHECK(p.weights.row(i).minCoeff() >= 0.0);
    CHECK(p.weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.weights(i, 2) == 0.0);
  }
  // decreasing one raw distance weakly increases that entry
  Mat closer = raw;
  closer(3, 1) *= 0.5;
  GeodesicPrior q = build_prior(closer, mask, 2.0, 1e-3, verts, joints);
  CHECK(q.weights(3, 1) >= p.weights(3, 1));
}

TEST_CASE("gvb baseline selection rules") {
  std::vector<Vec3> verts = {Vec3::Zero()};
  std::vector<Vec3> joints = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  Mat raw(1, 3);
  raw << 1.0, 2.0, 3.0;
  GeodesicPrior p = build_prior(raw, {true, true, true}, 2.0, 1e-3, verts, joints);

  Mat k1 = gvb_baseline(p, 1);
  CHECK(k1(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k1(0, 1) == 0.0);

  Mat k3 = gvb_baseline(p, 3);
  CHECK((k3 - p.weights).cwiseAbs().maxCoeff() < 1e-12);
  Mat k9 = gvb_baseline(p, 9);
  CHECK((k9 - p.weights).cwiseAbs().maxCoeff() < 1e-12);

  // two-joint (1,2) example, sharpness 2, k=2 -> (0.8, 0.2)
  Mat d2(1, 2);
  d2 << 1.0, 2.0;
  GeodesicPrior p2 = build_prior(d2, {true, true}, 2.0, 1e-3, verts, {joints[0], joints[1]});
  Mat k2 = gvb_baseline(p2, 2);
  CHECK(k2(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(k2(0, 1) == doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS_AS(gvb_baseline(p, 0), Error);
}
