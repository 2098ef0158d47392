#include "arti/synthgen.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include "arti/error.hpp"
#include "arti/rigio.hpp"
#include "arti/sequencer.hpp"

#include "json.hpp"

namespace arti {

namespace {

void orthonormal_basis(const Vec3& u, Vec3& v, Vec3& w) {
  Vec3 h = std::abs(u.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  v = u.cross(h).normalized();
  w = u.cross(v);
}

// closed capsule around segment [p,q]
void append_capsule(Mesh& mesh, const Vec3& p, const Vec3& q, double radius, int segments = 10,
                    int cap_rings = 3) {
  const int base = static_cast<int>(mesh.vertices.size());
  Vec3 u = q - p;
  double len = u.norm();
  if (len < 1e-12) throw_data("append_capsule: zero-length bone");
  u /= len;
  Vec3 v, w;
  orthonormal_basis(u, v, w);

  // ring stack from bottom pole to top pole
  std::vector<int> ring_start;
  auto add_ring = [&](const Vec3& center, double r) {
    ring_start.push_back(static_cast<int>(mesh.vertices.size()));
    for (int s = 0; s < segments; ++s) {
      double a = 2.0 * M_PI * s / segments;
      mesh.vertices.push_back(center + r * (std::cos(a) * v + std::sin(a) * w));
    }
  };

  mesh.vertices.push_back(p - radius * u);  // bottom pole
  const int bottom_pole = base;
  for (int i = cap_rings - 1; i >= 0; --i) {
    double a = (M_PI / 2.0) * i / cap_rings;  // 0 = equator
    add_ring(p - radius * std::sin(a) * u, radius * std::cos(a));
  }
  for (int i = 0; i < cap_rings; ++i) {
    double a = (M_PI / 2.0) * i / cap_rings;
    add_ring(q + radius * std::sin(a) * u, radius * std::cos(a));
  }
  mesh.vertices.push_back(q + radius * u);  // top pole
  const int top_pole = static_cast<int>(mesh.vertices.size()) - 1;

  auto ring_v = [&](int ring, int s) { return ring_start[ring] + (s % segments); };
  for (int s = 0; s < segments; ++s)
    mesh.faces.push_back({bottom_pole, ring_v(0, s + 1), ring_v(0, s)});
  for (size_t r = 0; r + 1 < ring_start.size(); ++r)
    for (int s = 0; s < segments; ++s) {
      mesh.faces.push_back({ring_v(r, s), ring_v(r, s + 1), ring_v(r + 1, s)});
      mesh.faces.push_back({ring_v(r + 1, s), ring_v(r, s + 1), ring_v(r + 1, s + 1)});
    }
  const int last = static_cast<int>(ring_start.size()) - 1;
  for (int s = 0; s < segments; ++s)
    mesh.faces.push_back({top_pole, ring_v(last, s), ring_v(last, s + 1)});
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double z = 2.0 * uni(rng) - 1.0;
  double phi = 2.0 * M_PI * uni(rng);
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

Skeleton make_chain(const SynthSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> jcount(spec.min_joints, spec.max_joints);
  std::uniform_real_distribution<double> limb(spec.min_limb, spec.max_limb);
  int n = jcount(rng);
  Skeleton s;
  s.joints.push_back(Vec3::Zero());
  Vec3 dir = Vec3::UnitZ();
  for (int i = 1; i < n; ++i) {
    dir = (dir + 0.45 * random_unit(rng)).normalized();
    s.joints.push_back(s.joints.back() + limb(rng) * dir);
    s.bones.emplace_back(i - 1, i);
    s.parent[i] = i - 1;
  }
  s.root = 0;
  return s;
}

Skeleton make_star(const SynthSpec& spec, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> jcount(spec.min_joints, spec.max_joints);
  std::uniform_real_distribution<double> limb(spec.min_limb, spec.max_limb);
  int n = jcount(rng);
  Skeleton s;
  s.joints.push_back(Vec3::Zero());
  s.root = 0;
  for (int i = 1; i < n; ++i) {
    s.joints.push_back(limb(rng) * random_unit(rng));
    s.bones.emplace_back(0, i);
    s.parent[i] = 0;
  }
  return s;
}

Skeleton make_biped(const SynthSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  double l = 0.5 * (spec.min_limb + spec.max_limb);
  auto j = [&]() { return jitter(rng); };
  Skeleton s;
  s.joints = {
      Vec3(0, 0, 0),                              // 0 pelvis
      Vec3(0, 0, 0.6 * l * j()),                  // 1 spine
      Vec3(0, 0, 1.2 * l * j()),                  // 2 chest
      Vec3(0, 0, 1.55 * l * j()),                 // 3 head
      Vec3(-0.45 * l * j(), 0, 1.15 * l),         // 4 shoulder L
      Vec3(-1.0 * l * j(), 0, 0.95 * l),          // 5 hand L
      Vec3(0.45 * l * j(), 0, 1.15 * l),          // 6 shoulder R
      Vec3(1.0 * l * j(), 0, 0.95 * l),           // 7 hand R
      Vec3(-0.25 * l * j(), 0, -0.15 * l),        // 8 hip L
      Vec3(-0.3 * l * j(), 0, -1.1 * l * j()),    // 9 foot L
      Vec3(0.25 * l * j(), 0, -0.15 * l),         // 10 hip R
      Vec3(0.3 * l * j(), 0, -1.1 * l * j()),     // 11 foot R
  };
  s.bones = {{0, 1}, {1, 2}, {2, 3}, {2, 4}, {4, 5}, {2, 6},
             {6, 7}, {0, 8}, {8, 9}, {0, 10}, {10, 11}};
  s.root = 0;
  for (const auto& [p, c] : s.bones) s.parent[c] = p;
  return s;
}

Skeleton make_quadruped(const SynthSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  double l = 0.5 * (spec.min_limb + spec.max_limb);
  double h = 1.0 * l;
  auto j = [&]() { return jitter(rng); };
  Skeleton s;
  s.joints = {
      Vec3(0, 0, h),                            // 0 pelvis
      Vec3(0.7 * l * j(), 0, h * 1.05),         // 1 mid spine
      Vec3(1.4 * l * j(), 0, h),                // 2 chest
      Vec3(1.8 * l * j(), 0, h + 0.35 * l),     // 3 head
      Vec3(-0.5 * l * j(), 0, h + 0.15 * l),    // 4 tail
      Vec3(-0.05 * l, -0.35 * l * j(), 0),      // 5 foot rear L
      Vec3(-0.05 * l, 0.35 * l * j(), 0),       // 6 foot rear R
      Vec3(1.45 * l, -0.35 * l * j(), 0),       // 7 foot front L
      Vec3(1.45 * l, 0.35 * l * j(), 0),        // 8 foot front R
  };
  s.bones = {{0, 1}, {1, 2}, {2, 3}, {0, 4}, {0, 5}, {0, 6}, {2, 7}, {2, 8}};
  s.root = 0;
  for (const auto& [p, c] : s.bones) s.parent[c] = p;
  return s;
}

double point_segment_distance(const Vec3& x, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double t = ab.squaredNorm() > 0 ? (x - a).dot(ab) / ab.squaredNorm() : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (x - (a + t * ab)).norm();
}

}  // namespace

Topology topology_from_name(const std::string& name) {
  if (name == "chain") return Topology::chain;
  if (name == "star") return Topology::star;
  if (name == "biped") return Topology::biped;
  if (name == "quadruped") return Topology::quadruped;
  throw_data("unknown topology: " + name);
}

std::string topology_name(Topology t) {
  switch (t) {
    case Topology::chain: return "chain";
    case Topology::star: return "star";
    case Topology::biped: return "biped";
    case Topology::quadruped: return "quadruped";
  }
  return "chain";
}

RiggedAsset generate(const SynthSpec& spec) {
  if (spec.min_joints < 3 || spec.max_joints > 55 || spec.min_joints > spec.max_joints)
    throw_data("synth spec: joint count range must lie in [3, 55]");
  if (spec.min_limb <= 0 || spec.max_limb < spec.min_limb || spec.tube_radius <= 0)
    throw_data("synth spec: degenerate limb or radius parameters");

  std::mt19937_64 rng(spec.seed);
  Skeleton skeleton;
  switch (spec.topology) {
    case Topology::chain: skeleton = make_chain(spec, rng); break;
    case Topology::star: skeleton = make_star(spec, rng); break;
    case Topology::biped: skeleton = make_biped(spec, rng); break;
    case Topology::quadruped: skeleton = make_quadruped(spec, rng); break;
  }
  skeleton.validate();

  Mesh mesh;
  for (const auto& [a, b] : skeleton.bones)
    append_capsule(mesh, skeleton.joints[a], skeleton.joints[b], spec.tube_radius);
  mesh.validate();

  // analytic skinning: smooth falloff to the two nearest bones, weight on the
  // bone's child joint
  const int n = static_cast<int>(skeleton.joints.size());
  const double r2 = spec.tube_radius * spec.tube_radius;
  Mat skin = Mat::Zero(mesh.vertices.size(), n);
  for (size_t vi = 0; vi < mesh.vertices.size(); ++vi) {
    std::vector<std::pair<double, int>> dists;  // (distance, bone)
    for (size_t bi = 0; bi < skeleton.bones.size(); ++bi) {
      const auto& [a, b] = skeleton.bones[bi];
      dists.emplace_back(
          point_segment_distance(mesh.vertices[vi], skeleton.joints[a], skeleton.joints[b]),
          static_cast<int>(bi));
    }
    std::partial_sort(dists.begin(), dists.begin() + std::min<size_t>(2, dists.size()),
                      dists.end());
    double total = 0.0;
    int k = std::min<int>(2, static_cast<int>(dists.size()));
    for (int i = 0; i < k; ++i) total += std::exp(-dists[i].first * dists[i].first / r2);
    for (int i = 0; i < k; ++i) {
      int child = skeleton.bones[dists[i].second].second;
      skin(static_cast<int>(vi), child) +=
          std::exp(-dists[i].first * dists[i].first / r2) / total;
    }
  }

  auto scene = normalize_to_unit_cube(mesh, skeleton);
  RiggedAsset asset;
  asset.mesh = std::move(scene.mesh);
  asset.skeleton = std::move(*scene.skeleton);
  asset.skin = std::move(skin);
  asset.transform = scene.transform;
  asset.validate();
  return asset;
}

std::string build_corpus(const std::vector<SynthSpec>& specs, const std::string& output_dir,
                         int point_count, uint64_t sample_seed) {
  namespace fs = std::filesystem;
  fs::create_directories(output_dir);

  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["assets"] = nlohmann::json::array();

  for (size_t i = 0; i < specs.size(); ++i) {
    RiggedAsset asset = generate(specs[i]);
    char id[32];
    std::snprintf(id, sizeof(id), "asset_%03zu", i);

    RigFile rig;
    rig.skeleton = asset.skeleton;
    rig.skin = asset.skin;
    rig.normalization = asset.transform;

    PointCloud pc = sample_surface(asset.mesh, point_count, sample_seed + i);

    std::map<std::string, std::string> contents;
    contents[std::string(id) + ".obj"] = obj_to_string(asset.mesh);
    contents[std::string(id) + ".rig.json"] = rig_to_json(rig);
    contents[std::string(id) + ".points.txt"] = points_to_string(pc);
    contents[std::string(id) + ".spatial.tokens"] =
        tokens_to_line(tokenize(asset.skeleton, OrderingMode::spatial)) + "\n";
    contents[std::string(id) + ".hier.tokens"] =
        tokens_to_line(tokenize(asset.skeleton, OrderingMode::hierarchical)) + "\n";

    nlohmann::json entry;
    entry["id"] = id;
    entry["topology"] = topology_name(specs[i].topology);
    entry["seed"] = specs[i].seed;
    for (const auto& [name, content] : contents) {
      atomic_write((fs::path(output_dir) / name).string(), content);
      char sum[32];
      std::snprintf(sum, sizeof(sum), "%016llx",
                    static_cast<unsigned long long>(fnv1a(content)));
      entry["files"][name] = sum;
    }
    manifest["assets"].push_back(entry);
  }

  std::string manifest_path = (fs::path(output_dir) / "manifest.json").string();
  atomic_write(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace arti
