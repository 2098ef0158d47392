#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arti/animation.hpp"
#include "arti/geometry.hpp"

namespace arti {

enum class Topology { chain, star, biped, quadruped };

struct SynthSpec {
  Topology topology = Topology::chain;
  int min_joints = 4;
  int max_joints = 9;          // clamped to [3, 55] overall
  double min_limb = 0.6;       // model units, pre-normalization
  double max_limb = 1.2;
  double tube_radius = 0.22;
  uint64_t seed = 0;
};

// Capsule-union mesh around a procedurally grown tree skeleton with analytic
// smooth-falloff skinning weights. Deterministic per seed; the returned asset
// is normalized to the unit cube.
RiggedAsset generate(const SynthSpec& spec);

Topology topology_from_name(const std::string& name);
std::string topology_name(Topology t);

struct CorpusEntry {
  std::string id;
  std::string obj_path;
  std::string rig_path;
  std::string points_path;
  std::string spatial_tokens_path;
  std::string hierarchical_tokens_path;
};

// Writes OBJ + rig JSON + point cloud + token lines per asset and a manifest
// with FNV-1a checksums. Returns the manifest path.
std::string build_corpus(const std::vector<SynthSpec>& specs, const std::string& output_dir,
                         int point_count, uint64_t sample_seed = 0);

}  // namespace arti
