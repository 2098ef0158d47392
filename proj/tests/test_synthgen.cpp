#include "arti/synthgen.hpp"

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"

#include "arti/error.hpp"
#include "arti/rigio.hpp"
#include "arti/sequencer.hpp"

using namespace arti;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() / (std::string("synthgen_") + tag);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("topology names round trip") {
  for (Topology t : {Topology::chain, Topology::star, Topology::biped, Topology::quadruped})
    CHECK(topology_from_name(topology_name(t)) == t);
  CHECK_THROWS_AS(topology_from_name("centaur"), Error);
}

TEST_CASE("chain template contract: 3 joints, 2 bones, rooted tree") {
  SynthSpec spec;
  spec.topology = Topology::chain;
  spec.min_joints = spec.max_joints = 3;
  RiggedAsset a = generate(spec);
  CHECK(a.skeleton.joints.size() == 3);
  CHECK(a.skeleton.bones.size() == 2);
  REQUIRE(a.skeleton.root.has_value());
  CHECK(*a.skeleton.root == 0);
  CHECK(a.skeleton.parent.size() == 2);  // tree: every non-root joint has a parent
  CHECK(a.mesh.vertices.size() > 0);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("every template produces a valid asset within the size bounds") {
  for (Topology t : {Topology::chain, Topology::star, Topology::biped, Topology::quadruped}) {
    for (uint64_t seed = 0; seed < 4; ++seed) {
      SynthSpec spec;
      spec.topology = t;
      spec.seed = seed;
      RiggedAsset a = generate(spec);
      CHECK_NOTHROW(a.validate());
      CHECK(a.skeleton.joints.size() >= 3);
      CHECK(a.skeleton.joints.size() <= 55);
      CHECK(a.skeleton.bones.size() <= 100);
      CHECK(a.skeleton.parent.size() == a.skeleton.joints.size() - 1);
      // normalized to the unit cube
      for (const auto& v : a.mesh.vertices) CHECK(v.cwiseAbs().maxCoeff() <= 0.5 + 1e-9);
      // skinning weights touch at most two bones' child joints per vertex
      for (int i = 0; i < a.skin.rows(); ++i) {
        int nonzero = 0;
        for (int j = 0; j < a.skin.cols(); ++j) nonzero += a.skin(i, j) > 0.0;
        CHECK(nonzero <= 2);
        CHECK(nonzero >= 1);
      }
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  SynthSpec spec;
  spec.topology = Topology::star;
  spec.seed = 9;
  RiggedAsset a = generate(spec);
  RiggedAsset b = generate(spec);
  CHECK(a.mesh.vertices == b.mesh.vertices);
  CHECK(a.mesh.faces == b.mesh.faces);
  CHECK(a.skeleton.joints == b.skeleton.joints);
  CHECK(a.skin == b.skin);
  spec.seed = 10;
  RiggedAsset c = generate(spec);
  CHECK(a.skeleton.joints != c.skeleton.joints);
}

TEST_CASE("degenerate specs are rejected") {
  SynthSpec spec;
  spec.min_joints = 2;  // below the minimum of 3
  spec.max_joints = 2;
  CHECK_THROWS_AS(generate(spec), Error);
  SynthSpec inverted;
  inverted.min_joints = 9;
  inverted.max_joints = 4;
  CHECK_THROWS_AS(generate(inverted), Error);
  SynthSpec flat;
  flat.tube_radius = 0.0;
  CHECK_THROWS_AS(generate(flat), Error);
  SynthSpec too_many;
  too_many.min_joints = too_many.max_joints = 56;
  CHECK_THROWS_AS(generate(too_many), Error);
}

TEST_CASE("generated skeletons survive tokenize/detokenize round trips") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    SynthSpec spec;
    spec.topology = static_cast<Topology>(seed % 4);
    spec.seed = seed;
    RiggedAsset a = generate(spec);
    for (OrderingMode mode : {OrderingMode::spatial, OrderingMode::hierarchical}) {
      auto seq = tokenize(a.skeleton, mode);
      DetokenizeResult round = detokenize(seq);
      CHECK_FALSE(round.dropped_partial_bone);
      CHECK_FALSE(round.prefix_violation);
      CHECK_FALSE(round.dropped_degenerate);
      auto again = tokenize(round.skeleton, mode);
      CHECK(again.tokens == seq.tokens);
    }
  }
}

TEST_CASE("empty corpus: empty manifest, no asset files") {
  fs::path dir = temp_dir("empty");
  std::string manifest_path = build_corpus({}, dir.string(), 64);
  auto manifest = nlohmann::json::parse(read_file(manifest_path));
  CHECK(manifest["version"] == 1);
  CHECK(manifest["assets"].empty());
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    files++;
  }
  CHECK(files == 1);  // just the manifest
  fs::remove_all(dir);
}

TEST_CASE("corpus files exist, checksums match, and rebuilds are byte-identical") {
  std::vector<SynthSpec> specs;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    SynthSpec spec;
    spec.topology = static_cast<Topology>(seed % 4);
    spec.seed = seed;
    specs.push_back(spec);
  }
  fs::path dir = temp_dir("corpus");
  std::string manifest_path = build_corpus(specs, dir.string(), 64, 5);
  auto manifest = nlohmann::json::parse(read_file(manifest_path));
  REQUIRE(manifest["assets"].size() == 4);

  for (const auto& entry : manifest["assets"]) {
    CHECK(entry.contains("id"));
    CHECK(entry.contains("topology"));
    CHECK(entry.contains("seed"));
    for (const auto& [name, checksum] : entry["files"].items()) {
      fs::path p = dir / name;
      REQUIRE(fs::exists(p));
      char sum[32];
      std::snprintf(sum, sizeof(sum), "%016llx",
                    static_cast<unsigned long long>(fnv1a(read_file(p.string()))));
      CHECK(checksum.get<std::string>() == sum);
    }
    // the stored rig parses and matches the regenerated asset
    std::string id = entry["id"].get<std::string>();
    RigFile rig = read_rig((dir / (id + ".rig.json")).string());
    CHECK_NOTHROW(rig.skeleton.validate());
  }

  // re-run with the same seeds: byte-identical output
  fs::path dir2 = temp_dir("corpus2");
  build_corpus(specs, dir2.string(), 64, 5);
  for (const auto& e : fs::directory_iterator(dir)) {
    fs::path other = dir2 / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(read_file(e.path().string()) == read_file(other.string()));
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}
