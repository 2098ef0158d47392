#include "arti/animation.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "arti/error.hpp"

namespace arti {

Pose Pose::identity(int joint_count) {
  Pose p;
  p.rotations.assign(joint_count, Eigen::Matrix3d::Identity());
  p.translations.assign(joint_count, Vec3::Zero());
  return p;
}

void Pose::validate() const {
  if (rotations.size() != translations.size()) throw_data("pose: size mismatch");
  for (const auto& r : rotations) {
    if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-9)
      throw_data("pose: rotation block not orthonormal");
    if (r.determinant() < 0) throw_data("pose: rotation has negative determinant");
  }
}

void RiggedAsset::validate() const {
  mesh.validate();
  skeleton.validate();
  if (skin.rows() != static_cast<int>(mesh.vertices.size()))
    throw_data("rigged asset: skin row count != vertex count");
  if (skin.cols() < static_cast<int>(skeleton.joints.size()))
    throw_data("rigged asset: skin column count < joint count");
  for (int i = 0; i < skin.rows(); ++i) {
    if (skin.row(i).minCoeff() < -1e-9) throw_data("rigged asset: negative skin weight");
    if (std::abs(skin.row(i).sum() - 1.0) > 1e-6)
      throw_data("rigged asset: skin row does not sum to 1");
  }
}

Mesh lbs_deform(const RiggedAsset& asset, const Pose& pose) {
  const int n = static_cast<int>(asset.skeleton.joints.size());
  if (static_cast<int>(pose.rotations.size()) != n)
    throw_data("lbs_deform: pose joint count mismatch");
  if (asset.skin.rows() != static_cast<int>(asset.mesh.vertices.size()))
    throw_data("lbs_deform: skin/vertex count mismatch");
  if (asset.skin.cols() < n) throw_data("lbs_deform: skin column count < joint count");

  Mesh out;
  out.faces = asset.mesh.faces;
  out.vertices.resize(asset.mesh.vertices.size());
  for (size_t vi = 0; vi < asset.mesh.vertices.size(); ++vi) {
    const Vec3& v = asset.mesh.vertices[vi];
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < n; ++j) {
      double w = asset.skin(static_cast<int>(vi), j);
      if (w == 0.0) continue;
      const Vec3& rest = asset.skeleton.joints[j];
      acc += w * (pose.rotations[j] * (v - rest) + rest + pose.translations[j]);
    }
    out.vertices[vi] = acc;
  }
  return out;
}

Pose compose_hierarchical(const Skeleton& skeleton,
                          const std::vector<Eigen::Matrix3d>& local_rotations) {
  const int n = static_cast<int>(skeleton.joints.size());
  if (static_cast<int>(local_rotations.size()) != n)
    throw_data("compose_hierarchical: rotation count mismatch");

  // plain affine form A(v) = R v + c, composed parent-first
  std::vector<Eigen::Matrix3d> rot(n);
  std::vector<Vec3> off(n);
  std::vector<bool> done(n, false);

  std::function<void(int)> solve = [&](int j) {
    if (done[j]) return;
    const Vec3& rest = skeleton.joints[j];
    Eigen::Matrix3d local_r = local_rotations[j];
    Vec3 local_c = rest - local_r * rest;
    auto it = skeleton.parent.find(j);
    if (it == skeleton.parent.end()) {
      rot[j] = local_r;
      off[j] = local_c;
    } else {
      solve(it->second);
      rot[j] = rot[it->second] * local_r;
      off[j] = rot[it->second] * local_c + off[it->second];
    }
    done[j] = true;
  };
  for (int j = 0; j < n; ++j) solve(j);

  Pose pose;
  pose.rotations = rot;
  pose.translations.resize(n);
  for (int j = 0; j < n; ++j) {
    const Vec3& rest = skeleton.joints[j];
    pose.translations[j] = off[j] - rest + rot[j] * rest;
  }
  return pose;
}

std::vector<Pose> random_poses(const Skeleton& skeleton, int count, double max_angle_deg,
                               uint64_t seed) {
  skeleton.validate();
  const int n = static_cast<int>(skeleton.joints.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const bool hierarchical = skeleton.root.has_value() && !skeleton.parent.empty();

  std::vector<Pose> poses;
  poses.reserve(count);
  for (int p = 0; p < count; ++p) {
    std::vector<Eigen::Matrix3d> rots(n);
    for (int j = 0; j < n; ++j) {
      // uniform axis: z uniform in [-1,1], azimuth uniform in [0,2pi)
      double z = 2.0 * uni(rng) - 1.0;
      double phi = 2.0 * M_PI * uni(rng);
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vec3 axis(r * std::cos(phi), r * std::sin(phi), z);
      double angle = (2.0 * uni(rng) - 1.0) * max_angle_deg * M_PI / 180.0;
      rots[j] = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    }
    if (hierarchical) {
      poses.push_back(compose_hierarchical(skeleton, rots));
    } else {
      Pose pose;
      pose.rotations = std::move(rots);
      pose.translations.assign(n, Vec3::Zero());
      poses.push_back(std::move(pose));
    }
  }
  return poses;
}

}  // namespace arti
