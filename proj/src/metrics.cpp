#include "arti/metrics.hpp"

#include <limits>

#include "arti/error.hpp"

namespace arti {

namespace {

double mean_nearest(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  double total = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).norm());
    total += best;
  }
  return total / from.size();
}

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  return 0.5 * mean_nearest(a, b) + 0.5 * mean_nearest(b, a);
}

}  // namespace

std::vector<Vec3> sample_bones(const Skeleton& s, int samples_per_bone) {
  if (s.bones.empty()) throw_data("bone sampling: skeleton has no bones");
  if (samples_per_bone < 2) throw_data("bone sampling: need at least 2 samples per bone");
  std::vector<Vec3> out;
  out.reserve(s.bones.size() * samples_per_bone);
  for (const auto& [a, b] : s.bones) {
    const Vec3 &p = s.joints[a], &q = s.joints[b];
    for (int k = 0; k < samples_per_bone; ++k) {
      double t = static_cast<double>(k) / (samples_per_bone - 1);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

double cd_j2j(const Skeleton& a, const Skeleton& b) {
  if (a.joints.empty() || b.joints.empty()) throw_data("cd_j2j: empty joint set");
  return chamfer(a.joints, b.joints);
}

double cd_j2b(const Skeleton& a, const Skeleton& b, int samples_per_bone) {
  if (a.joints.empty() || b.joints.empty()) throw_data("cd_j2b: empty joint set");
  auto sa = sample_bones(a, samples_per_bone);
  auto sb = sample_bones(b, samples_per_bone);
  return 0.5 * mean_nearest(a.joints, sb) + 0.5 * mean_nearest(b.joints, sa);
}

double cd_b2b(const Skeleton& a, const Skeleton& b, int samples_per_bone) {
  return chamfer(sample_bones(a, samples_per_bone), sample_bones(b, samples_per_bone));
}

SkeletonReport evaluate_skeleton(const Skeleton& pred, const Skeleton& truth,
                                 int samples_per_bone) {
  SkeletonReport r;
  r.cd_j2j = cd_j2j(pred, truth);
  r.cd_j2b = cd_j2b(pred, truth, samples_per_bone);
  r.cd_b2b = cd_b2b(pred, truth, samples_per_bone);
  return r;
}

std::pair<double, double> skin_precision_recall(const Mat& pred, const Mat& truth,
                                                double threshold, bool* pred_empty,
                                                bool* truth_empty) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw_data("skin_precision_recall: shape mismatch");
  int64_t np = 0, nt = 0, both = 0;
  for (int i = 0; i < pred.rows(); ++i)
    for (int j = 0; j < pred.cols(); ++j) {
      bool p = pred(i, j) > threshold;
      bool t = truth(i, j) > threshold;
      np += p;
      nt += t;
      both += p && t;
    }
  if (pred_empty) *pred_empty = (np == 0);
  if (truth_empty) *truth_empty = (nt == 0);
  double precision = np == 0 ? 0.0 : static_cast<double>(both) / np;
  double recall = nt == 0 ? 0.0 : static_cast<double>(both) / nt;
  return {precision, recall};
}

double skin_avg_l1(const Mat& pred, const Mat& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw_data("skin_avg_l1: shape mismatch");
  return (pred - truth).cwiseAbs().rowwise().sum().mean();
}

double deformation_error(const RiggedAsset& pred, const RiggedAsset& truth,
                         const std::vector<Pose>& poses) {
  if (poses.empty()) throw_data("deformation_error: empty pose list");
  if (pred.mesh.vertices.size() != truth.mesh.vertices.size())
    throw_data("deformation_error: meshes differ");
  double total = 0.0;
  for (const auto& pose : poses) {
    Mesh dp = lbs_deform(pred, pose);
    Mesh dt = lbs_deform(truth, pose);
    double acc = 0.0;
    for (size_t i = 0; i < dp.vertices.size(); ++i)
      acc += (dp.vertices[i] - dt.vertices[i]).norm();
    total += acc / dp.vertices.size();
  }
  return total / poses.size();
}

SkinReport evaluate_skin(const RiggedAsset& pred, const RiggedAsset& truth,
                         const std::vector<Pose>& poses, double threshold) {
  SkinReport r;
  auto [p, rec] =
      skin_precision_recall(pred.skin, truth.skin, threshold, &r.precision_undefined,
                            &r.recall_undefined);
  r.precision = p;
  r.recall = rec;
  r.avg_l1 = skin_avg_l1(pred.skin, truth.skin);
  r.avg_dist = deformation_error(pred, truth, poses);
  return r;
}

}  // namespace arti
