#pragma once

#include <vector>

#include "arti/animation.hpp"
#include "arti/geometry.hpp"

namespace arti {

// Chamfer metrics are symmetric: half the mean nearest distance in each
// direction. Values are in normalized units; reports scale by 1e2 for display.
struct SkeletonReport {
  double cd_j2j = 0.0;
  double cd_j2b = 0.0;
  double cd_b2b = 0.0;
};

struct SkinReport {
  double precision = 0.0;
  double recall = 0.0;
  double avg_l1 = 0.0;
  double avg_dist = 0.0;
  bool precision_undefined = false;  // empty predicted influence set
  bool recall_undefined = false;
};

double cd_j2j(const Skeleton& a, const Skeleton& b);
double cd_j2b(const Skeleton& a, const Skeleton& b, int samples_per_bone = 32);
double cd_b2b(const Skeleton& a, const Skeleton& b, int samples_per_bone = 32);

SkeletonReport evaluate_skeleton(const Skeleton& pred, const Skeleton& truth,
                                 int samples_per_bone = 32);

std::pair<double, double> skin_precision_recall(const Mat& pred, const Mat& truth,
                                                double threshold = 1e-4,
                                                bool* pred_empty = nullptr,
                                                bool* truth_empty = nullptr);
double skin_avg_l1(const Mat& pred, const Mat& truth);
double deformation_error(const RiggedAsset& pred, const RiggedAsset& truth,
                         const std::vector<Pose>& poses);

SkinReport evaluate_skin(const RiggedAsset& pred, const RiggedAsset& truth,
                         const std::vector<Pose>& poses, double threshold = 1e-4);

// Endpoint-inclusive uniform samples along every bone segment.
std::vector<Vec3> sample_bones(const Skeleton& s, int samples_per_bone);

}  // namespace arti
