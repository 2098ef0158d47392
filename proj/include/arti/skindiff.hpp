#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "arti/autograd.hpp"
#include "arti/geodesic.hpp"
#include "arti/geometry.hpp"

namespace arti {

// DDPM schedule: linear betas, alpha(t) = sqrt(alpha_bar_t), sigma(t) =
// sqrt(1 - alpha_bar_t), with the t=0 limit pinned to (1, 0).
struct NoiseSchedule {
  int timesteps = 1000;
  std::vector<double> beta;       // beta[t-1] for t in [1,T]
  std::vector<double> alpha_bar;  // alpha_bar[t-1]

  static NoiseSchedule linear(int timesteps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);
  double abar(int t) const;
  double alpha(int t) const { return std::sqrt(abar(t)); }
  double sigma(int t) const { return std::sqrt(1.0 - abar(t)); }
};

// Function values at sampled domain points; masked columns are zero.
struct FunctionSample {
  Mat points;  // v x 3
  Mat values;  // v x n
  std::vector<bool> joint_mask;
};

struct DenoiserConfig {
  int n_joints = 55;
  int width = 128;
  int stages = 2;
  int subset = 512;  // pooling chunk along the canonical point order
  int latents = 8;
  int heads = 4;
  int time_freqs = 8;
  int shape_feature_dim = 128;
};

struct SkinCondition {
  std::vector<Vec3> joints;  // length n, masked entries ignored
  std::vector<bool> joint_mask;
  Mat shape_feature;  // 1 x shape_feature_dim
};

// Set-based x0-prediction denoiser, conditioned on joint coordinates and a
// global shape feature, time injected through adaptive layer normalization.
// Point-to-point communication goes through latent tokens pooled over the
// points in canonical (coordinate-sorted) order, which keeps the module
// exactly permutation-equivariant.
class Denoiser {
 public:
  DenoiserConfig cfg;
  ad::ParamSet params;

  void init(uint64_t seed);
  ad::NodePtr forward(const Mat& points, const Mat& noised_values, int t,
                      const SkinCondition& cond) const;
};

// f0 = 2*(W - G): both operands mapped to [-1,1] before the residual is taken.
FunctionSample normalize_weights(const Mat& weights, const GeodesicPrior& prior,
                                 const Mat& points);
// Recover W from f0 and the prior: W = f0/2 + G.
Mat weights_from_residual(const Mat& residual, const Mat& prior_weights);

FunctionSample forward_noise(const FunctionSample& f0, int t, const Mat& noise,
                             const NoiseSchedule& schedule);

struct SkinTrainItem {
  Mat points;  // v x 3
  Mat f0;      // v x n residual target
  SkinCondition cond;
};

double training_step_skin(Denoiser& model, const std::vector<SkinTrainItem>& batch,
                          const NoiseSchedule& schedule, ad::Adam& opt, std::mt19937_64& rng);

// DDPM ancestral sampling with x0-prediction re-noising on a uniform timestep
// sub-grid; output rows are clamped, masked, and renormalized to the simplex.
Mat sample_skin(const Denoiser& model, const Mat& points, const SkinCondition& cond,
                const Mat& prior_weights, const NoiseSchedule& schedule, int steps,
                uint64_t seed);

// Average point weights back onto mesh vertices; vertices with no assigned
// point copy the nearest assigned vertex. Rows renormalized.
Mat vertex_weights_from_points(const Mat& point_weights, const PointCloud& pc, const Mesh& mesh);

}  // namespace arti
