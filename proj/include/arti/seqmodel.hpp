#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "arti/autograd.hpp"
#include "arti/geometry.hpp"
#include "arti/sequencer.hpp"

namespace arti {

struct SeqModelConfig {
  int vocab = kVocabSize;
  int layers = 2;
  int heads = 4;
  int width = 128;
  int context = 896;        // shape tokens + 6*100 + 2 + slack
  int shape_groups = 256;   // FPS groups; shape tokens = groups + 1
  int encoder_hidden = 64;
  int mlp_mult = 4;
  int n_points = 8192;

  int shape_tokens() const { return shape_groups + 1; }
};

struct SamplingConfig {
  double temperature = 0.0;  // 0 -> greedy
  uint64_t seed = 0;
  int max_tokens = 602;      // 6*100 + 2, the <=100-bone corpus bound
};

struct SampleResult {
  TokenSequence sequence;
  bool truncated = false;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  int batch_size = 4;
  int steps = 2000;
  uint64_t seed = 0;
  bool augment_scale = false;
  bool augment_shift = false;
  bool augment_rotate = false;
};

// One training sample: a point cloud paired with its token sequence.
struct SeqSample {
  Mat points;               // v x 3
  std::vector<int> tokens;  // BOS ... EOS, optionally PAD-extended
};

// Shape-conditioned decoder-only transformer over skeleton tokens, with a
// farthest-point-sampling group encoder producing the shape prefix.
class SeqModel {
 public:
  SeqModelConfig cfg;
  ad::ParamSet params;

  void init(uint64_t seed);

  // v x 3 -> shape_tokens() x width graph node
  ad::NodePtr encode_shape(const Mat& points) const;
  Mat encode_shape_values(const PointCloud& pc) const;

  // Rows 0..L over the vocab: row k is the next-token logit row after
  // consuming prefix tokens < k (row 0 is conditioned on shape alone).
  ad::NodePtr next_token_logits(const ad::NodePtr& shape_tokens,
                                const std::vector<int>& prefix) const;

  // Pooled next-token cross entropy over the batch; PAD targets are masked.
  ad::NodePtr batch_loss(const std::vector<SeqSample>& batch) const;

  double training_step(const std::vector<SeqSample>& batch, ad::Adam& opt);

  // Fraction of supervised positions predicted correctly under teacher forcing.
  double teacher_forced_accuracy(const std::vector<SeqSample>& samples) const;

  SampleResult sample_skeleton(const Mat& points, const SamplingConfig& sampling,
                               OrderingMode mode) const;
};

// Farthest point sampling; deterministic, starts from index 0, ties -> lowest.
std::vector<int> farthest_point_indices(const Mat& points, int count);

// Training-time augmentation: uniform scale, shift, yaw rotation, then
// re-normalization into the unit cube.
std::pair<Mesh, Skeleton> augment_scene(const Mesh& mesh, const Skeleton& skeleton,
                                        const TrainingConfig& cfg, std::mt19937_64& rng);

}  // namespace arti
