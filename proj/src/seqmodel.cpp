#include "arti/seqmodel.hpp"

#include <cmath>
#include <limits>

#include "arti/error.hpp"

namespace arti {

using ad::NodePtr;

namespace {

std::string ln(int layer, const char* name) {
  return "layer" + std::to_string(layer) + "." + name;
}

NodePtr affine_ln(const NodePtr& x, const NodePtr& gain, const NodePtr& bias) {
  auto ones = ad::constant(Mat::Ones(1, gain->val.cols()));
  return ad::add_rowvec(ad::mul_rowvec(ad::layernorm_rows(x), ad::add(ones, gain)), bias);
}

Mat causal_mask(int t) {
  Mat m = Mat::Zero(t, t);
  for (int r = 0; r < t; ++r)
    for (int c = r + 1; c < t; ++c) m(r, c) = -1e30;
  return m;
}

}  // namespace

std::vector<int> farthest_point_indices(const Mat& points, int count) {
  const int v = static_cast<int>(points.rows());
  if (count > v) throw_data("farthest_point_indices: more centers than points");
  std::vector<int> centers;
  centers.reserve(count);
  std::vector<double> dist(v, std::numeric_limits<double>::infinity());
  int next = 0;
  for (int k = 0; k < count; ++k) {
    centers.push_back(next);
    double best = -1.0;
    int arg = 0;
    for (int i = 0; i < v; ++i) {
      double d = (points.row(i) - points.row(next)).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > best) {
        best = dist[i];
        arg = i;
      }
    }
    next = arg;
  }
  return centers;
}

void SeqModel::init(uint64_t seed) {
  params = ad::ParamSet();
  std::mt19937_64 rng(seed);
  const int w = cfg.width, h = cfg.encoder_hidden;
  params.add("tok_emb", cfg.vocab, w, 0.02, rng);
  params.add("pos_emb", cfg.context, w, 0.02, rng);
  params.add("enc_w1", 3, h, 0.5, rng);
  params.add_zeros("enc_b1", 1, h);
  params.add("enc_w2", h, w, 0.1, rng);
  params.add_zeros("enc_b2", 1, w);
  params.add("enc_wg", h, w, 0.1, rng);
  params.add_zeros("enc_bg", 1, w);
  for (int l = 0; l < cfg.layers; ++l) {
    params.add_zeros(ln(l, "ln1_g"), 1, w);
    params.add_zeros(ln(l, "ln1_b"), 1, w);
    for (const char* nm : {"wq", "wk", "wv", "wo"}) params.add(ln(l, nm), w, w, 0.02, rng);
    for (const char* nm : {"bq", "bk", "bv", "bo"}) params.add_zeros(ln(l, nm), 1, w);
    params.add_zeros(ln(l, "ln2_g"), 1, w);
    params.add_zeros(ln(l, "ln2_b"), 1, w);
    params.add(ln(l, "mlp_w1"), w, cfg.mlp_mult * w, 0.02, rng);
    params.add_zeros(ln(l, "mlp_b1"), 1, cfg.mlp_mult * w);
    params.add(ln(l, "mlp_w2"), cfg.mlp_mult * w, w, 0.02, rng);
    params.add_zeros(ln(l, "mlp_b2"), 1, w);
  }
  params.add_zeros("lnf_g", 1, w);
  params.add_zeros("lnf_b", 1, w);
  params.add("out_w", w, cfg.vocab, 0.01, rng);
  params.add_zeros("out_b", 1, cfg.vocab);
}

NodePtr SeqModel::encode_shape(const Mat& points) const {
  if (points.cols() != 3) throw_data("encode_shape: points must be v x 3");
  if (static_cast<int>(points.rows()) != cfg.n_points)
    throw_data("encode_shape: point count does not match model configuration");
  auto centers = farthest_point_indices(points, cfg.shape_groups);
  std::vector<std::vector<int>> groups(centers.size());
  for (int i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t g = 0; g < centers.size(); ++g) {
      double d = (points.row(i) - points.row(centers[g])).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(g);
      }
    }
    groups[best].push_back(i);
  }
  // every center belongs to its own group, so no group is empty

  auto x = ad::constant(points);
  auto hfeat = ad::tanh_op(
      ad::add_rowvec(ad::matmul(x, params.get("enc_w1")), params.get("enc_b1")));
  auto pooled = ad::group_mean(hfeat, std::move(groups));
  auto group_tokens =
      ad::add_rowvec(ad::matmul(pooled, params.get("enc_w2")), params.get("enc_b2"));
  auto global_token =
      ad::add_rowvec(ad::matmul(ad::mean_rows(hfeat), params.get("enc_wg")), params.get("enc_bg"));
  return ad::vconcat(group_tokens, global_token);
}

Mat SeqModel::encode_shape_values(const PointCloud& pc) const {
  Mat pts(pc.points.size(), 3);
  for (size_t i = 0; i < pc.points.size(); ++i) pts.row(i) = pc.points[i].transpose();
  return encode_shape(pts)->val;
}

NodePtr SeqModel::next_token_logits(const NodePtr& shape_tokens,
                                    const std::vector<int>& prefix) const {
  const int s = static_cast<int>(shape_tokens->val.rows());
  const int len = static_cast<int>(prefix.size());
  if (s != cfg.shape_tokens()) throw_data("next_token_logits: bad shape token count");
  if (s + len > cfg.context) throw_data("next_token_logits: context overflow");
  for (int tok : prefix)
    if (tok < 0 || tok >= cfg.vocab) throw_data("next_token_logits: token out of vocab");

  NodePtr x = shape_tokens;
  if (len > 0) x = ad::vconcat(x, ad::gather_rows(params.get("tok_emb"), prefix));
  x = ad::add(x, ad::slice_rows(params.get("pos_emb"), 0, s + len));

  const int t = s + len;
  const int dh = cfg.width / cfg.heads;
  const Mat mask = causal_mask(t);
  for (int l = 0; l < cfg.layers; ++l) {
    auto h = affine_ln(x, params.get(ln(l, "ln1_g")), params.get(ln(l, "ln1_b")));
    auto q = ad::add_rowvec(ad::matmul(h, params.get(ln(l, "wq"))), params.get(ln(l, "bq")));
    auto k = ad::add_rowvec(ad::matmul(h, params.get(ln(l, "wk"))), params.get(ln(l, "bk")));
    auto v = ad::add_rowvec(ad::matmul(h, params.get(ln(l, "wv"))), params.get(ln(l, "bv")));
    NodePtr cat;
    for (int hd = 0; hd < cfg.heads; ++hd) {
      auto qh = ad::slice_cols(q, hd * dh, dh);
      auto kh = ad::slice_cols(k, hd * dh, dh);
      auto vh = ad::slice_cols(v, hd * dh, dh);
      auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(double(dh)));
      auto probs = ad::masked_softmax_rows(scores, mask);
      auto ah = ad::matmul(probs, vh);
      cat = cat ? ad::hconcat(cat, ah) : ah;
    }
    auto attn_out =
        ad::add_rowvec(ad::matmul(cat, params.get(ln(l, "wo"))), params.get(ln(l, "bo")));
    x = ad::add(x, attn_out);
    auto m = affine_ln(x, params.get(ln(l, "ln2_g")), params.get(ln(l, "ln2_b")));
    auto mid = ad::gelu(
        ad::add_rowvec(ad::matmul(m, params.get(ln(l, "mlp_w1"))), params.get(ln(l, "mlp_b1"))));
    auto mlp_out =
        ad::add_rowvec(ad::matmul(mid, params.get(ln(l, "mlp_w2"))), params.get(ln(l, "mlp_b2")));
    x = ad::add(x, mlp_out);
  }
  auto final_x = affine_ln(x, params.get("lnf_g"), params.get("lnf_b"));
  auto logits = ad::add_rowvec(ad::matmul(final_x, params.get("out_w")), params.get("out_b"));
  return ad::slice_rows(logits, s - 1, len + 1);
}

namespace {

// Row k of next_token_logits predicts prefix token k; BOS and positions past
// the sequence are unsupervised, PAD targets are masked out.
std::vector<int> supervision_targets(const std::vector<int>& tokens) {
  std::vector<int> targets(tokens.size() + 1, -1);
  for (size_t k = 1; k < tokens.size(); ++k)
    targets[k] = tokens[k] == kTokPad ? -1 : tokens[k];
  return targets;
}

}  // namespace

NodePtr SeqModel::batch_loss(const std::vector<SeqSample>& batch) const {
  if (batch.empty()) throw_data("batch_loss: empty batch");
  NodePtr all_logits;
  std::vector<int> all_targets;
  for (const auto& sample : batch) {
    if (sample.tokens.empty() || sample.tokens.front() != kTokBos)
      throw_data("batch_loss: sequence must start with BOS");
    auto shape = encode_shape(sample.points);
    auto logits = next_token_logits(shape, sample.tokens);
    auto targets = supervision_targets(sample.tokens);
    all_logits = all_logits ? ad::vconcat(all_logits, logits) : logits;
    all_targets.insert(all_targets.end(), targets.begin(), targets.end());
  }
  return ad::cross_entropy_rows(all_logits, std::move(all_targets));
}

double SeqModel::training_step(const std::vector<SeqSample>& batch, ad::Adam& opt) {
  auto loss = batch_loss(batch);
  ad::backward(loss);
  opt.step(params);
  return loss->val(0, 0);
}

double SeqModel::teacher_forced_accuracy(const std::vector<SeqSample>& samples) const {
  int64_t correct = 0, total = 0;
  for (const auto& sample : samples) {
    auto shape = encode_shape(sample.points);
    auto logits = next_token_logits(shape, sample.tokens);
    auto targets = supervision_targets(sample.tokens);
    for (size_t k = 0; k < targets.size(); ++k) {
      if (targets[k] < 0) continue;
      int arg;
      logits->val.row(static_cast<int>(k)).maxCoeff(&arg);
      correct += (arg == targets[k]);
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

SampleResult SeqModel::sample_skeleton(const Mat& points, const SamplingConfig& sampling,
                                       OrderingMode mode) const {
  auto shape = encode_shape(points);
  std::mt19937_64 rng(sampling.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  SampleResult res;
  res.sequence.ordering = mode;
  std::vector<int>& toks = res.sequence.tokens;
  toks.push_back(kTokBos);
  while (true) {
    if (static_cast<int>(toks.size()) > sampling.max_tokens - 2) {
      res.truncated = true;
      break;
    }
    auto logits = next_token_logits(shape, toks);
    Eigen::RowVectorXd row = logits->val.row(logits->val.rows() - 1);
    int next;
    if (sampling.temperature <= 0.0) {
      row.maxCoeff(&next);
    } else {
      Eigen::RowVectorXd scaled = row / sampling.temperature;
      double m = scaled.maxCoeff();
      Eigen::RowVectorXd p = (scaled.array() - m).exp();
      p /= p.sum();
      double r = uni(rng);
      double acc = 0.0;
      next = cfg.vocab - 1;
      for (int i = 0; i < cfg.vocab; ++i) {
        acc += p(i);
        if (r <= acc) {
          next = i;
          break;
        }
      }
    }
    if (next == kTokEos) {
      toks.push_back(kTokEos);
      return res;
    }
    if (next == kTokBos || next == kTokPad) {
      // a framing token mid-stream cannot extend a valid skeleton
      res.truncated = true;
      break;
    }
    toks.push_back(next);
  }
  toks.push_back(kTokEos);
  return res;
}

std::pair<Mesh, Skeleton> augment_scene(const Mesh& mesh, const Skeleton& skeleton,
                                        const TrainingConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (cfg.augment_rotate) {
    double yaw = uni(rng) * 2.0 * M_PI;
    rot = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  }
  double s = cfg.augment_scale ? 0.8 + 0.2 * uni(rng) : 1.0;
  Vec3 shift = Vec3::Zero();
  if (cfg.augment_shift)
    shift = Vec3(uni(rng), uni(rng), uni(rng)) * 0.1 - Vec3::Constant(0.05);

  Mesh m = mesh;
  for (auto& p : m.vertices) p = rot * p * s + shift;
  Skeleton sk = skeleton;
  for (auto& p : sk.joints) p = rot * p * s + shift;
  auto scene = normalize_to_unit_cube(m, sk);
  return {scene.mesh, *scene.skeleton};
}

}  // namespace arti
