#include "arti/skindiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arti/error.hpp"

namespace arti {

using ad::NodePtr;

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_start, double beta_end) {
  if (timesteps < 1) throw_data("noise schedule needs at least 1 timestep");
  NoiseSchedule s;
  s.timesteps = timesteps;
  s.beta.resize(timesteps);
  s.alpha_bar.resize(timesteps);
  double prod = 1.0;
  for (int i = 0; i < timesteps; ++i) {
    double b = timesteps == 1
                   ? beta_start
                   : beta_start + (beta_end - beta_start) * i / double(timesteps - 1);
    s.beta[i] = b;
    prod *= 1.0 - b;
    s.alpha_bar[i] = prod;
  }
  return s;
}

double NoiseSchedule::abar(int t) const {
  if (t == 0) return 1.0;
  if (t < 1 || t > timesteps) throw_data("noise schedule: timestep out of range");
  return alpha_bar[t - 1];
}

FunctionSample normalize_weights(const Mat& weights, const GeodesicPrior& prior,
                                 const Mat& points) {
  if (weights.rows() != prior.weights.rows() || weights.cols() != prior.weights.cols())
    throw_data("normalize_weights: weight/prior shape mismatch");
  FunctionSample f;
  f.points = points;
  f.joint_mask = prior.joint_mask;
  f.values = 2.0 * (weights - prior.weights);
  for (int j = 0; j < f.values.cols(); ++j)
    if (!f.joint_mask[j]) f.values.col(j).setZero();
  return f;
}

Mat weights_from_residual(const Mat& residual, const Mat& prior_weights) {
  return residual / 2.0 + prior_weights;
}

FunctionSample forward_noise(const FunctionSample& f0, int t, const Mat& noise,
                             const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.timesteps) throw_data("forward_noise: timestep out of range");
  if (noise.rows() != f0.values.rows() || noise.cols() != f0.values.cols())
    throw_data("forward_noise: noise shape mismatch");
  FunctionSample out;
  out.points = f0.points;
  out.joint_mask = f0.joint_mask;
  out.values = schedule.alpha(t) * f0.values + schedule.sigma(t) * noise;
  for (int j = 0; j < out.values.cols(); ++j)
    if (!out.joint_mask[j]) out.values.col(j).setZero();
  return out;
}

namespace {

std::string sn(int stage, const char* name) {
  return "stage" + std::to_string(stage) + "." + name;
}

NodePtr linear(const ad::ParamSet& p, const NodePtr& x, const std::string& w,
               const std::string& b) {
  return ad::add_rowvec(ad::matmul(x, p.get(w)), p.get(b));
}

// layernorm with scale/shift driven by the time embedding
NodePtr ada_ln(const ad::ParamSet& p, const NodePtr& x, const NodePtr& temb,
               const std::string& site) {
  auto gain = linear(p, temb, site + ".gw", site + ".gb");
  auto shift = linear(p, temb, site + ".sw", site + ".sb");
  auto ones = ad::constant(Mat::Ones(1, gain->val.cols()));
  Mat rows = Mat::Ones(x->val.rows(), 1);
  auto g_full = ad::matmul(ad::constant(rows), ad::add(ones, gain));
  auto s_full = ad::matmul(ad::constant(rows), shift);
  return ad::add(ad::mul(ad::layernorm_rows(x), g_full), s_full);
}

NodePtr cross_attention(const ad::ParamSet& p, const std::string& prefix, const NodePtr& queries,
                        const NodePtr& kv, int heads) {
  const int w = static_cast<int>(queries->val.cols());
  const int dh = w / heads;
  auto q = linear(p, queries, prefix + ".wq", prefix + ".bq");
  auto k = linear(p, kv, prefix + ".wk", prefix + ".bk");
  auto v = linear(p, kv, prefix + ".wv", prefix + ".bv");
  NodePtr cat;
  for (int h = 0; h < heads; ++h) {
    auto qh = ad::slice_cols(q, h * dh, dh);
    auto kh = ad::slice_cols(k, h * dh, dh);
    auto vh = ad::slice_cols(v, h * dh, dh);
    auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(double(dh)));
    auto ah = ad::matmul(ad::softmax_rows(scores), vh);
    cat = cat ? ad::hconcat(cat, ah) : ah;
  }
  return linear(p, cat, prefix + ".wo", prefix + ".bo");
}

void add_attention_params(ad::ParamSet& p, const std::string& prefix, int w,
                          std::mt19937_64& rng) {
  for (const char* nm : {".wq", ".wk", ".wv", ".wo"}) p.add(prefix + nm, w, w, 0.02, rng);
  for (const char* nm : {".bq", ".bk", ".bv", ".bo"}) p.add_zeros(prefix + nm, 1, w);
}

void add_adaln_params(ad::ParamSet& p, const std::string& site, int w) {
  p.add_zeros(site + ".gw", w, w);
  p.add_zeros(site + ".gb", 1, w);
  p.add_zeros(site + ".sw", w, w);
  p.add_zeros(site + ".sb", 1, w);
}

// canonical point order: lexicographic by (x,y,z)
std::vector<int> canonical_order(const Mat& points) {
  std::vector<int> order(points.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::make_tuple(points(a, 0), points(a, 1), points(a, 2)) <
           std::make_tuple(points(b, 0), points(b, 1), points(b, 2));
  });
  return order;
}

}  // namespace

void Denoiser::init(uint64_t seed) {
  params = ad::ParamSet();
  std::mt19937_64 rng(seed);
  const int w = cfg.width;
  const int in_dim = 3 + cfg.n_joints;
  params.add("embed_w1", in_dim, w, 0.1, rng);
  params.add_zeros("embed_b1", 1, w);
  params.add("embed_w2", w, w, 0.05, rng);
  params.add_zeros("embed_b2", 1, w);

  params.add("time_w1", 2 * cfg.time_freqs, w, 0.1, rng);
  params.add_zeros("time_b1", 1, w);
  params.add("time_w2", w, w, 0.05, rng);
  params.add_zeros("time_b2", 1, w);

  params.add("joint_w1", 3, w, 0.5, rng);
  params.add_zeros("joint_b1", 1, w);
  params.add("joint_w2", w, w, 0.05, rng);
  params.add_zeros("joint_b2", 1, w);
  params.add("shape_w", cfg.shape_feature_dim, w, 0.05, rng);
  params.add_zeros("shape_b", 1, w);

  for (int s = 0; s < cfg.stages; ++s) {
    params.add(sn(s, "latents"), cfg.latents, w, 0.1, rng);
    add_attention_params(params, sn(s, "pool"), w, rng);
    add_attention_params(params, sn(s, "point"), w, rng);
    add_adaln_params(params, sn(s, "ada_pool"), w);
    add_adaln_params(params, sn(s, "ada_point"), w);
    add_adaln_params(params, sn(s, "ada_mlp"), w);
    params.add(sn(s, "mlp_w1"), w, 2 * w, 0.05, rng);
    params.add_zeros(sn(s, "mlp_b1"), 1, 2 * w);
    params.add(sn(s, "mlp_w2"), 2 * w, w, 0.05, rng);
    params.add_zeros(sn(s, "mlp_b2"), 1, w);
  }
  params.add_zeros("head_w", w, cfg.n_joints);
  params.add_zeros("head_b", 1, cfg.n_joints);
}

NodePtr Denoiser::forward(const Mat& points, const Mat& noised_values, int t,
                          const SkinCondition& cond) const {
  const int v = static_cast<int>(points.rows());
  if (v == 0) throw_data("denoise: empty point set");
  if (points.cols() != 3) throw_data("denoise: points must be v x 3");
  if (noised_values.rows() != v || noised_values.cols() != cfg.n_joints)
    throw_data("denoise: value matrix must be v x n_joints");
  if (static_cast<int>(cond.joint_mask.size()) != cfg.n_joints ||
      static_cast<int>(cond.joints.size()) != cfg.n_joints)
    throw_data("denoise: condition joint count must match n_joints");
  if (cond.shape_feature.rows() != 1 || cond.shape_feature.cols() != cfg.shape_feature_dim)
    throw_data("denoise: bad shape feature dimension");

  // time embedding from sinusoidal features of t/T
  Mat tf(1, 2 * cfg.time_freqs);
  for (int f = 0; f < cfg.time_freqs; ++f) {
    double freq = std::pow(2.0, f) * M_PI;
    tf(0, 2 * f) = std::sin(freq * t / 1000.0);
    tf(0, 2 * f + 1) = std::cos(freq * t / 1000.0);
  }
  auto temb = linear(params, ad::gelu(linear(params, ad::constant(tf), "time_w1", "time_b1")),
                     "time_w2", "time_b2");

  // condition tokens: one per valid joint, plus the global shape feature
  int n_valid = 0;
  for (bool m : cond.joint_mask) n_valid += m;
  NodePtr cond_tokens;
  if (n_valid > 0) {
    Mat jpos(n_valid, 3);
    int r = 0;
    for (int j = 0; j < cfg.n_joints; ++j)
      if (cond.joint_mask[j]) jpos.row(r++) = cond.joints[j].transpose();
    cond_tokens =
        linear(params, ad::gelu(linear(params, ad::constant(jpos), "joint_w1", "joint_b1")),
               "joint_w2", "joint_b2");
  }
  auto shape_token = linear(params, ad::constant(cond.shape_feature), "shape_w", "shape_b");
  cond_tokens = cond_tokens ? ad::vconcat(cond_tokens, shape_token) : shape_token;

  // pointwise input embedding of (x, f_t(x))
  Mat in(v, 3 + cfg.n_joints);
  in << points, noised_values;
  auto h = linear(params, ad::gelu(linear(params, ad::constant(in), "embed_w1", "embed_b1")),
                  "embed_w2", "embed_b2");

  const auto order = canonical_order(points);
  for (int s = 0; s < cfg.stages; ++s) {
    // latents pool the point set chunk by chunk along the canonical order
    auto latents = params.get(sn(s, "latents"));
    for (int start = 0; start < v; start += cfg.subset) {
      int len = std::min<int>(cfg.subset, v - start);
      std::vector<int> chunk(order.begin() + start, order.begin() + start + len);
      auto chunk_feats = ad::gather_rows(h, std::move(chunk));
      auto pooled = cross_attention(params, sn(s, "pool"),
                                    ada_ln(params, latents, temb, sn(s, "ada_pool")),
                                    chunk_feats, cfg.heads);
      latents = ad::add(latents, pooled);
    }
    // points attend to latents + condition tokens
    auto kv = ad::vconcat(latents, cond_tokens);
    auto attended = cross_attention(params, sn(s, "point"),
                                    ada_ln(params, h, temb, sn(s, "ada_point")), kv, cfg.heads);
    h = ad::add(h, attended);
    auto m = ada_ln(params, h, temb, sn(s, "ada_mlp"));
    auto mid = ad::gelu(linear(params, m, sn(s, "mlp_w1"), sn(s, "mlp_b1")));
    h = ad::add(h, linear(params, mid, sn(s, "mlp_w2"), sn(s, "mlp_b2")));
  }

  auto out = linear(params, h, "head_w", "head_b");
  Mat colmask = Mat::Zero(1, cfg.n_joints);
  for (int j = 0; j < cfg.n_joints; ++j) colmask(0, j) = cond.joint_mask[j] ? 1.0 : 0.0;
  return ad::mul_rowvec(out, ad::constant(colmask));
}

double training_step_skin(Denoiser& model, const std::vector<SkinTrainItem>& batch,
                          const NoiseSchedule& schedule, ad::Adam& opt, std::mt19937_64& rng) {
  if (batch.empty()) throw_data("training_step_skin: empty batch");
  std::uniform_int_distribution<int> tdist(1, schedule.timesteps);
  std::normal_distribution<double> gauss(0.0, 1.0);

  NodePtr total;
  for (const auto& item : batch) {
    const int v = static_cast<int>(item.points.rows());
    const int n = static_cast<int>(item.f0.cols());
    int t = tdist(rng);
    Mat noise(v, n);
    for (int i = 0; i < v; ++i)
      for (int j = 0; j < n; ++j) noise(i, j) = gauss(rng);

    Mat mask = Mat::Zero(v, n);
    for (int j = 0; j < n; ++j)
      if (item.cond.joint_mask[j]) mask.col(j).setOnes();

    FunctionSample f0{item.points, item.f0, item.cond.joint_mask};
    FunctionSample ft = forward_noise(f0, t, noise, schedule);
    auto pred = model.forward(item.points, ft.values, t, item.cond);
    auto loss = ad::mse_masked(pred, item.f0, mask);
    total = total ? ad::add(total, loss) : loss;
  }
  total = ad::scale(total, 1.0 / batch.size());
  ad::backward(total);
  opt.step(model.params);
  return total->val(0, 0);
}

Mat sample_skin(const Denoiser& model, const Mat& points, const SkinCondition& cond,
                const Mat& prior_weights, const NoiseSchedule& schedule, int steps,
                uint64_t seed) {
  const int v = static_cast<int>(points.rows());
  const int n = model.cfg.n_joints;
  int n_valid = 0;
  for (bool m : cond.joint_mask) n_valid += m;
  if (n_valid == 0) throw_data("sample_skin: zero valid joints");
  if (steps < 1) throw_data("sample_skin: steps must be >= 1");
  if (prior_weights.rows() != v || prior_weights.cols() != n)
    throw_data("sample_skin: prior shape mismatch");

  // uniform sub-grid of [1,T], descending
  const int big_t = schedule.timesteps;
  std::vector<int> ts(steps);
  for (int k = 0; k < steps; ++k)
    ts[k] = steps == 1
                ? big_t
                : static_cast<int>(std::lround(big_t - (big_t - 1) * double(k) / (steps - 1)));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto masked_noise = [&]() {
    Mat z(v, n);
    for (int i = 0; i < v; ++i)
      for (int j = 0; j < n; ++j) z(i, j) = cond.joint_mask[j] ? gauss(rng) : 0.0;
    return z;
  };

  Mat f = masked_noise();
  Mat f0hat = Mat::Zero(v, n);
  for (int k = 0; k < steps; ++k) {
    int t = ts[k];
    int s = (k + 1 < steps) ? ts[k + 1] : 0;
    f0hat = model.forward(points, f, t, cond)->val;
    if (s == 0) break;
    double at = schedule.alpha(t), st = schedule.sigma(t);
    double as = schedule.alpha(s), ss = schedule.sigma(s);
    Mat eps_hat = (f - at * f0hat) / st;
    double var = (ss * ss / (st * st)) * (1.0 - schedule.abar(t) / schedule.abar(s));
    double dir = std::sqrt(std::max(ss * ss - var, 0.0));
    f = as * f0hat + dir * eps_hat + std::sqrt(var) * masked_noise();
  }

  Mat w = weights_from_residual(f0hat, prior_weights);
  for (int i = 0; i < v; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      double x = cond.joint_mask[j] ? std::clamp(w(i, j), 0.0, 1.0) : 0.0;
      w(i, j) = x;
      total += x;
    }
    if (total > 0) {
      w.row(i) /= total;
    } else {
      for (int j = 0; j < n; ++j) w(i, j) = cond.joint_mask[j] ? 1.0 / n_valid : 0.0;
    }
  }
  return w;
}

Mat vertex_weights_from_points(const Mat& point_weights, const PointCloud& pc, const Mesh& mesh) {
  const int npts = static_cast<int>(pc.points.size());
  if (npts == 0) throw_data("vertex_weights_from_points: no points");
  if (point_weights.rows() != npts)
    throw_data("vertex_weights_from_points: weight row count mismatch");
  const int v = static_cast<int>(mesh.vertices.size());
  const int n = static_cast<int>(point_weights.cols());

  Mat sums = Mat::Zero(v, n);
  std::vector<int> counts(v, 0);
  for (int i = 0; i < npts; ++i) {
    int sv = pc.source_vertex[i];
    if (sv < 0 || sv >= v) throw_data("vertex_weights_from_points: bad source vertex");
    sums.row(sv) += point_weights.row(i);
    counts[sv]++;
  }
  std::vector<int> assigned;
  for (int i = 0; i < v; ++i)
    if (counts[i] > 0) {
      sums.row(i) /= counts[i];
      assigned.push_back(i);
    }
  for (int i = 0; i < v; ++i) {
    if (counts[i] > 0) continue;
    int best = assigned[0];
    double best_d = std::numeric_limits<double>::infinity();
    for (int a : assigned) {
      double d = (mesh.vertices[i] - mesh.vertices[a]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    sums.row(i) = sums.row(best);
  }
  for (int i = 0; i < v; ++i) {
    double total = sums.row(i).sum();
    if (total > 0) sums.row(i) /= total;
  }
  return sums;
}

}  // namespace arti
