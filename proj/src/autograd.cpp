#include "arti/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "arti/error.hpp"

namespace arti::ad {

namespace {

std::atomic<int64_t> g_next_id{1};

NodePtr make_node(Mat v, std::vector<NodePtr> parents, std::function<void(Node&)> bp) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->id = g_next_id.fetch_add(1);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(bp);
  }
  return n;
}

void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
  if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols())
    throw_data(std::string(op) + ": shape mismatch");
}

}  // namespace

NodePtr constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->id = g_next_id.fetch_add(1);
  return n;
}

NodePtr param(Mat v) {
  auto n = constant(std::move(v));
  n->requires_grad = true;
  return n;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "add");
  return make_node(a->val + b->val, {a, b}, [a, b](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad; }
    if (b->requires_grad) { b->ensure_grad(); b->grad += n.grad; }
  });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "sub");
  return make_node(a->val - b->val, {a, b}, [a, b](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad; }
    if (b->requires_grad) { b->ensure_grad(); b->grad -= n.grad; }
  });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "mul");
  return make_node(a->val.cwiseProduct(b->val), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad.cwiseProduct(b->val); }
    if (b->requires_grad) { b->ensure_grad(); b->grad += n.grad.cwiseProduct(a->val); }
  });
}

NodePtr add_rowvec(const NodePtr& a, const NodePtr& row) {
  if (row->val.rows() != 1 || row->val.cols() != a->val.cols())
    throw_data("add_rowvec: row must be 1 x cols(a)");
  Mat v = a->val;
  v.rowwise() += row->val.row(0);
  return make_node(std::move(v), {a, row}, [a, row](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad; }
    if (row->requires_grad) { row->ensure_grad(); row->grad.row(0) += n.grad.colwise().sum(); }
  });
}

NodePtr mul_rowvec(const NodePtr& a, const NodePtr& row) {
  if (row->val.rows() != 1 || row->val.cols() != a->val.cols())
    throw_data("mul_rowvec: row must be 1 x cols(a)");
  Mat v = a->val.array().rowwise() * row->val.row(0).array();
  return make_node(std::move(v), {a, row}, [a, row](Node& n) {
    if (a->requires_grad) {
      a->ensure_grad();
      a->grad.array() += n.grad.array().rowwise() * row->val.row(0).array();
    }
    if (row->requires_grad) {
      row->ensure_grad();
      row->grad.row(0) += n.grad.cwiseProduct(a->val).colwise().sum();
    }
  });
}

NodePtr scale(const NodePtr& a, double s) {
  return make_node(a->val * s, {a}, [a, s](Node& n) {
    a->ensure_grad();
    a->grad += n.grad * s;
  });
}

NodePtr gelu(const NodePtr& a) {
  const double inv_sqrt2 = 0.7071067811865475244;
  const double inv_sqrt2pi = 0.3989422804014326779;
  Mat v = a->val.unaryExpr([&](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return make_node(std::move(v), {a}, [a, inv_sqrt2, inv_sqrt2pi](Node& n) {
    a->ensure_grad();
    Mat d = a->val.unaryExpr([&](double x) {
      double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      return cdf + x * pdf;
    });
    a->grad += n.grad.cwiseProduct(d);
  });
}

NodePtr tanh_op(const NodePtr& a) {
  Mat v = a->val.array().tanh();
  return make_node(v, {a}, [a, v](Node& n) {
    a->ensure_grad();
    a->grad.array() += n.grad.array() * (1.0 - v.array().square());
  });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  if (a->val.cols() != b->val.rows()) throw_data("matmul: inner dimension mismatch");
  return make_node(a->val * b->val, {a, b}, [a, b](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad * b->val.transpose(); }
    if (b->requires_grad) { b->ensure_grad(); b->grad += a->val.transpose() * n.grad; }
  });
}

NodePtr transpose(const NodePtr& a) {
  return make_node(a->val.transpose(), {a}, [a](Node& n) {
    a->ensure_grad();
    a->grad += n.grad.transpose();
  });
}

NodePtr vconcat(const NodePtr& a, const NodePtr& b) {
  if (a->val.cols() != b->val.cols()) throw_data("vconcat: column mismatch");
  Mat v(a->val.rows() + b->val.rows(), a->val.cols());
  v << a->val, b->val;
  const int ra = static_cast<int>(a->val.rows());
  return make_node(std::move(v), {a, b}, [a, b, ra](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad.topRows(ra); }
    if (b->requires_grad) { b->ensure_grad(); b->grad += n.grad.bottomRows(n.grad.rows() - ra); }
  });
}

NodePtr hconcat(const NodePtr& a, const NodePtr& b) {
  if (a->val.rows() != b->val.rows()) throw_data("hconcat: row mismatch");
  Mat v(a->val.rows(), a->val.cols() + b->val.cols());
  v << a->val, b->val;
  const int ca = static_cast<int>(a->val.cols());
  return make_node(std::move(v), {a, b}, [a, b, ca](Node& n) {
    if (a->requires_grad) { a->ensure_grad(); a->grad += n.grad.leftCols(ca); }
    if (b->requires_grad) { b->ensure_grad(); b->grad += n.grad.rightCols(n.grad.cols() - ca); }
  });
}

NodePtr slice_rows(const NodePtr& a, int start, int len) {
  if (start < 0 || len < 0 || start + len > a->val.rows()) throw_data("slice_rows: out of range");
  return make_node(a->val.middleRows(start, len), {a}, [a, start, len](Node& n) {
    a->ensure_grad();
    a->grad.middleRows(start, len) += n.grad;
  });
}

NodePtr slice_cols(const NodePtr& a, int start, int len) {
  if (start < 0 || len < 0 || start + len > a->val.cols()) throw_data("slice_cols: out of range");
  return make_node(a->val.middleCols(start, len), {a}, [a, start, len](Node& n) {
    a->ensure_grad();
    a->grad.middleCols(start, len) += n.grad;
  });
}

NodePtr group_mean(const NodePtr& a, std::vector<std::vector<int>> groups) {
  Mat v(groups.size(), a->val.cols());
  for (size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw_data("group_mean: empty group");
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(a->val.cols());
    for (int i : groups[g]) {
      if (i < 0 || i >= a->val.rows()) throw_data("group_mean: index out of range");
      acc += a->val.row(i);
    }
    v.row(g) = acc / static_cast<double>(groups[g].size());
  }
  return make_node(std::move(v), {a, }, [a, groups = std::move(groups)](Node& n) {
    a->ensure_grad();
    for (size_t g = 0; g < groups.size(); ++g) {
      const double inv = 1.0 / static_cast<double>(groups[g].size());
      for (int i : groups[g]) a->grad.row(i) += n.grad.row(g) * inv;
    }
  });
}

NodePtr gather_rows(const NodePtr& a, std::vector<int> idx) {
  Mat v(idx.size(), a->val.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a->val.rows()) throw_data("gather_rows: index out of range");
    v.row(i) = a->val.row(idx[i]);
  }
  return make_node(std::move(v), {a}, [a, idx = std::move(idx)](Node& n) {
    a->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i) a->grad.row(idx[i]) += n.grad.row(i);
  });
}

NodePtr layernorm_rows(const NodePtr& a, double eps) {
  const int cols = static_cast<int>(a->val.cols());
  Eigen::VectorXd mean = a->val.rowwise().mean();
  Mat centered = a->val.colwise() - mean;
  Eigen::VectorXd inv_std =
      (centered.array().square().rowwise().mean() + eps).sqrt().inverse();
  Mat y = centered.array().colwise() * inv_std.array();
  return make_node(y, {a}, [a, y, inv_std, cols](Node& n) {
    a->ensure_grad();
    // dx = inv_std * (g - mean(g) - y * mean(g*y)) rowwise
    Eigen::VectorXd gm = n.grad.rowwise().mean();
    Eigen::VectorXd gym = n.grad.cwiseProduct(y).rowwise().mean();
    Mat dx = n.grad;
    dx.colwise() -= gm;
    dx.array() -= y.array().colwise() * gym.array();
    a->grad += (dx.array().colwise() * inv_std.array()).matrix();
  });
}

namespace {
Mat softmax_val(const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}
}  // namespace

NodePtr softmax_rows(const NodePtr& a) {
  Mat s = softmax_val(a->val);
  return make_node(s, {a}, [a, s](Node& n) {
    a->ensure_grad();
    for (int r = 0; r < s.rows(); ++r) {
      double dot = n.grad.row(r).dot(s.row(r));
      a->grad.row(r) += (n.grad.row(r).array() - dot).matrix().cwiseProduct(s.row(r));
    }
  });
}

NodePtr masked_softmax_rows(const NodePtr& a, const Mat& additive_mask) {
  if (additive_mask.rows() != a->val.rows() || additive_mask.cols() != a->val.cols())
    throw_data("masked_softmax_rows: mask shape mismatch");
  Mat s = softmax_val(a->val + additive_mask);
  return make_node(s, {a}, [a, s](Node& n) {
    a->ensure_grad();
    for (int r = 0; r < s.rows(); ++r) {
      double dot = n.grad.row(r).dot(s.row(r));
      a->grad.row(r) += (n.grad.row(r).array() - dot).matrix().cwiseProduct(s.row(r));
    }
  });
}

NodePtr mean_rows(const NodePtr& a) {
  const double inv = 1.0 / static_cast<double>(a->val.rows());
  Mat v = a->val.colwise().mean();
  return make_node(v, {a}, [a, inv](Node& n) {
    a->ensure_grad();
    a->grad += (Mat::Ones(a->val.rows(), 1) * n.grad.row(0)) * inv;
  });
}

NodePtr cross_entropy_rows(const NodePtr& logits, std::vector<int> targets) {
  if (static_cast<int>(targets.size()) != logits->val.rows())
    throw_data("cross_entropy_rows: one target per row required");
  Mat s = softmax_val(logits->val);
  int count = 0;
  double total = 0.0;
  for (int r = 0; r < s.rows(); ++r) {
    int t = targets[r];
    if (t < 0) continue;
    if (t >= s.cols()) throw_data("cross_entropy_rows: target out of range");
    total += -std::log(std::max(s(r, t), 1e-300));
    ++count;
  }
  if (count == 0) throw_data("cross_entropy_rows: no supervised rows");
  Mat v(1, 1);
  v(0, 0) = total / count;
  return make_node(v, {logits}, [logits, s, targets = std::move(targets), count](Node& n) {
    logits->ensure_grad();
    const double g = n.grad(0, 0) / count;
    for (int r = 0; r < s.rows(); ++r) {
      int t = targets[r];
      if (t < 0) continue;
      logits->grad.row(r) += g * s.row(r);
      logits->grad(r, t) -= g;
    }
  });
}

NodePtr mse_masked(const NodePtr& pred, const Mat& target, const Mat& mask) {
  if (pred->val.rows() != target.rows() || pred->val.cols() != target.cols() ||
      mask.rows() != target.rows() || mask.cols() != target.cols())
    throw_data("mse_masked: shape mismatch");
  const double denom = mask.sum();
  if (denom <= 0) throw_data("mse_masked: empty mask");
  Mat diff = (pred->val - target).cwiseProduct(mask);
  Mat v(1, 1);
  v(0, 0) = diff.array().square().sum() / denom;
  return make_node(v, {pred}, [pred, diff, denom](Node& n) {
    pred->ensure_grad();
    pred->grad += (2.0 / denom) * n.grad(0, 0) * diff;
  });
}

void backward(const NodePtr& loss) {
  if (loss->val.size() != 1) throw_data("backward: loss must be scalar");
  loss->ensure_grad();
  loss->grad(0, 0) = 1.0;

  // topo order: collect reachable grad-requiring nodes, run by descending id
  std::vector<NodePtr> nodes;
  std::unordered_set<const Node*> seen;
  std::vector<NodePtr> stack{loss};
  while (!stack.empty()) {
    NodePtr n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n.get()).second) continue;
    nodes.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });
  for (auto& n : nodes) {
    if (!n->backprop) continue;
    n->ensure_grad();
    n->backprop(*n);
  }
}

NodePtr ParamSet::add(const std::string& name, int rows, int cols, double init_scale,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, init_scale);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  auto p = param(std::move(m));
  if (!params_.emplace(name, p).second) throw_data("duplicate parameter name: " + name);
  return p;
}

NodePtr ParamSet::add_zeros(const std::string& name, int rows, int cols) {
  auto p = param(Mat::Zero(rows, cols));
  if (!params_.emplace(name, p).second) throw_data("duplicate parameter name: " + name);
  return p;
}

NodePtr ParamSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw_data("unknown parameter: " + name);
  return it->second;
}

void ParamSet::zero_grads() {
  for (auto& [name, p] : params_) p->grad.setZero(p->val.rows(), p->val.cols());
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  for (const auto& [name, p] : params_)
    flat.insert(flat.end(), p->val.data(), p->val.data() + p->val.size());
  return flat;
}

void ParamSet::unflatten(const std::vector<double>& flat) {
  size_t pos = 0;
  for (auto& [name, p] : params_) {
    if (pos + p->val.size() > flat.size()) throw_data("unflatten: size mismatch");
    std::copy(flat.begin() + pos, flat.begin() + pos + p->val.size(), p->val.data());
    pos += p->val.size();
  }
  if (pos != flat.size()) throw_data("unflatten: size mismatch");
}

void Adam::step(ParamSet& params) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (auto& [name, p] : params.all()) {
    p->ensure_grad();
    auto& [m, v] = moments[p.get()];
    if (m.size() == 0) {
      m = Mat::Zero(p->val.rows(), p->val.cols());
      v = Mat::Zero(p->val.rows(), p->val.cols());
    }
    m = beta1 * m + (1.0 - beta1) * p->grad;
    v = beta2 * v + (1.0 - beta2) * p->grad.cwiseProduct(p->grad);
    Mat mhat = m / bc1;
    Mat vhat = v / bc2;
    p->val.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    p->grad.setZero();
  }
}

double gradient_check(ParamSet& params, const std::function<NodePtr()>& build_loss,
                      int probes, uint64_t seed, double step) {
  params.zero_grads();
  NodePtr loss = build_loss();
  backward(loss);

  std::vector<std::pair<NodePtr, Mat>> analytic;
  for (const auto& [name, p] : params.all()) {
    p->ensure_grad();
    analytic.emplace_back(p, p->grad);
  }

  std::mt19937_64 rng(seed);
  double max_rel = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    auto& [p, grad] = analytic[rng() % analytic.size()];
    int64_t i = static_cast<int64_t>(rng() % static_cast<uint64_t>(p->val.size()));
    double saved = p->val.data()[i];
    p->val.data()[i] = saved + step;
    double lp = build_loss()->val(0, 0);
    p->val.data()[i] = saved - step;
    double lm = build_loss()->val(0, 0);
    p->val.data()[i] = saved;
    double fd = (lp - lm) / (2.0 * step);
    double g = grad.data()[i];
    double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  params.zero_grads();
  return max_rel;
}

}  // namespace arti::ad
