#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace arti::ad {

using Mat = Eigen::MatrixXd;

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One value in the computation graph. Graphs are rebuilt per forward pass;
// parameter leaves persist across graphs and accumulate gradients until the
// optimizer consumes them.
struct Node {
  Mat val;
  Mat grad;
  bool requires_grad = false;
  int64_t id = 0;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
  }
};

NodePtr constant(Mat v);
NodePtr param(Mat v);

// elementwise / broadcast
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);           // hadamard
NodePtr add_rowvec(const NodePtr& a, const NodePtr& row);  // row is 1 x n
NodePtr mul_rowvec(const NodePtr& a, const NodePtr& row);
NodePtr scale(const NodePtr& a, double s);
NodePtr gelu(const NodePtr& a);
NodePtr tanh_op(const NodePtr& a);

// structural
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr transpose(const NodePtr& a);
NodePtr vconcat(const NodePtr& a, const NodePtr& b);
NodePtr hconcat(const NodePtr& a, const NodePtr& b);
NodePtr slice_rows(const NodePtr& a, int start, int len);
NodePtr slice_cols(const NodePtr& a, int start, int len);
NodePtr gather_rows(const NodePtr& a, std::vector<int> idx);
// row g of the result is the mean of a's rows listed in groups[g] (non-empty)
NodePtr group_mean(const NodePtr& a, std::vector<std::vector<int>> groups);

// normalization / attention pieces
NodePtr layernorm_rows(const NodePtr& a, double eps = 1e-6);
NodePtr softmax_rows(const NodePtr& a);
// softmax over (a + additive_mask); mask entries are 0 or a large negative
NodePtr masked_softmax_rows(const NodePtr& a, const Mat& additive_mask);
NodePtr mean_rows(const NodePtr& a);  // 1 x n column means

// losses (1x1 outputs)
// targets[i] < 0 marks an unsupervised row; loss is the mean NLL over the rest
NodePtr cross_entropy_rows(const NodePtr& logits, std::vector<int> targets);
NodePtr mse_masked(const NodePtr& pred, const Mat& target, const Mat& mask);

void backward(const NodePtr& loss);

// Named parameter collection with init, Adam updates, and flat (de)serialization.
class ParamSet {
 public:
  NodePtr add(const std::string& name, int rows, int cols, double init_scale,
              std::mt19937_64& rng);
  NodePtr add_zeros(const std::string& name, int rows, int cols);
  NodePtr get(const std::string& name) const;
  const std::map<std::string, NodePtr>& all() const { return params_; }

  void zero_grads();
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

 private:
  std::map<std::string, NodePtr> params_;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::map<const Node*, std::pair<Mat, Mat>> moments;

  // Applies accumulated gradients and zeroes them.
  void step(ParamSet& params);
};

// Max relative error between analytic gradients and central finite differences
// over `probes` randomly chosen parameter entries. `loss_fn` must rebuild the
// graph from the current parameter values on every call.
double gradient_check(ParamSet& params, const std::function<NodePtr()>& build_loss,
                      int probes, uint64_t seed, double step = 1e-5);

}  // namespace arti::ad
