#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace vmr::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

// One vertex of the recorded computation. Leaves with requires_grad are
// parameters; interior nodes carry a backward closure that pushes their
// gradient into their parents.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Adds g into grad, allocating on first use.
  void accumulate(const Matrix& g);
  Matrix& grad_buffer();
};

// Handle to a 2-D value in the graph. Vectors are 1xN rows; scalars are 1x1.
// Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor from_node(std::shared_ptr<Node> node);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Empty matrix when no gradient has reached this node.
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad_buffer(); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  double item() const;

  // Reverse-mode sweep from a 1x1 tensor. Interior nodes release their
  // closures and parent links afterwards; leaf gradients accumulate.
  void backward() const;

  // Sets the gradient buffer to zeros of the value's shape.
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an interior node. If no parent requires a gradient the closure is
// dropped and the result is a constant.
Tensor make_op(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward);

// A named trainable leaf.
struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

Tensor parameter(Matrix value);

// Within its scope no graph is recorded: every op result is a constant.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace vmr::nn
