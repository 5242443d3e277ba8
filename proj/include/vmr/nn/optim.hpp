#pragma once

#include <vector>

#include "vmr/nn/tensor.hpp"

namespace vmr::nn {

// Adam with bias correction. Parameters are updated in list order.
class Adam {
 public:
  Adam(ParamList params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long steps() const { return t_; }

 private:
  ParamList params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace vmr::nn
