#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vmr/nn/tensor.hpp"
#include "vmr/rng.hpp"

namespace vmr::testing {

struct GradReport {
  double worst = 0.0;     // largest relative error seen
  std::string where;      // "leaf[i](r,c)" of the worst entry
  std::size_t checked = 0;
};

// Central differences (eps 1e-5) against the reverse-mode gradient of a
// scalar function of `leaves`. Relative error is |a - n| / max(|a|, |n|, floor);
// the floor keeps rounding noise on exactly-zero gradients (key biases under
// softmax, for one) from reading as a relative failure.
// Large leaves are probed at `max_entries` random positions.
inline GradReport check_gradients(const std::function<nn::Tensor()>& f, std::vector<nn::Tensor> leaves,
                                  std::uint64_t seed, std::size_t max_entries = 24, double eps = 1e-5,
                                  double floor = 1e-5) {
  for (auto& l : leaves) l.zero_grad();
  f().backward();
  std::vector<nn::Matrix> analytic;
  for (auto& l : leaves) analytic.push_back(l.grad().size() ? l.grad() : nn::Matrix::Zero(l.rows(), l.cols()));

  GradReport rep;
  Rng rng(seed);
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    nn::Matrix& v = leaves[li].mutable_value();
    const std::size_t n = static_cast<std::size_t>(v.size());
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (n > max_entries) {
      rng.shuffle(idx);
      idx.resize(max_entries);
    }
    for (std::size_t i : idx) {
      double& x = v.data()[i];
      const double keep = x;
      x = keep + eps;
      const double up = f().item();
      x = keep - eps;
      const double down = f().item();
      x = keep;
      const double num = (up - down) / (2.0 * eps);
      const double a = analytic[li].data()[i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      ++rep.checked;
      if (rel > rep.worst) {
        rep.worst = rel;
        rep.where = "leaf[" + std::to_string(li) + "](" + std::to_string(i / v.cols()) + "," +
                    std::to_string(i % v.cols()) + ") analytic " + std::to_string(a) + " numeric " +
                    std::to_string(num);
      }
    }
  }
  return rep;
}

inline nn::Matrix random_matrix(nn::Index r, nn::Index c, Rng& rng, double scale = 1.0) {
  nn::Matrix m(r, c);
  for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace vmr::testing
