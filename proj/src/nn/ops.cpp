#include "vmr/nn/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vmr/error.hpp"

namespace vmr::nn {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
  }
}

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }
Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void check_segments(const Segments& segs, Index rows, const char* op) {
  for (const auto& s : segs) {
    if (s.start < 0 || s.length < 0 || s.start + s.length > rows) {
      throw ContractError(std::string(op) + ": segment out of range");
    }
  }
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Segments unit_segments(Index n) {
  Segments s(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = {i, 1};
  return s;
}

Tensor constant(Matrix value) { return Tensor(std::move(value), false); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimension mismatch");
  Matrix out;
  out.noalias() = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Matrix& g = self.grad;
    if (wants(self, 0)) {
      Matrix& ga = parent(self, 0).grad_buffer();
      ga.noalias() += g * parent(self, 1).value.transpose();
    }
    if (wants(self, 1)) {
      Matrix& gb = parent(self, 1).grad_buffer();
      gb.noalias() += parent(self, 0).value.transpose() * g;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ContractError("linear: expected x[N,in] w[in,out] b[1,out], got x cols " +
                        std::to_string(x.cols()) + ", w " + std::to_string(w.rows()) + "x" +
                        std::to_string(w.cols()));
  }
  Matrix out;
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return make_op(std::move(out), {x, w, b}, [](Node& self) {
    const Matrix& g = self.grad;
    if (wants(self, 0)) parent(self, 0).grad_buffer().noalias() += g * parent(self, 1).value.transpose();
    if (wants(self, 1)) parent(self, 1).grad_buffer().noalias() += parent(self, 0).value.transpose() * g;
    if (wants(self, 2)) parent(self, 2).grad_buffer() += g.colwise().sum();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad);
    if (wants(self, 1)) parent(self, 1).accumulate(self.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_op(std::move(out), {a, row}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad);
    if (wants(self, 1)) parent(self, 1).grad_buffer() += self.grad.colwise().sum();
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).accumulate(self.grad);
    if (wants(self, 1)) parent(self, 1).grad_buffer() -= self.grad;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    if (wants(self, 0)) parent(self, 0).grad_buffer() += self.grad.cwiseProduct(parent(self, 1).value);
    if (wants(self, 1)) parent(self, 1).grad_buffer() += self.grad.cwiseProduct(parent(self, 0).value);
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) {
    parent(self, 0).grad_buffer() += self.grad * s;
  });
}

Tensor gelu(const Tensor& a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  return make_op(std::move(out), {a}, [](Node& self) {
    const Matrix& x = parent(self, 0).value;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = x.unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    parent(self, 0).grad_buffer() += self.grad.cwiseProduct(d);
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](double v) { return sigm(v); });
  Matrix saved = out;
  return make_op(std::move(out), {a}, [saved = std::move(saved)](Node& self) {
    Matrix d = saved.unaryExpr([](double s) { return s * (1.0 - s); });
    parent(self, 0).grad_buffer() += self.grad.cwiseProduct(d);
  });
}

Tensor swish(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](double v) { return v * sigm(v); });
  return make_op(std::move(out), {a}, [](Node& self) {
    Matrix d = parent(self, 0).value.unaryExpr([](double v) {
      const double s = sigm(v);
      return s + v * s * (1.0 - s);
    });
    parent(self, 0).grad_buffer() += self.grad.cwiseProduct(d);
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_op(std::move(out), {a}, [](Node& self) {
    Matrix mask = parent(self, 0).value.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    parent(self, 0).grad_buffer() += self.grad.cwiseProduct(mask);
  });
}

Tensor glu(const Tensor& a) {
  if (a.cols() % 2 != 0) throw ContractError("glu: column count must be even");
  const Index h = a.cols() / 2;
  const Matrix& x = a.value();
  Matrix gate = x.rightCols(h).unaryExpr([](double v) { return sigm(v); });
  Matrix out = x.leftCols(h).cwiseProduct(gate);
  return make_op(std::move(out), {a}, [h, gate = std::move(gate)](Node& self) {
    const Matrix& x = parent(self, 0).value;
    Matrix& gx = parent(self, 0).grad_buffer();
    gx.leftCols(h) += self.grad.cwiseProduct(gate);
    Matrix dg = gate.unaryExpr([](double s) { return s * (1.0 - s); });
    gx.rightCols(h) += self.grad.cwiseProduct(x.leftCols(h)).cwiseProduct(dg);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Index n = x.rows();
  const Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw ContractError("layer_norm: gamma/beta must be 1x" + std::to_string(c));
  }
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Index r = 0; r < n; ++r) {
    const double mu = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_op(std::move(out), {x, gamma, beta},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                   const Matrix& g = self.grad;
                   const Matrix& gam = parent(self, 1).value;
                   if (wants(self, 1)) parent(self, 1).grad_buffer() += g.cwiseProduct(xhat).colwise().sum();
                   if (wants(self, 2)) parent(self, 2).grad_buffer() += g.colwise().sum();
                   if (wants(self, 0)) {
                     Matrix& gx = parent(self, 0).grad_buffer();
                     for (Index r = 0; r < g.rows(); ++r) {
                       Eigen::RowVectorXd dxh = g.row(r).cwiseProduct(gam.row(0));
                       const double m1 = dxh.mean();
                       const double m2 = dxh.cwiseProduct(xhat.row(r)).mean();
                       gx.row(r) += inv_std(r) * (dxh.array() - m1 - xhat.row(r).array() * m2).matrix();
                     }
                   }
                 });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Segments& q_segs,
                 const Segments& k_segs, int heads) {
  if (q.cols() != k.cols()) throw ContractError("attention: query/key width mismatch");
  if (k.rows() != v.rows()) throw ContractError("attention: key/value row mismatch");
  if (q_segs.size() != k_segs.size()) throw ContractError("attention: segment count mismatch");
  if (heads <= 0 || q.cols() % heads != 0 || v.cols() % heads != 0) {
    throw ContractError("attention: width not divisible by head count");
  }
  check_segments(q_segs, q.rows(), "attention");
  check_segments(k_segs, k.rows(), "attention");
  const Index dh = q.cols() / heads;
  const Index dv = v.cols() / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix out = Matrix::Zero(q.rows(), v.cols());
  // Softmax weights per (segment, head), kept for the backward pass.
  std::vector<Matrix> probs;
  probs.reserve(q_segs.size() * static_cast<std::size_t>(heads));
  for (std::size_t s = 0; s < q_segs.size(); ++s) {
    const auto qs = q_segs[s];
    const auto ks = k_segs[s];
    for (int h = 0; h < heads; ++h) {
      if (ks.length == 0 || qs.length == 0) {
        probs.emplace_back();
        continue;
      }
      Matrix p;
      if (ks.length == 1) {
        p = Matrix::Ones(qs.length, 1);
      } else {
        p.noalias() = q.value().block(qs.start, h * dh, qs.length, dh) *
                      k.value().block(ks.start, h * dh, ks.length, dh).transpose();
        p *= sc;
        for (Index r = 0; r < p.rows(); ++r) {
          const double mx = p.row(r).maxCoeff();
          p.row(r) = (p.row(r).array() - mx).exp();
          p.row(r) /= p.row(r).sum();
        }
      }
      out.block(qs.start, h * dv, qs.length, dv).noalias() =
          p * v.value().block(ks.start, h * dv, ks.length, dv);
      probs.push_back(std::move(p));
    }
  }
  return make_op(std::move(out), {q, k, v},
                 [q_segs, k_segs, heads, dh, dv, sc, probs = std::move(probs)](Node& self) {
                   const Matrix& g = self.grad;
                   const Matrix& qv = parent(self, 0).value;
                   const Matrix& kv = parent(self, 1).value;
                   const Matrix& vv = parent(self, 2).value;
                   const bool need_qk = wants(self, 0) || wants(self, 1);
                   for (std::size_t s = 0; s < q_segs.size(); ++s) {
                     const auto qs = q_segs[s];
                     const auto ks = k_segs[s];
                     if (qs.length == 0 || ks.length == 0) continue;
                     for (int h = 0; h < heads; ++h) {
                       const Matrix& p = probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
                       auto go = g.block(qs.start, h * dv, qs.length, dv);
                       if (wants(self, 2)) {
                         parent(self, 2).grad_buffer().block(ks.start, h * dv, ks.length, dv).noalias() +=
                             p.transpose() * go;
                       }
                       // A single key has a constant unit weight: no gradient to q or k.
                       if (!need_qk || ks.length == 1) continue;
                       Matrix dp;
                       dp.noalias() = go * vv.block(ks.start, h * dv, ks.length, dv).transpose();
                       Matrix ds = p.cwiseProduct(dp);
                       for (Index r = 0; r < ds.rows(); ++r) {
                         ds.row(r) -= p.row(r) * ds.row(r).sum();
                       }
                       ds *= sc;
                       if (wants(self, 0)) {
                         parent(self, 0).grad_buffer().block(qs.start, h * dh, qs.length, dh).noalias() +=
                             ds * kv.block(ks.start, h * dh, ks.length, dh);
                       }
                       if (wants(self, 1)) {
                         parent(self, 1).grad_buffer().block(ks.start, h * dh, ks.length, dh).noalias() +=
                             ds.transpose() * qv.block(qs.start, h * dh, qs.length, dh);
                       }
                     }
                   }
                 });
}

Tensor segment_mean(const Tensor& x, const Segments& segs) {
  check_segments(segs, x.rows(), "segment_mean");
  Matrix out = Matrix::Zero(static_cast<Index>(segs.size()), x.cols());
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (segs[s].length == 0) throw ContractError("segment_mean: empty segment");
    out.row(static_cast<Index>(s)) = x.value().middleRows(segs[s].start, segs[s].length).colwise().mean();
  }
  return make_op(std::move(out), {x}, [segs](Node& self) {
    Matrix& gx = parent(self, 0).grad_buffer();
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(segs[s].length);
      for (Index r = 0; r < segs[s].length; ++r) {
        gx.row(segs[s].start + r) += self.grad.row(static_cast<Index>(s)) * inv;
      }
    }
  });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, const Segments& segs) {
  const Index kk = kernel.rows();
  const Index c = x.cols();
  if (kk % 2 != 1 || kernel.cols() != c || bias.rows() != 1 || bias.cols() != c) {
    throw ContractError("depthwise_conv1d: kernel must be KxC with odd K, bias 1xC");
  }
  check_segments(segs, x.rows(), "depthwise_conv1d");
  const Index half = kk / 2;
  Matrix out = Matrix::Zero(x.rows(), c);
  for (const auto& s : segs) {
    for (Index t = 0; t < s.length; ++t) {
      auto row = out.row(s.start + t);
      row = bias.value().row(0);
      for (Index j = 0; j < kk; ++j) {
        const Index src = t + j - half;
        if (src < 0 || src >= s.length) continue;
        row += kernel.value().row(j).cwiseProduct(x.value().row(s.start + src));
      }
    }
  }
  return make_op(std::move(out), {x, kernel, bias}, [segs, kk, half](Node& self) {
    const Matrix& g = self.grad;
    const Matrix& xv = parent(self, 0).value;
    const Matrix& kv = parent(self, 1).value;
    Matrix* gx = wants(self, 0) ? &parent(self, 0).grad_buffer() : nullptr;
    Matrix* gk = wants(self, 1) ? &parent(self, 1).grad_buffer() : nullptr;
    if (wants(self, 2)) parent(self, 2).grad_buffer() += g.colwise().sum();
    for (const auto& s : segs) {
      for (Index t = 0; t < s.length; ++t) {
        for (Index j = 0; j < kk; ++j) {
          const Index src = t + j - half;
          if (src < 0 || src >= s.length) continue;
          if (gx) gx->row(s.start + src) += g.row(s.start + t).cwiseProduct(kv.row(j));
          if (gk) gk->row(j) += g.row(s.start + t).cwiseProduct(xv.row(s.start + src));
        }
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw ContractError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = x.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make_op(std::move(out), {x}, [idx = std::move(idx)](Node& self) {
    Matrix& gx = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += self.grad.row(static_cast<Index>(i));
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const Index n = parts.front().rows();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw ContractError("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(n, total);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return make_op(std::move(out), parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (!wants(self, i)) continue;
      Node& p = parent(self, i);
      p.grad_buffer() += self.grad.middleCols(offsets[i], p.value.cols());
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const Index c = parts.front().cols();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw ContractError("concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, c);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return make_op(std::move(out), parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (!wants(self, i)) continue;
      Node& p = parent(self, i);
      p.grad_buffer() += self.grad.middleRows(offsets[i], p.value.rows());
    }
  });
}

Tensor slice_cols(const Tensor& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) throw ContractError("slice_cols: out of range");
  return make_op(x.value().middleCols(start, count), {x}, [start, count](Node& self) {
    parent(self, 0).grad_buffer().middleCols(start, count) += self.grad;
  });
}

Tensor slice_rows(const Tensor& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) throw ContractError("slice_rows: out of range");
  return make_op(x.value().middleRows(start, count), {x}, [start, count](Node& self) {
    parent(self, 0).grad_buffer().middleRows(start, count) += self.grad;
  });
}

Tensor row_distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_distance");
  Matrix diff = a.value() - b.value();
  Matrix out = diff.rowwise().norm();
  Matrix dist = out;
  return make_op(std::move(out), {a, b}, [diff = std::move(diff), dist = std::move(dist)](Node& self) {
    Matrix g(diff.rows(), diff.cols());
    for (Index r = 0; r < diff.rows(); ++r) {
      const double d = dist(r, 0);
      g.row(r) = d > 0.0 ? (diff.row(r) * (self.grad(r, 0) / d)).eval() : Eigen::RowVectorXd::Zero(diff.cols());
    }
    if (wants(self, 0)) parent(self, 0).grad_buffer() += g;
    if (wants(self, 1)) parent(self, 1).grad_buffer() -= g;
  });
}

Tensor row_mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_mse");
  Matrix diff = a.value() - b.value();
  const double inv_c = 1.0 / static_cast<double>(a.cols());
  Matrix out = diff.rowwise().squaredNorm() * inv_c;
  return make_op(std::move(out), {a, b}, [diff = std::move(diff), inv_c](Node& self) {
    Matrix g = diff;
    for (Index r = 0; r < g.rows(); ++r) g.row(r) *= 2.0 * inv_c * self.grad(r, 0);
    if (wants(self, 0)) parent(self, 0).grad_buffer() += g;
    if (wants(self, 1)) parent(self, 1).grad_buffer() -= g;
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw ContractError("softmax_cross_entropy: one label per row required");
  }
  const Matrix& z = logits.value();
  Matrix prob(z.rows(), z.cols());
  Matrix out(z.rows(), 1);
  for (Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) throw ContractError("softmax_cross_entropy: label out of range");
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    prob.row(r) = (z.row(r).array() - lse).exp();
    out(r, 0) = lse - z(r, y);
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return make_op(std::move(out), {logits}, [prob = std::move(prob), ys = std::move(ys)](Node& self) {
    Matrix g = prob;
    for (Index r = 0; r < g.rows(); ++r) {
      g(r, ys[static_cast<std::size_t>(r)]) -= 1.0;
      g.row(r) *= self.grad(r, 0);
    }
    parent(self, 0).grad_buffer() += g;
  });
}

Tensor sum(const Tensor& x) {
  return make_op(Matrix::Constant(1, 1, x.value().sum()), {x}, [](Node& self) {
    parent(self, 0).grad_buffer().array() += self.grad(0, 0);
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ContractError("mean: empty tensor");
  return make_op(Matrix::Constant(1, 1, x.value().sum() / n), {x}, [n](Node& self) {
    parent(self, 0).grad_buffer().array() += self.grad(0, 0) / n;
  });
}

}  // namespace vmr::nn
