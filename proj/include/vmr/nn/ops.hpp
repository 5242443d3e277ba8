#pragma once

#include <span>
#include <vector>

#include "vmr/nn/tensor.hpp"

namespace vmr::nn {

// Contiguous block of rows [start, start + length) belonging to one sequence.
// Batches of variable-length sequences are stored row-stacked and described
// by a list of segments.
struct Segment {
  Index start = 0;
  Index length = 0;
};
using Segments = std::vector<Segment>;

// One segment per row.
Segments unit_segments(Index n);

Tensor constant(Matrix value);

Tensor matmul(const Tensor& a, const Tensor& b);
// x * w + b, with the 1xN bias broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
// a + row, row broadcast over every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor swish(const Tensor& a);
Tensor relu(const Tensor& a);
// Splits columns in half (a | b) and returns a * sigmoid(b).
Tensor glu(const Tensor& a);

// Row-wise layer normalization with 1xC gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Scaled dot-product attention, split into `heads` column groups. Query
// segment i attends only to key segment i. q: Nq x D, k: Nk x D, v: Nk x Dv.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Segments& q_segs,
                 const Segments& k_segs, int heads);

// Mean over the rows of each segment: returns |segs| x C.
Tensor segment_mean(const Tensor& x, const Segments& segs);

// Depthwise 1-D convolution along rows, per segment, zero padded ("same").
// kernel: K x C (K odd), bias: 1 x C.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                        const Segments& segs);

Tensor gather_rows(const Tensor& x, std::span<const Index> rows);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, Index start, Index count);
Tensor slice_rows(const Tensor& x, Index start, Index count);

// Per-row Euclidean distance, N x 1. The gradient at zero distance is zero.
Tensor row_distance(const Tensor& a, const Tensor& b);
// Per-row mean squared error, N x 1.
Tensor row_mse(const Tensor& a, const Tensor& b);
// Per-row softmax cross-entropy against integer labels, N x 1.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace vmr::nn
