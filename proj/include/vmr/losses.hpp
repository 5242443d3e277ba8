#pragma once

#include <array>
#include <span>

#include "vmr/nn/ops.hpp"

namespace vmr::losses {

using nn::Tensor;

struct LossWeights {
  double av = 1.0;       // lambda_1
  double vtag = 1.0;     // lambda_2
  double atag = 1.0;     // lambda_3
  double regular = 1.0;  // lambda_4
  double ce = 1.0;       // lambda_5
  double margin = 1.0;   // triplet margin

  // Throws ValidationError unless all weights >= 0 and margin > 0.
  void validate() const;
  std::array<double, 5> as_array() const { return {av, vtag, atag, regular, ce}; }
};

// max(d(x+, y+) - d(x+, y-) + margin, 0) per row with Euclidean d; N x 1.
Tensor triplet_rows(const Tensor& anchor, const Tensor& positive, const Tensor& negative, double margin);
// Batch mean of triplet_rows.
Tensor triplet(const Tensor& anchor, const Tensor& positive, const Tensor& negative, double margin);

// Row-aligned batch of projected (theta) and decoded (phi) embeddings for the
// anchors' positives and their sampled negatives.
struct TripletBatch {
  Tensor theta_v_pos, theta_m_pos, theta_tag_pos;
  Tensor theta_v_neg, theta_m_neg, theta_tag_neg;
  Tensor phi_v_pos, phi_m_pos, phi_tag_pos;
  Tensor phi_v_neg, phi_m_neg;
};

// The eight hinge terms, each averaged over the batch, in the order
//   av:   t(tv+, tm+, tm-), t(tm+, tv+, tv-)
//   vtag: t(tv+, tt+, tv-), t(tt+, tv+, tt-), t(pt+, pv+, pv-)
//   atag: t(tm+, tt+, tm-), t(tt+, tm+, tm-), t(pt+, pm+, pm-)
// With `symmetrize_atag` the seventh term uses tt- in place of tm-.
std::array<Tensor, 8> triplet_terms(const TripletBatch& b, double margin, bool symmetrize_atag = false);

Tensor loss_av(const TripletBatch& b, double margin);
Tensor loss_vtag(const TripletBatch& b, double margin);
Tensor loss_atag(const TripletBatch& b, double margin, bool symmetrize_atag = false);

struct RegularBatch {
  Tensor xi_v, xi_m, xi_rec_v, xi_rec_m;
  Tensor phi_v, phi_m, phi_tag, xi_tag;
  Tensor theta_v, theta_m, theta_tag;
};

// The seven squared-error terms (per-pair mean over dimensions, then batch
// mean): (xi_v, xi_rec_v), (xi_m, xi_rec_m), (phi_v, xi_tag), (phi_m, xi_tag),
// (phi_tag, xi_tag), (theta_v, theta_tag), (theta_m, theta_tag).
std::array<Tensor, 7> regular_terms(const RegularBatch& b);
Tensor loss_regular(const RegularBatch& b);

// Batch mean of the softmax cross-entropy over two logits.
Tensor loss_ce(const Tensor& logits, std::span<const int> labels);

struct LossParts {
  Tensor av, vtag, atag, regular, ce;
};

// Weighted sum; an undefined part is allowed only when its weight is zero.
Tensor total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace vmr::losses
