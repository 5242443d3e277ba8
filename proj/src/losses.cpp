#include "vmr/losses.hpp"

#include <cmath>

#include "vmr/error.hpp"

namespace vmr::losses {

using nn::Matrix;

void LossWeights::validate() const {
  for (double w : as_array()) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights must be finite and non-negative");
  }
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ValidationError("triplet margin must be positive");
}

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.defined() || !b.defined()) throw ContractError(std::string(what) + ": missing input");
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ContractError(std::string(what) + ": dimension mismatch");
}

}  // namespace

Tensor triplet_rows(const Tensor& anchor, const Tensor& positive, const Tensor& negative, double margin) {
  same_shape(anchor, positive, "triplet");
  same_shape(anchor, negative, "triplet");
  const Tensor gap = nn::sub(nn::row_distance(anchor, positive), nn::row_distance(anchor, negative));
  return nn::relu(nn::add(gap, nn::constant(Matrix::Constant(gap.rows(), 1, margin))));
}

Tensor triplet(const Tensor& anchor, const Tensor& positive, const Tensor& negative, double margin) {
  return nn::mean(triplet_rows(anchor, positive, negative, margin));
}

std::array<Tensor, 8> triplet_terms(const TripletBatch& b, double margin, bool symmetrize_atag) {
  return {
      triplet(b.theta_v_pos, b.theta_m_pos, b.theta_m_neg, margin),
      triplet(b.theta_m_pos, b.theta_v_pos, b.theta_v_neg, margin),
      triplet(b.theta_v_pos, b.theta_tag_pos, b.theta_v_neg, margin),
      triplet(b.theta_tag_pos, b.theta_v_pos, b.theta_tag_neg, margin),
      triplet(b.phi_tag_pos, b.phi_v_pos, b.phi_v_neg, margin),
      triplet(b.theta_m_pos, b.theta_tag_pos, b.theta_m_neg, margin),
      triplet(b.theta_tag_pos, b.theta_m_pos, symmetrize_atag ? b.theta_tag_neg : b.theta_m_neg, margin),
      triplet(b.phi_tag_pos, b.phi_m_pos, b.phi_m_neg, margin),
  };
}

Tensor loss_av(const TripletBatch& b, double margin) {
  return nn::add(triplet(b.theta_v_pos, b.theta_m_pos, b.theta_m_neg, margin),
                 triplet(b.theta_m_pos, b.theta_v_pos, b.theta_v_neg, margin));
}

Tensor loss_vtag(const TripletBatch& b, double margin) {
  return nn::add(nn::add(triplet(b.theta_v_pos, b.theta_tag_pos, b.theta_v_neg, margin),
                         triplet(b.theta_tag_pos, b.theta_v_pos, b.theta_tag_neg, margin)),
                 triplet(b.phi_tag_pos, b.phi_v_pos, b.phi_v_neg, margin));
}

Tensor loss_atag(const TripletBatch& b, double margin, bool symmetrize_atag) {
  return nn::add(nn::add(triplet(b.theta_m_pos, b.theta_tag_pos, b.theta_m_neg, margin),
                         triplet(b.theta_tag_pos, b.theta_m_pos, symmetrize_atag ? b.theta_tag_neg : b.theta_m_neg, margin)),
                 triplet(b.phi_tag_pos, b.phi_m_pos, b.phi_m_neg, margin));
}

std::array<Tensor, 7> regular_terms(const RegularBatch& b) {
  auto term = [](const Tensor& x, const Tensor& y) {
    same_shape(x, y, "regularization");
    return nn::mean(nn::row_mse(x, y));
  };
  return {term(b.xi_v, b.xi_rec_v),   term(b.xi_m, b.xi_rec_m),   term(b.phi_v, b.xi_tag),
          term(b.phi_m, b.xi_tag),    term(b.phi_tag, b.xi_tag),  term(b.theta_v, b.theta_tag),
          term(b.theta_m, b.theta_tag)};
}

Tensor loss_regular(const RegularBatch& b) {
  const auto t = regular_terms(b);
  Tensor s = t[0];
  for (std::size_t i = 1; i < t.size(); ++i) s = nn::add(s, t[i]);
  return s;
}

Tensor loss_ce(const Tensor& logits, std::span<const int> labels) {
  if (logits.cols() != 2) throw ContractError("loss_ce: expected two logits per row");
  return nn::mean(nn::softmax_cross_entropy(logits, labels));
}

Tensor total_loss(const LossParts& parts, const LossWeights& w) {
  const Tensor* items[5] = {&parts.av, &parts.vtag, &parts.atag, &parts.regular, &parts.ce};
  const auto weights = w.as_array();
  Tensor total = nn::constant(Matrix::Zero(1, 1));
  for (std::size_t i = 0; i < 5; ++i) {
    if (!items[i]->defined()) {
      if (weights[i] != 0.0) throw ContractError("total_loss: a weighted loss term is missing");
      continue;
    }
    total = nn::add(total, nn::scale(*items[i], weights[i]));
  }
  return total;
}

}  // namespace vmr::losses
