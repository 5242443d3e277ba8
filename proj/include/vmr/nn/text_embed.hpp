#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vmr/nn/tensor.hpp"

namespace vmr::nn {

// Deterministic stand-in for a sentence encoder: the tag's character
// trigrams (with boundary markers) and the whole tag are hashed into buckets;
// each bucket owns a fixed pseudo-random Gaussian row of the projection. The
// sum is L2-normalised.
class TextEmbedder {
 public:
  TextEmbedder(std::vector<std::string> vocab, Index dim = 768, std::uint64_t seed = 0x7e47);

  // 1 x dim, unit norm. Throws DomainError for tags outside the vocabulary.
  const Matrix& embed(const std::string& tag) const;
  Index dim() const { return dim_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  static constexpr std::uint64_t kBuckets = 1ULL << 20;

 private:
  Matrix compute(const std::string& tag) const;

  std::vector<std::string> vocab_;
  Index dim_;
  std::uint64_t seed_;
  std::map<std::string, Matrix> cache_;
};

}  // namespace vmr::nn
