#include "vmr/nn/text_embed.hpp"

#include "vmr/error.hpp"
#include "vmr/rng.hpp"

namespace vmr::nn {

TextEmbedder::TextEmbedder(std::vector<std::string> vocab, Index dim, std::uint64_t seed)
    : vocab_(std::move(vocab)), dim_(dim), seed_(seed) {
  for (const auto& tag : vocab_) cache_.emplace(tag, compute(tag));
}

const Matrix& TextEmbedder::embed(const std::string& tag) const {
  auto it = cache_.find(tag);
  if (it == cache_.end()) throw DomainError("tag '" + tag + "' is not in the label vocabulary");
  return it->second;
}

Matrix TextEmbedder::compute(const std::string& tag) const {
  std::vector<std::string> grams;
  const std::string padded = "<" + tag + ">";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) grams.push_back(padded.substr(i, 3));
  grams.push_back("#" + tag);

  Matrix v = Matrix::Zero(1, dim_);
  for (const auto& g : grams) {
    const std::uint64_t bucket = fnv1a64(g) % kBuckets;
    Rng rng(splitmix64(seed_ ^ splitmix64(bucket)));
    for (Index i = 0; i < dim_; ++i) v(0, i) += rng.normal();
  }
  const double n = v.norm();
  if (n > 0) v /= n;
  return v;
}

}  // namespace vmr::nn
