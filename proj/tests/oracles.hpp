#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They share no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "vmr/rng.hpp"
#include "vmr/tagset.hpp"

namespace vmr::oracle {

// Prime exponents of n (n <= 64 is plenty here).
inline std::map<int, int> factor(int n) {
  std::map<int, int> e;
  for (int p = 2; n > 1; ++p) {
    while (n % p == 0) {
      ++e[p];
      n /= p;
    }
  }
  return e;
}

// Sign of c1*ln(N/(d1+1)) - c2*ln(N/(d2+1)), with exact equality decided on
// prime exponents rather than on floating-point logs.
inline int compare_scores(int c1, int d1, int c2, int d2, int n) {
  std::map<int, long> diff;
  for (auto [p, k] : factor(n)) diff[p] += static_cast<long>(c1 - c2) * k;
  for (auto [p, k] : factor(d1 + 1)) diff[p] -= static_cast<long>(c1) * k;
  for (auto [p, k] : factor(d2 + 1)) diff[p] += static_cast<long>(c2) * k;
  const bool equal = std::all_of(diff.begin(), diff.end(), [](auto& kv) { return kv.second == 0; });
  if (equal) return 0;
  const long double a = c1 * std::log(static_cast<long double>(n) / (d1 + 1));
  const long double b = c2 * std::log(static_cast<long double>(n) / (d2 + 1));
  return a > b ? 1 : -1;
}

// Brute-force label assignment: per track, the tag maximising tf * idf; equal
// scores go to the lexicographically smallest tag.
inline std::map<std::string, std::string> brute_force_labels(const std::vector<tagset::TagCollection>& cols) {
  const int n = static_cast<int>(cols.size());
  std::map<std::string, int> df;
  for (const auto& c : cols) {
    for (const auto& [tag, count] : c.counts) {
      if (count > 0) ++df[tag];
    }
  }
  std::map<std::string, std::string> out;
  for (const auto& c : cols) {
    std::vector<std::string> tags;
    for (const auto& [tag, count] : c.counts) tags.push_back(tag);
    std::string best;
    for (const auto& tag : tags) {
      if (best.empty()) {
        best = tag;
        continue;
      }
      const int cmp = compare_scores(c.counts.at(tag), df[tag], c.counts.at(best), df[best], n);
      if (cmp > 0 || (cmp == 0 && tag < best)) best = tag;
    }
    out[c.music_id] = best;
  }
  return out;
}

// Random tag collections: up to `max_music` tracks over up to `max_tags` tags.
inline std::vector<tagset::TagCollection> random_collections(Rng& rng, int max_music, int max_tags) {
  const int music = 2 + static_cast<int>(rng.index(static_cast<std::size_t>(max_music - 1)));
  const int tags = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_tags)));
  std::vector<tagset::TagCollection> cols;
  for (int m = 0; m < music; ++m) {
    tagset::TagCollection c;
    c.music_id = "m" + std::to_string(100 + m);
    const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(tags)));
    for (int j = 0; j < k; ++j) {
      const std::string tag = "t" + std::to_string(rng.index(static_cast<std::size_t>(tags)));
      c.counts[tag] += 1 + static_cast<int>(rng.index(3));
    }
    cols.push_back(std::move(c));
  }
  return cols;
}

// Scalar triplet hinge averaged over rows of plain matrices.
template <typename M>
double triplet(const M& a, const M& p, const M& n, double margin) {
  double total = 0.0;
  for (long r = 0; r < a.rows(); ++r) {
    double dp = 0.0, dn = 0.0;
    for (long c = 0; c < a.cols(); ++c) {
      dp += (a(r, c) - p(r, c)) * (a(r, c) - p(r, c));
      dn += (a(r, c) - n(r, c)) * (a(r, c) - n(r, c));
    }
    total += std::max(0.0, std::sqrt(dp) - std::sqrt(dn) + margin);
  }
  return total / static_cast<double>(a.rows());
}

// Mean over rows of the per-row mean squared difference.
template <typename M>
double mse(const M& a, const M& b) {
  double total = 0.0;
  for (long r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (long c = 0; c < a.cols(); ++c) s += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
    total += s / static_cast<double>(a.cols());
  }
  return total / static_cast<double>(a.rows());
}

// Candidate order by (distance, id) using a plain comparison sort.
inline std::vector<std::size_t> brute_force_rank(const std::vector<double>& d, const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (d[a] != d[b]) return d[a] < d[b];
    return ids[a] < ids[b];
  });
  return order;
}

}  // namespace vmr::oracle
