#pragma once

// Exhaustive reference for kNN matching: score every pool frame, sort, take
// the first k, average their values.

#include <algorithm>
#include <numeric>
#include <vector>

#include "neuco/feature_store.hpp"

namespace fixtures {

inline neuco::features::MatchResult brute_force_knn(const neuco::features::SslFrameSequence& q,
                                                    const neuco::features::Matrix& keys,
                                                    const neuco::features::Matrix& values,
                                                    std::size_t k,
                                                    const std::vector<bool>& excluded = {}) {
  using neuco::features::Neighbor;
  neuco::features::MatchResult out;
  out.matched_values = neuco::features::Matrix(q.n_frames(), values.cols);
  for (std::size_t i = 0; i < q.n_frames(); ++i) {
    std::vector<Neighbor> all;
    const auto a = q.keys.row(i);
    for (std::size_t j = 0; j < keys.rows; ++j) {
      if (!excluded.empty() && excluded[j]) continue;
      const auto b = keys.row(j);
      double dot = 0, na = 0, nb = 0;
      for (std::size_t d = 0; d < a.size(); ++d) {
        dot += double(a[d]) * b[d];
        na += double(a[d]) * a[d];
        nb += double(b[d]) * b[d];
      }
      all.push_back({j, dot / (std::sqrt(na) * std::sqrt(nb))});
    }
    std::stable_sort(all.begin(), all.end(), [](const Neighbor& x, const Neighbor& y) {
      return x.similarity > y.similarity;
    });
    all.resize(k);
    auto row = out.matched_values.row(i);
    for (std::size_t d = 0; d < values.cols; ++d) {
      double acc = 0;
      for (const auto& nb : all) acc += values.row(nb.pool_index)[d];
      row[d] = static_cast<float>(acc / static_cast<double>(k));
    }
    out.neighbors.push_back(std::move(all));
  }
  return out;
}

}  // namespace fixtures
