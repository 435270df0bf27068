#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "repalign/core_data.hpp"

namespace repalign {

struct KmeansConfig {
  int n_restarts = 10;
  int max_iter = 300;
  std::uint64_t seed = 0;
  // Observer for the within-cluster sum of squares after each Lloyd step
  // (restart, iteration, wcss).
  std::function<void(int, int, double)> on_iteration;
};

enum class SimilaritySource { raw, transformed };

struct CategoryPartition {
  int k = 0;
  std::vector<int> labels;  // cluster index per item, every cluster non-empty
  SimilaritySource source = SimilaritySource::raw;
  double inertia = 0.0;  // within-cluster sum of squares
  std::uint64_t seed = 0;
};

// Lloyd iterations with k-means++ seeding per restart; the restart with the
// lowest inertia wins. Empty clusters are repaired by reseeding from the
// point farthest from its centroid.
CategoryPartition kmeans(const Matrix& rows, int k, const KmeansConfig& cfg = {});

// k-means over the rows of the similarity matrix used as item
// representations. An undefined diagonal entry is replaced by the row's
// off-diagonal maximum before clustering.
CategoryPartition build_categories(const SimilarityMatrix& s, int k,
                                   SimilaritySource source,
                                   const KmeansConfig& cfg = {});

// Pair-counting agreement (Rand index) and its chance-adjusted form. Both
// are invariant to label permutations.
double pair_agreement(std::span<const int> a, std::span<const int> b);
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace repalign
