#include "repalign/categories.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "repalign/util/rng.hpp"

namespace repalign {

namespace {

struct LloydResult {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

Matrix kmeanspp_centroids(const Matrix& rows, int k, Rng& rng) {
  const Index n = rows.rows();
  Matrix centroids(k, rows.cols());
  centroids.row(0) = rows.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2 = (rows.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index chosen = 0;
    if (total > 0.0) {
      // Sample proportional to squared distance from the nearest centroid.
      double target = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target <= 0.0) {
          chosen = i;
          break;
        }
        chosen = i;
      }
    } else {
      chosen = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = rows.row(chosen);
    d2 = d2.cwiseMin(
        (rows.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

double wcss_of(const Matrix& rows, const Matrix& centroids,
               const std::vector<int>& labels) {
  double wcss = 0.0;
  for (Index i = 0; i < rows.rows(); ++i) {
    wcss += (rows.row(i) - centroids.row(labels[static_cast<std::size_t>(i)]))
                .squaredNorm();
  }
  return wcss;
}

LloydResult lloyd(const Matrix& rows, int k, int max_iter, Rng& rng,
                  const KmeansConfig& cfg, int restart) {
  const Index n = rows.rows();
  Matrix centroids = kmeanspp_centroids(rows, k, rng);
  std::vector<int> labels(static_cast<std::size_t>(n), -1);

  for (int it = 0; it < max_iter; ++it) {
    // Assignment step; ties go to the lowest cluster index.
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = (rows.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d2 = (rows.row(i) - centroids.row(c)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }

    // Empty-cluster repair: reseed from the point farthest from its centroid.
    while (true) {
      std::vector<Index> counts(static_cast<std::size_t>(k), 0);
      for (int label : labels) ++counts[static_cast<std::size_t>(label)];
      int empty = -1;
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0) {
          empty = c;
          break;
        }
      }
      if (empty < 0) break;
      Index farthest = 0;
      double farthest_d2 = -1.0;
      for (Index i = 0; i < n; ++i) {
        const double d2 =
            (rows.row(i) -
             centroids.row(labels[static_cast<std::size_t>(i)]))
                .squaredNorm();
        if (d2 > farthest_d2 &&
            counts[static_cast<std::size_t>(
                labels[static_cast<std::size_t>(i)])] > 1) {
          farthest_d2 = d2;
          farthest = i;
        }
      }
      centroids.row(empty) = rows.row(farthest);
      labels[static_cast<std::size_t>(farthest)] = empty;
      changed = true;
    }

    // Update step.
    Matrix sums = Matrix::Zero(k, rows.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += rows.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    if (cfg.on_iteration) {
      cfg.on_iteration(restart, it, wcss_of(rows, centroids, labels));
    }
    if (!changed) break;
  }

  LloydResult result;
  result.labels = std::move(labels);
  result.inertia = wcss_of(rows, centroids, result.labels);
  return result;
}

}  // namespace

CategoryPartition kmeans(const Matrix& rows, int k, const KmeansConfig& cfg) {
  const Index n = rows.rows();
  if (k < 2) {
    throw std::invalid_argument("k must be at least 2");
  }
  if (static_cast<Index>(k) > n) {
    throw std::invalid_argument("k = " + std::to_string(k) +
                                " exceeds the number of items " +
                                std::to_string(n));
  }
  if (!rows.allFinite()) {
    throw std::invalid_argument("rows contain non-finite values");
  }
  if (cfg.n_restarts < 1 || cfg.max_iter < 1) {
    throw std::invalid_argument("restarts and max_iter must be positive");
  }

  LloydResult best;
  for (int restart = 0; restart < cfg.n_restarts; ++restart) {
    Rng rng(derive_seed(cfg.seed, "kmeans-restart",
                        static_cast<std::uint64_t>(restart)));
    LloydResult run = lloyd(rows, k, cfg.max_iter, rng, cfg, restart);
    // Ties keep the earliest restart.
    if (run.inertia < best.inertia) {
      best = std::move(run);
    }
  }

  CategoryPartition partition;
  partition.k = k;
  partition.labels = std::move(best.labels);
  partition.inertia = best.inertia;
  partition.seed = cfg.seed;
  partition.source = SimilaritySource::raw;
  return partition;
}

CategoryPartition build_categories(const SimilarityMatrix& s, int k,
                                   SimilaritySource source,
                                   const KmeansConfig& cfg) {
  s.validate();
  if (!s.missing_pairs().empty()) {
    throw std::invalid_argument(
        "similarity matrix has missing pairs; cannot cluster its rows");
  }
  Matrix rows = s.values;
  if (!s.diagonal_defined) {
    // Stand in the row's off-diagonal maximum for the undefined diagonal.
    for (Index i = 0; i < s.n_items(); ++i) {
      double row_max = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < s.n_items(); ++j) {
        if (j != i) row_max = std::max(row_max, s.values(i, j));
      }
      rows(i, i) = row_max;
    }
  }
  CategoryPartition partition = kmeans(rows, k, cfg);
  partition.source = source;
  return partition;
}

namespace {

// Pair-counting contingency sums over all unordered item pairs.
struct PairCounts {
  double agree = 0.0;     // pairs co-clustered in both or separated in both
  double total = 0.0;
  double sum_ab = 0.0;    // sum over contingency cells of C(n_ij, 2)
  double sum_a = 0.0;     // per-cluster pair counts in a
  double sum_b = 0.0;
};

PairCounts pair_counts(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("partitions must have equal size >= 2");
  }
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> count_a;
  std::map<int, double> count_b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    count_a[a[i]] += 1.0;
    count_b[b[i]] += 1.0;
  }
  const auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  PairCounts counts;
  const double n = static_cast<double>(a.size());
  counts.total = choose2(n);
  for (const auto& [cell, m] : joint) counts.sum_ab += choose2(m);
  for (const auto& [cluster, m] : count_a) counts.sum_a += choose2(m);
  for (const auto& [cluster, m] : count_b) counts.sum_b += choose2(m);
  // Rand numerator: agreements = C(n,2) + 2*sum_ab - sum_a - sum_b.
  counts.agree = counts.total + 2.0 * counts.sum_ab - counts.sum_a - counts.sum_b;
  return counts;
}

}  // namespace

double pair_agreement(std::span<const int> a, std::span<const int> b) {
  const PairCounts counts = pair_counts(a, b);
  return counts.agree / counts.total;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  const PairCounts counts = pair_counts(a, b);
  const double expected = counts.sum_a * counts.sum_b / counts.total;
  const double max_index = 0.5 * (counts.sum_a + counts.sum_b);
  if (max_index == expected) {
    return 1.0;  // both partitions degenerate and identical in pair terms
  }
  return (counts.sum_ab - expected) / (max_index - expected);
}

}  // namespace repalign
