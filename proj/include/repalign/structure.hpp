#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "repalign/core_data.hpp"

namespace repalign {

enum class DistanceMode {
  max_shift,  // d_ij = max_offdiag(S) - s_ij; rank-reversing, no diagonal use
  self_sim    // d_ij = sqrt(max(0, s_ii + s_jj - 2 s_ij)); needs the diagonal
};

Matrix sim_to_dist(const SimilarityMatrix& s, DistanceMode mode);

enum class StopReason { tolerance, underflow, max_iter, exact_fit };

struct Embedding {
  Matrix coords;  // n_items x dim, column means zero
  double stress = 0.0;
  int n_restarts_used = 0;
  int iterations = 0;
  bool converged = true;
  StopReason stop_reason = StopReason::tolerance;
  // Columns beyond the positive-eigenvalue count of the centered Gram
  // matrix, zero-padded by classical MDS.
  Index zero_padded_dims = 0;
};

// Torgerson double-centering eigendecomposition. Exact (up to rotation and
// reflection) for Euclidean-realizable distance matrices.
Embedding classical_mds(const Matrix& d, Index dim);

// Least-squares isotonic (nondecreasing) fit of the values in their given
// order; pool-adjacent-violators.
Vector isotonic_fit(const Vector& values);

// Disparities: isotonic fit of `distances` against the dissimilarity order.
// Ties in the dissimilarities follow the primary approach (untied among
// themselves), which makes the result independent of tie input order.
Vector monotone_regression(const Vector& dissimilarities,
                           const Vector& distances);

// Kruskal stress-1: sqrt(sum (d - dhat)^2 / sum d^2) with d the embedding
// distances over the lower triangle.
double stress1(const Vector& distances, const Vector& disparities);

struct NmdsConfig {
  Index dim = 2;
  int max_iter = 10000;
  // Stress-improvement stop. Values below machine precision (the default)
  // are floor-guarded: the run also stops when the improvement underflows.
  double tol = 1e-100;
  int n_init = 4;
  std::uint64_t seed = 0;
  // Observer for per-iteration stress (restart, iteration, stress).
  std::function<void(int, int, double)> on_iteration;
};

// Nonmetric MDS: majorization steps against monotone-regressed disparities,
// safeguarded so the reported stress never increases between iterations.
// Restart 0 starts from classical MDS, the rest from seeded perturbations of
// it; the lowest-stress solution wins (ties to the earliest restart).
Embedding nonmetric_mds(const Matrix& d, const NmdsConfig& cfg = {});

struct Dendrogram {
  struct Merge {
    Index a = 0;       // cluster ids: leaves are 0..n-1, merge t creates n+t
    Index b = 0;
    double height = 0.0;
    Index size = 0;    // leaves under the new cluster
  };

  std::vector<Merge> merges;  // exactly n_leaves - 1 entries
  Index n_leaves = 0;

  // Partition produced by undoing the last (k - 1) merges.
  std::vector<std::vector<Index>> cut(Index n_clusters) const;

  std::string newick(std::span<const std::string> leaf_names) const;
};

// Agglomerative clustering, centroid linkage on point coordinates: each step
// merges the two clusters whose centroids are closest, at that distance.
// Centroid linkage permits height inversions.
Dendrogram hca_centroid(const Matrix& coords);

// Centroid linkage is coordinate-defined; a distance matrix is first
// embedded with classical MDS at full rank.
Dendrogram hca_centroid_from_distances(const Matrix& d);

}  // namespace repalign
