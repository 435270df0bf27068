#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace repalign {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Items-by-dimensions representation. Rows are stimuli, columns are feature
// dimensions.
struct FeatureMatrix {
  Matrix values;                      // n_items x n_features
  std::vector<std::string> item_ids;  // unique, one per row

  Index n_items() const { return values.rows(); }
  Index n_features() const { return values.cols(); }

  // Enforces: finite entries, n_items >= 2, n_features >= 1, unique ids of
  // matching length. Throws std::invalid_argument.
  void validate() const;
};

// Symmetric pairwise similarities. Entries that were never observed (the
// diagonal when no self-similarities exist, or missing pairs) are stored as
// NaN; symmetry covers the NaN pattern as well.
struct SimilarityMatrix {
  Matrix values;  // n_items x n_items
  std::vector<std::string> item_ids;
  bool diagonal_defined = false;

  Index n_items() const { return values.rows(); }

  bool observed(Index i, Index j) const {
    return std::isfinite(values(i, j));
  }

  // Lower-triangle pairs (i > j) with no observed value.
  std::vector<std::pair<Index, Index>> missing_pairs() const;

  void validate() const;
};

// One crowdsourced judgment for an unordered pair of items.
struct RatingRecord {
  std::string item_a;
  std::string item_b;
  double rating = 0.0;
  std::string rater_id;
};

struct RatingScale {
  double lo = 0.0;
  double hi = 10.0;
};

// Named bundle of one feature matrix and one similarity matrix over the same
// items in the same order.
struct DomainDataset {
  std::string name;
  FeatureMatrix features;
  SimilarityMatrix similarities;

  void validate() const;
};

// Mean rating per unordered pair. The diagonal is left undefined; pairs with
// no ratings stay unobserved and can be listed via missing_pairs(). The
// per-pair mean is computed over value-sorted ratings, so the result is
// exactly invariant to record order.
SimilarityMatrix aggregate_ratings(const std::vector<RatingRecord>& records,
                                   const std::vector<std::string>& item_ids,
                                   const RatingScale& scale = {});

enum class StdConvention {
  population,  // divide by n (default)
  sample       // divide by n - 1
};

struct ZScoreResult {
  FeatureMatrix features;
  std::vector<Index> zero_variance_columns;  // mapped to all-zero columns
};

ZScoreResult zscore_normalize(const FeatureMatrix& f,
                              StdConvention convention = StdConvention::population);

// CSV formats (one '#' metadata line is written first when comments are
// given; readers skip any '#' lines):
//   features:     header "item_id,f0,...", then one row per item
//   similarities: header ",id0,id1,...", square body, empty cells permitted
//                 for the diagonal and for missing pairs
//   ratings:      header "item_a,item_b,rating,rater_id"
FeatureMatrix load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, const FeatureMatrix& f,
                   std::span<const std::string> comments = {});

SimilarityMatrix load_similarities(const std::filesystem::path& path);
void save_similarities(const std::filesystem::path& path,
                       const SimilarityMatrix& s,
                       std::span<const std::string> comments = {});

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path);
void save_ratings(const std::filesystem::path& path,
                  const std::vector<RatingRecord>& records,
                  std::span<const std::string> comments = {});

}  // namespace repalign
