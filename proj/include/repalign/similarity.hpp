#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "repalign/core_data.hpp"

namespace repalign {

// Per-dimension multiplicative weights; the diagonal of the reweighting
// matrix. `nonnegative` marks vectors produced under the nonnegativity
// constraint.
struct WeightVector {
  Vector values;
  bool nonnegative = false;

  Index size() const { return values.size(); }
  void validate() const;
};

// S = F F^T. Symmetric by construction, diagonal defined.
SimilarityMatrix inner_product_similarity(const FeatureMatrix& f);

// s_ij = sum_k w_k f_ik f_jk. Each unordered pair is computed once and
// mirrored, so the result is exactly symmetric.
SimilarityMatrix weighted_similarity(const FeatureMatrix& f,
                                     const WeightVector& w);

// F'_ik = sqrt(w_k) f_ik, so that F' F'^T equals the weighted similarities.
// Requires nonnegative weights.
FeatureMatrix rescale_features(const FeatureMatrix& f, const WeightVector& w);

// Weight CSV: "# lambda=<value> provenance=<hash>" then "feature_index,value".
struct WeightFileMeta {
  double lambda = 0.0;
  std::string provenance;
};

void save_weights(const std::filesystem::path& path, const WeightVector& w,
                  const WeightFileMeta& meta);
std::pair<WeightVector, WeightFileMeta> load_weights(
    const std::filesystem::path& path);

}  // namespace repalign
