#pragma once

#include <cstdint>
#include <vector>

#include "repalign/similarity.hpp"

namespace repalign {

// Ground-truth generator: z-scored Gaussian features, a sparse nonnegative
// weight vector, and similarities equal to the weighted inner products plus
// symmetric Gaussian noise.
struct SynthSpec {
  Index n_items = 30;
  Index n_features = 50;
  double weight_sparsity = 0.5;  // fraction of zero weights
  double noise_sd = 0.0;         // absolute sd of the similarity noise
  int n_domains = 1;
  bool shared_weights = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  std::vector<DomainDataset> domains;
  // One entry when shared_weights, otherwise one per domain.
  std::vector<WeightVector> true_weights;
  // Empirical ceiling per domain: squared correlation between the clean and
  // the noisy similarities (1 at zero noise).
  std::vector<double> ceiling_r2;

  const WeightVector& weights_for(std::size_t domain) const {
    return true_weights.size() == 1 ? true_weights[0] : true_weights[domain];
  }
};

// Pure function of the spec; every stream is sub-seeded so the same spec
// always reproduces the same data.
SynthResult generate(const SynthSpec& spec);

// Standard deviation of the first domain's clean lower-triangle
// similarities under this spec; used to set noise_sd relative to signal.
double signal_sd(const SynthSpec& spec);

// Pearson correlation between estimated and true weights over the union of
// their supports. Scale-invariant; constant restrictions are an error.
double recovery_score(const WeightVector& estimated, const WeightVector& truth);

}  // namespace repalign
