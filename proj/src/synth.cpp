#include "repalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "repalign/evaluation.hpp"
#include "repalign/util/rng.hpp"

namespace repalign {

void SynthSpec::validate() const {
  if (n_items < 2 || n_features < 1 || n_domains < 1) {
    throw std::invalid_argument("synth spec counts must be positive");
  }
  if (!(weight_sparsity >= 0.0 && weight_sparsity <= 1.0)) {
    throw std::invalid_argument("weight_sparsity must lie in [0, 1]");
  }
  if (!(noise_sd >= 0.0)) {
    throw std::invalid_argument("noise_sd must be nonnegative");
  }
}

namespace {

std::string item_name(int domain, Index i) {
  std::string id = std::to_string(i);
  while (id.size() < 4) id.insert(id.begin(), '0');
  return "d" + std::to_string(domain) + "_item" + id;
}

FeatureMatrix make_features(const SynthSpec& spec, int domain) {
  FeatureMatrix f;
  f.values.resize(spec.n_items, spec.n_features);
  Rng rng(derive_seed(spec.seed, "synth-features",
                      static_cast<std::uint64_t>(domain)));
  for (Index i = 0; i < spec.n_items; ++i) {
    for (Index k = 0; k < spec.n_features; ++k) {
      f.values(i, k) = rng.normal();
    }
    f.item_ids.push_back(item_name(domain, i));
  }
  return zscore_normalize(f).features;
}

WeightVector make_weights(const SynthSpec& spec, std::uint64_t stream_index) {
  const Index n_zero = static_cast<Index>(
      std::llround(spec.weight_sparsity * static_cast<double>(spec.n_features)));
  const Index n_active = spec.n_features - n_zero;
  Rng rng(derive_seed(spec.seed, "synth-weights", stream_index));
  std::vector<Index> order(static_cast<std::size_t>(spec.n_features));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  WeightVector w;
  w.values = Vector::Zero(spec.n_features);
  w.nonnegative = true;
  for (Index t = 0; t < n_active; ++t) {
    w.values(order[static_cast<std::size_t>(t)]) = rng.uniform(0.5, 1.5);
  }
  return w;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  SynthResult result;
  if (spec.shared_weights) {
    result.true_weights.push_back(make_weights(spec, 0));
  }

  for (int domain = 0; domain < spec.n_domains; ++domain) {
    if (!spec.shared_weights) {
      result.true_weights.push_back(
          make_weights(spec, static_cast<std::uint64_t>(domain)));
    }
    const WeightVector& w = spec.shared_weights ? result.true_weights.front()
                                                : result.true_weights.back();

    DomainDataset dataset;
    dataset.name = "domain" + std::to_string(domain);
    dataset.features = make_features(spec, domain);
    dataset.similarities = weighted_similarity(dataset.features, w);

    const Vector clean = [&] {
      const Index n = spec.n_items;
      Vector flat(n * (n - 1) / 2);
      Index t = 0;
      for (Index i = 1; i < n; ++i) {
        for (Index j = 0; j < i; ++j) {
          flat(t++) = dataset.similarities.values(i, j);
        }
      }
      return flat;
    }();

    if (spec.noise_sd > 0.0) {
      Rng rng(derive_seed(spec.seed, "synth-noise",
                          static_cast<std::uint64_t>(domain)));
      for (Index i = 0; i < spec.n_items; ++i) {
        for (Index j = 0; j <= i; ++j) {
          const double noise = spec.noise_sd * rng.normal();
          dataset.similarities.values(i, j) += noise;
          if (i != j) dataset.similarities.values(j, i) += noise;
        }
      }
    }

    // Empirical ceiling: how much of the noisy matrix the clean one explains.
    double ceiling = 1.0;
    if (spec.noise_sd > 0.0 && clean.size() >= 3) {
      const Index n = spec.n_items;
      Vector noisy(n * (n - 1) / 2);
      Index t = 0;
      for (Index i = 1; i < n; ++i) {
        for (Index j = 0; j < i; ++j) {
          noisy(t++) = dataset.similarities.values(i, j);
        }
      }
      const double clean_sd =
          std::sqrt((clean.array() - clean.mean()).square().mean());
      ceiling = clean_sd > 0.0 ? r_squared(clean, noisy, Metric::pearson2) : 0.0;
    }
    result.ceiling_r2.push_back(ceiling);
    result.domains.push_back(std::move(dataset));
  }
  return result;
}

double signal_sd(const SynthSpec& spec) {
  spec.validate();
  SynthSpec clean = spec;
  clean.noise_sd = 0.0;
  clean.n_domains = 1;
  const SynthResult result = generate(clean);
  const SimilarityMatrix& s = result.domains.front().similarities;
  const Index n = s.n_items();
  Vector flat(n * (n - 1) / 2);
  Index t = 0;
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < i; ++j) flat(t++) = s.values(i, j);
  }
  return std::sqrt((flat.array() - flat.mean()).square().mean());
}

double recovery_score(const WeightVector& estimated, const WeightVector& truth) {
  if (estimated.size() != truth.size()) {
    throw std::invalid_argument("weight vectors differ in length");
  }
  std::vector<double> a;
  std::vector<double> b;
  for (Index k = 0; k < truth.size(); ++k) {
    if (estimated.values(k) != 0.0 || truth.values(k) != 0.0) {
      a.push_back(estimated.values(k));
      b.push_back(truth.values(k));
    }
  }
  if (a.size() < 2) {
    throw std::invalid_argument("support union has fewer than 2 entries");
  }
  const Index m = static_cast<Index>(a.size());
  const Eigen::Map<const Vector> va(a.data(), m);
  const Eigen::Map<const Vector> vb(b.data(), m);
  const double mean_a = va.mean();
  const double mean_b = vb.mean();
  const double ssa = (va.array() - mean_a).square().sum();
  const double ssb = (vb.array() - mean_b).square().sum();
  if (ssa == 0.0 || ssb == 0.0) {
    throw std::invalid_argument("constant weight vector; correlation undefined");
  }
  const double cov = ((va.array() - mean_a) * (vb.array() - mean_b)).sum();
  return cov / std::sqrt(ssa * ssb);
}

}  // namespace repalign
