#include <doctest.h>

#include <cmath>

#include "repalign/evaluation.hpp"
#include "repalign/synth.hpp"
#include "test_support.hpp"

using namespace repalign;

TEST_SUITE("synth") {

TEST_CASE("generation is a pure function of the spec") {
  SynthSpec spec;
  spec.n_items = 10;
  spec.n_features = 8;
  spec.weight_sparsity = 0.5;
  spec.noise_sd = 0.3;
  spec.n_domains = 2;
  spec.seed = 123;
  const SynthResult a = generate(spec);
  const SynthResult b = generate(spec);
  for (std::size_t d = 0; d < a.domains.size(); ++d) {
    CHECK(a.domains[d].features.values == b.domains[d].features.values);
    CHECK(a.domains[d].similarities.values == b.domains[d].similarities.values);
  }
  CHECK(a.true_weights[0].values == b.true_weights[0].values);
}

TEST_CASE("zero noise reproduces the weighted similarities exactly") {
  SynthSpec spec;
  spec.n_items = 12;
  spec.n_features = 6;
  spec.weight_sparsity = 0.5;
  spec.noise_sd = 0.0;
  spec.seed = 5;
  const SynthResult synth = generate(spec);
  const auto& dataset = synth.domains.front();
  const SimilarityMatrix expected =
      weighted_similarity(dataset.features, synth.true_weights.front());
  CHECK(dataset.similarities.values == expected.values);
  CHECK(synth.ceiling_r2.front() == 1.0);
}

TEST_CASE("features are z-scored") {
  SynthSpec spec;
  spec.n_items = 30;
  spec.n_features = 5;
  spec.seed = 6;
  const auto f = generate(spec).domains.front().features;
  for (Index k = 0; k < f.n_features(); ++k) {
    CHECK(f.values.col(k).mean() == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(f.values.col(k).squaredNorm() / spec.n_items ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("noiseless instances are recovered nearly perfectly") {
  SynthSpec spec;
  spec.n_items = 16;
  spec.n_features = 12;
  spec.weight_sparsity = 0.5;
  spec.noise_sd = 0.0;
  spec.seed = 7;
  const SynthResult synth = generate(spec);
  const auto& dataset = synth.domains.front();
  const PairList pairs = observed_pairs(dataset.similarities);
  const FoldAssignment folds =
      make_folds(pairs, spec.n_items, 4, FoldMode::pair_level, 1);
  const CvResult fit = cv_fit(dataset.features, dataset.similarities,
                              {1e-9, 1e-7, 1e-5}, folds);
  CHECK(fit.report.r2_transformed >= 0.999);
  CHECK(recovery_score(fit.weights, synth.true_weights.front()) >= 0.999);
}

TEST_CASE("all-zero weights leave only noise") {
  SynthSpec spec;
  spec.n_items = 24;
  spec.n_features = 10;
  spec.weight_sparsity = 1.0;
  spec.noise_sd = 1.0;
  spec.seed = 8;
  const SynthResult synth = generate(spec);
  const auto& dataset = synth.domains.front();
  CHECK(synth.true_weights.front().values.isZero());
  const PairList pairs = observed_pairs(dataset.similarities);
  const FoldAssignment folds =
      make_folds(pairs, spec.n_items, 4, FoldMode::pair_level, 2);
  const CvResult fit = cv_fit(dataset.features, dataset.similarities,
                              default_lambda_grid(), folds);
  CHECK(fit.report.r2_transformed < 0.05);
}

TEST_CASE("shared weights make domains exchangeable") {
  SynthSpec spec;
  spec.n_items = 12;
  spec.n_features = 10;
  spec.weight_sparsity = 0.4;
  spec.noise_sd = 0.1;
  spec.n_domains = 3;
  spec.shared_weights = true;
  spec.seed = 9;
  const SynthResult synth = generate(spec);
  CHECK(synth.true_weights.size() == 1);

  const std::vector<double> grid{0.1, 1.0, 10.0};
  const double lodo = leave_one_domain_out(synth.domains, "domain2", grid, 4,
                                           FoldMode::pair_level, 3);
  const JointResult pooled =
      joint_fit(synth.domains, grid, 4, FoldMode::pair_level, 3);
  CHECK(std::abs(lodo - pooled.pooled_heldout) < 0.25);
}

TEST_CASE("per-domain weights differ when not shared") {
  SynthSpec spec;
  spec.n_items = 8;
  spec.n_features = 6;
  spec.weight_sparsity = 0.3;
  spec.n_domains = 2;
  spec.shared_weights = false;
  spec.seed = 10;
  const SynthResult synth = generate(spec);
  REQUIRE(synth.true_weights.size() == 2);
  CHECK(synth.true_weights[0].values != synth.true_weights[1].values);
}

TEST_CASE("recovery score is scale invariant") {
  WeightVector w;
  w.values = test::random_vector(9, 11).cwiseAbs();
  CHECK(recovery_score(w, w) == doctest::Approx(1.0));
  WeightVector scaled;
  scaled.values = 3.5 * w.values;
  CHECK(recovery_score(scaled, w) == doctest::Approx(1.0));

  WeightVector constant;
  constant.values = Vector::Ones(9);
  CHECK_THROWS_AS(recovery_score(constant, constant), std::invalid_argument);
}

TEST_CASE("signal sd matches the clean generation") {
  SynthSpec spec;
  spec.n_items = 15;
  spec.n_features = 12;
  spec.weight_sparsity = 0.5;
  spec.noise_sd = 0.75;  // ignored by signal_sd
  spec.seed = 12;
  const double sd = signal_sd(spec);
  CHECK(sd > 0.0);

  SynthSpec clean = spec;
  clean.noise_sd = 0.0;
  const auto s = generate(clean).domains.front().similarities;
  Vector flat(spec.n_items * (spec.n_items - 1) / 2);
  Index t = 0;
  for (Index i = 1; i < spec.n_items; ++i) {
    for (Index j = 0; j < i; ++j) flat(t++) = s.values(i, j);
  }
  const double expected =
      std::sqrt((flat.array() - flat.mean()).square().mean());
  CHECK(sd == doctest::Approx(expected));
}

TEST_CASE("ceiling reflects the signal-to-noise ratio") {
  SynthSpec spec;
  spec.n_items = 20;
  spec.n_features = 15;
  spec.weight_sparsity = 0.5;
  spec.seed = 13;
  spec.noise_sd = 0.1 * signal_sd(spec);
  const SynthResult synth = generate(spec);
  CHECK(synth.ceiling_r2.front() > 0.9);
  CHECK(synth.ceiling_r2.front() <= 1.0);

  spec.noise_sd = 10.0 * signal_sd(spec);
  const SynthResult noisy = generate(spec);
  CHECK(noisy.ceiling_r2.front() < 0.25);
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec spec;
  spec.weight_sparsity = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.weight_sparsity = 0.5;
  spec.noise_sd = -1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.noise_sd = 0.0;
  spec.n_items = 1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

}  // TEST_SUITE
