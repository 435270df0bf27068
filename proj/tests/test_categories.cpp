#include <doctest.h>

#include <map>
#include <set>
#include <vector>

#include "repalign/categories.hpp"
#include "repalign/similarity.hpp"
#include "repalign/synth.hpp"
#include "test_support.hpp"

using namespace repalign;

namespace {

// Two clearly separated gaussian blobs in 2-D.
Matrix two_blobs(Index per_blob, std::uint64_t seed) {
  Rng rng(seed);
  Matrix rows(2 * per_blob, 2);
  for (Index i = 0; i < per_blob; ++i) {
    rows(i, 0) = rng.normal() * 0.2;
    rows(i, 1) = rng.normal() * 0.2;
    rows(per_blob + i, 0) = 10.0 + rng.normal() * 0.2;
    rows(per_blob + i, 1) = rng.normal() * 0.2;
  }
  return rows;
}

std::vector<int> blob_truth(Index per_blob) {
  std::vector<int> labels(static_cast<std::size_t>(2 * per_blob), 0);
  for (Index i = per_blob; i < 2 * per_blob; ++i) {
    labels[static_cast<std::size_t>(i)] = 1;
  }
  return labels;
}

}  // namespace

TEST_SUITE("categories") {

TEST_CASE("well separated blobs are recovered exactly") {
  const Matrix rows = two_blobs(8, 90);
  const CategoryPartition partition = kmeans(rows, 2, {.seed = 1});
  CHECK(pair_agreement(partition.labels, blob_truth(8)) == doctest::Approx(1.0));
}

TEST_CASE("k equal to n gives singleton clusters") {
  const Matrix rows = test::random_matrix(6, 3, 91);
  const CategoryPartition partition = kmeans(rows, 6, {.seed = 2});
  CHECK(partition.inertia == doctest::Approx(0.0));
  std::set<int> labels(partition.labels.begin(), partition.labels.end());
  CHECK(labels.size() == 6);
}

TEST_CASE("duplicate rows always co-cluster") {
  Matrix rows = test::random_matrix(7, 3, 92);
  rows.row(3) = rows.row(0);
  const CategoryPartition partition = kmeans(rows, 3, {.seed = 3});
  CHECK(partition.labels[0] == partition.labels[3]);
}

TEST_CASE("invalid k is rejected") {
  const Matrix rows = test::random_matrix(4, 2, 93);
  CHECK_THROWS_AS(kmeans(rows, 5, {}), std::invalid_argument);
  CHECK_THROWS_AS(kmeans(rows, 1, {}), std::invalid_argument);
}

TEST_CASE("fixed seeds reproduce the partition exactly") {
  const Matrix rows = test::random_matrix(20, 4, 94);
  const CategoryPartition a = kmeans(rows, 3, {.seed = 5});
  const CategoryPartition b = kmeans(rows, 3, {.seed = 5});
  CHECK(a.labels == b.labels);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("within-cluster sum of squares never increases") {
  const Matrix rows = test::random_matrix(30, 3, 95);
  KmeansConfig cfg;
  cfg.seed = 6;
  std::map<int, std::vector<double>> traces;
  cfg.on_iteration = [&](int restart, int iter, double wcss) {
    (void)iter;
    traces[restart].push_back(wcss);
  };
  kmeans(rows, 4, cfg);
  REQUIRE(!traces.empty());
  for (const auto& [restart, trace] : traces) {
    for (std::size_t t = 1; t < trace.size(); ++t) {
      CHECK(trace[t] <= trace[t - 1] + 1e-9);
    }
  }
}

TEST_CASE("every cluster ends up non-empty") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Matrix rows = test::random_matrix(15, 2, 960 + seed);
    const CategoryPartition partition = kmeans(rows, 5, {.seed = seed});
    std::vector<int> counts(5, 0);
    for (int label : partition.labels) {
      REQUIRE(label >= 0);
      REQUIRE(label < 5);
      ++counts[static_cast<std::size_t>(label)];
    }
    for (int count : counts) CHECK(count > 0);
  }
}

TEST_CASE("block-diagonal similarities recover their blocks") {
  const Index n = 12;
  SimilarityMatrix s;
  s.values = Matrix::Constant(n, n, 0.5);
  s.item_ids.clear();
  for (Index i = 0; i < n; ++i) s.item_ids.push_back("i" + std::to_string(i));
  s.diagonal_defined = true;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if ((i < n / 2) == (j < n / 2)) s.values(i, j) = 5.0;
    }
  }
  const CategoryPartition partition =
      build_categories(s, 2, SimilaritySource::raw, {.seed = 9});
  std::vector<int> truth(static_cast<std::size_t>(n), 0);
  for (Index i = n / 2; i < n; ++i) truth[static_cast<std::size_t>(i)] = 1;
  CHECK(pair_agreement(partition.labels, truth) == doctest::Approx(1.0));
  CHECK(partition.source == SimilaritySource::raw);
}

TEST_CASE("true-weight similarities beat raw ones on planted categories") {
  // Informative features encode the planted clusters; nuisance features are
  // loud noise that the true weights suppress.
  const Index per_cluster = 10;
  const Index k = 3;
  const Index n = per_cluster * k;
  double raw_total = 0.0;
  double transformed_total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(7800 + seed);
    const Index informative = 6;
    const Index nuisance = 18;
    FeatureMatrix f;
    f.values.resize(n, informative + nuisance);
    std::vector<int> truth;
    for (Index i = 0; i < n; ++i) {
      const int cluster = static_cast<int>(i / per_cluster);
      truth.push_back(cluster);
      for (Index d = 0; d < informative; ++d) {
        const double center = (d % k) == static_cast<Index>(cluster) ? 3.0 : 0.0;
        f.values(i, d) = center + 0.3 * rng.normal();
      }
      for (Index d = 0; d < nuisance; ++d) {
        f.values(i, informative + d) = 3.0 * rng.normal();
      }
      f.item_ids.push_back("i" + std::to_string(i));
    }
    WeightVector w_star;
    w_star.values = Vector::Zero(informative + nuisance);
    w_star.values.head(informative).setOnes();
    w_star.nonnegative = true;

    WeightVector ones;
    ones.values = Vector::Ones(informative + nuisance);

    const SimilarityMatrix raw = weighted_similarity(f, ones);
    const SimilarityMatrix transformed = weighted_similarity(f, w_star);
    const auto raw_part = build_categories(
        raw, static_cast<int>(k), SimilaritySource::raw, {.seed = seed});
    const auto tr_part =
        build_categories(transformed, static_cast<int>(k),
                         SimilaritySource::transformed, {.seed = seed});
    raw_total += adjusted_rand_index(raw_part.labels, truth);
    transformed_total += adjusted_rand_index(tr_part.labels, truth);
  }
  CHECK(transformed_total > raw_total);
}

TEST_CASE("undefined diagonals are replaced by the row maximum") {
  SimilarityMatrix s;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  s.values.resize(3, 3);
  s.values << nan, 4.0, 1.0, 4.0, nan, 2.0, 1.0, 2.0, nan;
  s.item_ids = {"a", "b", "c"};
  s.diagonal_defined = false;
  CHECK_NOTHROW(build_categories(s, 2, SimilaritySource::raw, {.seed = 1}));
}

TEST_CASE("the full space-by-k condition grid yields six partitions") {
  const FeatureMatrix f = test::random_features(15, 8, 97);
  WeightVector w;
  w.values = test::random_vector(8, 98).cwiseAbs();
  const SimilarityMatrix raw = inner_product_similarity(f);
  const SimilarityMatrix transformed = weighted_similarity(f, w);
  int produced = 0;
  for (const auto* s : {&raw, &transformed}) {
    for (int k : {2, 3, 4}) {
      const auto partition = build_categories(
          *s, k, s == &raw ? SimilaritySource::raw : SimilaritySource::transformed,
          {.seed = 10});
      CHECK(partition.k == k);
      ++produced;
    }
  }
  CHECK(produced == 6);
}

TEST_CASE("agreement scores are label-permutation invariant") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> b{2, 2, 0, 0, 1, 1};  // same partition, new labels
  CHECK(pair_agreement(a, b) == doctest::Approx(1.0));
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(1.0));

  const std::vector<int> c{0, 1, 0, 1, 0, 1};
  CHECK(pair_agreement(a, c) < 1.0);
  CHECK(adjusted_rand_index(a, c) < 0.5);
}

}  // TEST_SUITE
