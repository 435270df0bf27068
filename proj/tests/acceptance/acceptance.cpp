// Acceptance suite: one criterion per run line, each with its tolerances
// pinned in code. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "repalign/categories.hpp"
#include "repalign/evaluation.hpp"
#include "repalign/structure.hpp"
#include "repalign/synth.hpp"
#include "repalign/util/rng.hpp"

namespace fs = std::filesystem;
using namespace repalign;
using Clock = std::chrono::steady_clock;

namespace {

struct CriterionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool condition, const std::string& message) {
  if (!condition) throw CriterionFailure(message);
}

std::string fmt(double value) {
  std::ostringstream out;
  out.precision(4);
  out << value;
  return out.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Pairwise design instance built from synthetic features.
DesignMatrix pairwise_instance(Index n_items, Index n_features,
                               std::uint64_t seed) {
  SynthSpec spec;
  spec.n_items = n_items;
  spec.n_features = n_features;
  spec.weight_sparsity = 0.5;
  spec.noise_sd = 0.2;
  spec.seed = seed;
  const SynthResult synth = generate(spec);
  const auto& dataset = synth.domains.front();
  return DesignMatrix::build(dataset.features, dataset.similarities,
                             observed_pairs(dataset.similarities));
}

// Shared instance for criteria 3-5: 120 items, 512 features, 32 informative,
// noise at 0.1 x signal sd.
struct RecoveryFixture {
  SynthResult synth;
  CvResult cv;
  double fit_seconds = 0.0;

  static const RecoveryFixture& get() {
    static const RecoveryFixture fixture = [] {
      SynthSpec spec;
      spec.n_items = 120;
      spec.n_features = 512;
      spec.weight_sparsity = 1.0 - 32.0 / 512.0;
      spec.n_domains = 1;
      spec.shared_weights = true;
      spec.seed = 20240809;
      spec.noise_sd = 0.1 * signal_sd(spec);

      RecoveryFixture fixture;
      fixture.synth = generate(spec);
      const auto& dataset = fixture.synth.domains.front();
      const PairList pairs = observed_pairs(dataset.similarities);
      const FoldAssignment folds =
          make_folds(pairs, spec.n_items, 6, FoldMode::pair_level,
                     derive_seed(spec.seed, "acceptance-folds"));
      const auto start = Clock::now();
      fixture.cv = cv_fit_refined(dataset.features, dataset.similarities,
                                  folds, {});
      fixture.fit_seconds = seconds_since(start);
      return fixture;
    }();
    return fixture;
  }
};

// --- criteria ---

std::string criterion_solver_equivalence() {
  const auto start = Clock::now();
  Rng rng(101);
  for (int instance = 0; instance < 50; ++instance) {
    const Index n_items = 8 + static_cast<Index>(rng.below(23));     // <= 30
    const Index n_features = 5 + static_cast<Index>(rng.below(196)); // <= 200
    const DesignMatrix design =
        pairwise_instance(n_items, n_features, 4000 + instance);
    const double lambda = std::pow(10.0, rng.uniform(-1.0, 2.0));

    const Vector closed = ridge_closed_form(design, lambda).values;
    const double closed_obj =
        objective_and_gradient(design, closed, lambda).first;

    RidgeConfig cfg;
    cfg.lambda = lambda;
    cfg.tol = 1e-10 * std::max(1.0, design.targets().norm());
    cfg.max_iter = 50000;
    const auto [w, info] = ridge_iterative(design, cfg);
    const double rel = std::abs(info.objective - closed_obj) /
                       std::max(1.0, std::abs(closed_obj));
    expect(rel <= 1e-6, "relative objective gap " + fmt(rel) +
                            " on instance " + std::to_string(instance));
  }
  const double elapsed = seconds_since(start);
  expect(elapsed < 10.0, "took " + fmt(elapsed) + "s, budget 10s");
  return "50 instances within 1e-6 relative objective in " + fmt(elapsed) + "s";
}

std::string criterion_gradient_check() {
  Rng rng(202);
  for (int instance = 0; instance < 20; ++instance) {
    const Index n_items = 6 + static_cast<Index>(rng.below(8));
    const Index n_features = 3 + static_cast<Index>(rng.below(10));
    const DesignMatrix design =
        pairwise_instance(n_items, n_features, 5000 + instance);
    Vector w(design.cols());
    for (Index k = 0; k < w.size(); ++k) w(k) = rng.normal();
    const double lambda = 0.7;
    const auto [obj, grad] = objective_and_gradient(design, w, lambda);
    const double h = 1e-5;
    for (Index k = 0; k < w.size(); ++k) {
      Vector wp = w;
      Vector wm = w;
      wp(k) += h;
      wm(k) -= h;
      const double fd = (objective_and_gradient(design, wp, lambda).first -
                         objective_and_gradient(design, wm, lambda).first) /
                        (2.0 * h);
      const double rel = std::abs(grad(k) - fd) / (1.0 + std::abs(grad(k)));
      expect(rel <= 1e-5, "gradient component " + std::to_string(k) +
                              " off by " + fmt(rel) + " on instance " +
                              std::to_string(instance));
    }
  }
  return "analytic gradient within 1e-5 of central differences, 20 instances";
}

std::string criterion_weight_recovery() {
  const auto& fixture = RecoveryFixture::get();
  const double recovery =
      recovery_score(fixture.cv.weights, fixture.synth.true_weights.front());
  const double heldout = fixture.cv.report.r2_transformed;
  expect(fixture.fit_seconds < 60.0,
         "fit took " + fmt(fixture.fit_seconds) + "s, budget 60s");
  expect(recovery >= 0.8, "recovery " + fmt(recovery) + " below 0.8");
  expect(heldout >= 0.7, "held-out pearson2 " + fmt(heldout) + " below 0.7");
  return "recovery " + fmt(recovery) + ", held-out " + fmt(heldout) +
         ", lambda* " + fmt(fixture.cv.report.lambda_star) + ", " +
         fmt(fixture.fit_seconds) + "s";
}

std::string criterion_permutation_controls() {
  const auto& fixture = RecoveryFixture::get();
  const auto& dataset = fixture.synth.domains.front();
  const std::vector<double> grid = default_lambda_grid();
  std::string detail;
  for (const auto& [name, mode] :
       std::vector<std::pair<std::string, PermutationMode>>{
           {"rows", PermutationMode::rows},
           {"cols-within-rows", PermutationMode::cols_within_rows},
           {"both", PermutationMode::both}}) {
    std::vector<double> scores = permutation_baseline(
        dataset.features, dataset.similarities, mode, 10,
        derive_seed(42, "acceptance-permutation-" + name), grid, 6);
    std::sort(scores.begin(), scores.end());
    const double median = 0.5 * (scores[4] + scores[5]);
    expect(median < 0.01,
           name + " median " + fmt(median) + " not below 0.01");
    detail += name + "=" + fmt(median) + " ";
  }
  return "median held-out R2 per mode: " + detail + "(all < 0.01)";
}

std::string criterion_transformation_uplift() {
  const auto& fixture = RecoveryFixture::get();
  const double uplift =
      fixture.cv.report.r2_transformed - fixture.cv.report.r2_raw;
  expect(uplift >= 0.2, "uplift " + fmt(uplift) + " below 0.2");
  return "raw " + fmt(fixture.cv.report.r2_raw) + " -> transformed " +
         fmt(fixture.cv.report.r2_transformed) + " (uplift " + fmt(uplift) +
         ")";
}

std::string criterion_fold_integrity() {
  for (Index n_items : {Index{10}, Index{60}, Index{120}}) {
    const PairList pairs = enumerate_pairs(n_items);
    const FoldAssignment folds = make_folds(
        pairs, n_items, 6, FoldMode::image_disjoint, 7 + n_items);
    // Exhaustive no-shared-image assertion.
    folds.validate(pairs);
    for (int fold = 0; fold < 6; ++fold) {
      std::vector<bool> in_test(static_cast<std::size_t>(n_items), false);
      for (Index row : folds.test_rows(fold)) {
        const auto [i, j] = pairs.pairs[static_cast<std::size_t>(row)];
        in_test[static_cast<std::size_t>(i)] = true;
        in_test[static_cast<std::size_t>(j)] = true;
      }
      for (Index row : folds.train_rows(pairs, fold)) {
        const auto [i, j] = pairs.pairs[static_cast<std::size_t>(row)];
        expect(!in_test[static_cast<std::size_t>(i)] &&
                   !in_test[static_cast<std::size_t>(j)],
               "shared image in fold " + std::to_string(fold) + " at n=" +
                   std::to_string(n_items));
      }
    }
  }
  expect(enumerate_pairs(120).size() == 7140,
         "enumerate_pairs(120) != 7140");
  return "no shared images for n in {10,60,120}, k=6; 120 items -> 7140 pairs";
}

std::string criterion_joint_lodo_coherence() {
  SynthSpec spec;
  spec.n_items = 30;
  spec.n_features = 64;
  spec.weight_sparsity = 0.75;
  spec.n_domains = 6;
  spec.shared_weights = true;
  spec.seed = 6006;
  spec.noise_sd = 0.3 * signal_sd(spec);
  const SynthResult synth = generate(spec);
  const std::vector<double> grid = default_lambda_grid();

  const JointResult joint = joint_fit(synth.domains, grid, 6,
                                      FoldMode::pair_level, 17);
  std::string detail = "pooled=" + fmt(joint.pooled_heldout) + " lodo:";
  for (const auto& domain : synth.domains) {
    const double lodo = leave_one_domain_out(synth.domains, domain.name, grid,
                                             6, FoldMode::pair_level, 17);
    const double gap = std::abs(lodo - joint.pooled_heldout);
    expect(gap <= 0.15, domain.name + " gap " + fmt(gap) + " above 0.15");
    detail += " " + fmt(lodo);
  }
  return detail;
}

std::string criterion_nmds_correctness() {
  // Exact Euclidean input embeds to near-zero stress.
  Rng rng(303);
  Matrix points(12, 2);
  for (Index i = 0; i < 12; ++i) {
    points(i, 0) = rng.normal();
    points(i, 1) = rng.normal();
  }
  Matrix d = Matrix::Zero(12, 12);
  for (Index i = 0; i < 12; ++i) {
    for (Index j = 0; j < 12; ++j) {
      d(i, j) = (points.row(i) - points.row(j)).norm();
    }
  }
  NmdsConfig cfg;
  cfg.dim = 2;
  cfg.seed = 5;
  const Embedding embedding = nonmetric_mds(d, cfg);
  expect(embedding.stress <= 1e-6,
         "stress " + fmt(embedding.stress) + " above 1e-6");

  // Stress is non-increasing on every iteration of every restart.
  const FeatureMatrix f = [] {
    SynthSpec spec;
    spec.n_items = 15;
    spec.n_features = 6;
    spec.seed = 99;
    return generate(spec).domains.front().features;
  }();
  const Matrix hard =
      sim_to_dist(inner_product_similarity(f), DistanceMode::max_shift);
  NmdsConfig traced;
  traced.dim = 2;
  traced.seed = 9;
  traced.max_iter = 500;
  std::map<int, std::vector<double>> traces;
  traced.on_iteration = [&](int restart, int, double stress) {
    traces[restart].push_back(stress);
  };
  nonmetric_mds(hard, traced);
  int checked = 0;
  for (const auto& [restart, trace] : traces) {
    for (std::size_t t = 1; t < trace.size(); ++t) {
      expect(trace[t] <= trace[t - 1] + 1e-12,
             "stress rose at restart " + std::to_string(restart) +
                 " iteration " + std::to_string(t));
      ++checked;
    }
  }
  expect(checked > 0, "no iterations traced");

  // PAVA equals brute force on every sequence of length <= 8 over a small
  // value grid, plus random real-valued inputs.
  const auto brute_force = [](const Vector& values) {
    const Index n = values.size();
    Vector best;
    double best_sse = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
      Vector fit(n);
      double previous = -std::numeric_limits<double>::infinity();
      bool feasible = true;
      Index start = 0;
      for (Index t = 0; t <= n - 1 && feasible; ++t) {
        const bool boundary = t == n - 1 || (mask & (1u << t));
        if (!boundary) continue;
        const double mean = values.segment(start, t - start + 1).mean();
        if (mean < previous) {
          feasible = false;
          break;
        }
        previous = mean;
        fit.segment(start, t - start + 1).setConstant(mean);
        start = t + 1;
      }
      if (!feasible) continue;
      const double sse = (fit - values).squaredNorm();
      if (sse < best_sse) {
        best_sse = sse;
        best = fit;
      }
    }
    return best;
  };
  long exhaustive = 0;
  for (Index n = 1; n <= 8; ++n) {
    const long count = static_cast<long>(std::pow(3, n));
    for (long code = 0; code < count; ++code) {
      Vector values(n);
      long rest = code;
      for (Index t = 0; t < n; ++t) {
        values(t) = 0.5 * static_cast<double>(rest % 3);
        rest /= 3;
      }
      const Vector fast = isotonic_fit(values);
      if (n == 1) {
        expect(fast(0) == values(0), "length-1 fit changed the value");
        ++exhaustive;
        continue;
      }
      const Vector slow = brute_force(values);
      expect((fast - slow).cwiseAbs().maxCoeff() <= 1e-9,
             "PAVA mismatch on exhaustive input");
      ++exhaustive;
    }
  }
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 2 + static_cast<Index>(rng.below(7));
    Vector values(n);
    for (Index t = 0; t < n; ++t) values(t) = rng.normal();
    expect((isotonic_fit(values) - brute_force(values)).cwiseAbs().maxCoeff() <=
               1e-9,
           "PAVA mismatch on random input");
  }
  return "stress " + fmt(embedding.stress) + "; " + std::to_string(checked) +
         " monotone steps; PAVA exact on " + std::to_string(exhaustive) +
         " exhaustive + 200 random inputs";
}

std::string criterion_hca_correctness() {
  Matrix fixture(3, 1);
  fixture << 0, 1, 5;
  const Dendrogram tree = hca_centroid(fixture);
  expect(tree.merges.size() == 2, "fixture merge count");
  expect(tree.merges[0].height == 1.0,
         "first merge height " + fmt(tree.merges[0].height) + " != 1");
  expect(tree.merges[1].height == 4.5,
         "second merge height " + fmt(tree.merges[1].height) + " != 4.5");

  Rng rng(404);
  for (int instance = 0; instance < 100; ++instance) {
    const Index n = 2 + static_cast<Index>(rng.below(39));
    Matrix points(n, 2);
    for (Index i = 0; i < n; ++i) {
      points(i, 0) = rng.normal();
      points(i, 1) = rng.normal();
    }
    const Dendrogram random_tree = hca_centroid(points);
    expect(static_cast<Index>(random_tree.merges.size()) == n - 1,
           "merge count != n-1 on instance " + std::to_string(instance));
  }
  return "fixture heights 1 and 4.5 exact; merge count n-1 on 100 instances";
}

std::string criterion_kmeans_planted() {
  // Part 1: block-structured similarities recover planted clusters.
  for (int k : {2, 3, 4}) {
    const Index per_block = 24 / k;
    const Index n = per_block * k;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(derive_seed(seed, "acceptance-blocks", static_cast<std::uint64_t>(k)));
      SimilarityMatrix s;
      s.values.resize(n, n);
      s.diagonal_defined = true;
      std::vector<int> truth;
      for (Index i = 0; i < n; ++i) {
        s.item_ids.push_back("i" + std::to_string(i));
        truth.push_back(static_cast<int>(i / per_block));
      }
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j <= i; ++j) {
          const bool same = truth[static_cast<std::size_t>(i)] ==
                            truth[static_cast<std::size_t>(j)];
          const double value = (same ? 5.0 : 0.5) + 0.2 * rng.normal();
          s.values(i, j) = value;
          s.values(j, i) = value;
        }
      }
      const CategoryPartition partition =
          build_categories(s, k, SimilaritySource::raw, {.seed = seed});
      const double agreement = pair_agreement(partition.labels, truth);
      expect(agreement >= 0.95, "k=" + std::to_string(k) + " seed " +
                                    std::to_string(seed) + " agreement " +
                                    fmt(agreement));
    }
  }

  // Part 2: suppressing nuisance features with the true weights beats the
  // raw similarities on planted categories.
  double raw_total = 0.0;
  double transformed_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed(seed, "acceptance-nuisance"));
    const Index k = 3;
    const Index per_cluster = 12;
    const Index n = k * per_cluster;
    const Index informative = 6;
    const Index nuisance = 24;
    FeatureMatrix f;
    f.values.resize(n, informative + nuisance);
    std::vector<int> truth;
    for (Index i = 0; i < n; ++i) {
      const int cluster = static_cast<int>(i / per_cluster);
      truth.push_back(cluster);
      for (Index d = 0; d < informative; ++d) {
        f.values(i, d) =
            ((d % k) == cluster ? 3.0 : 0.0) + 0.3 * rng.normal();
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

    const auto raw = build_categories(weighted_similarity(f, ones),
                                      static_cast<int>(k),
                                      SimilaritySource::raw, {.seed = seed});
    const auto transformed =
        build_categories(weighted_similarity(f, w_star), static_cast<int>(k),
                         SimilaritySource::transformed, {.seed = seed});
    raw_total += pair_agreement(raw.labels, truth);
    transformed_total += pair_agreement(transformed.labels, truth);
  }
  expect(transformed_total > raw_total,
         "transformed agreement " + fmt(transformed_total / 10.0) +
             " does not beat raw " + fmt(raw_total / 10.0));
  return "blocks recovered for k in {2,3,4} x 10 seeds; transformed " +
         fmt(transformed_total / 10.0) + " > raw " + fmt(raw_total / 10.0);
}

std::string criterion_cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "repalign_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
  };
  write("synth.json", R"({
    "seed": 21,
    "output_dir": "data",
    "synth": {"n_items": 20, "n_features": 16, "weight_sparsity": 0.5,
              "noise_relative_to_signal": 0.2, "n_domains": 2,
              "shared_weights": true}
  })");
  write("pipeline.json", R"({
    "seed": 22,
    "output_dir": "out",
    "lambda_grid": [0.5, 5, 50],
    "n_folds": 4,
    "datasets": [
      {"name": "domain0", "features": "data/domain0_features.csv",
       "similarities": "data/domain0_similarities.csv"},
      {"name": "domain1", "features": "data/domain1_features.csv",
       "similarities": "data/domain1_similarities.csv"}
    ]
  })");

  const auto run = [&](const std::string& args) {
    const std::string command = "cd '" + dir.string() + "' && '" +
                                std::string(REPALIGN_CLI_PATH) + "' " + args +
                                " >/dev/null 2>&1";
    expect(WEXITSTATUS(std::system(command.c_str())) == 0,
           "CLI failed: " + args);
  };
  const auto snapshot = [&](const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::ostringstream buffer;
      buffer << in.rdbuf();
      files[entry.path().string()] = buffer.str();
    }
    return files;
  };

  run("synth --config synth.json");
  run("evaluate --config pipeline.json");
  const auto first = snapshot(dir / "out");
  expect(!first.empty(), "no outputs produced");
  run("synth --config synth.json");
  run("evaluate --config pipeline.json");
  const auto second = snapshot(dir / "out");
  expect(first.size() == second.size(), "output file sets differ");
  for (const auto& [path, content] : first) {
    const auto it = second.find(path);
    expect(it != second.end(), "missing on rerun: " + path);
    expect(it->second == content, "content differs on rerun: " + path);
  }
  return std::to_string(first.size()) + " report files byte-identical on rerun";
}

struct Criterion {
  int id;
  std::string title;
  std::function<std::string()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "solver oracle equivalence", criterion_solver_equivalence},
      {2, "gradient check", criterion_gradient_check},
      {3, "weight recovery", criterion_weight_recovery},
      {4, "permutation controls", criterion_permutation_controls},
      {5, "transformation uplift", criterion_transformation_uplift},
      {6, "fold integrity", criterion_fold_integrity},
      {7, "joint-fit/LODO coherence", criterion_joint_lodo_coherence},
      {8, "NMDS correctness", criterion_nmds_correctness},
      {9, "HCA correctness", criterion_hca_correctness},
      {10, "k-means planted partitions", criterion_kmeans_planted},
      {11, "end-to-end determinism", criterion_cli_determinism},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    try {
      const std::string detail = criterion.body();
      std::cout << "[PASS] criterion " << criterion.id << " ("
                << criterion.title << "): " << detail << std::endl;
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] criterion " << criterion.id << " ("
                << criterion.title << "): " << e.what() << std::endl;
    }
  }
  if (failures) {
    std::cout << failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all " << criteria.size() << " criteria passed" << std::endl;
  return 0;
}
