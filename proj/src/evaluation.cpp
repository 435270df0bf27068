#include "repalign/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace repalign {

double r_squared(const Vector& predicted, const Vector& observed, Metric metric) {
  if (predicted.size() != observed.size()) {
    throw std::invalid_argument("prediction/observation length mismatch");
  }
  const Index n = predicted.size();
  if (n < 3) {
    throw std::invalid_argument("need at least 3 values to score");
  }
  const double obs_mean = observed.mean();
  const double sst = (observed.array() - obs_mean).square().sum();
  if (metric == Metric::cod) {
    const double sse = (predicted - observed).squaredNorm();
    if (sst == 0.0) {
      throw std::invalid_argument("observed values are constant");
    }
    return 1.0 - sse / sst;
  }
  if (sst <= 0.0) {
    throw std::invalid_argument(
        "observed values are constant; squared correlation is undefined");
  }
  const double pred_mean = predicted.mean();
  const double ssp = (predicted.array() - pred_mean).square().sum();
  if (ssp <= 1e-30 * static_cast<double>(n)) {
    return 0.0;  // constant predictions carry no linear signal
  }
  const double cov =
      ((predicted.array() - pred_mean) * (observed.array() - obs_mean)).sum();
  const double r = cov / std::sqrt(ssp * sst);
  return r * r;
}

std::vector<Index> FoldAssignment::test_rows(int fold) const {
  std::vector<Index> rows;
  for (std::size_t r = 0; r < pair_fold.size(); ++r) {
    if (pair_fold[r] == fold) rows.push_back(static_cast<Index>(r));
  }
  return rows;
}

std::vector<Index> FoldAssignment::train_rows(const PairList& pairs,
                                              int fold) const {
  std::vector<Index> rows;
  if (mode == FoldMode::pair_level) {
    // Pair identities are irrelevant here; the fold labels suffice.
    for (std::size_t r = 0; r < pair_fold.size(); ++r) {
      if (pair_fold[r] != fold) rows.push_back(static_cast<Index>(r));
    }
    return rows;
  }
  if (pairs.pairs.size() != pair_fold.size()) {
    throw std::invalid_argument("fold assignment does not match pair list");
  }
  for (std::size_t r = 0; r < pair_fold.size(); ++r) {
    const auto [i, j] = pairs.pairs[r];
    // Neither endpoint may sit in the held-out image group.
    if (item_group[static_cast<std::size_t>(i)] != fold &&
        item_group[static_cast<std::size_t>(j)] != fold) {
      rows.push_back(static_cast<Index>(r));
    }
  }
  return rows;
}

void FoldAssignment::validate(const PairList& pairs) const {
  if (mode == FoldMode::pair_level) {
    for (int f : pair_fold) {
      if (f < 0 || f >= n_folds) {
        throw std::logic_error("pair without a valid fold");
      }
    }
    return;
  }
  if (pairs.pairs.size() != pair_fold.size()) {
    throw std::invalid_argument("fold assignment does not match pair list");
  }
  for (int fold = 0; fold < n_folds; ++fold) {
    std::set<Index> test_items;
    for (Index r : test_rows(fold)) {
      const auto [i, j] = pairs.pairs[static_cast<std::size_t>(r)];
      test_items.insert(i);
      test_items.insert(j);
    }
    for (Index r : train_rows(pairs, fold)) {
      const auto [i, j] = pairs.pairs[static_cast<std::size_t>(r)];
      if (test_items.count(i) || test_items.count(j)) {
        throw std::logic_error(
            "image-disjoint violation: item shared between train and test "
            "pairs of fold " +
            std::to_string(fold));
      }
    }
  }
}

FoldAssignment make_folds(const PairList& pairs, Index n_items, int n_folds,
                          FoldMode mode, std::uint64_t seed) {
  if (n_folds < 2) {
    throw std::invalid_argument("need at least 2 folds");
  }
  if (pairs.size() < n_folds) {
    throw std::invalid_argument("fewer pairs than folds");
  }
  FoldAssignment folds;
  folds.n_folds = n_folds;
  folds.mode = mode;
  folds.seed = seed;
  folds.pair_fold.assign(pairs.pairs.size(), -1);

  Rng rng(derive_seed(seed, "folds"));
  if (mode == FoldMode::pair_level) {
    std::vector<Index> order(pairs.pairs.size());
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    for (std::size_t t = 0; t < order.size(); ++t) {
      folds.pair_fold[static_cast<std::size_t>(order[t])] =
          static_cast<int>(t % static_cast<std::size_t>(n_folds));
    }
  } else {
    if (n_items < n_folds) {
      throw std::invalid_argument("fewer items than folds");
    }
    std::vector<Index> order(static_cast<std::size_t>(n_items));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    folds.item_group.assign(static_cast<std::size_t>(n_items), 0);
    for (std::size_t t = 0; t < order.size(); ++t) {
      folds.item_group[static_cast<std::size_t>(order[t])] =
          static_cast<int>(t % static_cast<std::size_t>(n_folds));
    }
    for (std::size_t r = 0; r < pairs.pairs.size(); ++r) {
      const auto [i, j] = pairs.pairs[r];
      if (i >= n_items) {
        throw std::invalid_argument("pair index exceeds n_items");
      }
      const int gi = folds.item_group[static_cast<std::size_t>(i)];
      const int gj = folds.item_group[static_cast<std::size_t>(j)];
      folds.pair_fold[r] = gi == gj ? gi : -1;
    }
  }

  // Pair-level dealing fills every fold. Image-disjoint groups smaller than
  // two items cannot produce within-group test pairs; such folds are skipped
  // at scoring time, and only a fully empty assignment is an error.
  int folds_with_tests = 0;
  for (int fold = 0; fold < n_folds; ++fold) {
    if (!folds.test_rows(fold).empty()) ++folds_with_tests;
  }
  if (mode == FoldMode::pair_level && folds_with_tests != n_folds) {
    throw std::invalid_argument("fold with no test pairs");
  }
  if (folds_with_tests == 0) {
    throw std::invalid_argument(
        "no fold has test pairs; use fewer folds or more items");
  }
  folds.validate(pairs);
  return folds;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int half_decade = 0; half_decade <= 10; ++half_decade) {
    grid.push_back(std::pow(10.0, 0.5 * half_decade));
  }
  return grid;
}

std::vector<double> refine_lambda_grid(const std::vector<double>& coarse,
                                       double winner, int n_points) {
  if (coarse.empty() || n_points < 2) {
    throw std::invalid_argument("refinement needs a grid and >= 2 points");
  }
  std::vector<double> sorted = coarse;
  std::sort(sorted.begin(), sorted.end());
  const auto it = std::find(sorted.begin(), sorted.end(), winner);
  if (it == sorted.end()) {
    throw std::invalid_argument("winner is not a coarse grid point");
  }
  const double lo = it == sorted.begin() ? winner / 2.0 : *(it - 1);
  const double hi = it + 1 == sorted.end() ? winner * 2.0 : *(it + 1);
  std::vector<double> grid;
  for (int p = 0; p < n_points; ++p) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(p) /
                            static_cast<double>(n_points - 1));
  }
  return grid;
}

CvResult cv_fit_design(const DesignMatrix& design,
                       const std::vector<double>& lambda_grid,
                       const FoldAssignment& folds, const CvOptions& opts) {
  if (lambda_grid.empty()) {
    throw std::invalid_argument("lambda grid is empty");
  }
  if (static_cast<Index>(folds.pair_fold.size()) != design.rows()) {
    throw std::invalid_argument("fold assignment does not match design rows");
  }

  const Matrix gram_all = design.gram();
  const Vector rhs_all = design.gram_rhs();

  // Train-side normal equations per fold, by subtracting the excluded rows
  // from the full system.
  std::vector<std::vector<Index>> test_idx(static_cast<std::size_t>(folds.n_folds));
  std::vector<std::vector<Index>> train_idx(static_cast<std::size_t>(folds.n_folds));
  std::vector<std::optional<RidgeSweep>> sweeps(
      static_cast<std::size_t>(folds.n_folds));
  for (int fold = 0; fold < folds.n_folds; ++fold) {
    test_idx[static_cast<std::size_t>(fold)] = folds.test_rows(fold);
    // A correlation needs at least 3 held-out pairs; smaller folds (possible
    // in image-disjoint mode with tiny groups) are skipped.
    if (test_idx[static_cast<std::size_t>(fold)].size() < 3) continue;
    train_idx[static_cast<std::size_t>(fold)] =
        folds.train_rows(design.pairs(), fold);
    if (train_idx[static_cast<std::size_t>(fold)].empty()) {
      throw std::invalid_argument("fold " + std::to_string(fold) +
                                  " has no training pairs");
    }
    std::vector<bool> in_train(static_cast<std::size_t>(design.rows()), false);
    for (Index r : train_idx[static_cast<std::size_t>(fold)]) {
      in_train[static_cast<std::size_t>(r)] = true;
    }
    std::vector<Index> excluded;
    for (Index r = 0; r < design.rows(); ++r) {
      if (!in_train[static_cast<std::size_t>(r)]) excluded.push_back(r);
    }
    Matrix gram_excl = Matrix::Zero(design.cols(), design.cols());
    Vector rhs_excl = Vector::Zero(design.cols());
    design.accumulate_gram(excluded, gram_excl, rhs_excl);
    sweeps[static_cast<std::size_t>(fold)].emplace(gram_all - gram_excl,
                                                   rhs_all - rhs_excl);
  }

  const auto heldout_scores = [&](double lambda, std::vector<double>* per_fold,
                                  double* mean_cod) {
    double sum = 0.0;
    double sum_cod = 0.0;
    int scored = 0;
    for (int fold = 0; fold < folds.n_folds; ++fold) {
      if (test_idx[static_cast<std::size_t>(fold)].size() < 3) continue;
      Vector w;
      if (opts.nonnegative) {
        RidgeConfig cfg;
        cfg.lambda = lambda;
        cfg.tol = opts.solver_tol;
        cfg.max_iter = opts.solver_max_iter;
        cfg.nonnegative = true;
        const auto& train = train_idx[static_cast<std::size_t>(fold)];
        Vector y_train = design.targets_at(train);
        y_train.array() -= design.offset();
        const auto sub =
            DesignMatrix::from_raw(design.gather_rows(train), std::move(y_train));
        w = ridge_nonneg(sub, cfg).first.values;
      } else {
        w = sweeps[static_cast<std::size_t>(fold)]->solve(lambda);
      }
      const auto& test = test_idx[static_cast<std::size_t>(fold)];
      const Vector pred = design.predict(test, w);
      const Vector obs = design.targets_at(test);
      const double score = r_squared(pred, obs, opts.metric);
      sum += score;
      sum_cod += r_squared(pred, obs, Metric::cod);
      ++scored;
      if (per_fold) per_fold->push_back(score);
    }
    if (scored == 0) {
      throw std::invalid_argument("no fold has test pairs to score");
    }
    if (mean_cod) *mean_cod = sum_cod / scored;
    return sum / scored;
  };

  // Grid search; ties go to the earliest grid entry.
  CvResult result;
  double best_score = -std::numeric_limits<double>::infinity();
  double lambda_star = lambda_grid.front();
  for (double lambda : lambda_grid) {
    const double score = heldout_scores(lambda, nullptr, nullptr);
    result.report.lambda_curve.emplace_back(lambda, score);
    if (score > best_score) {
      best_score = score;
      lambda_star = lambda;
    }
  }

  result.report.lambda_star = lambda_star;
  result.report.per_fold_scores.clear();
  double mean_cod = 0.0;
  result.report.r2_transformed =
      heldout_scores(lambda_star, &result.report.per_fold_scores, &mean_cod);
  result.report.r2_transformed_cod = mean_cod;
  result.report.metric = opts.metric;
  result.report.fold_mode = folds.mode;
  result.report.n_folds = folds.n_folds;
  result.report.seed = folds.seed;
  result.report.centered_targets = design.offset() != 0.0;
  result.report.intercept = design.has_intercept();

  // Raw (unit-weight) score over all retained rows.
  Vector all_targets = design.targets();
  all_targets.array() += design.offset();
  result.report.r2_raw =
      r_squared(design.unit_weight_predictions(), all_targets, opts.metric);

  // Final refit on all rows at lambda_star.
  if (opts.nonnegative) {
    RidgeConfig cfg;
    cfg.lambda = lambda_star;
    cfg.tol = opts.solver_tol;
    cfg.max_iter = opts.solver_max_iter;
    cfg.nonnegative = true;
    auto [w, info] = ridge_nonneg(design, cfg);
    result.weights = std::move(w);
    result.final_objective = info.objective;
    result.final_grad_norm = info.grad_norm;
  } else {
    RidgeSweep full(gram_all, rhs_all);
    result.weights.values = full.solve(lambda_star);
    const auto [objective, gradient] =
        objective_and_gradient(design, result.weights.values, lambda_star);
    result.final_objective = objective;
    result.final_grad_norm = gradient.norm();
  }
  return result;
}

CvResult cv_fit(const FeatureMatrix& f, const SimilarityMatrix& s,
                const std::vector<double>& lambda_grid,
                const FoldAssignment& folds, const CvOptions& opts) {
  const PairList pairs = observed_pairs(s);
  const DesignMatrix design =
      DesignMatrix::build(f, s, pairs, nullptr, opts.design);
  return cv_fit_design(design, lambda_grid, folds, opts);
}

CvResult cv_fit_refined(const FeatureMatrix& f, const SimilarityMatrix& s,
                        const FoldAssignment& folds, const CvOptions& opts) {
  const PairList pairs = observed_pairs(s);
  const DesignMatrix design =
      DesignMatrix::build(f, s, pairs, nullptr, opts.design);
  const std::vector<double> coarse = default_lambda_grid();
  CvResult coarse_result = cv_fit_design(design, coarse, folds, opts);
  const std::vector<double> fine =
      refine_lambda_grid(coarse, coarse_result.report.lambda_star);
  CvResult fine_result = cv_fit_design(design, fine, folds, opts);
  if (fine_result.report.r2_transformed > coarse_result.report.r2_transformed) {
    // Keep the full sweep in the curve for reporting.
    fine_result.report.lambda_curve.insert(
        fine_result.report.lambda_curve.begin(),
        coarse_result.report.lambda_curve.begin(),
        coarse_result.report.lambda_curve.end());
    return fine_result;
  }
  coarse_result.report.lambda_curve.insert(
      coarse_result.report.lambda_curve.end(),
      fine_result.report.lambda_curve.begin(),
      fine_result.report.lambda_curve.end());
  return coarse_result;
}

void permute_design_inplace(Matrix& x, PermutationMode mode, Rng& rng) {
  if (mode == PermutationMode::none) return;
  if (mode == PermutationMode::rows || mode == PermutationMode::both) {
    std::vector<Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    Matrix shuffled(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
      shuffled.row(r) = x.row(order[static_cast<std::size_t>(r)]);
    }
    x = std::move(shuffled);
  }
  if (mode == PermutationMode::cols_within_rows ||
      mode == PermutationMode::both) {
    // Each column is shuffled across rows with its own permutation. Keeping
    // the shuffle within each row instead would preserve every row sum, and
    // with it the unweighted model's signal, so the mode would not be a
    // chance control at all.
    for (Index c = 0; c < x.cols(); ++c) {
      for (Index r = x.rows(); r > 1; --r) {
        const Index other =
            static_cast<Index>(rng.below(static_cast<std::uint64_t>(r)));
        std::swap(x(r - 1, c), x(other, c));
      }
    }
  }
}

std::vector<double> permutation_baseline(
    const FeatureMatrix& f, const SimilarityMatrix& s, PermutationMode mode,
    int n_repeats, std::uint64_t seed, const std::vector<double>& lambda_grid,
    int n_folds, const CvOptions& opts) {
  if (n_repeats < 1) {
    throw std::invalid_argument("need at least one repeat");
  }
  const PairList pairs = observed_pairs(s);
  const DesignMatrix design =
      DesignMatrix::build(f, s, pairs, nullptr, opts.design);
  const Matrix base = design.rows_block(0, design.rows());

  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(n_repeats));
  Vector targets = design.targets();
  targets.array() += design.offset();
  for (int rep = 0; rep < n_repeats; ++rep) {
    Matrix x = base;
    Rng rng(derive_seed(seed, "permutation", static_cast<std::uint64_t>(rep)));
    permute_design_inplace(x, mode, rng);
    const DesignMatrix shuffled =
        DesignMatrix::from_raw(std::move(x), targets, pairs);
    const FoldAssignment folds =
        make_folds(pairs, s.n_items(), n_folds, FoldMode::pair_level,
                   derive_seed(seed, "permutation-folds",
                               static_cast<std::uint64_t>(rep)));
    scores.push_back(
        cv_fit_design(shuffled, lambda_grid, folds, opts).report.r2_transformed);
  }
  return scores;
}

double transfer_evaluate(const WeightVector& w, const DomainDataset& target,
                         Metric metric) {
  target.validate();
  if (w.size() != target.features.n_features()) {
    throw std::invalid_argument(
        "weight dimension " + std::to_string(w.size()) +
        " does not match target feature dimension " +
        std::to_string(target.features.n_features()));
  }
  const SimilarityMatrix predicted = weighted_similarity(target.features, w);
  const PairList pairs = observed_pairs(target.similarities);
  Vector pred(pairs.size());
  Vector obs(pairs.size());
  for (Index r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs.pairs[static_cast<std::size_t>(r)];
    pred(r) = predicted.values(i, j);
    obs(r) = target.similarities.values(i, j);
  }
  return r_squared(pred, obs, metric);
}

namespace {

struct StackedDesign {
  DesignMatrix design;            // stacked within-domain rows + global pairs
  PairList global_pairs;          // item indices offset per domain
  std::vector<Index> domain_of;   // per row
  Index total_items = 0;
};

StackedDesign stack_domains(const std::vector<DomainDataset>& domains) {
  if (domains.empty()) {
    throw std::invalid_argument("no datasets given");
  }
  const Index d = domains.front().features.n_features();
  Index total_rows = 0;
  Index total_items = 0;
  for (const auto& domain : domains) {
    domain.validate();
    if (domain.features.n_features() != d) {
      throw std::invalid_argument(
          "feature dimension mismatch across domains: '" + domain.name +
          "' has " + std::to_string(domain.features.n_features()) +
          ", expected " + std::to_string(d));
    }
    total_rows += observed_pairs(domain.similarities).size();
    total_items += domain.features.n_items();
  }

  Matrix x(total_rows, d);
  Vector y(total_rows);
  PairList global_pairs;
  std::vector<Index> domain_of;
  domain_of.reserve(static_cast<std::size_t>(total_rows));
  Index row = 0;
  Index item_offset = 0;
  for (std::size_t dom = 0; dom < domains.size(); ++dom) {
    const auto& domain = domains[dom];
    const PairList pairs = observed_pairs(domain.similarities);
    for (const auto& [i, j] : pairs.pairs) {
      x.row(row) = domain.features.values.row(i).cwiseProduct(
          domain.features.values.row(j));
      y(row) = domain.similarities.values(i, j);
      global_pairs.pairs.emplace_back(item_offset + i, item_offset + j);
      domain_of.push_back(static_cast<Index>(dom));
      ++row;
    }
    item_offset += domain.features.n_items();
  }
  return StackedDesign{
      DesignMatrix::from_raw(std::move(x), std::move(y), global_pairs),
      std::move(global_pairs), std::move(domain_of), total_items};
}

}  // namespace

JointResult joint_fit(const std::vector<DomainDataset>& domains,
                      const std::vector<double>& lambda_grid, int n_folds,
                      FoldMode mode, std::uint64_t seed, const CvOptions& opts) {
  StackedDesign stacked = stack_domains(domains);
  FoldAssignment folds = make_folds(stacked.global_pairs, stacked.total_items,
                                    n_folds, mode, seed);
  CvResult cv = cv_fit_design(stacked.design, lambda_grid, folds, opts);

  JointResult result;
  result.weights = std::move(cv.weights);
  result.lambda_star = cv.report.lambda_star;
  result.pooled_heldout = cv.report.r2_transformed;
  result.pooled_heldout_cod = cv.report.r2_transformed_cod;
  result.pooled_raw = cv.report.r2_raw;
  result.per_fold_scores = cv.report.per_fold_scores;
  result.lambda_curve = cv.report.lambda_curve;
  result.metric = opts.metric;
  result.n_folds = n_folds;
  result.seed = seed;

  // Held-out CV predictions at lambda_star, pooled per domain. Each test row
  // appears in exactly one fold; image-disjoint straddlers are never tested.
  std::vector<double> heldout_pred(static_cast<std::size_t>(stacked.design.rows()),
                                   std::numeric_limits<double>::quiet_NaN());
  for (int fold = 0; fold < n_folds; ++fold) {
    const auto test = folds.test_rows(fold);
    if (test.size() < 3) continue;
    const auto train = folds.train_rows(stacked.global_pairs, fold);
    Matrix gram = Matrix::Zero(stacked.design.cols(), stacked.design.cols());
    Vector rhs = Vector::Zero(stacked.design.cols());
    stacked.design.accumulate_gram(train, gram, rhs);
    const Vector w = RidgeSweep(gram, rhs).solve(result.lambda_star);
    const Vector pred = stacked.design.predict(test, w);
    for (std::size_t t = 0; t < test.size(); ++t) {
      heldout_pred[static_cast<std::size_t>(test[t])] = pred(static_cast<Index>(t));
    }
  }
  for (std::size_t dom = 0; dom < domains.size(); ++dom) {
    std::vector<double> pred;
    std::vector<double> obs;
    for (Index r = 0; r < stacked.design.rows(); ++r) {
      if (stacked.domain_of[static_cast<std::size_t>(r)] !=
          static_cast<Index>(dom)) {
        continue;
      }
      const double p = heldout_pred[static_cast<std::size_t>(r)];
      if (!std::isfinite(p)) continue;
      pred.push_back(p);
      obs.push_back(stacked.design.targets()(r));
    }
    if (pred.size() >= 3) {
      result.per_domain_heldout[domains[dom].name] = r_squared(
          Eigen::Map<const Vector>(pred.data(), static_cast<Index>(pred.size())),
          Eigen::Map<const Vector>(obs.data(), static_cast<Index>(obs.size())),
          opts.metric);
    }
  }
  return result;
}

double leave_one_domain_out(const std::vector<DomainDataset>& domains,
                            const std::string& held_out_name,
                            const std::vector<double>& lambda_grid,
                            int n_folds, FoldMode mode, std::uint64_t seed,
                            const CvOptions& opts) {
  if (domains.size() < 2) {
    throw std::invalid_argument("leave-one-domain-out needs >= 2 datasets");
  }
  std::vector<DomainDataset> train;
  const DomainDataset* held_out = nullptr;
  for (const auto& domain : domains) {
    if (domain.name == held_out_name) {
      held_out = &domain;
    } else {
      train.push_back(domain);
    }
  }
  if (!held_out) {
    throw std::invalid_argument("held-out domain not found: " + held_out_name);
  }
  const JointResult joint =
      joint_fit(train, lambda_grid, n_folds, mode, seed, opts);
  return transfer_evaluate(joint.weights, *held_out, opts.metric);
}

double split_half_reliability(const std::vector<RatingRecord>& records,
                              const std::vector<std::string>& item_ids,
                              std::uint64_t seed, Metric metric) {
  std::set<std::string> rater_set;
  for (const auto& rec : records) rater_set.insert(rec.rater_id);
  if (rater_set.size() < 2) {
    throw std::invalid_argument("split-half reliability needs >= 2 raters");
  }
  std::vector<std::string> raters(rater_set.begin(), rater_set.end());
  Rng rng(derive_seed(seed, "split-half"));
  rng.shuffle(raters);
  std::set<std::string> first_half(raters.begin(),
                                   raters.begin() + raters.size() / 2);

  std::vector<RatingRecord> half_a;
  std::vector<RatingRecord> half_b;
  for (const auto& rec : records) {
    (first_half.count(rec.rater_id) ? half_a : half_b).push_back(rec);
  }
  const SimilarityMatrix sa = aggregate_ratings(half_a, item_ids);
  const SimilarityMatrix sb = aggregate_ratings(half_b, item_ids);

  std::vector<double> a;
  std::vector<double> b;
  for (Index i = 1; i < sa.n_items(); ++i) {
    for (Index j = 0; j < i; ++j) {
      if (sa.observed(i, j) && sb.observed(i, j)) {
        a.push_back(sa.values(i, j));
        b.push_back(sb.values(i, j));
      }
    }
  }
  if (a.size() < 3) {
    throw std::invalid_argument(
        "fewer than 3 pairs rated in both split halves");
  }
  return r_squared(
      Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size())),
      Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size())), metric);
}

}  // namespace repalign
