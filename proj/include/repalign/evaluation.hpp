#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "repalign/alignment.hpp"
#include "repalign/util/rng.hpp"

namespace repalign {

enum class Metric {
  pearson2,  // squared Pearson correlation
  cod        // coefficient of determination, 1 - SSE/SST
};

// Squared correlation is 0 when the predictions are (numerically) constant;
// a constant observed vector is an error in pearson2 mode.
double r_squared(const Vector& predicted, const Vector& observed, Metric metric);

enum class FoldMode {
  pair_level,     // folds partition pairs; items may straddle train and test
  image_disjoint  // folds partition items; no item in both train and test
};

struct FoldAssignment {
  int n_folds = 0;
  FoldMode mode = FoldMode::pair_level;
  std::uint64_t seed = 0;

  // Test fold per pair. In image-disjoint mode a pair belongs to a fold only
  // when both items share that fold's group; straddling pairs get -1.
  std::vector<int> pair_fold;
  // Image-disjoint only: group per item (empty in pair-level mode).
  std::vector<int> item_group;

  std::vector<Index> test_rows(int fold) const;
  std::vector<Index> train_rows(const PairList& pairs, int fold) const;

  // Asserts the no-shared-image property for image-disjoint assignments.
  void validate(const PairList& pairs) const;
};

FoldAssignment make_folds(const PairList& pairs, Index n_items, int n_folds,
                          FoldMode mode, std::uint64_t seed);

struct CvOptions {
  Metric metric = Metric::pearson2;
  bool nonnegative = false;
  double solver_tol = 1e-8;
  int solver_max_iter = 50000;
  DesignOptions design;
};

struct EvaluationReport {
  double r2_raw = 0.0;          // unit-weight model, all retained pairs
  double r2_transformed = 0.0;  // mean held-out score at lambda_star
  double r2_transformed_cod = 0.0;
  double lambda_star = 0.0;
  std::vector<double> per_fold_scores;                 // at lambda_star
  std::vector<std::pair<double, double>> lambda_curve; // lambda -> mean score
  Metric metric = Metric::pearson2;
  FoldMode fold_mode = FoldMode::pair_level;
  int n_folds = 0;
  std::uint64_t seed = 0;
  bool centered_targets = false;
  bool intercept = false;
};

struct CvResult {
  EvaluationReport report;
  WeightVector weights;  // refit on all retained pairs at lambda_star
  double final_objective = 0.0;
  double final_grad_norm = 0.0;
};

// Grid-searched regularized fit with held-out scoring. lambda_star maximizes
// the mean held-out score (ties go to the earliest grid entry); the returned
// weights are refit on all pairs at lambda_star.
CvResult cv_fit(const FeatureMatrix& f, const SimilarityMatrix& s,
                const std::vector<double>& lambda_grid,
                const FoldAssignment& folds, const CvOptions& opts = {});

// Same machinery on an explicit design (permutation baselines, tests).
CvResult cv_fit_design(const DesignMatrix& design,
                       const std::vector<double>& lambda_grid,
                       const FoldAssignment& folds, const CvOptions& opts = {});

// Coarse default grid: half-decade steps over 10^0..10^5.
std::vector<double> default_lambda_grid();

// Linear refinement between the coarse winner's grid neighbors.
std::vector<double> refine_lambda_grid(const std::vector<double>& coarse,
                                       double winner, int n_points = 9);

// Coarse pass plus one linear refinement around the winner.
CvResult cv_fit_refined(const FeatureMatrix& f, const SimilarityMatrix& s,
                        const FoldAssignment& folds, const CvOptions& opts = {});

enum class PermutationMode {
  none,              // identity; calibration hook equal to the unshuffled fit
  rows,              // permute the row order, targets kept in place
  cols_within_rows,  // shuffle each design column independently across rows
  both               // rows, then the per-column shuffle
};

// Held-out score of the full grid-search pipeline after shuffling the design
// matrix per mode, one entry per repeat. Targets keep their order.
std::vector<double> permutation_baseline(
    const FeatureMatrix& f, const SimilarityMatrix& s, PermutationMode mode,
    int n_repeats, std::uint64_t seed, const std::vector<double>& lambda_grid,
    int n_folds = 6, const CvOptions& opts = {});

// Applies the mode's shuffle in place; exposed for testing.
void permute_design_inplace(Matrix& x, PermutationMode mode, Rng& rng);

// Score of weighted_similarity(F_target, w) against the target's observed
// lower triangle.
double transfer_evaluate(const WeightVector& w, const DomainDataset& target,
                         Metric metric = Metric::pearson2);

struct JointResult {
  WeightVector weights;
  double lambda_star = 0.0;
  double pooled_heldout = 0.0;  // mean over folds, pooled across domains
  double pooled_heldout_cod = 0.0;
  double pooled_raw = 0.0;
  std::vector<double> per_fold_scores;
  std::vector<std::pair<double, double>> lambda_curve;
  // Held-out CV predictions at lambda_star, scored within each domain.
  std::map<std::string, double> per_domain_heldout;
  Metric metric = Metric::pearson2;
  int n_folds = 0;
  std::uint64_t seed = 0;
};

// One shared weight vector over the stacked within-domain designs. No
// cross-domain pairs exist; with a single dataset this reduces to cv_fit.
JointResult joint_fit(const std::vector<DomainDataset>& domains,
                      const std::vector<double>& lambda_grid, int n_folds,
                      FoldMode mode, std::uint64_t seed,
                      const CvOptions& opts = {});

// Joint fit on all domains but one, scored on the held-out domain's full
// observed lower triangle.
double leave_one_domain_out(const std::vector<DomainDataset>& domains,
                            const std::string& held_out_name,
                            const std::vector<double>& lambda_grid,
                            int n_folds, FoldMode mode, std::uint64_t seed,
                            const CvOptions& opts = {});

// Split-half reliability over raters: rater ids are split in two seeded
// halves, each half is aggregated, and the half means are scored against
// each other over pairs present in both halves.
double split_half_reliability(const std::vector<RatingRecord>& records,
                              const std::vector<std::string>& item_ids,
                              std::uint64_t seed,
                              Metric metric = Metric::pearson2);

}  // namespace repalign
