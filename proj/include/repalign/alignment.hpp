#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "repalign/similarity.hpp"

namespace repalign {

// Lower-triangle pair enumeration, (i, j) with i > j, in the deterministic
// order (1,0),(2,0),(2,1),(3,0),...
struct PairList {
  std::vector<std::pair<Index, Index>> pairs;

  Index size() const { return static_cast<Index>(pairs.size()); }
};

PairList enumerate_pairs(Index n_items);

// Lower-triangle pairs whose similarity is observed in `s`.
PairList observed_pairs(const SimilarityMatrix& s);

struct DesignOptions {
  // Rows are materialized densely when rows*cols*8 bytes fit this budget,
  // otherwise they are synthesized from the feature matrix in blocks.
  std::size_t dense_budget_bytes = std::size_t{1} << 30;
  bool add_intercept = false;   // exploratory; appends a constant column
  bool center_targets = false;  // subtract mean(y); predictions add it back
};

// Pairwise regression design: row r for pair (i, j) is the elementwise
// product of the two items' feature rows, with target s_ij.
class DesignMatrix {
 public:
  static DesignMatrix build(const FeatureMatrix& f, const SimilarityMatrix& s,
                            const PairList& pairs,
                            const std::vector<bool>* keep = nullptr,
                            const DesignOptions& opts = {});
  // Wraps an explicit matrix/target pair (tests, permutation baselines).
  // The optional pair list keeps row-to-pair bookkeeping for fold logic.
  static DesignMatrix from_raw(Matrix x, Vector y, PairList pairs = {});

  Index rows() const { return n_rows_; }
  Index cols() const { return n_cols_; }
  bool is_dense() const { return dense_.has_value(); }
  const Matrix& dense() const;

  // Targets as fit (centered when requested); offset() is the removed mean.
  const Vector& targets() const { return y_; }
  double offset() const { return offset_; }

  Matrix rows_block(Index first, Index count) const;
  Matrix gather_rows(std::span<const Index> idx) const;

  Vector apply(const Vector& w) const;            // X w
  Vector apply_transpose(const Vector& v) const;  // X^T v
  Matrix gram() const;                            // X^T X
  Vector gram_rhs() const;                        // X^T y

  // Adds sum(x_r x_r^T) and sum(y_r x_r) over the given rows.
  void accumulate_gram(std::span<const Index> idx, Matrix& a, Vector& b) const;

  // Model predictions for the given rows, on the original target scale.
  Vector predict(std::span<const Index> idx, const Vector& w) const;
  Vector targets_at(std::span<const Index> idx) const;  // uncentered

  // Predictions of the unweighted model (unit weight per feature; the
  // intercept column, when present, gets weight zero).
  Vector unit_weight_predictions() const;

  const PairList& pairs() const { return pairs_; }
  bool has_intercept() const { return intercept_; }

 private:
  DesignMatrix() = default;

  std::optional<Matrix> dense_;
  Matrix features_;  // kept in streaming mode to synthesize rows
  PairList pairs_;
  Vector y_;
  double offset_ = 0.0;
  bool intercept_ = false;
  Index n_rows_ = 0;
  Index n_cols_ = 0;
};

struct RidgeConfig {
  double lambda = 0.0;
  int max_iter = 10000;
  double tol = 1e-8;        // stop when the objective gradient norm is below
  std::uint64_t seed = 0;   // reserved for stochastic solvers
  bool nonnegative = false;

  void validate() const;
};

struct SolveInfo {
  int iterations = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
  bool converged = true;
  std::vector<double> objective_path;  // initial value, then one per iteration
};

// Thrown when an iterative solver exhausts max_iter; carries the last
// gradient (or KKT) residual.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& msg, double residual)
      : std::runtime_error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

inline constexpr Index kNormalEquationsCap = 8192;

// Reusable eigendecomposition of X^T X for solving (X^T X + lambda I) w =
// X^T y across many lambda values. lambda = 0 on a rank-deficient system is
// rejected.
class RidgeSweep {
 public:
  RidgeSweep(const Matrix& gram, const Vector& rhs);

  Vector solve(double lambda) const;
  double max_eigenvalue() const { return eigenvalues_.size() ? eigenvalues_.maxCoeff() : 0.0; }

 private:
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Vector rotated_rhs_;  // V^T b
};

// w = (X^T X + lambda I)^-1 X^T y, dense normal equations. Guarded by a cap
// on the number of columns.
WeightVector ridge_closed_form(const DesignMatrix& x, double lambda,
                               Index normal_equations_cap = kNormalEquationsCap);

// Conjugate-gradient minimization of ||Xw - y||^2 + lambda ||w||^2. Stops at
// gradient norm <= tol; throws ConvergenceError past max_iter.
std::pair<WeightVector, SolveInfo> ridge_iterative(const DesignMatrix& x,
                                                   const RidgeConfig& cfg);

// Nonnegative ridge via accelerated projected gradient with monotone
// restarts. Convergence is the KKT residual: |grad_k| <= tol where w_k > 0
// and grad_k >= -tol where w_k = 0.
std::pair<WeightVector, SolveInfo> ridge_nonneg(const DesignMatrix& x,
                                                const RidgeConfig& cfg);

// objective = ||Xw - y||^2 + lambda w^T w; gradient = 2 X^T (Xw - y) + 2 lambda w.
std::pair<double, Vector> objective_and_gradient(const DesignMatrix& x,
                                                 const Vector& w,
                                                 double lambda);

}  // namespace repalign
