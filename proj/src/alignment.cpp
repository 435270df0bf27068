#include "repalign/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace repalign {

PairList enumerate_pairs(Index n_items) {
  if (n_items < 2) {
    throw std::invalid_argument("pair enumeration needs at least 2 items");
  }
  PairList list;
  list.pairs.reserve(static_cast<std::size_t>(n_items * (n_items - 1) / 2));
  for (Index i = 1; i < n_items; ++i) {
    for (Index j = 0; j < i; ++j) {
      list.pairs.emplace_back(i, j);
    }
  }
  return list;
}

PairList observed_pairs(const SimilarityMatrix& s) {
  PairList list;
  for (Index i = 1; i < s.n_items(); ++i) {
    for (Index j = 0; j < i; ++j) {
      if (s.observed(i, j)) list.pairs.emplace_back(i, j);
    }
  }
  return list;
}

DesignMatrix DesignMatrix::build(const FeatureMatrix& f,
                                 const SimilarityMatrix& s,
                                 const PairList& pairs,
                                 const std::vector<bool>* keep,
                                 const DesignOptions& opts) {
  f.validate();
  s.validate();
  if (f.item_ids != s.item_ids) {
    throw std::invalid_argument("feature and similarity item ids differ");
  }
  if (keep && keep->size() != pairs.pairs.size()) {
    throw std::invalid_argument("mask length does not match pair count");
  }

  DesignMatrix d;
  d.intercept_ = opts.add_intercept;
  for (std::size_t r = 0; r < pairs.pairs.size(); ++r) {
    if (keep && !(*keep)[r]) continue;
    const auto [i, j] = pairs.pairs[r];
    if (i <= j || i >= f.n_items() || j < 0) {
      throw std::invalid_argument("pair list entry out of range");
    }
    if (!s.observed(i, j)) {
      throw std::invalid_argument(
          "pair (" + std::to_string(i) + "," + std::to_string(j) +
          ") has no observed similarity; mask it out or supply a value");
    }
    d.pairs_.pairs.emplace_back(i, j);
  }
  if (d.pairs_.pairs.empty()) {
    throw std::invalid_argument("empty design: no retained pairs");
  }

  d.n_rows_ = d.pairs_.size();
  d.n_cols_ = f.n_features() + (opts.add_intercept ? 1 : 0);
  d.y_.resize(d.n_rows_);
  for (Index r = 0; r < d.n_rows_; ++r) {
    const auto [i, j] = d.pairs_.pairs[static_cast<std::size_t>(r)];
    d.y_(r) = s.values(i, j);
  }
  if (opts.center_targets) {
    d.offset_ = d.y_.mean();
    d.y_.array() -= d.offset_;
  }

  const std::size_t bytes = static_cast<std::size_t>(d.n_rows_) *
                            static_cast<std::size_t>(d.n_cols_) * sizeof(double);
  if (bytes <= opts.dense_budget_bytes) {
    Matrix x(d.n_rows_, d.n_cols_);
    for (Index r = 0; r < d.n_rows_; ++r) {
      const auto [i, j] = d.pairs_.pairs[static_cast<std::size_t>(r)];
      x.row(r).head(f.n_features()) =
          f.values.row(i).cwiseProduct(f.values.row(j));
      if (d.intercept_) x(r, d.n_cols_ - 1) = 1.0;
    }
    d.dense_ = std::move(x);
  } else {
    d.features_ = f.values;
  }
  return d;
}

DesignMatrix DesignMatrix::from_raw(Matrix x, Vector y, PairList pairs) {
  if (x.rows() != y.size() || x.rows() == 0 || x.cols() == 0) {
    throw std::invalid_argument("raw design dimensions are inconsistent");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("raw design contains non-finite values");
  }
  if (!pairs.pairs.empty() && pairs.size() != x.rows()) {
    throw std::invalid_argument("pair list does not match raw design rows");
  }
  DesignMatrix d;
  d.n_rows_ = x.rows();
  d.n_cols_ = x.cols();
  d.y_ = std::move(y);
  d.dense_ = std::move(x);
  d.pairs_ = std::move(pairs);
  return d;
}

const Matrix& DesignMatrix::dense() const {
  if (!dense_) {
    throw std::logic_error("design matrix is streamed, not dense");
  }
  return *dense_;
}

Matrix DesignMatrix::rows_block(Index first, Index count) const {
  if (first < 0 || count < 0 || first + count > n_rows_) {
    throw std::out_of_range("design block out of range");
  }
  if (dense_) return dense_->middleRows(first, count);
  Matrix block(count, n_cols_);
  const Index d = features_.cols();
  for (Index r = 0; r < count; ++r) {
    const auto [i, j] = pairs_.pairs[static_cast<std::size_t>(first + r)];
    block.row(r).head(d) = features_.row(i).cwiseProduct(features_.row(j));
    if (intercept_) block(r, n_cols_ - 1) = 1.0;
  }
  return block;
}

Matrix DesignMatrix::gather_rows(std::span<const Index> idx) const {
  Matrix block(static_cast<Index>(idx.size()), n_cols_);
  if (dense_) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      block.row(static_cast<Index>(r)) = dense_->row(idx[r]);
    }
    return block;
  }
  const Index d = features_.cols();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto [i, j] = pairs_.pairs[static_cast<std::size_t>(idx[r])];
    block.row(static_cast<Index>(r)).head(d) =
        features_.row(i).cwiseProduct(features_.row(j));
    if (intercept_) block(static_cast<Index>(r), n_cols_ - 1) = 1.0;
  }
  return block;
}

namespace {
constexpr Index kStreamBlockRows = 2048;
}

Vector DesignMatrix::apply(const Vector& w) const {
  if (w.size() != n_cols_) {
    throw std::invalid_argument("weight dimension does not match design");
  }
  if (dense_) return *dense_ * w;
  Vector out(n_rows_);
  for (Index first = 0; first < n_rows_; first += kStreamBlockRows) {
    const Index count = std::min(kStreamBlockRows, n_rows_ - first);
    out.segment(first, count) = rows_block(first, count) * w;
  }
  return out;
}

Vector DesignMatrix::apply_transpose(const Vector& v) const {
  if (v.size() != n_rows_) {
    throw std::invalid_argument("vector length does not match design rows");
  }
  if (dense_) return dense_->transpose() * v;
  Vector out = Vector::Zero(n_cols_);
  for (Index first = 0; first < n_rows_; first += kStreamBlockRows) {
    const Index count = std::min(kStreamBlockRows, n_rows_ - first);
    out.noalias() += rows_block(first, count).transpose() * v.segment(first, count);
  }
  return out;
}

Matrix DesignMatrix::gram() const {
  Matrix a = Matrix::Zero(n_cols_, n_cols_);
  for (Index first = 0; first < n_rows_; first += kStreamBlockRows) {
    const Index count = std::min(kStreamBlockRows, n_rows_ - first);
    const Matrix block = rows_block(first, count);
    a.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  }
  return a.selfadjointView<Eigen::Lower>();
}

Vector DesignMatrix::gram_rhs() const { return apply_transpose(y_); }

void DesignMatrix::accumulate_gram(std::span<const Index> idx, Matrix& a,
                                   Vector& b) const {
  constexpr std::size_t chunk = 2048;
  for (std::size_t first = 0; first < idx.size(); first += chunk) {
    const std::size_t count = std::min(chunk, idx.size() - first);
    const Matrix block = gather_rows(idx.subspan(first, count));
    a.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    for (std::size_t r = 0; r < count; ++r) {
      b.noalias() += y_(idx[first + r]) * block.row(static_cast<Index>(r)).transpose();
    }
  }
  a = a.selfadjointView<Eigen::Lower>();
}

Vector DesignMatrix::predict(std::span<const Index> idx, const Vector& w) const {
  const Matrix block = gather_rows(idx);
  return (block * w).array() + offset_;
}

Vector DesignMatrix::targets_at(std::span<const Index> idx) const {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out(static_cast<Index>(r)) = y_(idx[r]) + offset_;
  }
  return out;
}

Vector DesignMatrix::unit_weight_predictions() const {
  Vector w = Vector::Ones(n_cols_);
  if (intercept_) w(n_cols_ - 1) = 0.0;
  return apply(w);
}

void RidgeConfig::validate() const {
  if (!(lambda >= 0.0)) {
    throw std::invalid_argument("lambda must be nonnegative");
  }
  if (max_iter < 1) {
    throw std::invalid_argument("max_iter must be at least 1");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("tol must be positive");
  }
}

RidgeSweep::RidgeSweep(const Matrix& gram, const Vector& rhs) {
  if (gram.rows() != gram.cols() || gram.rows() != rhs.size()) {
    throw std::invalid_argument("gram/rhs dimensions are inconsistent");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition of the gram matrix failed");
  }
  eigenvalues_ = eig.eigenvalues();
  eigenvectors_ = eig.eigenvectors();
  rotated_rhs_ = eigenvectors_.transpose() * rhs;
}

Vector RidgeSweep::solve(double lambda) const {
  if (lambda < 0.0) {
    throw std::invalid_argument("lambda must be nonnegative");
  }
  if (lambda == 0.0) {
    const double cutoff = static_cast<double>(eigenvalues_.size()) *
                          std::numeric_limits<double>::epsilon() *
                          std::max(max_eigenvalue(), 0.0);
    if (eigenvalues_.minCoeff() <= cutoff) {
      throw std::runtime_error(
          "normal equations are singular at lambda = 0; use lambda > 0");
    }
  }
  const Vector scaled =
      rotated_rhs_.array() / (eigenvalues_.array() + lambda);
  return eigenvectors_ * scaled;
}

WeightVector ridge_closed_form(const DesignMatrix& x, double lambda,
                               Index normal_equations_cap) {
  if (lambda < 0.0) {
    throw std::invalid_argument("lambda must be nonnegative");
  }
  if (x.cols() > normal_equations_cap) {
    throw std::invalid_argument(
        "design has " + std::to_string(x.cols()) +
        " columns, above the dense normal-equations cap of " +
        std::to_string(normal_equations_cap) + "; use ridge_iterative");
  }
  RidgeSweep sweep(x.gram(), x.gram_rhs());
  WeightVector w;
  w.values = sweep.solve(lambda);
  return w;
}

std::pair<double, Vector> objective_and_gradient(const DesignMatrix& x,
                                                 const Vector& w,
                                                 double lambda) {
  const Vector residual = x.apply(w) - x.targets();
  const double objective = residual.squaredNorm() + lambda * w.squaredNorm();
  Vector gradient = 2.0 * x.apply_transpose(residual) + 2.0 * lambda * w;
  return {objective, std::move(gradient)};
}

std::pair<WeightVector, SolveInfo> ridge_iterative(const DesignMatrix& x,
                                                   const RidgeConfig& cfg) {
  cfg.validate();
  const Index d = x.cols();
  const Vector& y = x.targets();
  const Vector b = x.gram_rhs();

  SolveInfo info;
  Vector w = Vector::Zero(d);
  Vector xw = Vector::Zero(x.rows());  // running X w
  Vector r = b;                        // residual of (X^T X + lambda I) w = b
  Vector p = r;
  double rr = r.squaredNorm();
  info.objective_path.push_back(y.squaredNorm());

  // Conjugate gradient on the normal equations; each step is an exact line
  // search, so the objective is non-increasing.
  for (int it = 1; it <= cfg.max_iter; ++it) {
    if (2.0 * std::sqrt(rr) <= cfg.tol) break;
    const Vector q = x.apply(p);
    const Vector ap = x.apply_transpose(q) + cfg.lambda * p;
    const double p_ap = p.dot(ap);
    if (!(p_ap > 0.0)) break;  // numerically semidefinite direction
    const double alpha = rr / p_ap;
    w.noalias() += alpha * p;
    xw.noalias() += alpha * q;
    r.noalias() -= alpha * ap;
    const double rr_new = r.squaredNorm();
    info.iterations = it;
    info.objective_path.push_back((xw - y).squaredNorm() +
                                  cfg.lambda * w.squaredNorm());
    if (2.0 * std::sqrt(rr_new) <= cfg.tol) {
      rr = rr_new;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }

  info.grad_norm = 2.0 * std::sqrt(rr);
  info.objective = (xw - y).squaredNorm() + cfg.lambda * w.squaredNorm();
  info.converged = info.grad_norm <= cfg.tol;
  if (!info.converged) {
    throw ConvergenceError("ridge solver did not converge in " +
                               std::to_string(cfg.max_iter) +
                               " iterations; gradient norm " +
                               std::to_string(info.grad_norm),
                           info.grad_norm);
  }
  WeightVector result;
  result.values = std::move(w);
  return {std::move(result), std::move(info)};
}

namespace {

// Largest eigenvalue of X^T X + lambda I via power iteration.
double lipschitz_bound(const DesignMatrix& x, double lambda) {
  const Index d = x.cols();
  Vector v = Vector::Ones(d) / std::sqrt(static_cast<double>(d));
  double eig = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vector av = x.apply_transpose(x.apply(v)) + lambda * v;
    const double norm = av.norm();
    if (norm == 0.0) return lambda;
    av /= norm;
    const double estimate = norm;
    if (it > 4 && std::abs(estimate - eig) <= 1e-10 * estimate) {
      eig = estimate;
      break;
    }
    eig = estimate;
    v = std::move(av);
  }
  return eig * 1.01;  // headroom: power iteration approaches from below
}

double kkt_residual(const Vector& w, const Vector& grad) {
  double worst = 0.0;
  for (Index k = 0; k < w.size(); ++k) {
    const double violation =
        w(k) > 0.0 ? std::abs(grad(k)) : std::max(0.0, -grad(k));
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace

std::pair<WeightVector, SolveInfo> ridge_nonneg(const DesignMatrix& x,
                                                const RidgeConfig& cfg) {
  cfg.validate();
  const Index d = x.cols();
  const Vector b = x.gram_rhs();
  const double lipschitz = 2.0 * lipschitz_bound(x, cfg.lambda);
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  const auto objective = [&](const Vector& w) {
    return (x.apply(w) - x.targets()).squaredNorm() +
           cfg.lambda * w.squaredNorm();
  };
  const auto gradient = [&](const Vector& w) -> Vector {
    return 2.0 * (x.apply_transpose(x.apply(w)) - b) + 2.0 * cfg.lambda * w;
  };

  SolveInfo info;
  Vector w = Vector::Zero(d);
  Vector z = w;
  double t = 1.0;
  double f_prev = objective(w);
  info.objective_path.push_back(f_prev);

  // FISTA with a monotone restart: if an accelerated step raises the
  // objective, momentum is dropped and the step retaken from the last
  // iterate.
  for (int it = 1; it <= cfg.max_iter; ++it) {
    Vector w_next = (z - step * gradient(z)).cwiseMax(0.0);
    double f_next = objective(w_next);
    if (f_next > f_prev) {
      w_next = (w - step * gradient(w)).cwiseMax(0.0);
      f_next = objective(w_next);
      t = 1.0;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = w_next + ((t - 1.0) / t_next) * (w_next - w);
    w = std::move(w_next);
    t = t_next;
    f_prev = f_next;
    info.iterations = it;
    info.objective_path.push_back(f_next);

    const Vector grad = gradient(w);
    info.grad_norm = kkt_residual(w, grad);
    if (info.grad_norm <= cfg.tol) {
      info.converged = true;
      info.objective = f_next;
      WeightVector result;
      result.values = std::move(w);
      result.nonnegative = true;
      return {std::move(result), std::move(info)};
    }
  }

  info.converged = false;
  info.objective = f_prev;
  throw ConvergenceError("nonnegative ridge did not converge in " +
                             std::to_string(cfg.max_iter) +
                             " iterations; KKT residual " +
                             std::to_string(info.grad_norm),
                         info.grad_norm);
}

}  // namespace repalign
