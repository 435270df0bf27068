#include "repalign/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "repalign/util/rng.hpp"

namespace repalign {

namespace {

void check_distance_matrix(const Matrix& d) {
  if (d.rows() != d.cols() || d.rows() < 2) {
    throw std::invalid_argument("distance matrix must be square, n >= 2");
  }
  if (!d.allFinite()) {
    throw std::invalid_argument("distance matrix has non-finite entries");
  }
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  for (Index i = 0; i < d.rows(); ++i) {
    if (std::abs(d(i, i)) > 1e-12 * scale) {
      throw std::invalid_argument("distance matrix diagonal must be zero");
    }
    for (Index j = 0; j < i; ++j) {
      if (d(i, j) < 0.0) {
        throw std::invalid_argument("distances must be nonnegative");
      }
      if (std::abs(d(i, j) - d(j, i)) > 1e-9 * scale) {
        throw std::invalid_argument("distance matrix must be symmetric");
      }
    }
  }
}

// Lower-triangle flattening in (1,0),(2,0),(2,1),... order.
Vector flatten_lower(const Matrix& m) {
  const Index n = m.rows();
  Vector out(n * (n - 1) / 2);
  Index t = 0;
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < i; ++j) out(t++) = m(i, j);
  }
  return out;
}

Vector pairwise_distances(const Matrix& coords) {
  const Index n = coords.rows();
  Vector out(n * (n - 1) / 2);
  Index t = 0;
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < i; ++j) {
      out(t++) = (coords.row(i) - coords.row(j)).norm();
    }
  }
  return out;
}

void center_columns(Matrix& coords) {
  coords.rowwise() -= coords.colwise().mean();
}

}  // namespace

Matrix sim_to_dist(const SimilarityMatrix& s, DistanceMode mode) {
  s.validate();
  const Index n = s.n_items();
  if (!s.missing_pairs().empty()) {
    throw std::invalid_argument(
        "similarity matrix has missing pairs; distances are undefined");
  }
  Matrix d = Matrix::Zero(n, n);
  if (mode == DistanceMode::max_shift) {
    double max_offdiag = -std::numeric_limits<double>::infinity();
    for (Index i = 1; i < n; ++i) {
      for (Index j = 0; j < i; ++j) {
        max_offdiag = std::max(max_offdiag, s.values(i, j));
      }
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i != j) d(i, j) = max_offdiag - s.values(i, j);
      }
    }
  } else {
    if (!s.diagonal_defined) {
      throw std::invalid_argument(
          "self-similarity distance mode needs a defined diagonal");
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i != j) {
          d(i, j) = std::sqrt(std::max(
              0.0, s.values(i, i) + s.values(j, j) - 2.0 * s.values(i, j)));
        }
      }
    }
  }
  return d;
}

Embedding classical_mds(const Matrix& d, Index dim) {
  check_distance_matrix(d);
  if (dim < 1) {
    throw std::invalid_argument("embedding dimension must be >= 1");
  }
  const Index n = d.rows();

  // Torgerson: B = -1/2 J D^2 J with J the centering projector.
  const Matrix d2 = d.array().square();
  const Vector row_means = d2.rowwise().mean();
  const double grand_mean = d2.mean();
  Matrix b(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      b(i, j) = -0.5 * (d2(i, j) - row_means(i) - row_means(j) + grand_mean);
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed in classical MDS");
  }
  const Vector& values = eig.eigenvalues();  // ascending
  const double cutoff = static_cast<double>(n) *
                        std::numeric_limits<double>::epsilon() *
                        std::max(0.0, values(n - 1));

  Embedding embedding;
  embedding.coords = Matrix::Zero(n, dim);
  for (Index k = 0; k < dim; ++k) {
    const Index src = n - 1 - k;
    if (src < 0 || values(src) <= cutoff) {
      ++embedding.zero_padded_dims;  // not enough positive curvature
      continue;
    }
    Vector axis = eig.eigenvectors().col(src) * std::sqrt(values(src));
    // Deterministic sign: largest-magnitude coordinate is positive.
    Index arg_max = 0;
    axis.cwiseAbs().maxCoeff(&arg_max);
    if (axis(arg_max) < 0.0) axis = -axis;
    embedding.coords.col(k) = axis;
  }
  center_columns(embedding.coords);

  const Vector dist = pairwise_distances(embedding.coords);
  const Vector disparities = monotone_regression(flatten_lower(d), dist);
  embedding.stress = stress1(dist, disparities);
  embedding.n_restarts_used = 0;
  embedding.iterations = 0;
  embedding.converged = true;
  embedding.stop_reason = StopReason::exact_fit;
  return embedding;
}

Vector isotonic_fit(const Vector& values) {
  const Index n = values.size();
  std::vector<double> mean;
  std::vector<double> weight;
  mean.reserve(static_cast<std::size_t>(n));
  weight.reserve(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t) {
    mean.push_back(values(t));
    weight.push_back(1.0);
    // Pool while the nondecreasing constraint is violated.
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const double w = weight[weight.size() - 2] + weight.back();
      const double m = (mean[mean.size() - 2] * weight[weight.size() - 2] +
                        mean.back() * weight.back()) /
                       w;
      mean.pop_back();
      weight.pop_back();
      mean.back() = m;
      weight.back() = w;
    }
  }
  Vector out(n);
  Index t = 0;
  for (std::size_t blk = 0; blk < mean.size(); ++blk) {
    for (int c = 0; c < static_cast<int>(weight[blk] + 0.5); ++c) {
      out(t++) = mean[blk];
    }
  }
  return out;
}

Vector monotone_regression(const Vector& dissimilarities,
                           const Vector& distances) {
  if (dissimilarities.size() != distances.size()) {
    throw std::invalid_argument("dissimilarity/distance length mismatch");
  }
  const Index n = distances.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  // Primary tie approach: tied dissimilarities are free to differ, which the
  // within-tie sort by distance realizes; the result is independent of the
  // input order of ties.
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (dissimilarities(a) != dissimilarities(b)) {
      return dissimilarities(a) < dissimilarities(b);
    }
    return distances(a) < distances(b);
  });
  Vector sorted(n);
  for (Index t = 0; t < n; ++t) sorted(t) = distances(order[static_cast<std::size_t>(t)]);
  const Vector fitted = isotonic_fit(sorted);
  Vector out(n);
  for (Index t = 0; t < n; ++t) out(order[static_cast<std::size_t>(t)]) = fitted(t);
  return out;
}

double stress1(const Vector& distances, const Vector& disparities) {
  if (distances.size() != disparities.size()) {
    throw std::invalid_argument("distance/disparity length mismatch");
  }
  const double denom = distances.squaredNorm();
  const double num = (distances - disparities).squaredNorm();
  if (denom == 0.0) {
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::sqrt(num / denom);
}

namespace {

// One Guttman transform toward the given disparities.
Matrix guttman_update(const Matrix& coords, const Vector& disparities) {
  const Index n = coords.rows();
  Matrix b = Matrix::Zero(n, n);
  Index t = 0;
  for (Index i = 1; i < n; ++i) {
    for (Index j = 0; j < i; ++j, ++t) {
      const double dist = (coords.row(i) - coords.row(j)).norm();
      const double ratio = dist > 0.0 ? -disparities(t) / dist : 0.0;
      b(i, j) = ratio;
      b(j, i) = ratio;
    }
  }
  for (Index i = 0; i < n; ++i) {
    b(i, i) = -b.row(i).sum();
  }
  return (b * coords) / static_cast<double>(n);
}

struct RunResult {
  Matrix coords;
  double stress = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = true;
  StopReason stop_reason = StopReason::tolerance;
};

RunResult nmds_single(const Vector& dissim, Matrix coords,
                      const NmdsConfig& cfg, int restart) {
  RunResult run;
  center_columns(coords);
  Vector dist = pairwise_distances(coords);
  Vector disparities = monotone_regression(dissim, dist);
  double stress = stress1(dist, disparities);
  if (cfg.on_iteration) cfg.on_iteration(restart, 0, stress);

  const double eps = std::numeric_limits<double>::epsilon();
  run.stop_reason = StopReason::max_iter;
  run.converged = false;
  int iter = 0;
  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    if (stress <= 1e-15) {
      run.stop_reason = StopReason::exact_fit;
      run.converged = true;
      --iter;
      break;
    }
    Matrix candidate = guttman_update(coords, disparities);
    center_columns(candidate);
    Vector cand_dist = pairwise_distances(candidate);
    Vector cand_disp = monotone_regression(dissim, cand_dist);
    double cand_stress = stress1(cand_dist, cand_disp);

    // Majorization almost always descends on this normalized stress; when
    // rounding breaks that, interpolate back toward the previous iterate.
    if (cand_stress > stress) {
      double alpha = 0.5;
      bool improved = false;
      for (int half = 0; half < 40; ++half, alpha *= 0.5) {
        Matrix mid = coords + alpha * (candidate - coords);
        center_columns(mid);
        Vector mid_dist = pairwise_distances(mid);
        Vector mid_disp = monotone_regression(dissim, mid_dist);
        const double mid_stress = stress1(mid_dist, mid_disp);
        if (mid_stress <= stress) {
          candidate = std::move(mid);
          cand_dist = std::move(mid_dist);
          cand_disp = std::move(mid_disp);
          cand_stress = mid_stress;
          improved = true;
          break;
        }
      }
      if (!improved) {
        run.stop_reason = StopReason::underflow;
        run.converged = true;
        --iter;
        break;
      }
    }

    const double improvement = stress - cand_stress;
    coords = std::move(candidate);
    dist = std::move(cand_dist);
    disparities = std::move(cand_disp);
    stress = cand_stress;
    if (cfg.on_iteration) cfg.on_iteration(restart, iter, stress);

    if (improvement <= eps * std::max(stress, 1e-300)) {
      // Tolerances below machine precision (like the default 1e-100) land
      // here: the improvement itself has underflowed.
      run.stop_reason = StopReason::underflow;
      run.converged = true;
      break;
    }
    if (improvement <= cfg.tol) {
      run.stop_reason = StopReason::tolerance;
      run.converged = true;
      break;
    }
  }
  run.iterations = std::min(iter, cfg.max_iter);
  run.coords = std::move(coords);
  run.stress = stress;
  return run;
}

}  // namespace

Embedding nonmetric_mds(const Matrix& d, const NmdsConfig& cfg) {
  check_distance_matrix(d);
  if (cfg.dim < 1 || cfg.n_init < 1 || cfg.max_iter < 1) {
    throw std::invalid_argument("invalid NMDS configuration");
  }
  const Vector dissim = flatten_lower(d);
  if (dissim.squaredNorm() == 0.0) {
    Embedding degenerate;
    degenerate.coords = Matrix::Zero(d.rows(), cfg.dim);
    degenerate.stress = 0.0;
    degenerate.n_restarts_used = cfg.n_init;
    degenerate.stop_reason = StopReason::exact_fit;
    return degenerate;
  }

  const Embedding classical = classical_mds(d, cfg.dim);
  const double rms = std::sqrt(classical.coords.squaredNorm() /
                               static_cast<double>(classical.coords.size()));
  const double perturb_sd = 0.1 * std::max(rms, 1e-12);

  RunResult best;
  for (int restart = 0; restart < cfg.n_init; ++restart) {
    Matrix init = classical.coords;
    if (restart > 0) {
      Rng rng(derive_seed(cfg.seed, "nmds-init",
                          static_cast<std::uint64_t>(restart)));
      for (Index i = 0; i < init.rows(); ++i) {
        for (Index k = 0; k < init.cols(); ++k) {
          init(i, k) += perturb_sd * rng.normal();
        }
      }
    }
    RunResult run = nmds_single(dissim, std::move(init), cfg, restart);
    // Ties keep the earliest restart.
    if (run.stress < best.stress) {
      best = std::move(run);
    }
  }

  Embedding embedding;
  embedding.coords = std::move(best.coords);
  embedding.stress = best.stress;
  embedding.n_restarts_used = cfg.n_init;
  embedding.iterations = best.iterations;
  embedding.converged = best.converged;
  embedding.stop_reason = best.stop_reason;
  embedding.zero_padded_dims = classical.zero_padded_dims;
  return embedding;
}

Dendrogram hca_centroid(const Matrix& coords) {
  const Index n = coords.rows();
  if (n < 2) {
    throw std::invalid_argument("clustering needs at least 2 items");
  }
  if (!coords.allFinite()) {
    throw std::invalid_argument("coordinates contain non-finite values");
  }

  struct Cluster {
    Index id;
    Index size;
    Vector centroid;
  };
  std::vector<Cluster> active;
  active.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    active.push_back({i, 1, coords.row(i).transpose()});
  }

  Dendrogram tree;
  tree.n_leaves = n;
  for (Index merge = 0; merge < n - 1; ++merge) {
    std::size_t best_a = 0;
    std::size_t best_b = 1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double dist = (active[a].centroid - active[b].centroid).norm();
        // Strict less: ties keep the first pair in creation-order scan.
        if (dist < best_dist) {
          best_dist = dist;
          best_a = a;
          best_b = b;
        }
      }
    }
    Cluster& ca = active[best_a];
    Cluster& cb = active[best_b];
    const Index new_size = ca.size + cb.size;
    Vector new_centroid =
        (static_cast<double>(ca.size) * ca.centroid +
         static_cast<double>(cb.size) * cb.centroid) /
        static_cast<double>(new_size);
    tree.merges.push_back({std::min(ca.id, cb.id), std::max(ca.id, cb.id),
                           best_dist, new_size});
    ca.id = n + merge;
    ca.size = new_size;
    ca.centroid = std::move(new_centroid);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  return tree;
}

Dendrogram hca_centroid_from_distances(const Matrix& d) {
  check_distance_matrix(d);
  // Full-rank classical embedding; centroid linkage needs coordinates.
  const Embedding embedding = classical_mds(d, d.rows() - 1);
  return hca_centroid(embedding.coords);
}

std::vector<std::vector<Index>> Dendrogram::cut(Index n_clusters) const {
  if (n_clusters < 1 || n_clusters > n_leaves) {
    throw std::invalid_argument("cut size out of range");
  }
  // Undo the last n_clusters - 1 merges: replay the first n - k.
  std::vector<Index> parent(static_cast<std::size_t>(n_leaves + (n_leaves - 1)));
  std::iota(parent.begin(), parent.end(), Index{0});
  const auto find = [&](Index v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      v = parent[static_cast<std::size_t>(v)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
    }
    return v;
  };
  const Index n_replayed = n_leaves - n_clusters;
  for (Index t = 0; t < n_replayed; ++t) {
    const auto& m = merges[static_cast<std::size_t>(t)];
    const Index target = n_leaves + t;
    parent[static_cast<std::size_t>(find(m.a))] = target;
    parent[static_cast<std::size_t>(find(m.b))] = target;
  }
  std::map<Index, std::vector<Index>> groups;
  for (Index leaf = 0; leaf < n_leaves; ++leaf) {
    groups[find(leaf)].push_back(leaf);
  }
  std::vector<std::vector<Index>> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) {
    out.push_back(std::move(members));
  }
  // Deterministic order: by smallest member.
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

namespace {

std::string sanitize_leaf_name(std::string name) {
  for (char& c : name) {
    if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == ' ') {
      c = '_';
    }
  }
  return name;
}

}  // namespace

std::string Dendrogram::newick(std::span<const std::string> leaf_names) const {
  if (static_cast<Index>(leaf_names.size()) != n_leaves) {
    throw std::invalid_argument("leaf name count does not match dendrogram");
  }
  // height of every node, for branch lengths
  std::vector<double> height(static_cast<std::size_t>(n_leaves + (n_leaves - 1)), 0.0);
  for (std::size_t t = 0; t < merges.size(); ++t) {
    height[static_cast<std::size_t>(n_leaves) + t] = merges[t].height;
  }
  // Recursive rendering from the root (last merge).
  std::function<std::string(Index, double)> render = [&](Index node,
                                                         double parent_height) {
    const double branch = parent_height - height[static_cast<std::size_t>(node)];
    if (node < n_leaves) {
      return sanitize_leaf_name(leaf_names[static_cast<std::size_t>(node)]) +
             ":" + std::to_string(branch);
    }
    const auto& m = merges[static_cast<std::size_t>(node - n_leaves)];
    const double h = height[static_cast<std::size_t>(node)];
    return "(" + render(m.a, h) + "," + render(m.b, h) + "):" +
           std::to_string(branch);
  };
  const Index root = n_leaves + static_cast<Index>(merges.size()) - 1;
  const double root_height = height[static_cast<std::size_t>(root)];
  const auto& m = merges.back();
  return "(" + render(m.a, root_height) + "," + render(m.b, root_height) +
         ");";
}

}  // namespace repalign
