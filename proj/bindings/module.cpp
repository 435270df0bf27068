#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "repalign/categories.hpp"
#include "repalign/evaluation.hpp"
#include "repalign/structure.hpp"
#include "repalign/synth.hpp"
#include "repalign/util/rng.hpp"

namespace py = pybind11;
using namespace repalign;

namespace {

Metric metric_of(const std::string& name) {
  if (name == "pearson2") return Metric::pearson2;
  if (name == "cod") return Metric::cod;
  throw std::invalid_argument("unknown metric: " + name);
}

FoldMode fold_mode_of(const std::string& name) {
  if (name == "pair-level") return FoldMode::pair_level;
  if (name == "image-disjoint") return FoldMode::image_disjoint;
  throw std::invalid_argument("unknown fold mode: " + name);
}

PermutationMode permutation_mode_of(const std::string& name) {
  if (name == "none") return PermutationMode::none;
  if (name == "rows") return PermutationMode::rows;
  if (name == "cols-within-rows") return PermutationMode::cols_within_rows;
  if (name == "both") return PermutationMode::both;
  throw std::invalid_argument("unknown permutation mode: " + name);
}

DistanceMode distance_mode_of(const std::string& name) {
  if (name == "max-shift") return DistanceMode::max_shift;
  if (name == "self-sim") return DistanceMode::self_sim;
  throw std::invalid_argument("unknown distance mode: " + name);
}

SimilaritySource source_of(const std::string& name) {
  if (name == "raw") return SimilaritySource::raw;
  if (name == "transformed") return SimilaritySource::transformed;
  throw std::invalid_argument("unknown similarity source: " + name);
}

CvOptions cv_options_of(const std::string& metric, bool nonnegative) {
  CvOptions opts;
  opts.metric = metric_of(metric);
  opts.nonnegative = nonnegative;
  return opts;
}

FoldAssignment folds_for(const SimilarityMatrix& s, int n_folds,
                         const std::string& mode, std::uint64_t seed) {
  return make_folds(observed_pairs(s), s.n_items(), n_folds,
                    fold_mode_of(mode), seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "feature reweighting for aligning representations with "
            "similarity judgments";

  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def(py::init([](Matrix values, std::vector<std::string> ids) {
             FeatureMatrix f{std::move(values), std::move(ids)};
             f.validate();
             return f;
           }),
           py::arg("values"), py::arg("item_ids"))
      .def_readonly("values", &FeatureMatrix::values)
      .def_readonly("item_ids", &FeatureMatrix::item_ids)
      .def_property_readonly("n_items", &FeatureMatrix::n_items)
      .def_property_readonly("n_features", &FeatureMatrix::n_features);

  py::class_<SimilarityMatrix>(m, "SimilarityMatrix")
      .def(py::init([](Matrix values, std::vector<std::string> ids,
                       bool diagonal_defined) {
             SimilarityMatrix s{std::move(values), std::move(ids),
                                diagonal_defined};
             s.validate();
             return s;
           }),
           py::arg("values"), py::arg("item_ids"),
           py::arg("diagonal_defined") = true)
      .def_readonly("values", &SimilarityMatrix::values)
      .def_readonly("item_ids", &SimilarityMatrix::item_ids)
      .def_readonly("diagonal_defined", &SimilarityMatrix::diagonal_defined)
      .def_property_readonly("n_items", &SimilarityMatrix::n_items)
      .def("missing_pairs", &SimilarityMatrix::missing_pairs);

  py::class_<WeightVector>(m, "WeightVector")
      .def(py::init([](Vector values, bool nonnegative) {
             WeightVector w{std::move(values), nonnegative};
             w.validate();
             return w;
           }),
           py::arg("values"), py::arg("nonnegative") = false)
      .def_readonly("values", &WeightVector::values)
      .def_readonly("nonnegative", &WeightVector::nonnegative);

  py::class_<DomainDataset>(m, "DomainDataset")
      .def(py::init([](std::string name, FeatureMatrix f, SimilarityMatrix s) {
             DomainDataset d{std::move(name), std::move(f), std::move(s)};
             d.validate();
             return d;
           }),
           py::arg("name"), py::arg("features"), py::arg("similarities"))
      .def_readonly("name", &DomainDataset::name)
      .def_readonly("features", &DomainDataset::features)
      .def_readonly("similarities", &DomainDataset::similarities);

  m.def(
      "aggregate_ratings",
      [](const std::vector<std::tuple<std::string, std::string, double,
                                      std::string>>& ratings,
         const std::vector<std::string>& item_ids, double scale_lo,
         double scale_hi) {
        std::vector<RatingRecord> records;
        for (const auto& [a, b, rating, rater] : ratings) {
          records.push_back({a, b, rating, rater});
        }
        return aggregate_ratings(records, item_ids, {scale_lo, scale_hi});
      },
      py::arg("ratings"), py::arg("item_ids"), py::arg("scale_lo") = 0.0,
      py::arg("scale_hi") = 10.0);

  m.def(
      "zscore_normalize",
      [](const FeatureMatrix& f, const std::string& convention) {
        const auto result = zscore_normalize(
            f, convention == "sample" ? StdConvention::sample
                                      : StdConvention::population);
        return py::make_tuple(result.features, result.zero_variance_columns);
      },
      py::arg("features"), py::arg("convention") = "population");

  m.def("inner_product_similarity", &inner_product_similarity,
        py::arg("features"));
  m.def("weighted_similarity", &weighted_similarity, py::arg("features"),
        py::arg("weights"));
  m.def("rescale_features", &rescale_features, py::arg("features"),
        py::arg("weights"));

  m.def(
      "enumerate_pairs",
      [](Index n_items) { return enumerate_pairs(n_items).pairs; },
      py::arg("n_items"));

  m.def(
      "ridge_closed_form",
      [](const Matrix& x, const Vector& y, double lambda) {
        return ridge_closed_form(DesignMatrix::from_raw(x, y), lambda);
      },
      py::arg("x"), py::arg("y"), py::arg("lam"));

  m.def(
      "ridge_iterative",
      [](const Matrix& x, const Vector& y, double lambda, double tol,
         int max_iter) {
        RidgeConfig cfg;
        cfg.lambda = lambda;
        cfg.tol = tol;
        cfg.max_iter = max_iter;
        const auto [w, info] =
            ridge_iterative(DesignMatrix::from_raw(x, y), cfg);
        return py::make_tuple(w, info.iterations, info.grad_norm,
                              info.objective);
      },
      py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("tol") = 1e-8,
      py::arg("max_iter") = 10000);

  m.def(
      "ridge_nonneg",
      [](const Matrix& x, const Vector& y, double lambda, double tol,
         int max_iter) {
        RidgeConfig cfg;
        cfg.lambda = lambda;
        cfg.tol = tol;
        cfg.max_iter = max_iter;
        cfg.nonnegative = true;
        return ridge_nonneg(DesignMatrix::from_raw(x, y), cfg).first;
      },
      py::arg("x"), py::arg("y"), py::arg("lam"), py::arg("tol") = 1e-8,
      py::arg("max_iter") = 50000);

  m.def(
      "r_squared",
      [](const Vector& predicted, const Vector& observed,
         const std::string& metric) {
        return r_squared(predicted, observed, metric_of(metric));
      },
      py::arg("predicted"), py::arg("observed"),
      py::arg("metric") = "pearson2");

  py::class_<EvaluationReport>(m, "EvaluationReport")
      .def_readonly("r2_raw", &EvaluationReport::r2_raw)
      .def_readonly("r2_transformed", &EvaluationReport::r2_transformed)
      .def_readonly("r2_transformed_cod",
                    &EvaluationReport::r2_transformed_cod)
      .def_readonly("lambda_star", &EvaluationReport::lambda_star)
      .def_readonly("per_fold_scores", &EvaluationReport::per_fold_scores)
      .def_readonly("lambda_curve", &EvaluationReport::lambda_curve);

  py::class_<CvResult>(m, "CvResult")
      .def_readonly("report", &CvResult::report)
      .def_readonly("weights", &CvResult::weights)
      .def_readonly("final_objective", &CvResult::final_objective)
      .def_readonly("final_grad_norm", &CvResult::final_grad_norm);

  m.def(
      "cv_fit",
      [](const FeatureMatrix& f, const SimilarityMatrix& s,
         const std::vector<double>& lambda_grid, int n_folds,
         const std::string& fold_mode, std::uint64_t seed,
         const std::string& metric, bool nonnegative) {
        const FoldAssignment folds = folds_for(s, n_folds, fold_mode, seed);
        return cv_fit(f, s, lambda_grid, folds,
                      cv_options_of(metric, nonnegative));
      },
      py::arg("features"), py::arg("similarities"), py::arg("lambda_grid"),
      py::arg("n_folds") = 6, py::arg("fold_mode") = "pair-level",
      py::arg("seed") = 0, py::arg("metric") = "pearson2",
      py::arg("nonnegative") = false);

  m.def(
      "cv_fit_refined",
      [](const FeatureMatrix& f, const SimilarityMatrix& s, int n_folds,
         const std::string& fold_mode, std::uint64_t seed,
         const std::string& metric, bool nonnegative) {
        const FoldAssignment folds = folds_for(s, n_folds, fold_mode, seed);
        return cv_fit_refined(f, s, folds, cv_options_of(metric, nonnegative));
      },
      py::arg("features"), py::arg("similarities"), py::arg("n_folds") = 6,
      py::arg("fold_mode") = "pair-level", py::arg("seed") = 0,
      py::arg("metric") = "pearson2", py::arg("nonnegative") = false);

  m.def("default_lambda_grid", &default_lambda_grid);

  m.def(
      "permutation_baseline",
      [](const FeatureMatrix& f, const SimilarityMatrix& s,
         const std::string& mode, int n_repeats, std::uint64_t seed,
         const std::vector<double>& lambda_grid, int n_folds,
         const std::string& metric) {
        return permutation_baseline(f, s, permutation_mode_of(mode), n_repeats,
                                    seed, lambda_grid, n_folds,
                                    cv_options_of(metric, false));
      },
      py::arg("features"), py::arg("similarities"), py::arg("mode"),
      py::arg("n_repeats"), py::arg("seed"), py::arg("lambda_grid"),
      py::arg("n_folds") = 6, py::arg("metric") = "pearson2");

  m.def(
      "transfer_evaluate",
      [](const WeightVector& w, const DomainDataset& target,
         const std::string& metric) {
        return transfer_evaluate(w, target, metric_of(metric));
      },
      py::arg("weights"), py::arg("target"), py::arg("metric") = "pearson2");

  py::class_<JointResult>(m, "JointResult")
      .def_readonly("weights", &JointResult::weights)
      .def_readonly("lambda_star", &JointResult::lambda_star)
      .def_readonly("pooled_heldout", &JointResult::pooled_heldout)
      .def_readonly("pooled_raw", &JointResult::pooled_raw)
      .def_readonly("per_domain_heldout", &JointResult::per_domain_heldout);

  m.def(
      "joint_fit",
      [](const std::vector<DomainDataset>& domains,
         const std::vector<double>& lambda_grid, int n_folds,
         const std::string& fold_mode, std::uint64_t seed,
         const std::string& metric) {
        return joint_fit(domains, lambda_grid, n_folds,
                         fold_mode_of(fold_mode), seed,
                         cv_options_of(metric, false));
      },
      py::arg("domains"), py::arg("lambda_grid"), py::arg("n_folds") = 6,
      py::arg("fold_mode") = "pair-level", py::arg("seed") = 0,
      py::arg("metric") = "pearson2");

  m.def(
      "leave_one_domain_out",
      [](const std::vector<DomainDataset>& domains,
         const std::string& held_out, const std::vector<double>& lambda_grid,
         int n_folds, const std::string& fold_mode, std::uint64_t seed,
         const std::string& metric) {
        return leave_one_domain_out(domains, held_out, lambda_grid, n_folds,
                                    fold_mode_of(fold_mode), seed,
                                    cv_options_of(metric, false));
      },
      py::arg("domains"), py::arg("held_out"), py::arg("lambda_grid"),
      py::arg("n_folds") = 6, py::arg("fold_mode") = "pair-level",
      py::arg("seed") = 0, py::arg("metric") = "pearson2");

  m.def(
      "sim_to_dist",
      [](const SimilarityMatrix& s, const std::string& mode) {
        return sim_to_dist(s, distance_mode_of(mode));
      },
      py::arg("similarities"), py::arg("mode") = "max-shift");

  py::class_<Embedding>(m, "Embedding")
      .def_readonly("coords", &Embedding::coords)
      .def_readonly("stress", &Embedding::stress)
      .def_readonly("n_restarts_used", &Embedding::n_restarts_used)
      .def_readonly("iterations", &Embedding::iterations)
      .def_readonly("converged", &Embedding::converged);

  m.def("classical_mds", &classical_mds, py::arg("distances"), py::arg("dim"));

  m.def(
      "nonmetric_mds",
      [](const Matrix& d, Index dim, int max_iter, double tol, int n_init,
         std::uint64_t seed) {
        NmdsConfig cfg;
        cfg.dim = dim;
        cfg.max_iter = max_iter;
        cfg.tol = tol;
        cfg.n_init = n_init;
        cfg.seed = seed;
        return nonmetric_mds(d, cfg);
      },
      py::arg("distances"), py::arg("dim") = 2, py::arg("max_iter") = 10000,
      py::arg("tol") = 1e-100, py::arg("n_init") = 4, py::arg("seed") = 0);

  m.def("isotonic_fit", &isotonic_fit, py::arg("values"));
  m.def("monotone_regression", &monotone_regression,
        py::arg("dissimilarities"), py::arg("distances"));

  py::class_<Dendrogram>(m, "Dendrogram")
      .def_readonly("n_leaves", &Dendrogram::n_leaves)
      .def_property_readonly(
          "merges",
          [](const Dendrogram& tree) {
            std::vector<std::tuple<Index, Index, double, Index>> merges;
            for (const auto& merge : tree.merges) {
              merges.emplace_back(merge.a, merge.b, merge.height, merge.size);
            }
            return merges;
          })
      .def("cut", &Dendrogram::cut, py::arg("n_clusters"))
      .def(
          "newick",
          [](const Dendrogram& tree, const std::vector<std::string>& names) {
            return tree.newick(names);
          },
          py::arg("leaf_names"));

  m.def("hca_centroid", &hca_centroid, py::arg("coords"));
  m.def("hca_centroid_from_distances", &hca_centroid_from_distances,
        py::arg("distances"));

  py::class_<CategoryPartition>(m, "CategoryPartition")
      .def_readonly("k", &CategoryPartition::k)
      .def_readonly("labels", &CategoryPartition::labels)
      .def_readonly("inertia", &CategoryPartition::inertia)
      .def_property_readonly("source", [](const CategoryPartition& p) {
        return p.source == SimilaritySource::raw ? "raw" : "transformed";
      });

  m.def(
      "kmeans",
      [](const Matrix& rows, int k, int n_restarts, int max_iter,
         std::uint64_t seed) {
        KmeansConfig cfg;
        cfg.n_restarts = n_restarts;
        cfg.max_iter = max_iter;
        cfg.seed = seed;
        return kmeans(rows, k, cfg);
      },
      py::arg("rows"), py::arg("k"), py::arg("n_restarts") = 10,
      py::arg("max_iter") = 300, py::arg("seed") = 0);

  m.def(
      "build_categories",
      [](const SimilarityMatrix& s, int k, const std::string& source,
         int n_restarts, int max_iter, std::uint64_t seed) {
        KmeansConfig cfg;
        cfg.n_restarts = n_restarts;
        cfg.max_iter = max_iter;
        cfg.seed = seed;
        return build_categories(s, k, source_of(source), cfg);
      },
      py::arg("similarities"), py::arg("k"), py::arg("source") = "raw",
      py::arg("n_restarts") = 10, py::arg("max_iter") = 300,
      py::arg("seed") = 0);

  m.def(
      "pair_agreement",
      [](const std::vector<int>& a, const std::vector<int>& b) {
        return pair_agreement(a, b);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "adjusted_rand_index",
      [](const std::vector<int>& a, const std::vector<int>& b) {
        return adjusted_rand_index(a, b);
      },
      py::arg("a"), py::arg("b"));

  py::class_<SynthSpec>(m, "SynthSpec")
      .def(py::init([](Index n_items, Index n_features, double weight_sparsity,
                       double noise_sd, int n_domains, bool shared_weights,
                       std::uint64_t seed) {
             SynthSpec spec{n_items,   n_features,     weight_sparsity,
                            noise_sd,  n_domains,      shared_weights,
                            seed};
             spec.validate();
             return spec;
           }),
           py::arg("n_items") = 30, py::arg("n_features") = 50,
           py::arg("weight_sparsity") = 0.5, py::arg("noise_sd") = 0.0,
           py::arg("n_domains") = 1, py::arg("shared_weights") = true,
           py::arg("seed") = 0)
      .def_readonly("n_items", &SynthSpec::n_items)
      .def_readonly("n_features", &SynthSpec::n_features)
      .def_readonly("noise_sd", &SynthSpec::noise_sd);

  py::class_<SynthResult>(m, "SynthResult")
      .def_readonly("domains", &SynthResult::domains)
      .def_readonly("true_weights", &SynthResult::true_weights)
      .def_readonly("ceiling_r2", &SynthResult::ceiling_r2);

  m.def("generate", &generate, py::arg("spec"));
  m.def("signal_sd", &signal_sd, py::arg("spec"));
  m.def("recovery_score", &recovery_score, py::arg("estimated"),
        py::arg("truth"));

  m.def("load_features", &load_features, py::arg("path"));
  m.def(
      "save_features",
      [](const std::filesystem::path& path, const FeatureMatrix& f) {
        save_features(path, f);
      },
      py::arg("path"), py::arg("features"));
  m.def("load_similarities", &load_similarities, py::arg("path"));
  m.def(
      "save_similarities",
      [](const std::filesystem::path& path, const SimilarityMatrix& s) {
        save_similarities(path, s);
      },
      py::arg("path"), py::arg("similarities"));
  m.def(
      "load_weights",
      [](const std::filesystem::path& path) {
        const auto [w, meta] = load_weights(path);
        return py::make_tuple(w, meta.lambda, meta.provenance);
      },
      py::arg("path"));
  m.def(
      "save_weights",
      [](const std::filesystem::path& path, const WeightVector& w,
         double lambda, const std::string& provenance) {
        save_weights(path, w, {lambda, provenance});
      },
      py::arg("path"), py::arg("weights"), py::arg("lam") = 0.0,
      py::arg("provenance") = "");

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
