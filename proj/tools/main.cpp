#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "repalign/categories.hpp"
#include "repalign/evaluation.hpp"
#include "repalign/report.hpp"
#include "repalign/structure.hpp"
#include "repalign/synth.hpp"
#include "repalign/util/csv.hpp"
#include "repalign/util/hash.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace repalign;

namespace {

// Exit codes: 0 success, 2 invalid configuration, 1 runtime failure.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetPaths {
  std::string name;
  fs::path features;
  fs::path similarities;
  fs::path ratings;  // optional
};

struct RunConfig {
  std::string command;
  json raw;
  std::uint64_t seed = 0;
  fs::path output_dir = "out";
  std::vector<DatasetPaths> datasets;
  std::vector<double> lambda_grid;  // empty: coarse default plus refinement
  int n_folds = 6;
  FoldMode fold_mode = FoldMode::pair_level;
  Metric metric = Metric::pearson2;
  bool nonnegative = false;
  bool zscore_features = false;
  StdConvention zscore_convention = StdConvention::population;
  bool rescale_targets = false;
  double rating_scale_max = 10.0;
  bool add_intercept = false;
  bool center_targets = false;
  bool strict = false;

  std::string hash;  // hex of the canonical config dump
};

// REPALIGN_VERBOSE=1 echoes written files and stage progress to stderr.
bool verbose() {
  static const bool enabled = [] {
    const char* value = std::getenv("REPALIGN_VERBOSE");
    return value && *value && std::string(value) != "0";
  }();
  return enabled;
}

void note(const std::string& message) {
  if (verbose()) std::cerr << "repalign: " << message << std::endl;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " +
                      e.what());
  }
}

void require_exists(const fs::path& path, const std::string& what) {
  if (path.empty() || !fs::exists(path)) {
    throw ConfigError(what + " does not exist: " + path.string());
  }
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return fnv1a64(buffer.str());
}

RunConfig parse_config(const std::string& command, const json& j) {
  RunConfig cfg;
  cfg.command = command;
  cfg.raw = j;
  if (j.contains("command") && j["command"].get<std::string>() != command) {
    throw ConfigError("config is for command '" +
                      j["command"].get<std::string>() + "', invoked as '" +
                      command + "'");
  }
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.output_dir = j.value("output_dir", std::string{"out"});
  cfg.n_folds = j.value("n_folds", 6);
  if (cfg.n_folds < 2) throw ConfigError("n_folds must be >= 2");

  const std::string fold_mode = j.value("fold_mode", std::string{"pair-level"});
  if (fold_mode == "pair-level") {
    cfg.fold_mode = FoldMode::pair_level;
  } else if (fold_mode == "image-disjoint") {
    cfg.fold_mode = FoldMode::image_disjoint;
  } else {
    throw ConfigError("unknown fold_mode: " + fold_mode);
  }

  const std::string metric = j.value("metric", std::string{"pearson2"});
  if (metric == "pearson2") {
    cfg.metric = Metric::pearson2;
  } else if (metric == "cod") {
    cfg.metric = Metric::cod;
  } else {
    throw ConfigError("unknown metric: " + metric);
  }

  cfg.nonnegative = j.value("nonnegative", false);
  cfg.zscore_features = j.value("zscore_features", false);
  const std::string convention =
      j.value("zscore_convention", std::string{"population"});
  if (convention == "population") {
    cfg.zscore_convention = StdConvention::population;
  } else if (convention == "sample") {
    cfg.zscore_convention = StdConvention::sample;
  } else {
    throw ConfigError("unknown zscore_convention: " + convention);
  }
  cfg.rescale_targets = j.value("rescale_targets", false);
  cfg.rating_scale_max = j.value("rating_scale_max", 10.0);
  cfg.add_intercept = j.value("add_intercept", false);
  cfg.center_targets = j.value("center_targets", false);
  cfg.strict = j.value("strict", false);

  if (j.contains("lambda_grid")) {
    cfg.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
    if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid is empty");
    for (double lambda : cfg.lambda_grid) {
      if (!(lambda >= 0.0)) throw ConfigError("lambda values must be >= 0");
    }
  }

  if (j.contains("datasets")) {
    for (const auto& d : j["datasets"]) {
      DatasetPaths paths;
      paths.name = d.value("name", std::string{});
      if (paths.name.empty()) throw ConfigError("dataset without a name");
      paths.features = d.value("features", std::string{});
      paths.similarities = d.value("similarities", std::string{});
      paths.ratings = d.value("ratings", std::string{});
      cfg.datasets.push_back(std::move(paths));
    }
  }

  // Canonical hash: command + sorted-key dump of the config + seed.
  json canonical = j;
  canonical["command"] = command;
  canonical["seed"] = cfg.seed;
  cfg.hash = hex64(fnv1a64(canonical.dump()));
  return cfg;
}

std::string stamp(const RunConfig& cfg) {
  return "repalign " + cfg.command + " config=" + cfg.hash +
         " seed=" + std::to_string(cfg.seed);
}

void write_json_report(const RunConfig& cfg, const std::string& filename,
                       json body) {
  body["command"] = cfg.command;
  body["config_hash"] = cfg.hash;
  body["seed"] = cfg.seed;
  fs::create_directories(cfg.output_dir);
  const fs::path path = cfg.output_dir / filename;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body.dump(2) << '\n';
  note("wrote " + path.string());
}

void write_text(const RunConfig& cfg, const std::string& filename,
                const std::string& content, bool with_stamp = true) {
  fs::create_directories(cfg.output_dir);
  const fs::path path = cfg.output_dir / filename;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (with_stamp) out << "# " << stamp(cfg) << '\n';
  out << content;
  note("wrote " + path.string());
}

DomainDataset load_dataset(const RunConfig& cfg, const DatasetPaths& paths) {
  DomainDataset dataset;
  dataset.name = paths.name;
  dataset.features = load_features(paths.features);
  dataset.similarities = load_similarities(paths.similarities);
  note("loaded dataset '" + paths.name + "' (" +
       std::to_string(dataset.features.n_items()) + " items, " +
       std::to_string(dataset.features.n_features()) + " features)");
  if (cfg.zscore_features) {
    const auto normalized =
        zscore_normalize(dataset.features, cfg.zscore_convention);
    if (!normalized.zero_variance_columns.empty()) {
      note("dataset '" + paths.name + "': " +
           std::to_string(normalized.zero_variance_columns.size()) +
           " zero-variance feature column(s) mapped to zeros");
    }
    dataset.features = normalized.features;
  }
  if (cfg.rescale_targets) {
    // Map the rating scale onto [0, 1]; NaNs (missing, diagonal) pass through.
    dataset.similarities.values /= cfg.rating_scale_max;
  }
  dataset.validate();
  return dataset;
}

std::vector<DomainDataset> load_all_datasets(const RunConfig& cfg,
                                             std::size_t minimum = 1) {
  if (cfg.datasets.size() < minimum) {
    throw ConfigError("command needs at least " + std::to_string(minimum) +
                      " dataset(s)");
  }
  for (const auto& paths : cfg.datasets) {
    require_exists(paths.features, "features file");
    require_exists(paths.similarities, "similarities file");
    if (!paths.ratings.empty()) require_exists(paths.ratings, "ratings file");
  }
  std::vector<DomainDataset> datasets;
  for (const auto& paths : cfg.datasets) {
    datasets.push_back(load_dataset(cfg, paths));
  }
  return datasets;
}

CvOptions cv_options(const RunConfig& cfg) {
  CvOptions opts;
  opts.metric = cfg.metric;
  opts.nonnegative = cfg.nonnegative;
  opts.design.add_intercept = cfg.add_intercept;
  opts.design.center_targets = cfg.center_targets;
  return opts;
}

// Grid search with the configured grid, or the default coarse sweep plus a
// linear refinement pass when none was given.
CvResult run_cv(const RunConfig& cfg, const DomainDataset& dataset,
                FoldMode mode, std::uint64_t fold_seed) {
  const PairList pairs = observed_pairs(dataset.similarities);
  const FoldAssignment folds = make_folds(pairs, dataset.features.n_items(),
                                          cfg.n_folds, mode, fold_seed);
  if (!cfg.lambda_grid.empty()) {
    return cv_fit(dataset.features, dataset.similarities, cfg.lambda_grid,
                  folds, cv_options(cfg));
  }
  return cv_fit_refined(dataset.features, dataset.similarities, folds,
                        cv_options(cfg));
}

json report_json(const EvaluationReport& report) {
  json j;
  j["r2_raw"] = report.r2_raw;
  j["r2_transformed"] = report.r2_transformed;
  j["r2_transformed_cod"] = report.r2_transformed_cod;
  j["lambda_star"] = report.lambda_star;
  j["per_fold_scores"] = report.per_fold_scores;
  json curve = json::array();
  for (const auto& [lambda, score] : report.lambda_curve) {
    curve.push_back({{"lambda", lambda}, {"score", score}});
  }
  j["lambda_curve"] = curve;
  j["metric"] = report.metric == Metric::pearson2 ? "pearson2" : "cod";
  j["fold_mode"] = report.fold_mode == FoldMode::pair_level ? "pair-level"
                                                            : "image-disjoint";
  j["n_folds"] = report.n_folds;
  j["fold_seed"] = report.seed;
  j["centered_targets"] = report.centered_targets;
  j["intercept"] = report.intercept;
  return j;
}

// --- subcommands ---

int cmd_ingest(const RunConfig& cfg) {
  if (cfg.datasets.empty()) {
    throw ConfigError("ingest needs a datasets entry with a ratings path");
  }
  json report;
  report["datasets"] = json::array();
  for (const auto& paths : cfg.datasets) {
    require_exists(paths.ratings, "ratings file");
    const auto records = load_ratings(paths.ratings);
    std::vector<std::string> ids;
    if (cfg.raw.contains("items")) {
      ids = cfg.raw["items"].get<std::vector<std::string>>();
    } else {
      std::set<std::string> unique;
      for (const auto& rec : records) {
        unique.insert(rec.item_a);
        unique.insert(rec.item_b);
      }
      ids.assign(unique.begin(), unique.end());
    }
    const SimilarityMatrix s =
        aggregate_ratings(records, ids, {0.0, cfg.rating_scale_max});
    fs::create_directories(cfg.output_dir);
    const fs::path out = cfg.output_dir / (paths.name + "_similarities.csv");
    save_similarities(out, s, std::vector<std::string>{stamp(cfg)});

    json entry;
    entry["name"] = paths.name;
    entry["n_items"] = s.n_items();
    entry["n_ratings"] = records.size();
    entry["n_missing_pairs"] = s.missing_pairs().size();
    entry["similarities"] = out.string();
    report["datasets"].push_back(entry);
  }
  write_json_report(cfg, "ingest_report.json", report);
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 1);
  if (datasets.size() != 1) {
    throw ConfigError("fit expects exactly one dataset; use joint-fit for more");
  }
  const auto& dataset = datasets.front();
  const CvResult result =
      run_cv(cfg, dataset, cfg.fold_mode, derive_seed(cfg.seed, "cv-folds"));

  fs::create_directories(cfg.output_dir);
  const fs::path weight_path = cfg.output_dir / (dataset.name + "_weights.csv");
  save_weights(weight_path, result.weights,
               {result.report.lambda_star, cfg.hash});

  json report = report_json(result.report);
  report["dataset"] = dataset.name;
  report["lambda"] = result.report.lambda_star;
  report["objective"] = result.final_objective;
  report["gradient_norm"] = result.final_grad_norm;
  report["iterations"] = 0;  // closed-form refit
  report["solver"] = cfg.nonnegative ? "projected-gradient" : "closed-form";
  report["weights_file"] = weight_path.string();
  report["input_hashes"] = {
      {"features", hex64(file_hash(cfg.datasets[0].features))},
      {"similarities", hex64(file_hash(cfg.datasets[0].similarities))}};
  write_json_report(cfg, "fit_report.json", report);
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 1);
  std::vector<Table1Row> rows;
  json report;
  report["datasets"] = json::array();
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& dataset = datasets[d];
    const CvResult pair_cv =
        run_cv(cfg, dataset, FoldMode::pair_level,
               derive_seed(cfg.seed, "cv-" + dataset.name));
    const CvResult control_cv =
        run_cv(cfg, dataset, FoldMode::image_disjoint,
               derive_seed(cfg.seed, "cv-control-" + dataset.name));

    Table1Row row;
    row.dataset = dataset.name;
    row.raw_r2 = pair_cv.report.r2_raw;
    row.transformed_r2 = pair_cv.report.r2_transformed;
    row.cv_control_r2 = control_cv.report.r2_transformed;
    if (!cfg.datasets[d].ratings.empty()) {
      const auto records = load_ratings(cfg.datasets[d].ratings);
      row.inter_reliability = split_half_reliability(
          records, dataset.features.item_ids,
          derive_seed(cfg.seed, "split-half-" + dataset.name), cfg.metric);
    }
    rows.push_back(row);

    json entry;
    entry["name"] = dataset.name;
    entry["pair_level"] = report_json(pair_cv.report);
    entry["image_disjoint"] = report_json(control_cv.report);
    if (row.inter_reliability) {
      entry["inter_reliability"] = *row.inter_reliability;
      entry["inter_reliability_method"] = "split-half-over-raters";
    }
    report["datasets"].push_back(entry);
  }
  write_text(cfg, "table1.csv", table1_csv(rows, cfg.strict));
  write_text(cfg, "table1.md", table1_markdown(rows, cfg.strict), false);
  write_json_report(cfg, "evaluate_report.json", report);
  return 0;
}

int cmd_baseline(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 1);
  std::vector<std::string> modes =
      cfg.raw.value("permutation_modes", std::vector<std::string>{
                                             "rows", "cols-within-rows", "both"});
  const int n_repeats = cfg.raw.value("n_repeats", 10);
  const std::vector<double> grid =
      cfg.lambda_grid.empty() ? default_lambda_grid() : cfg.lambda_grid;

  json report;
  report["n_repeats"] = n_repeats;
  report["results"] = json::array();
  std::ostringstream csv;
  csv << "dataset,mode,repeat,r2\n";
  for (const auto& dataset : datasets) {
    for (const auto& mode_name : modes) {
      PermutationMode mode;
      if (mode_name == "rows") {
        mode = PermutationMode::rows;
      } else if (mode_name == "cols-within-rows") {
        mode = PermutationMode::cols_within_rows;
      } else if (mode_name == "both") {
        mode = PermutationMode::both;
      } else if (mode_name == "none") {
        mode = PermutationMode::none;
      } else {
        throw ConfigError("unknown permutation mode: " + mode_name);
      }
      const auto scores = permutation_baseline(
          dataset.features, dataset.similarities, mode, n_repeats,
          derive_seed(cfg.seed, "baseline-" + dataset.name + "-" + mode_name),
          grid, cfg.n_folds, cv_options(cfg));
      json entry;
      entry["dataset"] = dataset.name;
      entry["mode"] = mode_name;
      entry["scores"] = scores;
      report["results"].push_back(entry);
      for (std::size_t rep = 0; rep < scores.size(); ++rep) {
        csv << dataset.name << ',' << mode_name << ',' << rep << ','
            << format_double(scores[rep]) << '\n';
      }
    }
  }
  write_text(cfg, "baseline.csv", csv.str());
  write_json_report(cfg, "baseline_report.json", report);
  return 0;
}

int cmd_transfer(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 2);
  std::map<std::string, WeightVector> weights;
  json fits = json::array();
  for (const auto& dataset : datasets) {
    const CvResult fit =
        run_cv(cfg, dataset, cfg.fold_mode,
               derive_seed(cfg.seed, "cv-" + dataset.name));
    fs::create_directories(cfg.output_dir);
    const fs::path weight_path =
        cfg.output_dir / (dataset.name + "_weights.csv");
    save_weights(weight_path, fit.weights,
                 {fit.report.lambda_star, cfg.hash});
    weights.emplace(dataset.name, fit.weights);
    json entry;
    entry["name"] = dataset.name;
    entry["lambda_star"] = fit.report.lambda_star;
    entry["weights_file"] = weight_path.string();
    fits.push_back(entry);
  }

  std::vector<Table2Row> rows;
  for (const auto& train : datasets) {
    for (const auto& test : datasets) {
      if (train.name == test.name) continue;
      rows.push_back({train.name, test.name,
                      transfer_evaluate(weights.at(train.name), test,
                                        cfg.metric)});
    }
  }
  json report;
  report["fits"] = fits;
  report["transfers"] = json::array();
  for (const auto& row : rows) {
    report["transfers"].push_back({{"training_set", row.training_set},
                                   {"test_set", row.test_set},
                                   {"r2", *row.r2}});
  }
  write_text(cfg, "table2.csv", table2_csv(rows, cfg.strict));
  write_text(cfg, "table2.md", table2_markdown(rows, cfg.strict), false);
  write_json_report(cfg, "transfer_report.json", report);
  return 0;
}

int cmd_joint_fit(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 1);
  const std::vector<double> grid =
      cfg.lambda_grid.empty() ? default_lambda_grid() : cfg.lambda_grid;
  const JointResult joint =
      joint_fit(datasets, grid, cfg.n_folds, cfg.fold_mode,
                derive_seed(cfg.seed, "joint-folds"), cv_options(cfg));

  fs::create_directories(cfg.output_dir);
  const fs::path weight_path = cfg.output_dir / "joint_weights.csv";
  save_weights(weight_path, joint.weights, {joint.lambda_star, cfg.hash});

  json report;
  report["lambda_star"] = joint.lambda_star;
  report["pooled_heldout"] = joint.pooled_heldout;
  report["pooled_heldout_cod"] = joint.pooled_heldout_cod;
  report["pooled_raw"] = joint.pooled_raw;
  report["per_fold_scores"] = joint.per_fold_scores;
  report["per_domain_heldout"] = joint.per_domain_heldout;
  report["weights_file"] = weight_path.string();
  write_json_report(cfg, "joint_report.json", report);

  std::ostringstream csv;
  csv << "domain,heldout_r2\n";
  for (const auto& [name, score] : joint.per_domain_heldout) {
    csv << name << ',' << format_double(score) << '\n';
  }
  csv << "pooled," << format_double(joint.pooled_heldout) << '\n';
  write_text(cfg, "joint_per_domain.csv", csv.str());
  return 0;
}

int cmd_lodo(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 2);
  const std::vector<double> grid =
      cfg.lambda_grid.empty() ? default_lambda_grid() : cfg.lambda_grid;
  std::vector<Table3Row> rows;
  for (const auto& held_out : datasets) {
    const double score = leave_one_domain_out(
        datasets, held_out.name, grid, cfg.n_folds, cfg.fold_mode,
        derive_seed(cfg.seed, "lodo-" + held_out.name), cv_options(cfg));
    rows.push_back({held_out.name, score});
  }
  json report;
  report["rows"] = json::array();
  for (const auto& row : rows) {
    report["rows"].push_back({{"leave_out", row.leave_out}, {"r2", *row.r2}});
  }
  write_text(cfg, "table3.csv", table3_csv(rows, cfg.strict));
  write_text(cfg, "table3.md", table3_markdown(rows, cfg.strict), false);
  write_json_report(cfg, "lodo_report.json", report);
  return 0;
}

DistanceMode distance_mode_of(const RunConfig& cfg) {
  const std::string mode = cfg.raw.value("distance_mode", std::string{"max-shift"});
  if (mode == "max-shift") return DistanceMode::max_shift;
  if (mode == "self-sim") return DistanceMode::self_sim;
  throw ConfigError("unknown distance_mode: " + mode);
}

int cmd_embed(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 1);
  for (const auto& dataset : datasets) {
    const Matrix d = sim_to_dist(dataset.similarities, distance_mode_of(cfg));
    NmdsConfig nmds;
    nmds.dim = cfg.raw.value("dim", 2);
    nmds.n_init = cfg.raw.value("n_init", 4);
    nmds.max_iter = cfg.raw.value("max_iter", 10000);
    nmds.tol = cfg.raw.value("tol", 1e-100);
    nmds.seed = derive_seed(cfg.seed, "nmds-" + dataset.name);
    const Embedding embedding = nonmetric_mds(d, nmds);

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"item_id"};
    for (Index k = 0; k < nmds.dim; ++k) header.push_back("x" + std::to_string(k));
    rows.push_back(header);
    for (Index i = 0; i < embedding.coords.rows(); ++i) {
      std::vector<std::string> row{dataset.features.item_ids[static_cast<std::size_t>(i)]};
      for (Index k = 0; k < nmds.dim; ++k) {
        row.push_back(format_double(embedding.coords(i, k)));
      }
      rows.push_back(row);
    }
    fs::create_directories(cfg.output_dir);
    write_csv(cfg.output_dir / (dataset.name + "_embedding.csv"),
              {stamp(cfg)}, rows);

    json meta;
    meta["dataset"] = dataset.name;
    meta["stress"] = embedding.stress;
    meta["dim"] = nmds.dim;
    meta["n_init"] = embedding.n_restarts_used;
    meta["iterations"] = embedding.iterations;
    meta["converged"] = embedding.converged;
    meta["distance_mode"] = cfg.raw.value("distance_mode", "max-shift");
    switch (embedding.stop_reason) {
      case StopReason::tolerance: meta["stop_reason"] = "tolerance"; break;
      case StopReason::underflow: meta["stop_reason"] = "underflow"; break;
      case StopReason::max_iter: meta["stop_reason"] = "max-iter"; break;
      case StopReason::exact_fit: meta["stop_reason"] = "exact-fit"; break;
    }
    write_json_report(cfg, dataset.name + "_embedding_meta.json", meta);
  }
  return 0;
}

int cmd_dendrogram(const RunConfig& cfg) {
  const std::string linkage = cfg.raw.value("linkage", std::string{"centroid"});
  if (linkage != "centroid") {
    throw ConfigError("only centroid linkage is supported, got: " + linkage);
  }
  const auto datasets = load_all_datasets(cfg, 1);
  for (const auto& dataset : datasets) {
    const Matrix d = sim_to_dist(dataset.similarities, distance_mode_of(cfg));
    const Dendrogram tree = hca_centroid_from_distances(d);

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"cluster_a", "cluster_b", "height", "new_size"});
    for (const auto& merge : tree.merges) {
      rows.push_back({std::to_string(merge.a), std::to_string(merge.b),
                      format_double(merge.height), std::to_string(merge.size)});
    }
    fs::create_directories(cfg.output_dir);
    write_csv(cfg.output_dir / (dataset.name + "_merges.csv"), {stamp(cfg)},
              rows);
    write_text(cfg, dataset.name + "_tree.newick",
               tree.newick(dataset.features.item_ids) + "\n", false);
  }
  return 0;
}

int cmd_cluster(const RunConfig& cfg) {
  const auto datasets = load_all_datasets(cfg, 1);
  std::vector<int> k_values =
      cfg.raw.value("k_values", std::vector<int>{2, 3, 4});
  std::optional<WeightVector> weights;
  if (cfg.raw.contains("weights")) {
    const fs::path path = cfg.raw["weights"].get<std::string>();
    require_exists(path, "weights file");
    weights = load_weights(path).first;
  }

  json manifest;
  manifest["conditions"] = json::array();
  for (const auto& dataset : datasets) {
    std::vector<std::pair<std::string, SimilarityMatrix>> spaces;
    spaces.emplace_back("raw", inner_product_similarity(dataset.features));
    if (weights) {
      spaces.emplace_back("transformed",
                          weighted_similarity(dataset.features, *weights));
    }
    for (const auto& [space, similarities] : spaces) {
      for (int k : k_values) {
        KmeansConfig kcfg;
        kcfg.seed = derive_seed(cfg.seed, "cluster-" + dataset.name + "-" +
                                              space + "-k" + std::to_string(k));
        const CategoryPartition partition = build_categories(
            similarities, k,
            space == "raw" ? SimilaritySource::raw
                           : SimilaritySource::transformed,
            kcfg);
        std::vector<std::vector<std::string>> rows;
        rows.push_back({"item_id", "cluster"});
        for (std::size_t i = 0; i < partition.labels.size(); ++i) {
          rows.push_back({dataset.features.item_ids[i],
                          std::to_string(partition.labels[i])});
        }
        const std::string filename = dataset.name + "_" + space + "_k" +
                                     std::to_string(k) + "_clusters.csv";
        fs::create_directories(cfg.output_dir);
        write_csv(cfg.output_dir / filename, {stamp(cfg)}, rows);

        json condition;
        condition["domain"] = dataset.name;
        condition["space"] = space;
        condition["k"] = k;
        condition["inertia"] = partition.inertia;
        condition["file"] = filename;
        manifest["conditions"].push_back(condition);
      }
    }
  }
  write_json_report(cfg, "cluster_manifest.json", manifest);
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  if (!cfg.raw.contains("synth")) {
    throw ConfigError("synth command needs a 'synth' config object");
  }
  const json& sj = cfg.raw["synth"];
  SynthSpec spec;
  spec.n_items = sj.value("n_items", 30);
  spec.n_features = sj.value("n_features", 50);
  spec.weight_sparsity = sj.value("weight_sparsity", 0.5);
  spec.noise_sd = sj.value("noise_sd", 0.0);
  spec.n_domains = sj.value("n_domains", 1);
  spec.shared_weights = sj.value("shared_weights", true);
  spec.seed = derive_seed(cfg.seed, "synth");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid synth spec: ") + e.what());
  }
  if (sj.contains("noise_relative_to_signal")) {
    spec.noise_sd = sj["noise_relative_to_signal"].get<double>() * signal_sd(spec);
  }

  const SynthResult result = generate(spec);
  fs::create_directories(cfg.output_dir);
  json meta;
  meta["n_items"] = spec.n_items;
  meta["n_features"] = spec.n_features;
  meta["weight_sparsity"] = spec.weight_sparsity;
  meta["noise_sd"] = spec.noise_sd;
  meta["shared_weights"] = spec.shared_weights;
  meta["domains"] = json::array();
  for (std::size_t d = 0; d < result.domains.size(); ++d) {
    const auto& dataset = result.domains[d];
    const fs::path fpath = cfg.output_dir / (dataset.name + "_features.csv");
    const fs::path spath =
        cfg.output_dir / (dataset.name + "_similarities.csv");
    save_features(fpath, dataset.features, std::vector<std::string>{stamp(cfg)});
    save_similarities(spath, dataset.similarities,
                      std::vector<std::string>{stamp(cfg)});
    json entry;
    entry["name"] = dataset.name;
    entry["features"] = fpath.string();
    entry["similarities"] = spath.string();
    entry["ceiling_r2"] = result.ceiling_r2[d];
    meta["domains"].push_back(entry);
  }
  for (std::size_t w = 0; w < result.true_weights.size(); ++w) {
    const fs::path wpath =
        cfg.output_dir / ("true_weights_" + std::to_string(w) + ".csv");
    save_weights(wpath, result.true_weights[w], {0.0, cfg.hash});
    meta["true_weights"].push_back(wpath.string());
  }
  write_json_report(cfg, "synth_meta.json", meta);
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  if (!cfg.raw.contains("reports")) {
    throw ConfigError("report command needs a 'reports' object");
  }
  const json& reports = cfg.raw["reports"];
  bool produced = false;

  if (reports.contains("table1")) {
    const fs::path path = reports["table1"].get<std::string>();
    require_exists(path, "table1 report");
    const json src = load_json(path);
    std::vector<Table1Row> rows;
    for (const auto& entry : src.at("datasets")) {
      Table1Row row;
      row.dataset = entry.at("name").get<std::string>();
      if (entry.contains("pair_level")) {
        row.raw_r2 = entry["pair_level"].value("r2_raw", 0.0);
        row.transformed_r2 = entry["pair_level"].value("r2_transformed", 0.0);
      }
      if (entry.contains("image_disjoint")) {
        row.cv_control_r2 = entry["image_disjoint"].value("r2_transformed", 0.0);
      }
      if (entry.contains("inter_reliability")) {
        row.inter_reliability = entry["inter_reliability"].get<double>();
      }
      rows.push_back(row);
    }
    write_text(cfg, "table1.csv", table1_csv(rows, cfg.strict));
    write_text(cfg, "table1.md", table1_markdown(rows, cfg.strict), false);
    produced = true;
  }
  if (reports.contains("table2")) {
    const fs::path path = reports["table2"].get<std::string>();
    require_exists(path, "table2 report");
    const json src = load_json(path);
    std::vector<Table2Row> rows;
    for (const auto& entry : src.at("transfers")) {
      Table2Row row;
      row.training_set = entry.at("training_set").get<std::string>();
      row.test_set = entry.at("test_set").get<std::string>();
      if (entry.contains("r2")) row.r2 = entry["r2"].get<double>();
      rows.push_back(row);
    }
    write_text(cfg, "table2.csv", table2_csv(rows, cfg.strict));
    write_text(cfg, "table2.md", table2_markdown(rows, cfg.strict), false);
    produced = true;
  }
  if (reports.contains("table3")) {
    const fs::path path = reports["table3"].get<std::string>();
    require_exists(path, "table3 report");
    const json src = load_json(path);
    std::vector<Table3Row> rows;
    for (const auto& entry : src.at("rows")) {
      Table3Row row;
      row.leave_out = entry.at("leave_out").get<std::string>();
      if (entry.contains("r2")) row.r2 = entry["r2"].get<double>();
      rows.push_back(row);
    }
    if (rows.size() < 2) {
      throw std::runtime_error("table3 needs at least 2 domains");
    }
    write_text(cfg, "table3.csv", table3_csv(rows, cfg.strict));
    write_text(cfg, "table3.md", table3_markdown(rows, cfg.strict), false);
    produced = true;
  }
  if (!produced) {
    throw ConfigError("reports object names no tables");
  }
  return 0;
}

json error_json(const std::string& command, const std::string& message,
                int exit_code) {
  json j;
  j["error"] = message;
  j["command"] = command;
  j["exit_code"] = exit_code;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diagonal feature reweighting for similarity alignment"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> output_override;
  std::map<std::string, std::optional<int>> int_overrides;

  const std::vector<std::string> commands{
      "ingest", "fit", "evaluate", "baseline", "transfer", "joint-fit",
      "lodo", "embed", "dendrogram", "cluster", "synth", "report"};
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed_override, "master seed override");
    sub->add_option("--output-dir", output_override, "output directory override");
    subs[name] = sub;
  }
  std::optional<int> dim_override;
  std::optional<int> n_init_override;
  std::optional<int> max_iter_override;
  subs["embed"]->add_option("--dim", dim_override, "embedding dimension");
  subs["embed"]->add_option("--n-init", n_init_override, "independent restarts");
  subs["embed"]->add_option("--max-iter", max_iter_override, "iteration cap");
  std::optional<std::string> linkage_override;
  subs["dendrogram"]->add_option("--linkage", linkage_override, "linkage rule");
  bool strict_flag = false;
  subs["report"]->add_flag("--strict", strict_flag, "fail on missing cells");
  subs["evaluate"]->add_flag("--table1", [](std::int64_t) {},
                             "emit a Table-1 shaped report (default)");

  std::string command;
  try {
    app.parse(argc, argv);
    command = app.get_subcommands().front()->get_name();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("", e.what(), 2).dump() << std::endl;
    return 2;
  }

  try {
    json raw = json::object();
    if (!config_path.empty()) {
      raw = load_json(config_path);
    }
    if (seed_override) raw["seed"] = *seed_override;
    if (output_override) raw["output_dir"] = *output_override;
    if (dim_override) raw["dim"] = *dim_override;
    if (n_init_override) raw["n_init"] = *n_init_override;
    if (max_iter_override) raw["max_iter"] = *max_iter_override;
    if (linkage_override) raw["linkage"] = *linkage_override;
    if (strict_flag) raw["strict"] = true;

    const RunConfig cfg = parse_config(command, raw);

    if (command == "ingest") return cmd_ingest(cfg);
    if (command == "fit") return cmd_fit(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg);
    if (command == "baseline") return cmd_baseline(cfg);
    if (command == "transfer") return cmd_transfer(cfg);
    if (command == "joint-fit") return cmd_joint_fit(cfg);
    if (command == "lodo") return cmd_lodo(cfg);
    if (command == "embed") return cmd_embed(cfg);
    if (command == "dendrogram") return cmd_dendrogram(cfg);
    if (command == "cluster") return cmd_cluster(cfg);
    if (command == "synth") return cmd_synth(cfg);
    if (command == "report") return cmd_report(cfg);
    throw ConfigError("unknown command: " + command);
  } catch (const ConfigError& e) {
    std::cerr << error_json(command, e.what(), 2).dump() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_json(command, e.what(), 1).dump() << std::endl;
    return 1;
  }
}
