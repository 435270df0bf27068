#include "repalign/similarity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "repalign/util/csv.hpp"

namespace repalign {

void WeightVector::validate() const {
  if (values.size() < 1) {
    throw std::invalid_argument("weight vector is empty");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("weight vector contains non-finite values");
  }
  if (nonnegative && (values.array() < 0.0).any()) {
    throw std::invalid_argument(
        "weight vector flagged nonnegative but has negative entries");
  }
}

namespace {

SimilarityMatrix gram_similarity(const FeatureMatrix& f, const Matrix& scaled) {
  // Lower triangle computed once, mirrored for exact symmetry.
  Matrix product = scaled * f.values.transpose();
  SimilarityMatrix s;
  s.values = product.selfadjointView<Eigen::Lower>();
  s.item_ids = f.item_ids;
  s.diagonal_defined = true;
  return s;
}

}  // namespace

SimilarityMatrix inner_product_similarity(const FeatureMatrix& f) {
  f.validate();
  return gram_similarity(f, f.values);
}

SimilarityMatrix weighted_similarity(const FeatureMatrix& f,
                                     const WeightVector& w) {
  f.validate();
  w.validate();
  if (w.size() != f.n_features()) {
    throw std::invalid_argument(
        "weight dimension " + std::to_string(w.size()) +
        " does not match feature dimension " + std::to_string(f.n_features()));
  }
  return gram_similarity(f, f.values * w.values.asDiagonal());
}

FeatureMatrix rescale_features(const FeatureMatrix& f, const WeightVector& w) {
  f.validate();
  w.validate();
  if (w.size() != f.n_features()) {
    throw std::invalid_argument(
        "weight dimension " + std::to_string(w.size()) +
        " does not match feature dimension " + std::to_string(f.n_features()));
  }
  if ((w.values.array() < 0.0).any()) {
    throw std::invalid_argument(
        "rescaling needs nonnegative weights; refit with the nonnegative "
        "solver");
  }
  FeatureMatrix out = f;
  out.values = f.values * w.values.array().sqrt().matrix().asDiagonal();
  return out;
}

void save_weights(const std::filesystem::path& path, const WeightVector& w,
                  const WeightFileMeta& meta) {
  w.validate();
  std::vector<std::string> comments{"lambda=" + format_double(meta.lambda) +
                                    " provenance=" + meta.provenance};
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"feature_index", "value"});
  for (Index k = 0; k < w.size(); ++k) {
    rows.push_back({std::to_string(k), format_double(w.values(k))});
  }
  write_csv(path, comments, rows);
}

std::pair<WeightVector, WeightFileMeta> load_weights(
    const std::filesystem::path& path) {
  const CsvContent csv = read_csv(path);
  WeightFileMeta meta;
  for (const auto& comment : csv.comments) {
    std::istringstream stream(comment);
    std::string token;
    while (stream >> token) {
      if (token.starts_with("lambda=")) {
        if (auto v = parse_double(token.substr(7))) meta.lambda = *v;
      } else if (token.starts_with("provenance=")) {
        meta.provenance = token.substr(11);
      }
    }
  }
  if (csv.rows.size() < 2) {
    throw std::runtime_error(path.string() + ": no weight rows");
  }
  WeightVector w;
  w.values.resize(static_cast<Index>(csv.rows.size() - 1));
  bool nonneg = true;
  for (std::size_t r = 1; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.line_numbers[r];
    if (row.size() != 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": expected feature_index,value");
    }
    const auto idx = parse_double(row[0]);
    const auto value = parse_double(row[1]);
    if (!idx || !value || *idx != static_cast<double>(r - 1)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": malformed weight row");
    }
    w.values(static_cast<Index>(r - 1)) = *value;
    nonneg = nonneg && *value >= 0.0;
  }
  w.nonnegative = nonneg;
  w.validate();
  return {std::move(w), std::move(meta)};
}

}  // namespace repalign
