#include "repalign/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "repalign/util/csv.hpp"

namespace repalign {

namespace {

void check_ids(const std::vector<std::string>& ids, Index expected) {
  if (static_cast<Index>(ids.size()) != expected) {
    throw std::invalid_argument("item_ids length " +
                                std::to_string(ids.size()) +
                                " does not match matrix rows " +
                                std::to_string(expected));
  }
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (id.empty()) {
      throw std::invalid_argument("empty item id");
    }
    if (id.find_first_of(",\"\n\r") != std::string::npos || id.front() == '#') {
      throw std::invalid_argument("item id not representable in CSV: " + id);
    }
    if (!seen.insert(id).second) {
      throw std::invalid_argument("duplicate item id: " + id);
    }
  }
}

std::map<std::string, Index> id_index(const std::vector<std::string>& ids) {
  std::map<std::string, Index> index;
  for (Index i = 0; i < static_cast<Index>(ids.size()); ++i) {
    index.emplace(ids[static_cast<std::size_t>(i)], i);
  }
  return index;
}

}  // namespace

void FeatureMatrix::validate() const {
  if (n_items() < 2 || n_features() < 1) {
    throw std::invalid_argument("feature matrix needs >= 2 items and >= 1 feature");
  }
  check_ids(item_ids, n_items());
  if (!values.allFinite()) {
    throw std::invalid_argument("feature matrix contains non-finite values");
  }
}

std::vector<std::pair<Index, Index>> SimilarityMatrix::missing_pairs() const {
  std::vector<std::pair<Index, Index>> missing;
  for (Index i = 1; i < n_items(); ++i) {
    for (Index j = 0; j < i; ++j) {
      if (!observed(i, j)) missing.emplace_back(i, j);
    }
  }
  return missing;
}

void SimilarityMatrix::validate() const {
  if (values.rows() != values.cols()) {
    throw std::invalid_argument("similarity matrix must be square");
  }
  if (n_items() < 2) {
    throw std::invalid_argument("similarity matrix needs >= 2 items");
  }
  check_ids(item_ids, n_items());
  for (Index i = 0; i < n_items(); ++i) {
    if (diagonal_defined && !std::isfinite(values(i, i))) {
      throw std::invalid_argument("diagonal flagged defined but entry " +
                                  std::to_string(i) + " is not finite");
    }
    for (Index j = 0; j < i; ++j) {
      const double a = values(i, j);
      const double b = values(j, i);
      const bool fa = std::isfinite(a);
      const bool fb = std::isfinite(b);
      if (fa != fb || (fa && a != b)) {
        throw std::invalid_argument("similarity matrix asymmetric at (" +
                                    std::to_string(i) + "," +
                                    std::to_string(j) + ")");
      }
      if (!fa && !std::isnan(a)) {
        throw std::invalid_argument("similarity entries must be finite or NaN");
      }
    }
  }
}

void DomainDataset::validate() const {
  features.validate();
  similarities.validate();
  if (features.item_ids != similarities.item_ids) {
    throw std::invalid_argument("dataset '" + name +
                                "': feature and similarity item ids differ");
  }
}

SimilarityMatrix aggregate_ratings(const std::vector<RatingRecord>& records,
                                   const std::vector<std::string>& item_ids,
                                   const RatingScale& scale) {
  check_ids(item_ids, static_cast<Index>(item_ids.size()));
  const Index n = static_cast<Index>(item_ids.size());
  if (n < 2) {
    throw std::invalid_argument("aggregation needs at least two items");
  }
  const auto index = id_index(item_ids);

  // Ratings per unordered pair, keyed (i, j) with i > j.
  std::map<std::pair<Index, Index>, std::vector<double>> by_pair;
  for (const auto& rec : records) {
    const auto a = index.find(rec.item_a);
    if (a == index.end()) {
      throw std::invalid_argument("rating references unknown item id: " +
                                  rec.item_a);
    }
    const auto b = index.find(rec.item_b);
    if (b == index.end()) {
      throw std::invalid_argument("rating references unknown item id: " +
                                  rec.item_b);
    }
    if (a->second == b->second) {
      throw std::invalid_argument("self-pair rating for item: " + rec.item_a);
    }
    if (!std::isfinite(rec.rating) || rec.rating < scale.lo ||
        rec.rating > scale.hi) {
      throw std::invalid_argument(
          "rating outside scale [" + std::to_string(scale.lo) + "," +
          std::to_string(scale.hi) + "] for pair (" + rec.item_a + "," +
          rec.item_b + ")");
    }
    const Index i = std::max(a->second, b->second);
    const Index j = std::min(a->second, b->second);
    by_pair[{i, j}].push_back(rec.rating);
  }

  SimilarityMatrix s;
  s.item_ids = item_ids;
  s.diagonal_defined = false;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  s.values = Matrix::Constant(n, n, nan);
  for (auto& [pair, ratings] : by_pair) {
    // Sorted before summing: the mean is then exactly record-order invariant.
    std::sort(ratings.begin(), ratings.end());
    double sum = 0.0;
    for (double r : ratings) sum += r;
    const double mean = sum / static_cast<double>(ratings.size());
    s.values(pair.first, pair.second) = mean;
    s.values(pair.second, pair.first) = mean;
  }
  return s;
}

ZScoreResult zscore_normalize(const FeatureMatrix& f, StdConvention convention) {
  f.validate();
  const Index n = f.n_items();
  ZScoreResult result;
  result.features = f;
  Matrix& v = result.features.values;
  for (Index k = 0; k < f.n_features(); ++k) {
    const double mean = v.col(k).mean();
    const double ss = (v.col(k).array() - mean).square().sum();
    const double denom =
        convention == StdConvention::population ? static_cast<double>(n)
                                                : static_cast<double>(n - 1);
    const double sd = std::sqrt(ss / denom);
    if (sd <= 1e-12 * (std::abs(mean) + 1.0)) {
      v.col(k).setZero();
      result.zero_variance_columns.push_back(k);
    } else {
      v.col(k) = (v.col(k).array() - mean) / sd;
    }
  }
  return result;
}

namespace {

double parse_cell_or_throw(const std::string& field,
                           const std::filesystem::path& path,
                           std::size_t line, std::size_t col) {
  const auto value = parse_double(field);
  if (!value || !std::isfinite(*value)) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                             ": column " + std::to_string(col + 1) +
                             ": expected a finite number, got '" + field + "'");
  }
  return *value;
}

}  // namespace

FeatureMatrix load_features(const std::filesystem::path& path) {
  const CsvContent csv = read_csv(path);
  if (csv.rows.size() < 2) {
    throw std::runtime_error(path.string() + ": expected a header and data rows");
  }
  const std::size_t n_cols = csv.rows[0].size();
  if (n_cols < 2) {
    throw std::runtime_error(path.string() +
                             ": expected an id column plus feature columns");
  }
  FeatureMatrix f;
  const Index n_items = static_cast<Index>(csv.rows.size() - 1);
  const Index n_features = static_cast<Index>(n_cols - 1);
  f.values.resize(n_items, n_features);
  for (std::size_t r = 1; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.line_numbers[r];
    if (row.size() != n_cols) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": expected " + std::to_string(n_cols) +
                               " fields, got " + std::to_string(row.size()));
    }
    f.item_ids.push_back(row[0]);
    for (std::size_t c = 1; c < n_cols; ++c) {
      f.values(static_cast<Index>(r - 1), static_cast<Index>(c - 1)) =
          parse_cell_or_throw(row[c], path, line, c);
    }
  }
  try {
    f.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return f;
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& f,
                   std::span<const std::string> comments) {
  f.validate();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"item_id"};
  for (Index k = 0; k < f.n_features(); ++k) {
    header.push_back("f" + std::to_string(k));
  }
  rows.push_back(std::move(header));
  for (Index i = 0; i < f.n_items(); ++i) {
    std::vector<std::string> row{f.item_ids[static_cast<std::size_t>(i)]};
    for (Index k = 0; k < f.n_features(); ++k) {
      row.push_back(format_double(f.values(i, k)));
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, {comments.begin(), comments.end()}, rows);
}

SimilarityMatrix load_similarities(const std::filesystem::path& path) {
  const CsvContent csv = read_csv(path);
  if (csv.rows.size() < 2) {
    throw std::runtime_error(path.string() + ": expected a header and data rows");
  }
  const auto& header = csv.rows[0];
  const Index n = static_cast<Index>(header.size() - 1);
  if (n < 2 || static_cast<Index>(csv.rows.size() - 1) != n) {
    throw std::runtime_error(path.string() + ": similarity matrix must be square");
  }
  SimilarityMatrix s;
  s.item_ids.assign(header.begin() + 1, header.end());
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  s.values = Matrix::Constant(n, n, nan);
  for (Index i = 0; i < n; ++i) {
    const auto& row = csv.rows[static_cast<std::size_t>(i + 1)];
    const std::size_t line = csv.line_numbers[static_cast<std::size_t>(i + 1)];
    if (static_cast<Index>(row.size()) != n + 1) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": expected " + std::to_string(n + 1) +
                               " fields, got " + std::to_string(row.size()));
    }
    if (row[0] != s.item_ids[static_cast<std::size_t>(i)]) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": row id '" + row[0] +
                               "' does not match header order");
    }
    for (Index j = 0; j < n; ++j) {
      const auto& field = row[static_cast<std::size_t>(j + 1)];
      if (field.empty()) continue;  // undefined diagonal or missing pair
      s.values(i, j) = parse_cell_or_throw(field, path, line,
                                           static_cast<std::size_t>(j + 1));
    }
  }

  // Symmetry within tolerance, then exact symmetrization.
  double max_abs = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) {
      if (s.observed(i, j)) max_abs = std::max(max_abs, std::abs(s.values(i, j)));
    }
  }
  const double tol = 1e-9 * std::max(1.0, max_abs);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < i; ++j) {
      const bool a = s.observed(i, j);
      const bool b = s.observed(j, i);
      if (a != b) {
        throw std::runtime_error(path.string() + ": cell (" +
                                 std::to_string(i) + "," + std::to_string(j) +
                                 ") observed on one side of the diagonal only");
      }
      if (a && std::abs(s.values(i, j) - s.values(j, i)) > tol) {
        throw std::runtime_error(path.string() + ": asymmetric entries at (" +
                                 std::to_string(i) + "," + std::to_string(j) +
                                 ")");
      }
      if (a) {
        const double mean = 0.5 * (s.values(i, j) + s.values(j, i));
        s.values(i, j) = mean;
        s.values(j, i) = mean;
      }
    }
  }
  Index defined_diagonal = 0;
  for (Index i = 0; i < n; ++i) {
    if (std::isfinite(s.values(i, i))) ++defined_diagonal;
  }
  if (defined_diagonal != 0 && defined_diagonal != n) {
    throw std::runtime_error(path.string() + ": diagonal partially defined");
  }
  s.diagonal_defined = defined_diagonal == n;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return s;
}

void save_similarities(const std::filesystem::path& path,
                       const SimilarityMatrix& s,
                       std::span<const std::string> comments) {
  s.validate();
  const Index n = s.n_items();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"id"};
  header.insert(header.end(), s.item_ids.begin(), s.item_ids.end());
  rows.push_back(std::move(header));
  for (Index i = 0; i < n; ++i) {
    std::vector<std::string> row{s.item_ids[static_cast<std::size_t>(i)]};
    for (Index j = 0; j < n; ++j) {
      row.push_back(std::isfinite(s.values(i, j))
                        ? format_double(s.values(i, j))
                        : std::string{});
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, {comments.begin(), comments.end()}, rows);
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
  const CsvContent csv = read_csv(path);
  if (csv.rows.empty()) {
    throw std::runtime_error(path.string() + ": empty ratings file");
  }
  std::vector<RatingRecord> records;
  for (std::size_t r = 1; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.line_numbers[r];
    if (row.size() != 4) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                               ": expected item_a,item_b,rating,rater_id");
    }
    RatingRecord rec;
    rec.item_a = row[0];
    rec.item_b = row[1];
    rec.rating = parse_cell_or_throw(row[2], path, line, 2);
    rec.rater_id = row[3];
    records.push_back(std::move(rec));
  }
  return records;
}

void save_ratings(const std::filesystem::path& path,
                  const std::vector<RatingRecord>& records,
                  std::span<const std::string> comments) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"item_a", "item_b", "rating", "rater_id"});
  for (const auto& rec : records) {
    rows.push_back(
        {rec.item_a, rec.item_b, format_double(rec.rating), rec.rater_id});
  }
  write_csv(path, {comments.begin(), comments.end()}, rows);
}

}  // namespace repalign
