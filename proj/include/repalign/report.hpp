#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace repalign {

// Table shapes for the three report layouts. Missing cells render as gaps
// unless strict mode is requested, in which case they are an error.
struct Table1Row {
  std::string dataset;
  std::optional<double> raw_r2;
  std::optional<double> transformed_r2;
  std::optional<double> cv_control_r2;
  std::optional<double> inter_reliability;
};

struct Table2Row {
  std::string training_set;
  std::string test_set;
  std::optional<double> r2;
};

struct Table3Row {
  std::string leave_out;
  std::optional<double> r2;
};

class MissingCellError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string table1_csv(std::span<const Table1Row> rows, bool strict = false);
std::string table1_markdown(std::span<const Table1Row> rows, bool strict = false);

std::string table2_csv(std::span<const Table2Row> rows, bool strict = false);
std::string table2_markdown(std::span<const Table2Row> rows, bool strict = false);

std::string table3_csv(std::span<const Table3Row> rows, bool strict = false);
std::string table3_markdown(std::span<const Table3Row> rows, bool strict = false);

}  // namespace repalign
