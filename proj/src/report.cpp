#include "repalign/report.hpp"

#include <cstdio>
#include <sstream>

#include "repalign/util/csv.hpp"

namespace repalign {

namespace {

std::string cell_csv(const std::optional<double>& value, bool strict,
                     const char* table) {
  if (!value) {
    if (strict) {
      throw MissingCellError(std::string("missing cell in ") + table);
    }
    return "";
  }
  return format_double(*value);
}

std::string cell_md(const std::optional<double>& value, bool strict,
                    const char* table) {
  if (!value) {
    if (strict) {
      throw MissingCellError(std::string("missing cell in ") + table);
    }
    return "-";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *value);
  return buf;
}

}  // namespace

std::string table1_csv(std::span<const Table1Row> rows, bool strict) {
  std::ostringstream out;
  out << "Dataset,Raw R2,Transformed R2,CV Control R2,Human Inter-reliability\n";
  for (const auto& row : rows) {
    out << row.dataset << ',' << cell_csv(row.raw_r2, strict, "table1") << ','
        << cell_csv(row.transformed_r2, strict, "table1") << ','
        << cell_csv(row.cv_control_r2, strict, "table1") << ','
        << cell_csv(row.inter_reliability, false, "table1") << '\n';
  }
  return out.str();
}

std::string table1_markdown(std::span<const Table1Row> rows, bool strict) {
  std::ostringstream out;
  out << "| Dataset | Raw R2 | Transformed R2 | CV Control R2 | Human "
         "Inter-reliability |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    out << "| " << row.dataset << " | " << cell_md(row.raw_r2, strict, "table1")
        << " | " << cell_md(row.transformed_r2, strict, "table1") << " | "
        << cell_md(row.cv_control_r2, strict, "table1") << " | "
        << cell_md(row.inter_reliability, false, "table1") << " |\n";
  }
  return out.str();
}

std::string table2_csv(std::span<const Table2Row> rows, bool strict) {
  std::ostringstream out;
  out << "Training Set,Test Set,R2\n";
  for (const auto& row : rows) {
    out << row.training_set << ',' << row.test_set << ','
        << cell_csv(row.r2, strict, "table2") << '\n';
  }
  return out.str();
}

std::string table2_markdown(std::span<const Table2Row> rows, bool strict) {
  std::ostringstream out;
  out << "| Training Set | Test Set | R2 |\n|---|---|---|\n";
  for (const auto& row : rows) {
    out << "| " << row.training_set << " | " << row.test_set << " | "
        << cell_md(row.r2, strict, "table2") << " |\n";
  }
  return out.str();
}

std::string table3_csv(std::span<const Table3Row> rows, bool strict) {
  std::ostringstream out;
  out << "Leave-out,R2\n";
  for (const auto& row : rows) {
    out << row.leave_out << ',' << cell_csv(row.r2, strict, "table3") << '\n';
  }
  return out.str();
}

std::string table3_markdown(std::span<const Table3Row> rows, bool strict) {
  std::ostringstream out;
  out << "| Leave-out | R2 |\n|---|---|\n";
  for (const auto& row : rows) {
    out << "| " << row.leave_out << " | " << cell_md(row.r2, strict, "table3")
        << " |\n";
  }
  return out.str();
}

}  // namespace repalign
