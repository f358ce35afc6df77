#include "popsynth/table.h"

#include <set>

#include "popsynth/error.h"

namespace popsynth {

std::optional<std::size_t> RawTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

const Column& RawTable::column(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw DataError("no column named '" + std::string(name) + "'");
  return columns[*idx];
}

Column& RawTable::column(std::string_view name) {
  auto idx = find(name);
  if (!idx) throw DataError("no column named '" + std::string(name) + "'");
  return columns[*idx];
}

std::size_t RawTable::missing_count(std::size_t c) const {
  std::size_t n = 0;
  for (const auto& cell : columns.at(c)) n += !cell.has_value();
  return n;
}

std::size_t RawTable::total_missing() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) n += missing_count(c);
  return n;
}

void RawTable::check_rectangular() const {
  if (names.size() != columns.size()) {
    throw DataError("table has " + std::to_string(names.size()) +
                    " names but " + std::to_string(columns.size()) +
                    " columns");
  }
  std::set<std::string_view> seen;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!seen.insert(names[c]).second) {
      throw DataError("duplicate column name '" + names[c] + "'");
    }
    if (columns[c].size() != n_rows()) {
      throw DataError("column '" + names[c] + "' is not rectangular");
    }
  }
}

RawTable to_raw_table(const CsvTable& csv) {
  RawTable table;
  table.names = csv.header;
  table.columns.assign(csv.header.size(), Column(csv.rows.size()));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      const std::string& v = csv.rows[r][c];
      if (!v.empty()) table.columns[c][r] = v;
    }
  }
  return table;
}

CsvTable to_csv_table(const RawTable& table) {
  table.check_rectangular();
  CsvTable csv;
  csv.header = table.names;
  csv.rows.assign(table.n_rows(), std::vector<std::string>(table.n_columns()));
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      if (table.columns[c][r]) csv.rows[r][c] = *table.columns[c][r];
    }
  }
  return csv;
}

}  // namespace popsynth
