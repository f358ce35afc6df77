#ifndef POPSYNTH_TABLE_H_
#define POPSYNTH_TABLE_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "popsynth/csv.h"

namespace popsynth {

using Cell = std::optional<std::string>;
using Column = std::vector<Cell>;

// Column-major table of optional string cells; an empty CSV cell becomes a
// missing (nullopt) cell.
struct RawTable {
  std::vector<std::string> names;
  std::vector<Column> columns;

  std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
  std::size_t n_columns() const { return names.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws DataError when the column is absent.
  const Column& column(std::string_view name) const;
  Column& column(std::string_view name);

  std::size_t missing_count(std::size_t column) const;
  std::size_t total_missing() const;

  // Throws DataError unless every column has the same length and names are
  // unique.
  void check_rectangular() const;

  friend bool operator==(const RawTable&, const RawTable&) = default;
};

RawTable to_raw_table(const CsvTable& csv);
CsvTable to_csv_table(const RawTable& table);

}  // namespace popsynth

#endif  // POPSYNTH_TABLE_H_
