#ifndef POPSYNTH_PREPROCESS_H_
#define POPSYNTH_PREPROCESS_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "popsynth/csv.h"
#include "popsynth/table.h"

namespace popsynth {

// Cut-points for turning a numeric column into interval labels. Intervals
// are left-closed and right-open with open-ended extremes:
//   (-inf, e0), [e0, e1), ..., [e_{k-1}, +inf)
struct BinSpec {
  std::string variable;
  std::vector<double> edges;
  std::vector<std::string> labels;  // edges.size() + 1 entries

  // Labels "0", "1", ... by interval index.
  static BinSpec with_index_labels(std::string variable,
                                   std::vector<double> edges);

  // Throws ConfigError unless edges are finite and strictly increasing and
  // labels are unique, non-empty and one more than the edges.
  void validate() const;
  std::size_t interval_of(double value) const;
};

struct DroppedColumn {
  std::string name;
  double missing_fraction = 0.0;
};

struct DropResult {
  RawTable table;
  std::vector<DroppedColumn> dropped;
};

// Keeps columns whose missing fraction is <= max_missing_fraction.
DropResult drop_sparse_columns(const RawTable& table,
                               double max_missing_fraction);

// Missing and NaN cells stay missing. Throws DataError on a non-numeric
// cell.
Column bin_numeric(const Column& column, const BinSpec& spec);

// Fills each missing cell with its column's mode (ties to the
// lexicographically smallest value). Throws DataError naming a column that
// is entirely missing.
RawTable impute_mode(const RawTable& table);

// Fills each missing cell by majority vote among the k nearest complete
// rows, where distance is the Hamming distance over the target row's
// observed columns. Distance ties go to the lower row index and vote ties
// to the lexicographically smallest value. Throws DataError when there are
// no complete rows or fewer than k.
RawTable impute_knn(const RawTable& table, std::size_t k);

// JSON array of {"variable", "edges", "labels"?}; labels default to
// interval indices.
std::vector<BinSpec> parse_bin_specs(std::string_view json_text);

CsvTable dropped_columns_csv(const std::vector<DroppedColumn>& dropped);

}  // namespace popsynth

#endif  // POPSYNTH_PREPROCESS_H_
