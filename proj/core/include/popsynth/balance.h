#ifndef POPSYNTH_BALANCE_H_
#define POPSYNTH_BALANCE_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "popsynth/csv.h"
#include "popsynth/schema.h"

namespace popsynth {

struct WeightedDataset {
  std::vector<Record> records;
  std::vector<double> weights;
};

// Reads records from the schema columns and weights from weight_column.
// Throws DataError for missing, non-numeric or non-positive weights.
WeightedDataset weighted_dataset_from_table(const RawTable& table, const Schema& schema,
                                            std::string_view weight_column);

// Round half to even.
double round_half_even(double x);

// max(1, round_half_even(w / reduction_factor)) per weight. Throws
// ConfigError for a non-positive weight or factor.
std::vector<std::int64_t> integerize_weights(std::span<const double> weights,
                                             double reduction_factor);

enum class Provenance { kOriginal, kDuplicate, kGenerated };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

struct BalancedDataset {
  std::vector<Record> records;
  std::vector<Provenance> provenance;

  std::size_t count(Provenance p) const;
};

// Each record appears integer_weights[i] times in input order, the first
// copy tagged original and the rest duplicate. Throws ConfigError on a
// length mismatch or a weight below 1.
BalancedDataset duplicate_by_weights(std::span<const Record> records,
                                     std::span<const std::int64_t> integer_weights);

using CellKey = std::vector<std::string>;

// External target counts over combinations of key variables.
struct MarginalTable {
  std::vector<std::string> key_variables;
  std::map<CellKey, std::int64_t> cells;

  std::int64_t total() const;
  // Throws DataError when a key variable or key value is not in the schema
  // or a count is negative.
  void validate(const Schema& schema) const;
};

// One column per key variable plus a `count` column.
MarginalTable marginal_table_from_csv(const CsvTable& csv);
CsvTable marginal_table_csv(const MarginalTable& table);

// Scale that makes the scaled targets sum to about desired_total.
double scale_for_total(const MarginalTable& table, std::size_t desired_total);

// "var=value|var=value" label for a key tuple.
std::string cell_label(const std::vector<std::string>& variables, const CellKey& key);

struct CellDeficit {
  CellKey key;
  std::int64_t target = 0;  // round_half_even(scale * count)
  std::int64_t observed = 0;
  std::int64_t deficit = 0;  // max(0, target - observed)
  std::int64_t surplus = 0;  // max(0, observed - target), never removed
};

struct DeficitReport {
  std::vector<CellDeficit> cells;  // in marginal-table key order
  // Records whose key tuple has no marginal cell; they are kept as is.
  std::size_t unmatched = 0;

  std::int64_t total_deficit() const;
};

DeficitReport compute_deficits(std::span<const Record> records, const Schema& schema,
                               const MarginalTable& marginals, double scale);

struct CellFill {
  CellKey key;
  std::int64_t target = 0;
  std::int64_t observed = 0;
  std::int64_t filled = 0;
  std::int64_t shortfall = 0;
};

struct ImputeResult {
  BalancedDataset dataset;
  DeficitReport deficits;
  std::vector<CellFill> fills;      // every cell
  std::vector<CellFill> shortfall;  // cells whose pool supply ran out
};

// Keeps every original and appends, per marginal cell, deficit(c) pool
// records with a matching key drawn uniformly without replacement. Each
// cell draws from its own stream derived from seed and the cell index, so
// the result does not depend on processing order. Throws DataError when a
// pool record does not validate against the schema.
ImputeResult wgan_impute(std::span<const Record> originals, std::span<const Record> pool,
                         const Schema& schema, const MarginalTable& marginals,
                         double scale, std::uint64_t seed);

// Schema columns plus a `provenance` column.
CsvTable balanced_csv(const BalancedDataset& dataset, const Schema& schema);
// Columns cell, target, observed, filled, shortfall.
CsvTable shortfall_csv(const std::vector<CellFill>& fills,
                       const std::vector<std::string>& key_variables);

}  // namespace popsynth

#endif  // POPSYNTH_BALANCE_H_
