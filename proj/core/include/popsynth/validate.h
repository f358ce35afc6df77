#ifndef POPSYNTH_VALIDATE_H_
#define POPSYNTH_VALIDATE_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popsynth/balance.h"
#include "popsynth/schema.h"

namespace popsynth {

struct FrequencyCell {
  std::string id;  // "var=value|var=value"
  double frequency = 0.0;

  friend bool operator==(const FrequencyCell&, const FrequencyCell&) = default;
};

// Relative frequencies over contingency cells, ordered by cell id so two
// vectors over the same cells line up. A single contingency sums to 1; a
// pooled vector holds n_groups contingencies and sums to n_groups.
struct FrequencyVector {
  std::vector<FrequencyCell> cells;
  std::size_t n_source_records = 0;
  std::size_t n_groups = 1;

  std::vector<double> values() const;
};

// Counts over the Cartesian product of the variables' categories divided by
// the record count. Zero cells are kept when include_zero_cells is set.
// Throws DataError for an empty record set or unknown variables.
FrequencyVector contingency(std::span<const Record> records, const Schema& schema,
                            const std::vector<std::string>& variables,
                            bool include_zero_cells);

// Every order-k contingency over the given variables (all schema variables
// when empty), zero cells included, concatenated and sorted by cell id.
FrequencyVector pooled_contingency(std::span<const Record> records, const Schema& schema,
                                   std::size_t order,
                                   const std::vector<std::string>& variables = {});

// Union of the cell ids of both vectors, absent cells filled with 0.
void align(FrequencyVector& a, FrequencyVector& b);

// sqrt(sum (s_hat - s)² / N) / (sum s / N). Throws DataError when the
// cell ids differ.
double srmse(const FrequencyVector& original, const FrequencyVector& synthetic);

// Product-moment correlation. Throws DataError for fewer than 2 cells,
// misaligned cells, or a constant vector.
double pearson(const FrequencyVector& original, const FrequencyVector& synthetic);

// 1 - SS_res / SS_tot with the original as truth and the synthetic as
// prediction. Throws DataError like pearson().
double r_squared(const FrequencyVector& original, const FrequencyVector& synthetic);

struct BlandAltmanPoint {
  std::string id;
  double mean = 0.0;        // (s + s_hat) / 2
  double difference = 0.0;  // s - s_hat
};

struct BlandAltmanReport {
  std::vector<BlandAltmanPoint> points;
  double mean_diff = 0.0;
  double sd = 0.0;  // N - 1 denominator
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::string> outliers;  // strictly outside [lower, upper]
};

inline constexpr double kAgreementZ = 1.96;

// Limits mean_diff +- 1.96 sd. Throws DataError for fewer than 3 cells or
// misaligned cells.
BlandAltmanReport bland_altman(const FrequencyVector& original,
                               const FrequencyVector& synthetic);

struct FringeThresholds {
  double under = 0.8;
  double over = 1.25;
};

enum class FringeFlag { kNone, kUnder, kOver };
std::string_view to_string(FringeFlag flag);

struct FringeEntry {
  CellKey key;
  std::string value;
  std::size_t original_count = 0;
  std::size_t synthetic_count = 0;
  double original_share = 0.0;
  double synthetic_share = 0.0;
  // synthetic_share / original_share; +inf when only the synthetic side has
  // the value, NaN when neither has it.
  double ratio = 0.0;
  FringeFlag flag = FringeFlag::kNone;
};

struct FringeAuditReport {
  std::vector<std::string> key_variables;
  std::string target_variable;
  FringeThresholds thresholds;
  std::vector<CellKey> key_cells;  // top-k by original count
  std::vector<FringeEntry> entries;

  std::size_t flagged(FringeFlag flag) const;
};

// Ranks key cells by original count (ties by key), keeps the top_k, and
// compares the target variable's share of each category between the two
// sources. A key cell missing from the synthetic records yields ratio 0.
FringeAuditReport fringe_audit(std::span<const Record> original,
                               std::span<const Record> synthetic, const Schema& schema,
                               const std::vector<std::string>& key_variables,
                               const std::string& target_variable, std::size_t top_k,
                               const FringeThresholds& thresholds = {});

// Metrics for one contingency order.
struct MetricSet {
  std::size_t order = 1;
  FrequencyVector original;
  FrequencyVector synthetic;
  double srmse = 0.0;
  std::optional<double> pearson;    // nullopt when undefined
  std::optional<double> r_squared;  // nullopt when undefined
  std::optional<BlandAltmanReport> bland_altman;
};

MetricSet evaluate(std::span<const Record> original, std::span<const Record> synthetic,
                   const Schema& schema, std::size_t order,
                   const std::vector<std::string>& variables = {});

struct ValidationReport {
  std::size_t n_original = 0;
  std::size_t n_synthetic = 0;
  std::vector<MetricSet> metrics;
};

ValidationReport validate_populations(std::span<const Record> original,
                                      std::span<const Record> synthetic,
                                      const Schema& schema,
                                      const std::vector<std::size_t>& orders,
                                      const std::vector<std::string>& variables = {});

}  // namespace popsynth

#endif  // POPSYNTH_VALIDATE_H_
