#ifndef POPSYNTH_SCHEMA_H_
#define POPSYNTH_SCHEMA_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "popsynth/csv.h"
#include "popsynth/rng.h"
#include "popsynth/table.h"

namespace popsynth {

enum class VariableKind { kCategorical, kBinary };
enum class VariableSource { kNative, kBinnedNumeric };

// One categorical variable and its slice of the one-hot feature vector.
//
// A categorical variable occupies one column per category. A binary
// variable occupies a single column: 0 selects categories[0] and 1 selects
// categories[1]. A binary variable with a single category is a constant
// column that always encodes as 0.
struct VariableDef {
  std::string name;
  VariableKind kind = VariableKind::kCategorical;
  std::vector<std::string> categories;
  VariableSource source = VariableSource::kNative;

  std::size_t width() const {
    return kind == VariableKind::kBinary ? 1 : categories.size();
  }
  std::optional<std::size_t> category_index(std::string_view label) const;

  friend bool operator==(const VariableDef&, const VariableDef&) = default;
};

// Half-open column range [begin, end) in the feature vector.
struct ColumnSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t width() const { return end - begin; }
  friend bool operator==(const ColumnSpan&, const ColumnSpan&) = default;
};

class Schema {
 public:
  Schema() = default;
  // Throws ConfigError on empty/duplicate names, empty or duplicate
  // categories, or a binary variable with more than two categories.
  explicit Schema(std::vector<VariableDef> variables);

  const std::vector<VariableDef>& variables() const { return variables_; }
  const VariableDef& variable(std::size_t i) const { return variables_.at(i); }
  std::size_t size() const { return variables_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<ColumnSpan>& spans() const { return spans_; }
  ColumnSpan span(std::size_t i) const { return spans_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws DataError for unknown names.
  std::size_t index_of(std::string_view name) const;

  // JSON array of {name, kind, categories, span, source}.
  std::string to_json() const;
  static Schema from_json(std::string_view text);

  // FNV-1a hash of to_json(), used to tie checkpoints to a schema.
  std::uint64_t fingerprint() const;

  friend bool operator==(const Schema& a, const Schema& b) {
    return a.variables_ == b.variables_;
  }

 private:
  std::vector<VariableDef> variables_;
  std::vector<ColumnSpan> spans_;
  std::size_t feature_dim_ = 0;
};

// Category labels in schema variable order.
struct Record {
  std::vector<std::string> values;

  const std::string& get(const Schema& schema, std::string_view name) const {
    return values.at(schema.index_of(name));
  }
  friend bool operator==(const Record&, const Record&) = default;
  friend auto operator<=>(const Record&, const Record&) = default;
};

using EncodedMatrix = Eigen::MatrixXd;

struct ColumnOverride {
  std::optional<VariableKind> kind;
  // Interval labels of a binned numeric column; these become the
  // categories whether or not every label is observed.
  std::optional<std::vector<std::string>> bin_labels;
};

struct InferOptions {
  std::map<std::string, ColumnOverride> overrides;
  // Columns left out of the schema, e.g. a person-weight column.
  std::vector<std::string> exclude;
  // A column whose values all parse as numbers is treated as numeric (and
  // must carry bin labels) when it has a non-integer value or more distinct
  // values than this.
  std::size_t max_categories = 20;
};

// Deterministic schema: categories sorted lexicographically. Throws
// DataError for an empty table, duplicate names, or a numeric column with
// no bin override.
Schema infer_schema(const RawTable& table, const InferOptions& options = {});

// Throws DataError when a value is missing or outside its categories.
void validate_record(const Record& record, const Schema& schema);

EncodedMatrix encode(std::span<const Record> records, const Schema& schema);
void encode_into(const Record& record, const Schema& schema,
                 Eigen::Ref<Eigen::RowVectorXd> row);

enum class DecodeMode { kArgmax, kSample };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kArgmax;
  double binary_threshold = 0.5;
};

// Maps a real-valued row in [0, 1] back to a record. Argmax picks the
// largest column of each categorical span (ties to the lowest index) and
// thresholds binary columns; sample draws proportionally to span values
// (uniform for an all-zero span) and Bernoulli-samples binary columns.
// rng is required in sample mode. Throws DataError for a wrong length or
// NaN entries.
Record decode(std::span<const double> row, const Schema& schema,
              const DecodeOptions& options = {}, Rng* rng = nullptr);

// Builds records from the schema's columns of a table; extra columns are
// ignored. Throws DataError on missing columns, missing cells or unknown
// category labels.
std::vector<Record> records_from_table(const RawTable& table,
                                       const Schema& schema);
CsvTable records_to_csv(std::span<const Record> records, const Schema& schema);

std::string_view to_string(VariableKind kind);
std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view text);

}  // namespace popsynth

#endif  // POPSYNTH_SCHEMA_H_
