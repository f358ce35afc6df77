#include "popsynth/schema.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "popsynth/error.h"

namespace popsynth {
namespace {

using nlohmann::json;

std::string_view to_string(VariableSource source) {
  return source == VariableSource::kNative ? "native" : "binned";
}

bool is_integer_text(std::string_view text) {
  auto v = parse_double(text);
  return v && std::isfinite(*v) && std::floor(*v) == *v;
}

}  // namespace

std::optional<std::size_t> VariableDef::category_index(
    std::string_view label) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == label) return i;
  }
  return std::nullopt;
}

Schema::Schema(std::vector<VariableDef> variables)
    : variables_(std::move(variables)) {
  std::set<std::string_view> names;
  std::size_t offset = 0;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw ConfigError("schema: empty variable name");
    if (!names.insert(v.name).second) {
      throw ConfigError("schema: duplicate variable '" + v.name + "'");
    }
    if (v.categories.empty()) {
      throw ConfigError("schema: variable '" + v.name + "' has no categories");
    }
    std::set<std::string_view> cats;
    for (const auto& c : v.categories) {
      if (c.empty()) {
        throw ConfigError("schema: variable '" + v.name +
                          "' has an empty category label");
      }
      if (!cats.insert(c).second) {
        throw ConfigError("schema: variable '" + v.name +
                          "' repeats category '" + c + "'");
      }
    }
    if (v.kind == VariableKind::kBinary && v.categories.size() > 2) {
      throw ConfigError("schema: binary variable '" + v.name +
                        "' has more than two categories");
    }
    spans_.push_back({offset, offset + v.width()});
    offset += v.width();
  }
  feature_dim_ = offset;
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  auto i = find(name);
  if (!i) throw DataError("variable '" + std::string(name) + "' not in schema");
  return *i;
}

std::string Schema::to_json() const {
  json out = json::array();
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& v = variables_[i];
    out.push_back({{"name", v.name},
                   {"kind", to_string(v.kind)},
                   {"categories", v.categories},
                   {"span", {spans_[i].begin, spans_[i].end}},
                   {"source", to_string(v.source)}});
  }
  return out.dump(2) + "\n";
}

Schema Schema::from_json(std::string_view text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!in.is_array()) throw DataError("schema: expected a JSON array");
  std::vector<VariableDef> vars;
  std::vector<ColumnSpan> stored;
  try {
    for (const auto& item : in) {
      VariableDef v;
      v.name = item.at("name").get<std::string>();
      const auto kind = item.at("kind").get<std::string>();
      if (kind == "categorical") {
        v.kind = VariableKind::kCategorical;
      } else if (kind == "binary") {
        v.kind = VariableKind::kBinary;
      } else {
        throw DataError("schema: unknown kind '" + kind + "'");
      }
      v.categories = item.at("categories").get<std::vector<std::string>>();
      v.source = item.value("source", std::string("native")) == "binned"
                     ? VariableSource::kBinnedNumeric
                     : VariableSource::kNative;
      if (item.contains("span")) {
        auto s = item.at("span").get<std::vector<std::size_t>>();
        if (s.size() != 2) throw DataError("schema: span must have 2 entries");
        stored.push_back({s[0], s[1]});
      }
      vars.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
  Schema schema;
  try {
    schema = Schema(std::move(vars));
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
  if (!stored.empty() && stored != schema.spans()) {
    throw DataError("schema: stored spans disagree with categories");
  }
  return schema;
}

std::uint64_t Schema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Schema infer_schema(const RawTable& table, const InferOptions& options) {
  table.check_rectangular();
  if (table.n_columns() == 0 || table.n_rows() == 0) {
    throw DataError("infer_schema: empty table");
  }
  std::vector<VariableDef> vars;
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    const std::string& name = table.names[c];
    if (std::find(options.exclude.begin(), options.exclude.end(), name) !=
        options.exclude.end()) {
      continue;
    }
    std::set<std::string> observed;
    for (const auto& cell : table.columns[c]) {
      if (cell) observed.insert(*cell);
    }
    VariableDef v;
    v.name = name;
    auto ov = options.overrides.find(name);
    const ColumnOverride* override =
        ov == options.overrides.end() ? nullptr : &ov->second;

    if (override && override->bin_labels) {
      std::set<std::string> labels(override->bin_labels->begin(),
                                   override->bin_labels->end());
      for (const auto& o : observed) {
        if (!labels.count(o)) {
          throw DataError("infer_schema: column '" + name + "' value '" + o +
                          "' is not one of its bin labels");
        }
      }
      v.categories.assign(labels.begin(), labels.end());
      v.source = VariableSource::kBinnedNumeric;
    } else {
      if (observed.empty()) {
        throw DataError("infer_schema: column '" + name + "' has no values");
      }
      const bool all_numeric =
          std::all_of(observed.begin(), observed.end(), [](const auto& s) {
            return parse_double(s).has_value();
          });
      const bool all_integer =
          std::all_of(observed.begin(), observed.end(), is_integer_text);
      const bool forced_categorical = override && override->kind.has_value();
      if (all_numeric && !forced_categorical &&
          (!all_integer || observed.size() > options.max_categories)) {
        throw DataError("infer_schema: numeric column '" + name +
                        "' needs a bin specification");
      }
      v.categories.assign(observed.begin(), observed.end());
    }
    if (override && override->kind) {
      v.kind = *override->kind;
      if (v.kind == VariableKind::kBinary && v.categories.size() > 2) {
        throw DataError("infer_schema: column '" + name +
                        "' has more than two values and cannot be binary");
      }
    } else {
      v.kind = v.categories.size() <= 2 ? VariableKind::kBinary
                                        : VariableKind::kCategorical;
    }
    vars.push_back(std::move(v));
  }
  return Schema(std::move(vars));
}

void validate_record(const Record& record, const Schema& schema) {
  if (record.values.size() != schema.size()) {
    throw DataError("record has " + std::to_string(record.values.size()) +
                    " values, schema has " + std::to_string(schema.size()) +
                    " variables");
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!schema.variable(i).category_index(record.values[i])) {
      throw DataError("value '" + record.values[i] + "' is not a category of '" +
                      schema.variable(i).name + "'");
    }
  }
}

void encode_into(const Record& record, const Schema& schema,
                 Eigen::Ref<Eigen::RowVectorXd> row) {
  validate_record(record, schema);
  row.setZero();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& var = schema.variable(i);
    const std::size_t k = *var.category_index(record.values[i]);
    const auto span = schema.span(i);
    if (var.kind == VariableKind::kBinary) {
      row[static_cast<Eigen::Index>(span.begin)] = k == 1 ? 1.0 : 0.0;
    } else {
      row[static_cast<Eigen::Index>(span.begin + k)] = 1.0;
    }
  }
}

EncodedMatrix encode(std::span<const Record> records, const Schema& schema) {
  EncodedMatrix out(static_cast<Eigen::Index>(records.size()),
                    static_cast<Eigen::Index>(schema.feature_dim()));
  for (std::size_t r = 0; r < records.size(); ++r) {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(schema.feature_dim()));
    encode_into(records[r], schema, row);
    out.row(static_cast<Eigen::Index>(r)) = row;
  }
  return out;
}

Record decode(std::span<const double> row, const Schema& schema,
              const DecodeOptions& options, Rng* rng) {
  if (row.size() != schema.feature_dim()) {
    throw DataError("decode: row has " + std::to_string(row.size()) +
                    " entries, schema feature_dim is " +
                    std::to_string(schema.feature_dim()));
  }
  for (double x : row) {
    if (std::isnan(x)) throw DataError("decode: NaN entry");
  }
  const bool sample = options.mode == DecodeMode::kSample;
  if (sample && rng == nullptr) {
    throw ConfigError("decode: sample mode requires an RNG");
  }
  Record record;
  record.values.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& var = schema.variable(i);
    const auto span = schema.span(i);
    const auto values = row.subspan(span.begin, span.width());
    std::size_t chosen = 0;
    if (var.kind == VariableKind::kBinary) {
      const bool one = sample ? rng->bernoulli(values[0])
                              : values[0] >= options.binary_threshold;
      chosen = (one && var.categories.size() == 2) ? 1 : 0;
    } else if (!sample) {
      for (std::size_t j = 1; j < values.size(); ++j) {
        if (values[j] > values[chosen]) chosen = j;
      }
    } else {
      double total = 0.0;
      for (double x : values) total += std::max(x, 0.0);
      if (total <= 0.0) {
        chosen = rng->uniform_index(values.size());
      } else {
        const double u = rng->uniform() * total;
        double acc = 0.0;
        chosen = values.size() - 1;
        for (std::size_t j = 0; j < values.size(); ++j) {
          acc += std::max(values[j], 0.0);
          if (u < acc) {
            chosen = j;
            break;
          }
        }
      }
    }
    record.values.push_back(var.categories[chosen]);
  }
  return record;
}

std::vector<Record> records_from_table(const RawTable& table,
                                       const Schema& schema) {
  table.check_rectangular();
  std::vector<const Column*> cols;
  for (const auto& var : schema.variables()) {
    auto idx = table.find(var.name);
    if (!idx) throw DataError("table lacks schema column '" + var.name + "'");
    cols.push_back(&table.columns[*idx]);
  }
  std::vector<Record> records(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    auto& values = records[r].values;
    values.reserve(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const Cell& cell = (*cols[i])[r];
      if (!cell) {
        throw DataError("row " + std::to_string(r + 1) + ": missing value for '" +
                        schema.variable(i).name + "'");
      }
      values.push_back(*cell);
    }
    validate_record(records[r], schema);
  }
  return records;
}

CsvTable records_to_csv(std::span<const Record> records, const Schema& schema) {
  CsvTable csv;
  for (const auto& var : schema.variables()) csv.header.push_back(var.name);
  csv.rows.reserve(records.size());
  for (const auto& r : records) csv.rows.push_back(r.values);
  return csv;
}

std::string_view to_string(VariableKind kind) {
  return kind == VariableKind::kBinary ? "binary" : "categorical";
}

std::string_view to_string(DecodeMode mode) {
  return mode == DecodeMode::kArgmax ? "argmax" : "sample";
}

DecodeMode parse_decode_mode(std::string_view text) {
  if (text == "argmax") return DecodeMode::kArgmax;
  if (text == "sample") return DecodeMode::kSample;
  throw ConfigError("unknown decode mode '" + std::string(text) + "'");
}

}  // namespace popsynth
