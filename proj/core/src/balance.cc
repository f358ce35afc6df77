#include "popsynth/balance.h"

#include <algorithm>
#include <cmath>

#include "popsynth/error.h"
#include "popsynth/rng.h"

namespace popsynth {
namespace {

std::vector<std::size_t> key_indices(const Schema& schema,
                                     const std::vector<std::string>& variables) {
  std::vector<std::size_t> idx;
  for (const auto& v : variables) idx.push_back(schema.index_of(v));
  return idx;
}

CellKey key_of(const Record& r, const std::vector<std::size_t>& idx) {
  CellKey key;
  key.reserve(idx.size());
  for (std::size_t i : idx) key.push_back(r.values[i]);
  return key;
}

}  // namespace

WeightedDataset weighted_dataset_from_table(const RawTable& table, const Schema& schema,
                                            std::string_view weight_column) {
  WeightedDataset ds;
  ds.records = records_from_table(table, schema);
  const Column& col = table.column(weight_column);
  ds.weights.reserve(col.size());
  for (std::size_t r = 0; r < col.size(); ++r) {
    auto w = col[r] ? parse_double(*col[r]) : std::nullopt;
    if (!w || !(*w > 0.0) || !std::isfinite(*w)) {
      throw DataError("row " + std::to_string(r + 1) + ": weight must be a positive number");
    }
    ds.weights.push_back(*w);
  }
  return ds;
}

double round_half_even(double x) {
  const double r = std::round(x);
  if (std::abs(x - std::trunc(x)) == 0.5) return 2.0 * std::round(x / 2.0);
  return r;
}

std::vector<std::int64_t> integerize_weights(std::span<const double> weights,
                                             double reduction_factor) {
  if (!(reduction_factor > 0.0) || !std::isfinite(reduction_factor)) {
    throw ConfigError("reduction factor must be positive");
  }
  std::vector<std::int64_t> out;
  out.reserve(weights.size());
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("weights must be positive");
    out.push_back(std::max<std::int64_t>(
        1, static_cast<std::int64_t>(round_half_even(w / reduction_factor))));
  }
  return out;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kOriginal:
      return "original";
    case Provenance::kDuplicate:
      return "duplicate";
    case Provenance::kGenerated:
      return "generated";
  }
  return "original";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "original") return Provenance::kOriginal;
  if (text == "duplicate") return Provenance::kDuplicate;
  if (text == "generated") return Provenance::kGenerated;
  throw DataError("unknown provenance '" + std::string(text) + "'");
}

std::size_t BalancedDataset::count(Provenance p) const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p));
}

BalancedDataset duplicate_by_weights(std::span<const Record> records,
                                     std::span<const std::int64_t> integer_weights) {
  if (records.size() != integer_weights.size()) {
    throw ConfigError("duplicate_by_weights: " + std::to_string(records.size()) +
                      " records but " + std::to_string(integer_weights.size()) +
                      " weights");
  }
  BalancedDataset out;
  std::int64_t total = 0;
  for (auto w : integer_weights) {
    if (w < 1) throw ConfigError("duplicate_by_weights: integer weights must be >= 1");
    total += w;
  }
  out.records.reserve(static_cast<std::size_t>(total));
  out.provenance.reserve(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::int64_t k = 0; k < integer_weights[i]; ++k) {
      out.records.push_back(records[i]);
      out.provenance.push_back(k == 0 ? Provenance::kOriginal : Provenance::kDuplicate);
    }
  }
  return out;
}

std::int64_t MarginalTable::total() const {
  std::int64_t t = 0;
  for (const auto& [key, count] : cells) t += count;
  return t;
}

void MarginalTable::validate(const Schema& schema) const {
  if (key_variables.empty()) throw DataError("marginal table has no key variables");
  const auto idx = key_indices(schema, key_variables);
  for (const auto& [key, count] : cells) {
    if (key.size() != idx.size()) throw DataError("marginal cell has the wrong arity");
    if (count < 0) throw DataError("marginal counts must be non-negative");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (!schema.variable(idx[i]).category_index(key[i])) {
        throw DataError("marginal value '" + key[i] + "' is not a category of '" +
                        key_variables[i] + "'");
      }
    }
  }
}

MarginalTable marginal_table_from_csv(const CsvTable& csv) {
  auto count_col = csv.column("count");
  if (!count_col) throw DataError("marginal table needs a `count` column");
  MarginalTable table;
  std::vector<std::size_t> key_cols;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (c == *count_col) continue;
    table.key_variables.push_back(csv.header[c]);
    key_cols.push_back(c);
  }
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    CellKey key;
    for (std::size_t c : key_cols) key.push_back(row[c]);
    auto count = parse_double(row[*count_col]);
    if (!count || *count < 0 || std::floor(*count) != *count) {
      throw DataError("marginal row " + std::to_string(r + 1) +
                      ": count must be a non-negative integer");
    }
    if (!table.cells.emplace(std::move(key), static_cast<std::int64_t>(*count)).second) {
      throw DataError("marginal row " + std::to_string(r + 1) + " repeats a cell");
    }
  }
  return table;
}

CsvTable marginal_table_csv(const MarginalTable& table) {
  CsvTable csv;
  csv.header = table.key_variables;
  csv.header.push_back("count");
  for (const auto& [key, count] : table.cells) {
    auto row = key;
    row.push_back(std::to_string(count));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

double scale_for_total(const MarginalTable& table, std::size_t desired_total) {
  const auto total = table.total();
  if (total <= 0) throw DataError("marginal table total is zero");
  return static_cast<double>(desired_total) / static_cast<double>(total);
}

std::string cell_label(const std::vector<std::string>& variables, const CellKey& key) {
  std::string out;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) out += '|';
    out += (i < variables.size() ? variables[i] : std::string("?")) + "=" + key[i];
  }
  return out;
}

std::int64_t DeficitReport::total_deficit() const {
  std::int64_t t = 0;
  for (const auto& c : cells) t += c.deficit;
  return t;
}

DeficitReport compute_deficits(std::span<const Record> records, const Schema& schema,
                               const MarginalTable& marginals, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be positive");
  marginals.validate(schema);
  const auto idx = key_indices(schema, marginals.key_variables);
  std::map<CellKey, std::int64_t> observed;
  DeficitReport report;
  for (const auto& r : records) {
    CellKey key = key_of(r, idx);
    if (marginals.cells.count(key)) {
      ++observed[key];
    } else {
      ++report.unmatched;
    }
  }
  for (const auto& [key, count] : marginals.cells) {
    CellDeficit d;
    d.key = key;
    d.target = static_cast<std::int64_t>(round_half_even(scale * static_cast<double>(count)));
    auto it = observed.find(key);
    d.observed = it == observed.end() ? 0 : it->second;
    d.deficit = std::max<std::int64_t>(0, d.target - d.observed);
    d.surplus = std::max<std::int64_t>(0, d.observed - d.target);
    report.cells.push_back(std::move(d));
  }
  return report;
}

ImputeResult wgan_impute(std::span<const Record> originals, std::span<const Record> pool,
                         const Schema& schema, const MarginalTable& marginals,
                         double scale, std::uint64_t seed) {
  for (const auto& r : pool) validate_record(r, schema);
  ImputeResult result;
  result.deficits = compute_deficits(originals, schema, marginals, scale);
  const auto idx = key_indices(schema, marginals.key_variables);

  std::map<CellKey, std::vector<std::size_t>> supply;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CellKey key = key_of(pool[i], idx);
    if (marginals.cells.count(key)) supply[key].push_back(i);
  }

  auto& ds = result.dataset;
  ds.records.assign(originals.begin(), originals.end());
  ds.provenance.assign(originals.size(), Provenance::kOriginal);

  for (std::size_t c = 0; c < result.deficits.cells.size(); ++c) {
    const CellDeficit& d = result.deficits.cells[c];
    CellFill fill{d.key, d.target, d.observed, 0, 0};
    if (d.deficit > 0) {
      auto it = supply.find(d.key);
      std::vector<std::size_t> candidates =
          it == supply.end() ? std::vector<std::size_t>{} : it->second;
      const std::size_t take =
          std::min(candidates.size(), static_cast<std::size_t>(d.deficit));
      // Partial Fisher-Yates: the first `take` slots become a uniform draw
      // without replacement.
      Rng rng(Rng::derive_seed(seed, c));
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + rng.uniform_index(candidates.size() - i);
        std::swap(candidates[i], candidates[j]);
        ds.records.push_back(pool[candidates[i]]);
        ds.provenance.push_back(Provenance::kGenerated);
      }
      fill.filled = static_cast<std::int64_t>(take);
      fill.shortfall = d.deficit - fill.filled;
    }
    if (fill.shortfall > 0) result.shortfall.push_back(fill);
    result.fills.push_back(std::move(fill));
  }
  return result;
}

CsvTable balanced_csv(const BalancedDataset& dataset, const Schema& schema) {
  CsvTable csv = records_to_csv(dataset.records, schema);
  csv.header.push_back("provenance");
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    csv.rows[i].emplace_back(to_string(dataset.provenance[i]));
  }
  return csv;
}

CsvTable shortfall_csv(const std::vector<CellFill>& fills,
                       const std::vector<std::string>& key_variables) {
  CsvTable csv;
  csv.header = {"cell", "target", "observed", "filled", "shortfall"};
  for (const auto& f : fills) {
    csv.rows.push_back({cell_label(key_variables, f.key), std::to_string(f.target),
                        std::to_string(f.observed), std::to_string(f.filled),
                        std::to_string(f.shortfall)});
  }
  return csv;
}

}  // namespace popsynth
