#include "popsynth/preprocess.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "popsynth/error.h"

namespace popsynth {
namespace {

// Most frequent value; ties to the lexicographically smallest. The map
// iterates in lexicographic order, so the first strict maximum wins.
std::string majority(const std::map<std::string, std::size_t>& counts) {
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = &value;
      best_count = count;
    }
  }
  return *best;
}

}  // namespace

BinSpec BinSpec::with_index_labels(std::string variable,
                                   std::vector<double> edges) {
  BinSpec spec{std::move(variable), std::move(edges), {}};
  for (std::size_t i = 0; i <= spec.edges.size(); ++i) {
    spec.labels.push_back(std::to_string(i));
  }
  return spec;
}

void BinSpec::validate() const {
  if (labels.size() != edges.size() + 1) {
    throw ConfigError("bin spec '" + variable + "': expected " +
                      std::to_string(edges.size() + 1) + " labels, got " +
                      std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!std::isfinite(edges[i])) {
      throw ConfigError("bin spec '" + variable + "': non-finite edge");
    }
    if (i > 0 && !(edges[i - 1] < edges[i])) {
      throw ConfigError("bin spec '" + variable +
                        "': edges must be strictly increasing");
    }
  }
  std::set<std::string_view> seen;
  for (const auto& l : labels) {
    if (l.empty() || !seen.insert(l).second) {
      throw ConfigError("bin spec '" + variable +
                        "': labels must be unique and non-empty");
    }
  }
}

std::size_t BinSpec::interval_of(double value) const {
  return static_cast<std::size_t>(
      std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

DropResult drop_sparse_columns(const RawTable& table,
                               double max_missing_fraction) {
  table.check_rectangular();
  if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
    throw ConfigError("max_missing_fraction must lie in [0, 1]");
  }
  DropResult result;
  const double n = static_cast<double>(table.n_rows());
  for (std::size_t c = 0; c < table.n_columns(); ++c) {
    const double fraction =
        n == 0 ? 0.0 : static_cast<double>(table.missing_count(c)) / n;
    if (fraction <= max_missing_fraction) {
      result.table.names.push_back(table.names[c]);
      result.table.columns.push_back(table.columns[c]);
    } else {
      result.dropped.push_back({table.names[c], fraction});
    }
  }
  return result;
}

Column bin_numeric(const Column& column, const BinSpec& spec) {
  spec.validate();
  Column out(column.size());
  for (std::size_t r = 0; r < column.size(); ++r) {
    if (!column[r]) continue;
    auto value = parse_double(*column[r]);
    if (!value) {
      throw DataError("bin_numeric '" + spec.variable + "': row " +
                      std::to_string(r + 1) + " value '" + *column[r] +
                      "' is not numeric");
    }
    if (std::isnan(*value)) continue;
    out[r] = spec.labels[spec.interval_of(*value)];
  }
  return out;
}

RawTable impute_mode(const RawTable& table) {
  table.check_rectangular();
  RawTable out = table;
  for (std::size_t c = 0; c < out.n_columns(); ++c) {
    if (out.missing_count(c) == 0) continue;
    std::map<std::string, std::size_t> counts;
    for (const auto& cell : out.columns[c]) {
      if (cell) ++counts[*cell];
    }
    if (counts.empty()) {
      throw DataError("impute_mode: column '" + out.names[c] +
                      "' is entirely missing");
    }
    const std::string mode = majority(counts);
    for (auto& cell : out.columns[c]) {
      if (!cell) cell = mode;
    }
  }
  return out;
}

RawTable impute_knn(const RawTable& table, std::size_t k) {
  table.check_rectangular();
  if (k == 0) throw ConfigError("impute_knn: k must be positive");
  const std::size_t n_rows = table.n_rows();
  const std::size_t n_cols = table.n_columns();
  if (n_rows == 0) return table;

  std::vector<std::size_t> complete;
  for (std::size_t r = 0; r < n_rows; ++r) {
    bool ok = true;
    for (std::size_t c = 0; c < n_cols && ok; ++c) ok = table.columns[c][r].has_value();
    if (ok) complete.push_back(r);
  }
  if (complete.empty()) throw DataError("impute_knn: no complete rows");
  if (k > complete.size()) {
    throw DataError("impute_knn: k=" + std::to_string(k) + " exceeds the " +
                    std::to_string(complete.size()) + " complete rows");
  }

  RawTable out = table;
  std::vector<std::pair<std::size_t, std::size_t>> ranked(complete.size());
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<std::size_t> missing;
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (!table.columns[c][r]) missing.push_back(c);
    }
    if (missing.empty()) continue;

    for (std::size_t i = 0; i < complete.size(); ++i) {
      const std::size_t other = complete[i];
      std::size_t distance = 0;
      for (std::size_t c = 0; c < n_cols; ++c) {
        const Cell& cell = table.columns[c][r];
        if (cell && *cell != *table.columns[c][other]) ++distance;
      }
      ranked[i] = {distance, other};
    }
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                      ranked.end());

    for (std::size_t c : missing) {
      std::map<std::string, std::size_t> votes;
      for (std::size_t i = 0; i < k; ++i) {
        ++votes[*table.columns[c][ranked[i].second]];
      }
      out.columns[c][r] = majority(votes);
    }
  }
  return out;
}

std::vector<BinSpec> parse_bin_specs(std::string_view json_text) {
  using nlohmann::json;
  std::vector<BinSpec> specs;
  try {
    const json in = json::parse(json_text);
    if (!in.is_array()) throw ConfigError("bin specs: expected a JSON array");
    for (const auto& item : in) {
      BinSpec spec;
      spec.variable = item.at("variable").get<std::string>();
      spec.edges = item.at("edges").get<std::vector<double>>();
      if (item.contains("labels")) {
        spec.labels = item.at("labels").get<std::vector<std::string>>();
      } else {
        spec = BinSpec::with_index_labels(spec.variable, spec.edges);
      }
      spec.validate();
      specs.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bin specs: ") + e.what());
  }
  return specs;
}

CsvTable dropped_columns_csv(const std::vector<DroppedColumn>& dropped) {
  CsvTable csv;
  csv.header = {"name", "missing_fraction"};
  for (const auto& d : dropped) {
    csv.rows.push_back({d.name, format_double(d.missing_fraction)});
  }
  return csv;
}

}  // namespace popsynth
