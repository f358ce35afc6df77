#include "popsynth/validate.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "popsynth/error.h"

namespace popsynth {
namespace {

void check_aligned(const FrequencyVector& a, const FrequencyVector& b) {
  if (a.cells.size() != b.cells.size()) {
    throw DataError("frequency vectors have different cell counts (" +
                    std::to_string(a.cells.size()) + " vs " +
                    std::to_string(b.cells.size()) + ")");
  }
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    if (a.cells[i].id != b.cells[i].id) {
      throw DataError("frequency vectors are misaligned at cell '" + a.cells[i].id +
                      "' vs '" + b.cells[i].id + "'");
    }
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Combinations of k indices out of n, in lexicographic order.
void combinations(std::size_t n, std::size_t k, std::vector<std::size_t>& current,
                  std::size_t start, std::vector<std::vector<std::size_t>>& out) {
  if (current.size() == k) {
    out.push_back(current);
    return;
  }
  for (std::size_t i = start; i < n; ++i) {
    current.push_back(i);
    combinations(n, k, current, i + 1, out);
    current.pop_back();
  }
}

std::string label_for(const Schema& schema, const std::vector<std::size_t>& idx,
                      const std::vector<std::string>& values) {
  std::string id;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) id += '|';
    id += schema.variable(idx[i]).name + "=" + values[i];
  }
  return id;
}

}  // namespace

std::vector<double> FrequencyVector::values() const {
  std::vector<double> v;
  v.reserve(cells.size());
  for (const auto& c : cells) v.push_back(c.frequency);
  return v;
}

FrequencyVector contingency(std::span<const Record> records, const Schema& schema,
                            const std::vector<std::string>& variables,
                            bool include_zero_cells) {
  if (records.empty()) throw DataError("contingency: empty record set");
  if (variables.empty()) throw ConfigError("contingency: no variables given");
  std::vector<std::size_t> idx;
  for (const auto& v : variables) idx.push_back(schema.index_of(v));

  std::map<std::string, std::size_t> counts;
  std::vector<std::string> key(idx.size());
  for (const auto& r : records) {
    for (std::size_t i = 0; i < idx.size(); ++i) key[i] = r.values.at(idx[i]);
    ++counts[label_for(schema, idx, key)];
  }
  if (include_zero_cells) {
    // Mixed-radix walk over the Cartesian product of categories.
    std::vector<std::size_t> digit(idx.size(), 0);
    while (true) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        key[i] = schema.variable(idx[i]).categories[digit[i]];
      }
      counts.try_emplace(label_for(schema, idx, key), 0);
      std::size_t pos = idx.size();
      while (pos > 0) {
        --pos;
        if (++digit[pos] < schema.variable(idx[pos]).categories.size()) break;
        digit[pos] = 0;
        if (pos == 0) {
          pos = idx.size() + 1;
          break;
        }
      }
      if (pos == idx.size() + 1) break;
    }
  }
  FrequencyVector out;
  out.n_source_records = records.size();
  const double n = static_cast<double>(records.size());
  for (const auto& [id, count] : counts) {
    out.cells.push_back({id, static_cast<double>(count) / n});
  }
  return out;
}

FrequencyVector pooled_contingency(std::span<const Record> records, const Schema& schema,
                                   std::size_t order,
                                   const std::vector<std::string>& variables) {
  std::vector<std::string> vars = variables;
  if (vars.empty()) {
    for (const auto& v : schema.variables()) vars.push_back(v.name);
  }
  if (order == 0 || order > vars.size()) {
    throw ConfigError("pooled_contingency: order must lie in [1, " +
                      std::to_string(vars.size()) + "]");
  }
  std::vector<std::vector<std::size_t>> combos;
  std::vector<std::size_t> current;
  combinations(vars.size(), order, current, 0, combos);

  FrequencyVector out;
  out.n_source_records = records.size();
  out.n_groups = combos.size();
  for (const auto& combo : combos) {
    std::vector<std::string> subset;
    for (std::size_t i : combo) subset.push_back(vars[i]);
    auto part = contingency(records, schema, subset, true);
    out.cells.insert(out.cells.end(), part.cells.begin(), part.cells.end());
  }
  std::sort(out.cells.begin(), out.cells.end(),
            [](const FrequencyCell& a, const FrequencyCell& b) { return a.id < b.id; });
  return out;
}

void align(FrequencyVector& a, FrequencyVector& b) {
  std::map<std::string, std::pair<double, double>> merged;
  for (const auto& c : a.cells) merged[c.id].first = c.frequency;
  for (const auto& c : b.cells) merged[c.id].second = c.frequency;
  a.cells.clear();
  b.cells.clear();
  for (const auto& [id, f] : merged) {
    a.cells.push_back({id, f.first});
    b.cells.push_back({id, f.second});
  }
}

double srmse(const FrequencyVector& original, const FrequencyVector& synthetic) {
  check_aligned(original, synthetic);
  if (original.cells.empty()) throw DataError("srmse: no cells");
  const double n = static_cast<double>(original.cells.size());
  double sq = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < original.cells.size(); ++i) {
    const double d = synthetic.cells[i].frequency - original.cells[i].frequency;
    sq += d * d;
    total += original.cells[i].frequency;
  }
  if (total <= 0.0) throw DataError("srmse: original frequencies sum to zero");
  return std::sqrt(sq / n) / (total / n);
}

double pearson(const FrequencyVector& original, const FrequencyVector& synthetic) {
  check_aligned(original, synthetic);
  if (original.cells.size() < 2) throw DataError("pearson: needs at least 2 cells");
  const auto x = original.values();
  const auto y = synthetic.values();
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw DataError("pearson: original frequencies are constant");
  if (syy == 0.0) throw DataError("pearson: synthetic frequencies are constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double r_squared(const FrequencyVector& original, const FrequencyVector& synthetic) {
  check_aligned(original, synthetic);
  if (original.cells.size() < 2) throw DataError("r_squared: needs at least 2 cells");
  const auto x = original.values();
  const auto y = synthetic.values();
  const double mx = mean_of(x);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += (x[i] - y[i]) * (x[i] - y[i]);
    ss_tot += (x[i] - mx) * (x[i] - mx);
  }
  if (ss_tot == 0.0) throw DataError("r_squared: original frequencies are constant");
  return 1.0 - ss_res / ss_tot;
}

BlandAltmanReport bland_altman(const FrequencyVector& original,
                               const FrequencyVector& synthetic) {
  check_aligned(original, synthetic);
  const std::size_t n = original.cells.size();
  if (n < 3) throw DataError("bland_altman: needs at least 3 cells");
  BlandAltmanReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = original.cells[i].frequency;
    const double t = synthetic.cells[i].frequency;
    report.points.push_back({original.cells[i].id, 0.5 * (s + t), s - t});
    sum += s - t;
  }
  report.mean_diff = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& p : report.points) {
    ss += (p.difference - report.mean_diff) * (p.difference - report.mean_diff);
  }
  report.sd = std::sqrt(ss / static_cast<double>(n - 1));
  report.lower = report.mean_diff - kAgreementZ * report.sd;
  report.upper = report.mean_diff + kAgreementZ * report.sd;
  for (const auto& p : report.points) {
    if (p.difference < report.lower || p.difference > report.upper) {
      report.outliers.push_back(p.id);
    }
  }
  return report;
}

std::string_view to_string(FringeFlag flag) {
  switch (flag) {
    case FringeFlag::kNone:
      return "none";
    case FringeFlag::kUnder:
      return "under";
    case FringeFlag::kOver:
      return "over";
  }
  return "none";
}

std::size_t FringeAuditReport::flagged(FringeFlag flag) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [flag](const FringeEntry& e) { return e.flag == flag; }));
}

FringeAuditReport fringe_audit(std::span<const Record> original,
                               std::span<const Record> synthetic, const Schema& schema,
                               const std::vector<std::string>& key_variables,
                               const std::string& target_variable, std::size_t top_k,
                               const FringeThresholds& thresholds) {
  if (original.empty()) throw DataError("fringe_audit: no original records");
  if (!(thresholds.under > 0.0 && thresholds.under <= 1.0 && thresholds.over >= 1.0)) {
    throw ConfigError("fringe_audit: thresholds must satisfy 0 < under <= 1 <= over");
  }
  std::vector<std::size_t> key_idx;
  for (const auto& v : key_variables) key_idx.push_back(schema.index_of(v));
  const std::size_t target_idx = schema.index_of(target_variable);
  const auto& categories = schema.variable(target_idx).categories;

  using Counts = std::map<CellKey, std::map<std::string, std::size_t>>;
  auto tally = [&](std::span<const Record> records) {
    Counts counts;
    for (const auto& r : records) {
      CellKey key;
      for (std::size_t i : key_idx) key.push_back(r.values.at(i));
      ++counts[key][r.values.at(target_idx)];
    }
    return counts;
  };
  const Counts orig = tally(original);
  const Counts synth = tally(synthetic);

  std::vector<std::pair<std::size_t, CellKey>> ranked;
  for (const auto& [key, values] : orig) {
    std::size_t total = 0;
    for (const auto& [v, c] : values) total += c;
    ranked.emplace_back(total, key);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);

  FringeAuditReport report;
  report.key_variables = key_variables;
  report.target_variable = target_variable;
  report.thresholds = thresholds;
  for (const auto& [total, key] : ranked) {
    report.key_cells.push_back(key);
    const auto& o = orig.at(key);
    auto s_it = synth.find(key);
    std::size_t s_total = 0;
    if (s_it != synth.end()) {
      for (const auto& [v, c] : s_it->second) s_total += c;
    }
    for (const auto& value : categories) {
      FringeEntry e;
      e.key = key;
      e.value = value;
      auto oc = o.find(value);
      e.original_count = oc == o.end() ? 0 : oc->second;
      if (s_it != synth.end()) {
        auto sc = s_it->second.find(value);
        e.synthetic_count = sc == s_it->second.end() ? 0 : sc->second;
      }
      e.original_share = static_cast<double>(e.original_count) / static_cast<double>(total);
      e.synthetic_share =
          s_total == 0 ? 0.0
                       : static_cast<double>(e.synthetic_count) / static_cast<double>(s_total);
      if (e.original_share > 0.0) {
        e.ratio = e.synthetic_share / e.original_share;
        if (e.ratio < thresholds.under) {
          e.flag = FringeFlag::kUnder;
        } else if (e.ratio > thresholds.over) {
          e.flag = FringeFlag::kOver;
        }
      } else if (e.synthetic_share > 0.0) {
        e.ratio = std::numeric_limits<double>::infinity();
        e.flag = FringeFlag::kOver;
      } else {
        e.ratio = std::numeric_limits<double>::quiet_NaN();
      }
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

MetricSet evaluate(std::span<const Record> original, std::span<const Record> synthetic,
                   const Schema& schema, std::size_t order,
                   const std::vector<std::string>& variables) {
  MetricSet m;
  m.order = order;
  m.original = pooled_contingency(original, schema, order, variables);
  m.synthetic = pooled_contingency(synthetic, schema, order, variables);
  m.srmse = srmse(m.original, m.synthetic);
  try {
    m.pearson = pearson(m.original, m.synthetic);
  } catch (const DataError&) {
  }
  try {
    m.r_squared = r_squared(m.original, m.synthetic);
  } catch (const DataError&) {
  }
  if (m.original.cells.size() >= 3) m.bland_altman = bland_altman(m.original, m.synthetic);
  return m;
}

ValidationReport validate_populations(std::span<const Record> original,
                                      std::span<const Record> synthetic,
                                      const Schema& schema,
                                      const std::vector<std::size_t>& orders,
                                      const std::vector<std::string>& variables) {
  ValidationReport report;
  report.n_original = original.size();
  report.n_synthetic = synthetic.size();
  for (std::size_t order : orders) {
    report.metrics.push_back(evaluate(original, synthetic, schema, order, variables));
  }
  return report;
}

}  // namespace popsynth
