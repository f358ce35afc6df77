#include "popsynth/toycensus.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "popsynth/error.h"
#include "popsynth/rng.h"

namespace popsynth {
namespace {

constexpr double kRowTolerance = 1e-9;

std::size_t index_of(const ToySpec& spec, const std::string& name) {
  for (std::size_t i = 0; i < spec.variables.size(); ++i) {
    if (spec.variables[i].name == name) return i;
  }
  throw ConfigError("toy spec: unknown variable '" + name + "'");
}

std::size_t expected_rows(const ToySpec& spec, const ToyVariable& v) {
  std::size_t rows = 1;
  for (const auto& p : v.parents) rows *= spec.variables[index_of(spec, p)].categories.size();
  return rows;
}

ToyVariable root(std::string name, std::vector<std::string> categories,
                 std::vector<double> probs) {
  return {std::move(name), std::move(categories), {}, {std::move(probs)}};
}

std::vector<std::string> codes(int n) {
  std::vector<std::string> out;
  for (int i = 1; i <= n; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

std::string_view to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::kConstant:
      return "constant";
    case WeightKind::kUniform:
      return "uniform";
    case WeightKind::kLognormal:
      return "lognormal";
  }
  return "lognormal";
}

WeightKind parse_weight_kind(std::string_view text) {
  if (text == "constant") return WeightKind::kConstant;
  if (text == "uniform") return WeightKind::kUniform;
  if (text == "lognormal") return WeightKind::kLognormal;
  throw ConfigError("unknown weight distribution '" + std::string(text) +
                    "' (expected constant, uniform or lognormal)");
}

void ToySpec::validate() const {
  if (n_records == 0) throw ConfigError("toy spec: n_records must be positive");
  if (variables.empty()) throw ConfigError("toy spec: no variables");
  std::set<std::string> names;
  for (const auto& v : variables) {
    if (v.name.empty()) throw ConfigError("toy spec: empty variable name");
    if (!names.insert(v.name).second) {
      throw ConfigError("toy spec: variable '" + v.name + "' declared twice");
    }
  }
  for (const auto& v : variables) {
    if (v.categories.empty()) throw ConfigError("toy spec: '" + v.name + "' has no categories");
    if (std::set<std::string>(v.categories.begin(), v.categories.end()).size() !=
        v.categories.size()) {
      throw ConfigError("toy spec: '" + v.name + "' repeats a category");
    }
    for (const auto& p : v.parents) {
      if (p == v.name) throw ConfigError("toy spec: '" + v.name + "' is its own parent");
      index_of(*this, p);
    }
    const std::size_t rows = expected_rows(*this, v);
    if (v.table.size() != rows) {
      throw ConfigError("toy spec: '" + v.name + "' needs " + std::to_string(rows) +
                        " table rows, has " + std::to_string(v.table.size()));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& row = v.table[r];
      if (row.size() != v.categories.size()) {
        throw ConfigError("toy spec: '" + v.name + "' row " + std::to_string(r) +
                          " has the wrong length");
      }
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw ConfigError("toy spec: '" + v.name + "' has a negative or non-finite entry");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance) {
        throw ConfigError("toy spec: '" + v.name + "' row " + std::to_string(r) +
                          " sums to " + format_double(sum));
      }
    }
  }
  topological_order(*this);
  if (!region_variable.empty()) index_of(*this, region_variable);
  const WeightSpec& w = weights;
  if (w.kind == WeightKind::kConstant && !(w.constant > 0.0 && std::isfinite(w.constant))) {
    throw ConfigError("toy spec: constant weight must be positive");
  }
  if (w.kind != WeightKind::kConstant &&
      !(w.min > 0.0 && w.min <= w.max && std::isfinite(w.max))) {
    throw ConfigError("toy spec: weight bounds must satisfy 0 < min <= max");
  }
  if (w.kind == WeightKind::kLognormal && !(w.sigma >= 0.0 && std::isfinite(w.mu))) {
    throw ConfigError("toy spec: lognormal sigma must be non-negative");
  }
}

std::vector<std::size_t> topological_order(const ToySpec& spec) {
  const std::size_t n = spec.variables.size();
  std::vector<std::size_t> pending(n, 0);
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : spec.variables[i].parents) {
      children[index_of(spec, p)].push_back(i);
      ++pending[i];
    }
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (pending[i] == 0) ready.insert(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (std::size_t c : children[i]) {
      if (--pending[c] == 0) ready.insert(c);
    }
  }
  if (order.size() != n) throw ConfigError("toy spec: parent structure has a cycle");
  return order;
}

ToySpec ToySpec::census(std::size_t n_records, std::uint64_t seed) {
  ToySpec spec;
  spec.n_records = n_records;
  spec.seed = seed;
  spec.region_variable = "region";
  spec.variables.push_back(root("age", codes(5), {0.18, 0.22, 0.24, 0.20, 0.16}));
  spec.variables.push_back(root("gender", codes(2), {0.49, 0.51}));
  spec.variables.push_back({"education",
                            codes(3),
                            {"age"},
                            {{0.50, 0.40, 0.10},
                             {0.20, 0.45, 0.35},
                             {0.25, 0.45, 0.30},
                             {0.35, 0.45, 0.20},
                             {0.55, 0.35, 0.10}}});
  spec.variables.push_back(root("region", {"R1", "R2", "R3", "R4"}, {0.35, 0.30, 0.20, 0.15}));
  spec.variables.push_back({"health",
                            codes(5),
                            {"age"},
                            {{0.30, 0.55, 0.10, 0.04, 0.01},
                             {0.25, 0.55, 0.14, 0.05, 0.01},
                             {0.15, 0.55, 0.20, 0.08, 0.02},
                             {0.08, 0.45, 0.30, 0.13, 0.04},
                             {0.04, 0.35, 0.35, 0.18, 0.08}}});
  spec.variables.push_back({"income",
                            codes(4),
                            {"education", "gender"},
                            {{0.40, 0.35, 0.18, 0.07},
                             {0.50, 0.30, 0.15, 0.05},
                             {0.20, 0.35, 0.30, 0.15},
                             {0.28, 0.37, 0.25, 0.10},
                             {0.08, 0.22, 0.35, 0.35},
                             {0.12, 0.28, 0.35, 0.25}}});
  return spec;
}

Schema toy_schema(const ToySpec& spec) {
  std::vector<VariableDef> defs;
  for (const auto& v : spec.variables) {
    VariableDef d;
    d.name = v.name;
    d.categories = v.categories;
    d.kind = v.categories.size() <= 2 ? VariableKind::kBinary : VariableKind::kCategorical;
    defs.push_back(std::move(d));
  }
  return Schema(std::move(defs));
}

namespace {

// Table row for a variable given the category index of every variable.
std::size_t row_of(const ToySpec& spec, const ToyVariable& v,
                   const std::vector<std::size_t>& chosen) {
  std::size_t row = 0;
  for (const auto& p : v.parents) {
    const std::size_t pi = index_of(spec, p);
    row = row * spec.variables[pi].categories.size() + chosen[pi];
  }
  return row;
}

std::size_t draw_category(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) last_positive = k;
    cum += probs[k];
    if (u < cum) return k;
  }
  return last_positive;  // u landed in the rounding gap below 1
}

}  // namespace

ToyDataset generate_toy(const ToySpec& spec) {
  spec.validate();
  ToyDataset out;
  out.schema = toy_schema(spec);
  const auto order = topological_order(spec);
  const std::size_t n_vars = spec.variables.size();

  Rng record_rng(Rng::derive_seed(spec.seed, 0));
  std::vector<std::size_t> chosen(n_vars, 0);
  out.data.records.reserve(spec.n_records);
  for (std::size_t r = 0; r < spec.n_records; ++r) {
    for (std::size_t i : order) {
      const ToyVariable& v = spec.variables[i];
      chosen[i] = draw_category(v.table[row_of(spec, v, chosen)], record_rng.uniform());
    }
    Record rec;
    rec.values.reserve(n_vars);
    for (std::size_t i = 0; i < n_vars; ++i) {
      rec.values.push_back(spec.variables[i].categories[chosen[i]]);
    }
    out.data.records.push_back(std::move(rec));
  }

  Rng weight_rng(Rng::derive_seed(spec.seed, 1));
  const WeightSpec& ws = spec.weights;
  out.data.weights.reserve(spec.n_records);
  for (std::size_t r = 0; r < spec.n_records; ++r) {
    double w = ws.constant;
    if (ws.kind == WeightKind::kUniform) {
      w = ws.min + (ws.max - ws.min) * weight_rng.uniform();
    } else if (ws.kind == WeightKind::kLognormal) {
      w = std::clamp(std::exp(ws.mu + ws.sigma * weight_rng.normal()), ws.min, ws.max);
    }
    out.data.weights.push_back(w);
  }

  // Exact joint: mixed-radix walk with the last variable varying fastest.
  std::vector<std::size_t> digit(n_vars, 0);
  while (true) {
    JointCell cell;
    cell.probability = 1.0;
    for (std::size_t i = 0; i < n_vars; ++i) {
      const ToyVariable& v = spec.variables[i];
      cell.values.push_back(v.categories[digit[i]]);
      cell.probability *= v.table[row_of(spec, v, digit)][digit[i]];
    }
    out.joint.push_back(std::move(cell));
    std::size_t pos = n_vars;
    bool done = true;
    while (pos > 0) {
      --pos;
      if (++digit[pos] < spec.variables[pos].categories.size()) {
        done = false;
        break;
      }
      digit[pos] = 0;
    }
    if (done) break;
  }
  return out;
}

CsvTable toy_csv(const ToyDataset& dataset, std::string_view weight_column) {
  CsvTable csv = records_to_csv(dataset.data.records, dataset.schema);
  csv.header.emplace_back(weight_column);
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    csv.rows[i].push_back(format_double(dataset.data.weights[i]));
  }
  return csv;
}

std::string joint_json(const ToyDataset& dataset) {
  nlohmann::ordered_json out;
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const auto& v : dataset.schema.variables()) names.push_back(v.name);
  out["variables"] = names;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : dataset.joint) {
    cells.push_back({{"values", c.values}, {"p", c.probability}});
  }
  out["cells"] = cells;
  return out.dump(1) + "\n";
}

FrequencyVector joint_marginal(const std::vector<JointCell>& joint, const Schema& schema,
                               const std::vector<std::string>& variables) {
  std::vector<std::size_t> idx;
  for (const auto& v : variables) idx.push_back(schema.index_of(v));
  // The joint covers the full product, so zero-probability cells appear too.
  std::map<std::string, double> mass;
  for (const auto& c : joint) {
    std::string id;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (k) id += '|';
      id += schema.variable(idx[k]).name + "=" + c.values.at(idx[k]);
    }
    mass[id] += c.probability;
  }
  FrequencyVector out;
  for (const auto& [id, p] : mass) out.cells.push_back({id, p});
  return out;
}

}  // namespace popsynth
