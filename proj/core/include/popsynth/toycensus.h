#ifndef POPSYNTH_TOYCENSUS_H_
#define POPSYNTH_TOYCENSUS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "popsynth/balance.h"
#include "popsynth/csv.h"
#include "popsynth/schema.h"
#include "popsynth/validate.h"

namespace popsynth {

// A categorical variable drawn from a conditional probability table.
//
// table has one row per combination of parent categories, enumerated with
// the first parent varying slowest. Each row holds one probability per
// category. A root variable has a single row.
struct ToyVariable {
  std::string name;
  std::vector<std::string> categories;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> table;
};

enum class WeightKind { kConstant, kUniform, kLognormal };

std::string_view to_string(WeightKind kind);
WeightKind parse_weight_kind(std::string_view text);

struct WeightSpec {
  WeightKind kind = WeightKind::kLognormal;
  double constant = 1.0;
  // lognormal: exp(mu + sigma * z), clipped to [min, max].
  double mu = 3.0;
  double sigma = 1.0;
  double min = 1.0;
  double max = 260.0;
};

struct ToySpec {
  std::size_t n_records = 5000;
  std::vector<ToyVariable> variables;
  WeightSpec weights;
  std::string region_variable;
  std::uint64_t seed = 0;

  // Throws ConfigError for unknown or repeated names, cyclic parents,
  // wrongly shaped tables, or rows that do not sum to 1 within 1e-9.
  void validate() const;

  // age (5), gender (2), education (3, given age), region (4), health (5,
  // given age, about half the mass on "2"), income (4, given education
  // and gender).
  static ToySpec census(std::size_t n_records = 5000, std::uint64_t seed = 0);
};

// Variable indices ordered so every parent precedes its children; among
// ready variables the lowest index goes first. Throws ConfigError on a cycle.
std::vector<std::size_t> topological_order(const ToySpec& spec);

// Variables in declaration order; two categories make a binary variable.
Schema toy_schema(const ToySpec& spec);

struct JointCell {
  std::vector<std::string> values;  // declaration order
  double probability = 0.0;
};

struct ToyDataset {
  Schema schema;
  WeightedDataset data;
  // Every combination of categories with its exact probability.
  std::vector<JointCell> joint;
};

// Ancestral sampling, one record at a time, followed by one weight per
// record from an independent stream. Same spec, same output.
ToyDataset generate_toy(const ToySpec& spec);

// Schema columns plus a `weight` column.
CsvTable toy_csv(const ToyDataset& dataset, std::string_view weight_column = "weight");

// {"variables": [...], "cells": [{"values": [...], "p": ...}, ...]}
std::string joint_json(const ToyDataset& dataset);

// Exact marginal over the given variables, with the same cell ids and
// ordering as contingency(..., include_zero_cells = true).
FrequencyVector joint_marginal(const std::vector<JointCell>& joint, const Schema& schema,
                               const std::vector<std::string>& variables);

}  // namespace popsynth

#endif  // POPSYNTH_TOYCENSUS_H_
