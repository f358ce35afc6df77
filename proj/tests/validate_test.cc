#include <algorithm>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>
#include "json.hpp"

#include "popsynth/error.h"
#include "popsynth/report.h"
#include "popsynth/toycensus.h"
#include "popsynth/validate.h"
#include "support.h"

namespace popsynth {
namespace {

FrequencyVector fv(std::vector<std::pair<std::string, double>> cells) {
  FrequencyVector v;
  for (auto& [id, f] : cells) v.cells.push_back({id, f});
  return v;
}

FrequencyVector fv_values(const std::vector<double>& xs) {
  FrequencyVector v;
  for (std::size_t i = 0; i < xs.size(); ++i) v.cells.push_back({"c" + std::to_string(i), xs[i]});
  return v;
}

// Textbook sums formula, written independently of the library.
double textbook_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

Schema two_var_schema() {
  return Schema({{"b", VariableKind::kBinary, {"0", "1"}},
                 {"c", VariableKind::kCategorical, {"x", "y", "z"}}});
}

TEST(Contingency, BinaryCounts) {
  const Schema s({{"b", VariableKind::kBinary, {"0", "1"}}});
  const std::vector<Record> r{{{"0"}}, {{"0"}}, {{"1"}}};
  const auto v = contingency(r, s, {"b"}, false);
  ASSERT_EQ(v.cells.size(), 2u);
  EXPECT_EQ(v.cells[0].id, "b=0");
  EXPECT_DOUBLE_EQ(v.cells[0].frequency, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(v.cells[1].frequency, 1.0 / 3.0);
}

TEST(Contingency, ZeroCellsFillProduct) {
  const std::vector<Record> r{{{"0", "x"}}};
  EXPECT_EQ(contingency(r, two_var_schema(), {"b", "c"}, true).cells.size(), 6u);
  EXPECT_EQ(contingency(r, two_var_schema(), {"b", "c"}, false).cells.size(), 1u);
}

TEST(Contingency, Errors) {
  EXPECT_THROW(contingency(std::vector<Record>{}, two_var_schema(), {"b"}, true), DataError);
  const std::vector<Record> r{{{"0", "x"}}};
  EXPECT_THROW(contingency(r, two_var_schema(), {"zz"}, true), DataError);
  EXPECT_THROW(pooled_contingency(r, two_var_schema(), 3), ConfigError);
  EXPECT_THROW(pooled_contingency(r, two_var_schema(), 0), ConfigError);
}

TEST(Contingency, MatchesBruteForce) {
  const ToyDataset toy = generate_toy(ToySpec::census(500, 4));
  const auto& records = toy.data.records;
  const std::vector<std::size_t> idx{0, 2, 4};
  const auto expected = testing::brute_force_frequencies(records, toy.schema, idx);
  const auto got = contingency(records, toy.schema, {"age", "education", "health"}, true);
  ASSERT_EQ(got.cells.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(got.cells[i].id, expected[i].first);
    EXPECT_DOUBLE_EQ(got.cells[i].frequency, expected[i].second);
  }
}

TEST(Contingency, PooledSumsToGroups) {
  const ToyDataset toy = generate_toy(ToySpec::census(300, 1));
  const auto v = pooled_contingency(toy.data.records, toy.schema, 2);
  EXPECT_EQ(v.n_groups, 15u);  // C(6, 2)
  double total = 0;
  for (double f : v.values()) total += f;
  EXPECT_NEAR(total, 15.0, 1e-9);
  EXPECT_TRUE(std::is_sorted(v.cells.begin(), v.cells.end(),
                             [](const auto& a, const auto& b) { return a.id < b.id; }));
}

TEST(Align, FillsMissingCellsWithZero) {
  FrequencyVector a = fv({{"x", 0.5}, {"y", 0.5}});
  FrequencyVector b = fv({{"y", 0.25}, {"z", 0.75}});
  align(a, b);
  ASSERT_EQ(a.cells.size(), 3u);
  EXPECT_EQ(a.cells[2].id, "z");
  EXPECT_EQ(a.cells[2].frequency, 0.0);
  EXPECT_EQ(b.cells[0].frequency, 0.0);
}

TEST(Srmse, HandExample) {
  EXPECT_NEAR(srmse(fv({{"a", 0.5}, {"b", 0.5}}), fv({{"a", 0.6}, {"b", 0.4}})), 0.2, 1e-12);
}

TEST(Srmse, IdenticalIsZeroAndMisalignedThrows) {
  const auto x = fv({{"a", 0.2}, {"b", 0.8}});
  EXPECT_EQ(srmse(x, x), 0.0);
  EXPECT_THROW(srmse(x, fv({{"a", 0.2}, {"c", 0.8}})), DataError);
  EXPECT_THROW(srmse(x, fv({{"a", 1.0}})), DataError);
}

TEST(Pearson, FiveCellHandComputation) {
  const std::vector<double> o{0.1, 0.2, 0.3, 0.15, 0.25};
  const std::vector<double> s{0.12, 0.18, 0.28, 0.17, 0.25};
  const double r = pearson(fv_values(o), fv_values(s));
  EXPECT_NEAR(r, textbook_pearson(o, s), 1e-12);
  EXPECT_NEAR(r, 0.9817613873476315, 1e-12);
  // SS_res = 0.0016, SS_tot = 0.025
  EXPECT_NEAR(r_squared(fv_values(o), fv_values(s)), 1.0 - 0.0016 / 0.025, 1e-12);
}

TEST(Pearson, AffineSeparatesMetrics) {
  const std::vector<double> o{0.1, 0.2, 0.3, 0.4};
  std::vector<double> s;
  for (double x : o) s.push_back(2.0 * x + 0.1);
  EXPECT_NEAR(pearson(fv_values(o), fv_values(s)), 1.0, 1e-12);
  EXPECT_LT(r_squared(fv_values(o), fv_values(s)), 1.0);
}

TEST(Pearson, Errors) {
  EXPECT_THROW(pearson(fv_values({0.5}), fv_values({0.5})), DataError);
  EXPECT_THROW(pearson(fv_values({0.5, 0.5}), fv_values({0.4, 0.6})), DataError);
  EXPECT_THROW(r_squared(fv_values({0.5, 0.5}), fv_values({0.4, 0.6})), DataError);
}

TEST(BlandAltman, HandExample) {
  // differences s - s_hat = (0.01, -0.01, 0.02, -0.02)
  const auto o = fv_values({0.25, 0.25, 0.25, 0.25});
  const auto s = fv_values({0.24, 0.26, 0.23, 0.27});
  const auto ba = bland_altman(o, s);
  const double sd = std::sqrt((1e-4 + 1e-4 + 4e-4 + 4e-4) / 3.0);
  EXPECT_NEAR(ba.mean_diff, 0.0, 1e-15);
  EXPECT_NEAR(ba.sd, sd, 1e-12);
  EXPECT_NEAR(ba.sd, 0.018257418583505537, 1e-12);
  EXPECT_NEAR(ba.upper, 1.96 * sd, 1e-12);
  EXPECT_NEAR(ba.lower, -1.96 * sd, 1e-12);
  EXPECT_TRUE(ba.outliers.empty());
  EXPECT_NEAR(ba.points[0].mean, 0.245, 1e-15);
  EXPECT_NEAR(ba.points[0].difference, 0.01, 1e-15);
}

TEST(BlandAltman, IdenticalCollapses) {
  const auto x = fv_values({0.1, 0.2, 0.7});
  const auto ba = bland_altman(x, x);
  EXPECT_EQ(ba.mean_diff, 0.0);
  EXPECT_EQ(ba.lower, 0.0);
  EXPECT_EQ(ba.upper, 0.0);
  EXPECT_TRUE(ba.outliers.empty());
}

TEST(BlandAltman, OffsetShiftsMeanWithoutNewOutliers) {
  const auto o = fv_values({0.1, 0.2, 0.3, 0.15, 0.25, 0.05, 0.4});
  const auto s = fv_values({0.12, 0.18, 0.28, 0.17, 0.25, 0.02, 0.5});
  FrequencyVector shifted = s;
  for (auto& c : shifted.cells) c.frequency += 0.03;
  const auto a = bland_altman(o, s);
  const auto b = bland_altman(o, shifted);
  EXPECT_NEAR(b.mean_diff, a.mean_diff - 0.03, 1e-12);
  EXPECT_NEAR(b.sd, a.sd, 1e-12);
  EXPECT_EQ(a.outliers, b.outliers);
}

TEST(BlandAltman, FlagsOutlierAndNeedsThreeCells) {
  std::vector<double> o(20, 0.05), s(20, 0.05);
  for (std::size_t i = 0; i < 20; ++i) s[i] += (i % 2 ? 0.001 : -0.001);
  s[7] = 0.2;
  const auto ba = bland_altman(fv_values(o), fv_values(s));
  ASSERT_EQ(ba.outliers.size(), 1u);
  EXPECT_EQ(ba.outliers[0], "c7");
  EXPECT_THROW(bland_altman(fv_values({0.5, 0.5}), fv_values({0.5, 0.5})), DataError);
}

// Outliers are exactly the points outside the closed limit interval, and
// all metrics ignore a consistent permutation of the cells.
TEST(MetricProperty, OutliersAndPermutation) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(20);
    std::vector<double> o(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = rng.uniform();
      s[i] = o[i] + 0.1 * rng.normal();
    }
    const auto ov = fv_values(o), sv = fv_values(s);
    const auto ba = bland_altman(ov, sv);
    std::size_t outside = 0;
    for (const auto& p : ba.points) outside += (p.difference < ba.lower || p.difference > ba.upper);
    EXPECT_EQ(outside, ba.outliers.size());

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    FrequencyVector op, sp;
    for (std::size_t i : perm) {
      op.cells.push_back(ov.cells[i]);
      sp.cells.push_back(sv.cells[i]);
    }
    EXPECT_NEAR(srmse(op, sp), srmse(ov, sv), 1e-12);
    EXPECT_NEAR(pearson(op, sp), pearson(ov, sv), 1e-12);
    EXPECT_NEAR(r_squared(op, sp), r_squared(ov, sv), 1e-12);
    EXPECT_NEAR(bland_altman(op, sp).sd, ba.sd, 1e-12);
    EXPECT_EQ(srmse(ov, ov), 0.0);
    EXPECT_NEAR(pearson(ov, ov), 1.0, 1e-12);
    EXPECT_EQ(r_squared(ov, ov), 1.0);
  }
}

Schema fringe_schema() {
  return Schema({{"sex", VariableKind::kBinary, {"1", "2"}},
                 {"health", VariableKind::kCategorical, {"1", "2", "3"}}});
}

std::vector<Record> cell_records(const std::string& sex, int h1, int h2, int h3) {
  std::vector<Record> out;
  for (int i = 0; i < h1; ++i) out.push_back({{sex, "1"}});
  for (int i = 0; i < h2; ++i) out.push_back({{sex, "2"}});
  for (int i = 0; i < h3; ++i) out.push_back({{sex, "3"}});
  return out;
}

TEST(Fringe, InflatedModalShare) {
  // Top key cell sex=2 (10 records): health 2 share 0.5 -> 0.7.
  auto orig = cell_records("2", 3, 5, 2);
  auto more = cell_records("1", 2, 2, 2);
  orig.insert(orig.end(), more.begin(), more.end());
  auto synth = cell_records("2", 1, 7, 2);
  synth.insert(synth.end(), more.begin(), more.end());
  const auto rep = fringe_audit(orig, synth, fringe_schema(), {"sex"}, "health", 1);
  ASSERT_EQ(rep.key_cells.size(), 1u);
  EXPECT_EQ(rep.key_cells[0], (CellKey{"2"}));
  ASSERT_EQ(rep.entries.size(), 3u);
  EXPECT_NEAR(rep.entries[1].original_share, 0.5, 1e-15);
  EXPECT_NEAR(rep.entries[1].synthetic_share, 0.7, 1e-15);
  EXPECT_NEAR(rep.entries[1].ratio, 1.4, 1e-12);
  EXPECT_EQ(rep.entries[1].flag, FringeFlag::kOver);
  EXPECT_NEAR(rep.entries[0].ratio, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(rep.entries[0].flag, FringeFlag::kUnder);
  EXPECT_EQ(rep.entries[2].flag, FringeFlag::kNone);
  EXPECT_EQ(rep.flagged(FringeFlag::kOver), 1u);
  EXPECT_EQ(rep.flagged(FringeFlag::kUnder), 1u);
}

TEST(Fringe, IdenticalInputsGiveUnitRatios) {
  auto orig = cell_records("2", 3, 5, 0);
  auto more = cell_records("1", 2, 2, 2);
  orig.insert(orig.end(), more.begin(), more.end());
  const auto rep = fringe_audit(orig, orig, fringe_schema(), {"sex"}, "health", 2);
  for (const auto& e : rep.entries) {
    if (e.original_count > 0) {
      EXPECT_EQ(e.ratio, 1.0);
      EXPECT_EQ(e.flag, FringeFlag::kNone);
    } else {
      EXPECT_TRUE(std::isnan(e.ratio));
    }
  }
}

TEST(Fringe, DroppedValueAndMissingCell) {
  const auto orig = cell_records("2", 3, 5, 2);
  const auto synth = cell_records("2", 0, 8, 2);
  const auto rep = fringe_audit(orig, synth, fringe_schema(), {"sex"}, "health", 1);
  EXPECT_EQ(rep.entries[0].ratio, 0.0);
  EXPECT_EQ(rep.entries[0].flag, FringeFlag::kUnder);
  const auto absent = fringe_audit(orig, cell_records("1", 1, 1, 1), fringe_schema(), {"sex"},
                                   "health", 1);
  for (const auto& e : absent.entries) {
    EXPECT_EQ(e.synthetic_share, 0.0);
    if (e.original_count > 0) EXPECT_EQ(e.flag, FringeFlag::kUnder);
  }
}

TEST(Fringe, NewValueIsInfiniteOver) {
  const auto orig = cell_records("2", 3, 5, 0);
  const auto synth = cell_records("2", 3, 4, 1);
  const auto rep = fringe_audit(orig, synth, fringe_schema(), {"sex"}, "health", 1);
  EXPECT_TRUE(std::isinf(rep.entries[2].ratio));
  EXPECT_EQ(rep.entries[2].flag, FringeFlag::kOver);
}

TEST(Fringe, RankingTiesAndErrors) {
  auto orig = cell_records("2", 1, 1, 1);
  auto more = cell_records("1", 1, 1, 1);
  orig.insert(orig.end(), more.begin(), more.end());
  const auto rep = fringe_audit(orig, orig, fringe_schema(), {"sex"}, "health", 5);
  ASSERT_EQ(rep.key_cells.size(), 2u);
  EXPECT_EQ(rep.key_cells[0], (CellKey{"1"}));
  EXPECT_THROW(fringe_audit(orig, orig, fringe_schema(), {"sex"}, "health", 1, {1.5, 1.25}),
               ConfigError);
  EXPECT_THROW(fringe_audit(orig, orig, fringe_schema(), {"zz"}, "health", 1), DataError);
}

TEST(Evaluate, SelfComparison) {
  const ToyDataset toy = generate_toy(ToySpec::census(400, 2));
  const auto rep = validate_populations(toy.data.records, toy.data.records, toy.schema, {1, 2});
  ASSERT_EQ(rep.metrics.size(), 2u);
  for (const auto& m : rep.metrics) {
    EXPECT_EQ(m.srmse, 0.0);
    EXPECT_NEAR(*m.pearson, 1.0, 1e-12);
    EXPECT_EQ(*m.r_squared, 1.0);
    EXPECT_EQ(m.bland_altman->mean_diff, 0.0);
    EXPECT_TRUE(m.bland_altman->outliers.empty());
  }
}

TEST(Evaluate, ConstantOriginalLeavesPearsonUndefined) {
  const Schema s({{"b", VariableKind::kBinary, {"0", "1"}}});
  const std::vector<Record> o{{{"0"}}, {{"1"}}};
  const std::vector<Record> y{{{"0"}}, {{"0"}}, {{"1"}}};
  const auto m = evaluate(o, y, s, 1);
  EXPECT_FALSE(m.pearson.has_value());
  EXPECT_FALSE(m.r_squared.has_value());
  EXPECT_GT(m.srmse, 0.0);
}

TEST(Report, JsonAndCsvShapes) {
  const ToyDataset a = generate_toy(ToySpec::census(300, 1));
  const ToyDataset b = generate_toy(ToySpec::census(300, 2));
  const auto rep = validate_populations(a.data.records, b.data.records, a.schema, {1});
  const auto j = nlohmann::json::parse(validation_report_json(rep));
  EXPECT_EQ(j["n_original"], 300);
  EXPECT_EQ(j["metrics"][0]["order"], 1);
  EXPECT_TRUE(j["metrics"][0].contains("bland_altman"));
  const CsvTable cells = cells_csv(rep.metrics[0]);
  EXPECT_EQ(cells.rows.size(), rep.metrics[0].original.cells.size());
  EXPECT_EQ(cells.header[0], "cell");
  const std::string svg = scatter_svg(rep.metrics[0]);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(bland_altman_svg(rep.metrics[0]).find("stroke-dasharray"), std::string::npos);
}

TEST(Report, FringeNonFiniteRatios) {
  const auto orig = cell_records("2", 3, 5, 0);
  const auto synth = cell_records("2", 3, 4, 1);
  const auto rep = fringe_audit(orig, synth, fringe_schema(), {"sex"}, "health", 1);
  const auto j = nlohmann::json::parse(fringe_report_json(rep));
  EXPECT_TRUE(j["entries"][2]["ratio"].is_null());
  const CsvTable csv = fringe_csv(rep);
  EXPECT_EQ(csv.rows[2][6], "inf");
  EXPECT_EQ(csv.rows[2][7], "over");
}

}  // namespace
}  // namespace popsynth
