#include <gtest/gtest.h>

#include "popsynth/error.h"
#include "popsynth/preprocess.h"

namespace popsynth {
namespace {

Column col(std::initializer_list<const char*> cells) {
  Column c;
  for (const char* s : cells) c.push_back(s ? Cell(s) : std::nullopt);
  return c;
}

RawTable table(std::vector<std::string> names, std::vector<Column> cols) {
  RawTable t;
  t.names = std::move(names);
  t.columns = std::move(cols);
  return t;
}

TEST(DropSparse, ThresholdRules) {
  // a: 60% missing, b: 0%, c: 7/10 missing
  RawTable t = table({"a", "b", "c"},
                     {col({nullptr, nullptr, nullptr, "1", "1", nullptr, "1", nullptr, nullptr, "1"}),
                      col({"1", "1", "1", "1", "1", "1", "1", "1", "1", "1"}),
                      col({nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, "1", "1", "1"})});
  const DropResult at50 = drop_sparse_columns(t, 0.5);
  EXPECT_EQ(at50.table.names, (std::vector<std::string>{"b"}));
  const DropResult at67 = drop_sparse_columns(t, 0.67);
  EXPECT_EQ(at67.table.names, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(at67.dropped.size(), 1u);
  EXPECT_EQ(at67.dropped[0].name, "c");
  EXPECT_DOUBLE_EQ(at67.dropped[0].missing_fraction, 0.7);
  EXPECT_THROW(drop_sparse_columns(t, 1.5), ConfigError);
}

TEST(DropSparse, Idempotent) {
  RawTable t = table({"a", "b"}, {col({nullptr, "1", "2"}), col({nullptr, nullptr, "x"})});
  const auto once = drop_sparse_columns(t, 0.5);
  const auto twice = drop_sparse_columns(once.table, 0.5);
  EXPECT_EQ(once.table, twice.table);
  EXPECT_TRUE(twice.dropped.empty());
}

TEST(DropSparse, AllDroppedYieldsEmptyTable) {
  const auto r = drop_sparse_columns(table({"a"}, {col({nullptr, nullptr})}), 0.5);
  EXPECT_EQ(r.table.n_columns(), 0u);
  EXPECT_EQ(r.dropped.size(), 1u);
}

TEST(Bin, BoundaryConvention) {
  const BinSpec spec = BinSpec::with_index_labels("age", {18, 65});
  EXPECT_EQ(bin_numeric(col({"17", "18", "65", nullptr}), spec), col({"0", "1", "2", nullptr}));
}

TEST(Bin, AgesByHand) {
  const BinSpec spec = BinSpec::with_index_labels("age", {30, 45, 65});
  EXPECT_EQ(bin_numeric(col({"16", "30", "64", "65", "80"}), spec),
            col({"0", "1", "2", "3", "3"}));
}

TEST(Bin, NaNIsMissingAndTextIsAnError) {
  const BinSpec spec = BinSpec::with_index_labels("x", {1});
  EXPECT_EQ(bin_numeric(col({"nan", nullptr}), spec), col({nullptr, nullptr}));
  EXPECT_THROW(bin_numeric(col({"abc"}), spec), DataError);
}

TEST(Bin, SpecValidation) {
  EXPECT_THROW(BinSpec::with_index_labels("x", {2, 1}).validate(), ConfigError);
  EXPECT_THROW(BinSpec::with_index_labels("x", {1, 1}).validate(), ConfigError);
  BinSpec labels{"x", {1}, {"lo", "lo"}};
  EXPECT_THROW(labels.validate(), ConfigError);
  BinSpec short_labels{"x", {1, 2}, {"a", "b"}};
  EXPECT_THROW(short_labels.validate(), ConfigError);
}

TEST(Bin, ParsesSpecFile) {
  const auto specs = parse_bin_specs(
      R"([{"variable":"age","edges":[18,65]},{"variable":"inc","edges":[1000],"labels":["low","high"]}])");
  ASSERT_EQ(specs.size(), 2u);
  EXPECT_EQ(specs[0].labels, (std::vector<std::string>{"0", "1", "2"}));
  EXPECT_EQ(specs[1].labels[1], "high");
  EXPECT_THROW(parse_bin_specs("[{\"edges\":[1]}]"), ConfigError);
}

TEST(Bin, PreservesRowCountAndOrder) {
  const BinSpec spec = BinSpec::with_index_labels("x", {0.5});
  const Column in = col({"1", "0", nullptr, "0.7", "0.2"});
  const Column out = bin_numeric(in, spec);
  ASSERT_EQ(out.size(), in.size());
  EXPECT_EQ(out, col({"1", "0", nullptr, "1", "0"}));
}

TEST(ImputeMode, FillsWithMode) {
  EXPECT_EQ(impute_mode(table({"v"}, {col({"a", "a", "b", nullptr})})).columns[0],
            col({"a", "a", "b", "a"}));
}

TEST(ImputeMode, TieGoesToSmallest) {
  EXPECT_EQ(impute_mode(table({"v"}, {col({"b", "a", nullptr})})).columns[0],
            col({"b", "a", "a"}));
}

TEST(ImputeMode, CompleteTableUnchangedAndAllMissingThrows) {
  const RawTable t = table({"v"}, {col({"x", "y"})});
  EXPECT_EQ(impute_mode(t), t);
  EXPECT_THROW(impute_mode(table({"v"}, {col({nullptr, nullptr})})), DataError);
}

TEST(ImputeKnn, ZeroDistanceNeighbour) {
  const RawTable t = table({"a", "b"}, {col({"x", "y", "x"}), col({"1", "2", nullptr})});
  EXPECT_EQ(*impute_knn(t, 1).columns[1][2], "1");
}

TEST(ImputeKnn, CompleteTableIsIdentity) {
  const RawTable t = table({"a"}, {col({"x", "y"})});
  EXPECT_EQ(impute_knn(t, 1), t);
}

TEST(ImputeKnn, FiveRowBruteForce) {
  // Target row 4 = (p, q, ?, s). Hamming distance over observed columns
  // a, b, d to complete rows:
  //   row0 (p,q,1,s) 0   row1 (p,x,2,s) 1   row2 (z,x,2,s) 2   row3 (p,q,2,t) 1
  // k=3 nearest by (distance, index): row0, row1, row3 -> votes 1:1, 2:2 -> "2".
  const RawTable t = table({"a", "b", "c", "d"}, {col({"p", "p", "z", "p", "p"}),
                                                  col({"q", "x", "x", "q", "q"}),
                                                  col({"1", "2", "2", "2", nullptr}),
                                                  col({"s", "s", "s", "t", "s"})});
  EXPECT_EQ(*impute_knn(t, 3).columns[2][4], "2");
  // k=1 takes the zero-distance row0.
  EXPECT_EQ(*impute_knn(t, 1).columns[2][4], "1");
}

TEST(ImputeKnn, Errors) {
  EXPECT_THROW(impute_knn(table({"a", "b"}, {col({"x", nullptr}), col({nullptr, "y"})}), 1),
               DataError);
  EXPECT_THROW(impute_knn(table({"a"}, {col({"x", nullptr})}), 2), DataError);
  EXPECT_THROW(impute_knn(table({"a"}, {col({"x"})}), 0), ConfigError);
}

TEST(ImputeProperty, NoMissingAfterImpute) {
  const RawTable t = table({"a", "b"}, {col({"x", nullptr, "y", "x", "y"}),
                                        col({"1", "2", nullptr, "1", "2"})});
  EXPECT_EQ(impute_mode(t).total_missing(), 0u);
  EXPECT_EQ(impute_knn(t, 2).total_missing(), 0u);
}

TEST(DroppedReport, Csv) {
  const CsvTable csv = dropped_columns_csv({{"c", 0.7}});
  EXPECT_EQ(csv.header, (std::vector<std::string>{"name", "missing_fraction"}));
  EXPECT_EQ(csv.rows[0][1], "0.7");
}

}  // namespace
}  // namespace popsynth
