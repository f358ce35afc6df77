#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "popsynth/csv.h"
#include "popsynth/error.h"
#include "popsynth/rng.h"
#include "popsynth/table.h"
#include "support.h"

namespace popsynth {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_TRUE(a == b);
}

TEST(Rng, UniformRangeAndMean) {
  Rng rng(1);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
}

TEST(Rng, NormalMoments) {
  Rng rng(2);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, UniformIndexCoversRange) {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.uniform_index(7);
    ASSERT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, StateRoundTrip) {
  Rng a(5);
  for (int i = 0; i < 10; ++i) a.next_u64();
  Rng b(0);
  b.set_state(a.state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 100; ++s) seeds.insert(Rng::derive_seed(7, s));
  EXPECT_EQ(seeds.size(), 100u);
  EXPECT_EQ(Rng::derive_seed(7, 3), Rng::derive_seed(7, 3));
}

TEST(Csv, QuotedFieldsRoundTrip) {
  CsvTable t{{"a", "b"}, {{"x,y", "say \"hi\""}, {"line\nbreak", ""}}};
  const CsvTable back = parse_csv(format_csv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Csv, BomAndCrlf) {
  const CsvTable t = parse_csv("\xEF\xBB\xBF" "a,b\r\n1,2\r\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][1], "2");
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv(""), DataError);
  EXPECT_THROW(parse_csv("a,b\n1\n"), DataError);
  EXPECT_THROW(parse_csv("a,a\n1,2\n"), DataError);
  EXPECT_THROW(parse_csv("a\n\"open\n"), DataError);
  EXPECT_THROW(read_csv("/nonexistent/popsynth.csv"), DataError);
}

TEST(Csv, AtomicWriteCreatesDirectoriesAndLeavesNoTemp) {
  const auto dir = testing::scratch_dir("csv");
  const auto path = dir / "nested" / "t.csv";
  write_csv(path, CsvTable{{"a"}, {{"1"}}});
  EXPECT_EQ(read_csv(path).rows[0][0], "1");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "nested")) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
}

TEST(Csv, DoubleFormatting) {
  for (double v : {0.1, 1e-5, 123456.789, -2.5, 1.0 / 3.0}) {
    EXPECT_EQ(*parse_double(format_double(v)), v);
  }
  EXPECT_FALSE(parse_double("1.5x"));
  EXPECT_FALSE(parse_double(""));
  EXPECT_FALSE(parse_double("abc"));
}

TEST(Table, MissingCells) {
  const RawTable t = to_raw_table(CsvTable{{"a", "b"}, {{"1", ""}, {"", ""}}});
  EXPECT_EQ(t.n_rows(), 2u);
  EXPECT_EQ(t.missing_count(0), 1u);
  EXPECT_EQ(t.missing_count(1), 2u);
  EXPECT_EQ(t.total_missing(), 3u);
  EXPECT_EQ(to_csv_table(t).rows[1][0], "");
  EXPECT_THROW(t.column("zz"), DataError);
}

TEST(Table, RaggedIsRejected) {
  RawTable t;
  t.names = {"a", "b"};
  t.columns = {{Cell("1")}, {}};
  EXPECT_THROW(t.check_rectangular(), DataError);
}

}  // namespace
}  // namespace popsynth
