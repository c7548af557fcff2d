#include "jcl/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace jcl;

namespace {

ExperimentReport sample_report() {
  ExperimentReport r;
  r.name = "sample";
  r.anchor = "anchor text";
  r.inputs_digest = digest("sample inputs");
  r.add("small", 0.1, Relation::LessEqual, 0.5);
  r.add("large", 3.0, Relation::GreaterEqual, 1.0 / 3.0);
  r.value("third", 1.0 / 3.0);
  r.value("tiny", 1e-300);
  r.value("inf", std::numeric_limits<double>::infinity());
  r.value("nan", std::numeric_limits<double>::quiet_NaN());
  r.series.push_back({"curve", {0.1, 0.2, 0.3}, {M_PI, std::exp(1.0), -0.0}});
  r.notes.push_back("a note with \"quotes\", commas, and\nnewlines");
  r.set_grid(GridMeta{"half-disc", 0.5, 1.0 / 64, 4});
  return r;
}

}  // namespace

TEST(Criterion, MarginSignAndPass) {
  auto le = make_criterion("a", 1.0, Relation::LessEqual, 2.0);
  EXPECT_EQ(le.margin, 1.0);
  EXPECT_TRUE(le.pass);
  auto ge = make_criterion("b", 1.0, Relation::GreaterEqual, 2.0);
  EXPECT_EQ(ge.margin, -1.0);
  EXPECT_FALSE(ge.pass);
  auto edge = make_criterion("c", 2.0, Relation::LessEqual, 2.0);
  EXPECT_TRUE(edge.pass);
  EXPECT_FALSE(make_criterion("d", NAN, Relation::LessEqual, 1.0).pass);
  EXPECT_FALSE(make_criterion("e", NAN, Relation::GreaterEqual, 1.0).pass);
}

TEST(Report, PassIsConjunctionAndWorstCriterionSummarises) {
  ExperimentReport r;
  r.add("ok", 0.0, Relation::LessEqual, 1.0);
  r.add("tight", 0.9, Relation::LessEqual, 1.0);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.margin, 0.1, 1e-15);
  r.add("bad", 2.0, Relation::LessEqual, 1.0);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.margin, -1.0);
  r.add("fine", 0.0, Relation::LessEqual, 1.0);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.margin, -1.0);
  // pass <=> margin >= 0
  EXPECT_EQ(r.pass, r.margin >= 0);
}

TEST(Report, JsonRoundTripIsExact) {
  ExperimentReport r = sample_report();
  std::string text = to_json(r);
  ExperimentReport back = from_json(text);
  EXPECT_EQ(back.name, r.name);
  EXPECT_EQ(back.anchor, r.anchor);
  EXPECT_EQ(back.inputs_digest, r.inputs_digest);
  EXPECT_EQ(back.pass, r.pass);
  EXPECT_EQ(back.margin, r.margin);
  ASSERT_EQ(back.criteria.size(), r.criteria.size());
  for (size_t i = 0; i < r.criteria.size(); ++i) {
    EXPECT_EQ(back.criteria[i].name, r.criteria[i].name);
    EXPECT_EQ(back.criteria[i].measured, r.criteria[i].measured);
    EXPECT_EQ(back.criteria[i].bound, r.criteria[i].bound);
    EXPECT_EQ(back.criteria[i].relation, r.criteria[i].relation);
    EXPECT_EQ(back.criteria[i].pass, r.criteria[i].pass);
  }
  EXPECT_EQ(back.value_of("third"), 1.0 / 3.0);
  EXPECT_EQ(back.value_of("tiny"), 1e-300);
  EXPECT_TRUE(std::isinf(back.value_of("inf")));
  EXPECT_TRUE(std::isnan(back.value_of("nan")));
  ASSERT_EQ(back.series.size(), 1u);
  EXPECT_EQ(back.series[0].x, r.series[0].x);
  EXPECT_EQ(back.series[0].y[0], M_PI);
  EXPECT_EQ(back.series[0].y[1], std::exp(1.0));
  EXPECT_EQ(back.notes, r.notes);
  EXPECT_TRUE(back.has_grid);
  EXPECT_EQ(back.grid.shape, "half-disc");
  EXPECT_EQ(back.grid.h, 1.0 / 64);
  // Serialisation is a fixed point.
  EXPECT_EQ(to_json(back), text);
}

TEST(Report, JsonKeepsKeyOrder) {
  std::string text = to_json(sample_report());
  EXPECT_LT(text.find("\"name\""), text.find("\"anchor\""));
  EXPECT_LT(text.find("\"anchor\""), text.find("\"inputs_digest\""));
  EXPECT_LT(text.find("\"third\""), text.find("\"tiny\""));
}

TEST(Report, CsvRowsOnePerCriterion) {
  ExperimentReport r = sample_report();
  std::string rows = to_csv_rows(r);
  int lines = 0;
  for (char c : rows) lines += c == '\n';
  EXPECT_EQ(lines, static_cast<int>(r.criteria.size()));
  EXPECT_NE(rows.find("\"sample/small\","), std::string::npos);
  EXPECT_NE(rows.find("0.33333333333333331"), std::string::npos);
  EXPECT_EQ(csv_header().back(), '\n');
}

TEST(Report, Fmt17RoundTrips) {
  for (double v : {1.0 / 3.0, M_PI, 1e-300, -2.5e17, 0.1 + 0.2}) EXPECT_EQ(std::stod(fmt17(v)), v);
  EXPECT_EQ(fmt6(1.0 / 3.0), "0.333333");
}

TEST(Report, DigestIsFnv1a64) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(digest(""), "cbf29ce484222325");
  EXPECT_EQ(digest("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(digest("foobar"), "85944171f73967e8");
}
