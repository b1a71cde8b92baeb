#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "yftag/calib.hpp"
#include "yftag/error.hpp"

using namespace yftag;
using namespace yftag::calib;
namespace fs = std::filesystem;

namespace {

const fs::path kData = YFTAG_TEST_DATA_DIR;

ScoreIndex fixture_index() {
  std::ifstream in(kData / "calib" / "index.tsv");
  return read_index(in);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("yftag_calib_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST(ScoreIndex, SortedAndValidated) {
  ScoreIndex idx({{"t", {{"b", 1.0}, {"a", 1.0}, {"c", 2.0}}}});
  const auto& p = idx.photos("t");
  EXPECT_EQ(p[0].photo_id, "c");
  EXPECT_EQ(p[1].photo_id, "a");
  EXPECT_EQ(p[2].photo_id, "b");
  EXPECT_EQ(idx.logit("t", "a"), 1.0);
  EXPECT_FALSE(idx.logit("t", "zz"));
  EXPECT_THROW(idx.photos("nope"), NotFoundError);
  EXPECT_THROW(ScoreIndex({{"t", {{"a", 1.0}, {"a", 2.0}}}}), Error);
  EXPECT_THROW(ScoreIndex({{"t", {{"a", NAN}}}}), Error);
}

TEST(ScoreIndex, TextRoundTrip) {
  auto idx = fixture_index();
  EXPECT_EQ(idx.tags(), (std::vector<std::string>{"beach", "dog", "sunset"}));
  std::ostringstream out;
  write_index(out, idx);
  std::istringstream in(out.str());
  EXPECT_EQ(read_index(in), idx);
}

TEST(Table, SetGetAndDisabledTopThrows) {
  auto idx = fixture_index();
  CalibrationTable table(idx.tags());
  table.set_bias("dog", 0.5, 42);
  EXPECT_EQ(table.get("dog"), (TagCalibration{0.5, true, 42}));
  EXPECT_THROW(table.get("cat"), NotFoundError);
  EXPECT_THROW(table.set_bias("dog", INFINITY), Error);
  table.set_enabled("dog", false);
  EXPECT_THROW(top_scoring(idx, table, "dog", 3), DisabledTag);
}

TEST(Table, BitExactRoundTrip) {
  std::mt19937_64 rng(31);
  CalibrationTable table;
  for (int i = 0; i < 100; ++i) {
    const std::string tag = "t" + std::to_string(i);
    table.add_tag(tag);
    double b;
    do {
      const std::uint64_t bits = rng();
      std::memcpy(&b, &bits, sizeof b);
    } while (!std::isfinite(b));
    table.set_bias(tag, b, std::int64_t(i));
  }
  std::ostringstream out;
  table.write(out);
  std::istringstream in(out.str());
  auto back = CalibrationTable::read(in);
  EXPECT_EQ(back, table);
  for (const auto& [tag, cal] : table.entries()) {
    const double a = cal.bias, b = back.get(tag).bias;
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

TEST(Table, VersionsAndPersistence) {
  auto v1 = CalibrationTable::load((kData / "calib" / "table_v1.tsv").string());
  EXPECT_EQ(v1.get("beach").bias, 0.25);
  EXPECT_FALSE(v1.get("chien").enabled);
  EXPECT_THROW(CalibrationTable::load((kData / "calib" / "table_v3.tsv").string()),
               Error);
  auto dir = scratch("persist");
  v1.persist((dir / "t.tsv").string());
  const auto text = slurp(dir / "t.tsv");
  EXPECT_EQ(text.rfind("# yftag-calibration v" + std::to_string(kTableVersion), 0),
            0u)
      << text.substr(0, 40);
  EXPECT_EQ(CalibrationTable::load((dir / "t.tsv").string()), v1);
  fs::remove_all(dir);
}

TEST(Queries, TopAndAroundMatchOracle) {
  auto idx = fixture_index();
  CalibrationTable table(idx.tags());
  table.set_bias("dog", -0.7);
  auto top = top_scoring(idx, table, "dog", 5);
  ASSERT_EQ(top.size(), 5u);
  for (std::size_t i = 1; i < top.size(); ++i) EXPECT_GE(top[i - 1].logit, top[i].logit);
  EXPECT_NEAR(top[0].posterior, 1 / (1 + std::exp(-(top[0].logit - 0.7))), 1e-15);
  for (double p : {0.05, 0.3, 0.5, 0.77, 0.99}) {
    for (std::size_t n : {1u, 4u, 30u, 50u}) {
      auto got = around_posterior(idx, table, "dog", p, n);
      auto want = oracle::brute_around(idx.photos("dog"), -0.7, p, n);
      std::vector<std::string> ids;
      for (const auto& g : got) ids.push_back(g.photo_id);
      EXPECT_EQ(ids, want) << p << ' ' << n;
    }
  }
  EXPECT_THROW(around_posterior(idx, table, "dog", 1.5, 3), Error);
  EXPECT_THROW(top_scoring(idx, table, "cat", 3), NotFoundError);
}

TEST(Journal, LatestVerdictWinsAndReplays) {
  auto dir = scratch("journal");
  const auto path = (dir / "j.log").string();
  {
    JudgmentLog log(path);
    log.record({"dog", "p1", Verdict::correct, 1});
    log.record({"dog", "p2", Verdict::incorrect, 2});
    log.record({"dog", "p1", Verdict::incorrect, 3});
    EXPECT_EQ(log.count("dog"), 2u);
  }
  JudgmentLog again(path);
  auto js = again.for_tag("dog");
  ASSERT_EQ(js.size(), 2u);
  EXPECT_EQ(js[0].photo_id, "p1");
  EXPECT_EQ(js[0].verdict, Verdict::incorrect);
  EXPECT_EQ(again.count("cat"), 0u);
  EXPECT_EQ(parse_verdict("correct"), Verdict::correct);
  EXPECT_THROW(parse_verdict("maybe"), Error);
  fs::remove_all(dir);
}

TEST(Suggest, RecoversBiasOnCalibratedJudgments) {
  const double truth = std::log(9.0) - 1.0;
  auto judged = oracle::calibrated_judgments(truth, 0.55, 0.995, 2000);
  auto s = suggest_bias(judged, 0.9);
  EXPECT_NEAR(s.bias, truth, 0.05);
  EXPECT_FALSE(s.unconstrained);
  EXPECT_EQ(s.judged, 2000u);
  auto w = window_stats(judged, s.bias, 0.9, 0.05);
  EXPECT_EQ(w.count, s.window_count);
  EXPECT_NEAR(double(w.correct) / w.count, 0.9, 0.02);
}

TEST(Suggest, WindowStatsBoundaries) {
  std::vector<JudgedLogit> j{{0.0, true}, {std::log(9.0), false}, {5.0, true}};
  auto w = window_stats(j, 0.0, 0.9, 0.05);
  EXPECT_EQ(w.count, 1u);
  EXPECT_EQ(w.correct, 0u);
}

TEST(Suggest, AllCorrectIsUnconstrained) {
  std::vector<JudgedLogit> j;
  for (int i = 0; i < 40; ++i) j.push_back({i * 0.1, true});
  auto s = suggest_bias(j, 0.9);
  EXPECT_TRUE(s.unconstrained);
  EXPECT_EQ(s.precision, 1.0);
}

TEST(Suggest, TooFewJudgments) {
  std::vector<JudgedLogit> j(5, {0.0, true});
  EXPECT_THROW(suggest_bias(j, 0.9), InsufficientJudgments);
  SuggestOptions o;
  o.min_judgments = 1;
  o.min_window = 6;
  EXPECT_THROW(suggest_bias(j, 0.9, o), InsufficientJudgments);
}

TEST(Suggest, JoinsLogWithIndex) {
  auto idx = fixture_index();
  JudgmentLog log;
  for (const auto& ph : idx.photos("beach")) {
    log.record({"beach", ph.photo_id,
                ph.logit > 0 ? Verdict::correct : Verdict::incorrect, 1});
  }
  log.record({"beach", "not-in-index", Verdict::incorrect, 1});
  SuggestOptions o;
  o.min_window = 1;
  auto s = suggest_bias(idx, log, "beach", 0.9, o);
  EXPECT_EQ(s.judged, idx.photos("beach").size());
}
