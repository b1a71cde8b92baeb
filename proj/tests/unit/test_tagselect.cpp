#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "yftag/error.hpp"
#include "yftag/tagselect.hpp"

using namespace yftag;
using namespace yftag::tags;
namespace fs = std::filesystem;

namespace {

const fs::path kData = YFTAG_TEST_DATA_DIR;

IngestResult ingest(const std::string& text) {
  std::istringstream in(text);
  return ingest_metadata(in);
}

std::vector<PhotoRecord> small_corpus() {
  return ingest(
             "p1\tu1\tdog+park\ta+dog+on+grass\tdog,park\n"
             "p2\tu1\tcat\t\tcat,square\n"
             "p3\tu2\tDog\tmy+dog\tDog,square\n"
             "p4\tu3\tbeach\tsand\tbeach,square\n"
             "p5\tu3\tdog+at+the+beach\t\tbeach\n")
      .records;
}

}  // namespace

TEST(Ingest, DecodesAndNormalizes) {
  auto r = ingest("p1\tu1\tHello+%41\tx%2By\t Big++Dog ,big%20dog,SUNSET\n");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].title, "Hello A");
  EXPECT_EQ(r.records[0].description, "x+y");
  EXPECT_EQ(r.records[0].tags, (std::vector<std::string>{"big+dog", "sunset"}));
}

TEST(Ingest, CountsMalformedLines) {
  auto r = ingest(
      "p1\tu1\tt\td\ta\n"
      "only\tthree\tfields\n"
      "\tu1\tt\td\ta\n"
      "p2\tu1\t%zz\td\ta\n"
      "p1\tu2\tt\td\tb\n"
      "p3\tu1\tt\td\t\n");
  EXPECT_EQ(r.lines, 6u);
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.malformed, 4u);
  EXPECT_EQ(r.malformed_lines, (std::vector<std::size_t>{2, 3, 4, 5}));
}

TEST(Ingest, Helpers) {
  EXPECT_EQ(percent_decode("a+b%2Fc"), "a b/c");
  EXPECT_THROW(percent_decode("%4"), ParseError);
  EXPECT_EQ(normalize_tag("  New   York "), "new+york");
  EXPECT_EQ(tokenize("Dog's day, 2016!"),
            (std::vector<std::string>{"dog", "s", "day", "2016"}));
}

TEST(Stats, PhotoAndUserCounts) {
  auto stats = compute_tag_stats(small_corpus());
  EXPECT_EQ(stats.at("square"), (TagCounts{3, 3}));
  EXPECT_EQ(stats.at("dog"), (TagCounts{2, 2}));
  EXPECT_EQ(stats.at("beach"), (TagCounts{2, 1}));
}

TEST(Rank, KeysAndTieBreak) {
  auto stats = compute_tag_stats(small_corpus());
  auto by_photo = rank_tags(stats, RankKey::photo_count, 3);
  ASSERT_EQ(by_photo.size(), 3u);
  EXPECT_EQ(by_photo[0].tag, "square");
  EXPECT_EQ(by_photo[1].tag, "beach");  // 2 photos, ties by text
  EXPECT_EQ(by_photo[2].tag, "dog");
  auto by_user = rank_tags(stats, RankKey::user_count, 10);
  EXPECT_EQ(by_user[1].tag, "dog");
  EXPECT_EQ(by_user.size(), stats.size());
  EXPECT_THROW(rank_tags(stats, RankKey::user_count, 0), Error);
}

TEST(Exclusions, ReasonsAndOverrides) {
  ExclusionRules rules;
  rules.locations = {"paris"};
  rules.nonenglish = {"chien"};
  rules.sensitive = {"nude"};
  rules.keep = {"365"};
  rules.drop = {"square"};
  std::vector<RankedTag> ranking;
  for (auto t : {"dog", "2016", "365", "paris", "chien", "nude", "square", "1990s"}) {
    ranking.push_back({t, {1, 1}});
  }
  auto v = apply_exclusions(ranking, rules);
  std::vector<std::string> reasons;
  for (const auto& d : v.decisions) reasons.push_back(d.reason);
  EXPECT_EQ(reasons, (std::vector<std::string>{
                         "rule-free", "number", "manual-keep", "location",
                         "nonenglish", "sensitive", "manual-drop", "rule-free"}));
  EXPECT_EQ(v.tags, (std::vector<std::string>{"dog", "365", "1990s"}));
  EXPECT_EQ(v.decisions[2].rank, 3u);
  rules.keep.insert("square");
  EXPECT_THROW(rules.validate(), Error);
}

TEST(Exclusions, FixtureRulesLoad) {
  auto rules = load_rules((kData / "tags" / "rules").string());
  EXPECT_TRUE(rules.locations.count("london"));
  EXPECT_TRUE(rules.keep.count("365"));
  EXPECT_TRUE(rules.drop.count("iphoneography"));
  EXPECT_GE(rules.number_patterns.size(), 2u);
  EXPECT_THROW(load_rules((kData / "no-such-dir").string()), Error);
  const auto dir = fs::temp_directory_path() / "yftag_empty_rules";
  fs::create_directories(dir);
  auto empty = load_rules(dir.string());
  EXPECT_TRUE(empty.locations.empty());
  EXPECT_TRUE(empty.keep.empty());
  fs::remove(dir);
}

TEST(Vocabulary, WriteReadWithProvenance) {
  auto dir = fs::temp_directory_path() / "yftag_vocab_test";
  fs::create_directories(dir);
  Vocabulary v;
  v.tags = {"dog", "cat"};
  v.decisions = {{1, "dog", {2, 2}, true, "rule-free"},
                 {2, "paris", {2, 2}, false, "location"},
                 {3, "cat", {1, 1}, true, "rule-free"}};
  const auto path = (dir / "vocabulary.txt").string();
  write_vocabulary(v, path);
  EXPECT_EQ(read_vocabulary(path), v.tags);
  std::ifstream prov(path + ".provenance.tsv");
  std::string all((std::istreambuf_iterator<char>(prov)), {});
  EXPECT_NE(all.find("paris"), std::string::npos);
  EXPECT_NE(all.find("location"), std::string::npos);
  fs::remove_all(dir);
}

TEST(TfIdf, IdfFormula) {
  EXPECT_DOUBLE_EQ(idf(9, 4), std::log(10.0 / 5.0) + 1);
  EXPECT_DOUBLE_EQ(idf(0, 0), 1.0);
}

TEST(TfIdf, MatchesBruteForce) {
  auto records = small_corpus();
  auto freq = corpus_frequencies(records);
  FieldWeights w;
  for (const auto& r : records) {
    for (auto tag : {"dog", "square", "beach", "cat", "park", "sand"}) {
      EXPECT_DOUBLE_EQ(tfidf_score(r, tag, freq, w),
                       oracle::brute_tfidf(records, r, tag, w))
          << r.photo_id << ' ' << tag;
    }
  }
  // p1 mentions dog in title, description and tags.
  EXPECT_GT(tfidf_score(records[0], "dog", freq, w),
            tfidf_score(records[4], "dog", freq, w));
}

TEST(TrainingSet, MatchesBruteForceOnRandomCorpora) {
  std::mt19937_64 rng(21);
  const std::vector<std::string> words{"dog", "cat", "sun", "sea", "tree", "car"};
  for (int trial = 0; trial < 30; ++trial) {
    std::ostringstream text;
    const int n = 5 + int(rng() % 30);
    for (int i = 0; i < n; ++i) {
      text << "p" << i << "\tu" << rng() % 4 << "\t" << words[rng() % 6] << "+"
           << words[rng() % 6] << "\t" << words[rng() % 6] << "\t"
           << words[rng() % 6] << "," << words[rng() % 6] << "\n";
    }
    auto records = ingest(text.str()).records;
    std::set<std::string> excluded{"p0", "p3"};
    const std::size_t k = 1 + rng() % 6;
    auto got = build_training_set(records, words, k, excluded);
    auto want = oracle::brute_training_set(records, words, k, excluded, {});
    ASSERT_EQ(got.size(), words.size());
    for (const auto& sel : got) {
      EXPECT_EQ(sel.photos, want.at(sel.tag)) << sel.tag;
      EXPECT_EQ(sel.shortfall, sel.photos.size() < k);
    }
  }
}

TEST(TrainingSet, OrderIndependent) {
  auto records = small_corpus();
  const std::vector<std::string> vocab{"dog", "square", "beach"};
  auto a = build_training_set(records, vocab, 2, {});
  std::reverse(records.begin(), records.end());
  auto b = build_training_set(records, vocab, 2, {});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].photos, b[i].photos);
}
