#pragma once

// Tag vocabulary mining over user photo metadata: ingestion, per-tag
// photo/user counts, rankings, auditable exclusion rules, and tf-idf
// selection of the top-k photos per tag.
//
// Metadata lines are tab-separated: photo_id, user_id, title, description,
// tags. Text fields are percent-encoded with '+' for space; tags are
// comma-separated.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace yftag::tags {

struct PhotoRecord {
  std::string photo_id;
  std::string user_id;
  std::string title;        // decoded
  std::string description;  // decoded
  std::vector<std::string> tags;  // normalized, unique, first-seen order
  friend bool operator==(const PhotoRecord&, const PhotoRecord&) = default;
};

struct IngestResult {
  std::vector<PhotoRecord> records;
  std::size_t lines = 0;
  std::size_t malformed = 0;
  std::vector<std::size_t> malformed_lines;  // 1-based
};

// Malformed lines (wrong field count, empty ids, bad escapes, repeated
// photo ids) are counted and skipped.
IngestResult ingest_metadata(std::istream& in);
IngestResult ingest_metadata_file(const std::string& path);

// "%41" -> "A", '+' -> ' '. Throws ParseError on a broken escape.
std::string percent_decode(std::string_view text);

// Lowercase (ASCII), trim, and join inner whitespace runs with '+'.
std::string normalize_tag(std::string_view tag);

struct TagCounts {
  int photo_count = 0;  // photos carrying the tag
  int user_count = 0;   // distinct owners of those photos
  friend bool operator==(const TagCounts&, const TagCounts&) = default;
};

using TagStats = std::map<std::string, TagCounts>;

TagStats compute_tag_stats(std::span<const PhotoRecord> records);

enum class RankKey { photo_count, user_count };

struct RankedTag {
  std::string tag;
  TagCounts counts;
  friend bool operator==(const RankedTag&, const RankedTag&) = default;
};

// Top n by key, ties broken by tag text. n must be >= 1.
std::vector<RankedTag> rank_tags(const TagStats& stats, RankKey key,
                                 std::size_t n);

struct ExclusionRules {
  std::vector<std::string> number_patterns{"[0-9]{1,4}"};
  std::set<std::string> locations;
  std::set<std::string> nonenglish;
  std::set<std::string> sensitive;
  std::set<std::string> keep;  // retained whatever the rules say
  std::set<std::string> drop;  // excluded whatever the rules say

  // Throws when a tag is both kept and dropped.
  void validate() const;
};

// Reads numbers.txt (extra patterns), locations.txt, nonenglish.txt,
// sensitive.txt, keep.txt and drop.txt from `dir`; missing files are
// empty lists. One entry per line, '#' starts a comment.
ExclusionRules load_rules(const std::string& dir);

struct Decision {
  std::size_t rank = 0;  // 1-based position in the input ranking
  std::string tag;
  TagCounts counts;
  bool retained = true;
  // "rule-free", "number", "location", "nonenglish", "sensitive",
  // "manual-keep" or "manual-drop".
  std::string reason;
  friend bool operator==(const Decision&, const Decision&) = default;
};

struct Vocabulary {
  std::vector<std::string> tags;     // retained, in ranking order
  std::vector<Decision> decisions;   // one per ranked tag
};

Vocabulary apply_exclusions(std::span<const RankedTag> ranking,
                            const ExclusionRules& rules);

// Writes `path` (one tag per line) and `path`.provenance.tsv.
void write_vocabulary(const Vocabulary& vocab, const std::string& path);
std::vector<std::string> read_vocabulary(const std::string& path);

// Title and description terms: lowercase runs of letters, digits and
// non-ASCII bytes.
std::vector<std::string> tokenize(std::string_view text);

struct FieldWeights {
  double title = 0.5;
  double description = 0.25;
  double tags = 1.0;
};

struct FieldTerms {
  std::map<std::string, int> title;
  std::map<std::string, int> description;
  std::map<std::string, int> tags;
};

FieldTerms field_terms(const PhotoRecord& record);

// Per-field document frequencies over a corpus of `documents` records.
struct CorpusFrequencies {
  std::size_t documents = 0;
  std::map<std::string, int> title;
  std::map<std::string, int> description;
  std::map<std::string, int> tags;
};

CorpusFrequencies corpus_frequencies(std::span<const PhotoRecord> records);

// idf = ln((N + 1) / (df + 1)) + 1 with tf the raw term count.
double idf(std::size_t documents, int df);

// Σ_field weight · tf · idf.
double tfidf_score(const FieldTerms& terms, const std::string& tag,
                   const CorpusFrequencies& freq, const FieldWeights& weights);
double tfidf_score(const PhotoRecord& record, const std::string& tag,
                   const CorpusFrequencies& freq, const FieldWeights& weights);

struct TagSelection {
  std::string tag;
  std::vector<std::pair<std::string, double>> photos;  // (photo_id, score)
  bool shortfall = false;  // fewer than k scoring candidates
};

// For every vocabulary tag, the k best-scoring photos (score > 0) not in
// `excluded_ids`, ordered by score descending then photo_id.
std::vector<TagSelection> build_training_set(
    std::span<const PhotoRecord> records, std::span<const std::string> vocab,
    std::size_t k, const std::set<std::string>& excluded_ids,
    const FieldWeights& weights = {});

}  // namespace yftag::tags
