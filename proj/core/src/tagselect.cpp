#include "yftag/tagselect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <unordered_map>
#include <unordered_set>

#include "yftag/error.hpp"

namespace yftag::tags {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_term_char(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

std::set<std::string> read_list(const std::filesystem::path& path,
                                bool normalize) {
  std::set<std::string> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string entry;
    if (normalize) {
      entry = normalize_tag(line);
    } else {
      // Patterns keep their case and inner characters; only trim.
      const auto b = line.find_first_not_of(" \t\r");
      const auto e = line.find_last_not_of(" \t\r");
      if (b != std::string::npos) entry = line.substr(b, e - b + 1);
    }
    if (!entry.empty()) out.insert(entry);
  }
  return out;
}

void add_terms(std::map<std::string, int>& df,
               const std::map<std::string, int>& terms) {
  for (const auto& [term, _] : terms) ++df[term];
}

int lookup(const std::map<std::string, int>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? 0 : it->second;
}

}  // namespace

std::string percent_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '+') {
      out.push_back(' ');
    } else if (c == '%') {
      if (i + 2 >= text.size()) {
        throw ParseError("truncated percent escape", i);
      }
      const int hi = hex_value(text[i + 1]), lo = hex_value(text[i + 2]);
      if (hi < 0 || lo < 0) throw ParseError("bad percent escape", i);
      out.push_back(static_cast<char>(hi * 16 + lo));
      i += 2;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string normalize_tag(std::string_view tag) {
  std::string out;
  bool pending_space = false;
  for (char ch : tag) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back('+');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

IngestResult ingest_metadata(std::istream& in) {
  IngestResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    ++result.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto bad = [&] {
      ++result.malformed;
      result.malformed_lines.push_back(result.lines);
    };
    const auto fields = split(line, '\t');
    if (fields.size() != 5 || fields[0].empty() || fields[1].empty()) {
      bad();
      continue;
    }
    PhotoRecord r;
    r.photo_id = std::string(fields[0]);
    r.user_id = std::string(fields[1]);
    try {
      r.title = percent_decode(fields[2]);
      r.description = percent_decode(fields[3]);
      if (!fields[4].empty()) {
        for (auto raw : split(fields[4], ',')) {
          std::string tag = normalize_tag(percent_decode(raw));
          if (tag.empty()) continue;
          if (std::find(r.tags.begin(), r.tags.end(), tag) == r.tags.end()) {
            r.tags.push_back(std::move(tag));
          }
        }
      }
    } catch (const ParseError&) {
      bad();
      continue;
    }
    if (!seen.insert(r.photo_id).second) {
      bad();
      continue;
    }
    result.records.push_back(std::move(r));
  }
  if (in.bad()) throw Error("metadata stream read failed");
  return result;
}

IngestResult ingest_metadata_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read metadata file " + path);
  return ingest_metadata(in);
}

TagStats compute_tag_stats(std::span<const PhotoRecord> records) {
  std::map<std::string, std::set<std::string>> users;
  TagStats stats;
  for (const auto& r : records) {
    std::set<std::string> once(r.tags.begin(), r.tags.end());
    for (const auto& tag : once) {
      ++stats[tag].photo_count;
      users[tag].insert(r.user_id);
    }
  }
  for (auto& [tag, counts] : stats) {
    counts.user_count = static_cast<int>(users[tag].size());
  }
  return stats;
}

std::vector<RankedTag> rank_tags(const TagStats& stats, RankKey key,
                                 std::size_t n) {
  if (n == 0) throw Error("rank_tags: n must be >= 1");
  std::vector<RankedTag> all;
  all.reserve(stats.size());
  for (const auto& [tag, counts] : stats) all.push_back({tag, counts});
  auto value = [key](const RankedTag& t) {
    return key == RankKey::photo_count ? t.counts.photo_count
                                       : t.counts.user_count;
  };
  std::sort(all.begin(), all.end(), [&](const RankedTag& a, const RankedTag& b) {
    if (value(a) != value(b)) return value(a) > value(b);
    return a.tag < b.tag;
  });
  if (all.size() > n) all.resize(n);
  return all;
}

void ExclusionRules::validate() const {
  for (const auto& tag : keep) {
    if (drop.count(tag)) {
      throw Error("conflicting overrides: '" + tag +
                  "' is in both the keep and drop lists");
    }
  }
  for (const auto& p : number_patterns) {
    try {
      std::regex re(p);
    } catch (const std::regex_error&) {
      throw Error("bad number pattern '" + p + "'");
    }
  }
}

ExclusionRules load_rules(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw NotFoundError("no rules directory " + dir);
  ExclusionRules rules;
  for (const auto& p : read_list(fs::path(dir) / "numbers.txt", false)) {
    if (std::find(rules.number_patterns.begin(), rules.number_patterns.end(),
                  p) == rules.number_patterns.end()) {
      rules.number_patterns.push_back(p);
    }
  }
  rules.locations = read_list(fs::path(dir) / "locations.txt", true);
  rules.nonenglish = read_list(fs::path(dir) / "nonenglish.txt", true);
  rules.sensitive = read_list(fs::path(dir) / "sensitive.txt", true);
  rules.keep = read_list(fs::path(dir) / "keep.txt", true);
  rules.drop = read_list(fs::path(dir) / "drop.txt", true);
  rules.validate();
  return rules;
}

Vocabulary apply_exclusions(std::span<const RankedTag> ranking,
                            const ExclusionRules& rules) {
  rules.validate();
  std::vector<std::regex> numbers;
  for (const auto& p : rules.number_patterns) numbers.emplace_back(p);
  Vocabulary vocab;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& t = ranking[i];
    Decision d{i + 1, t.tag, t.counts, true, "rule-free"};
    if (rules.keep.count(t.tag)) {
      d.reason = "manual-keep";
    } else if (rules.drop.count(t.tag)) {
      d.retained = false;
      d.reason = "manual-drop";
    } else if (std::any_of(numbers.begin(), numbers.end(), [&](const auto& re) {
                 return std::regex_match(t.tag, re);
               })) {
      d.retained = false;
      d.reason = "number";
    } else if (rules.locations.count(t.tag)) {
      d.retained = false;
      d.reason = "location";
    } else if (rules.nonenglish.count(t.tag)) {
      d.retained = false;
      d.reason = "nonenglish";
    } else if (rules.sensitive.count(t.tag)) {
      d.retained = false;
      d.reason = "sensitive";
    }
    if (d.retained) vocab.tags.push_back(t.tag);
    vocab.decisions.push_back(std::move(d));
  }
  return vocab;
}

void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  for (const auto& tag : vocab.tags) out << tag << '\n';
  std::ofstream prov(path + ".provenance.tsv");
  prov << "rank\ttag\tphoto_count\tuser_count\tdecision\treason\n";
  for (const auto& d : vocab.decisions) {
    prov << d.rank << '\t' << d.tag << '\t' << d.counts.photo_count << '\t'
         << d.counts.user_count << '\t' << (d.retained ? "keep" : "exclude")
         << '\t' << d.reason << '\n';
  }
  if (!out || !prov) throw Error("cannot write vocabulary " + path);
}

std::vector<std::string> read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read vocabulary " + path);
  std::vector<std::string> tags;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!seen.insert(line).second) {
      throw Error("duplicate vocabulary tag '" + line + "'");
    }
    tags.push_back(line);
  }
  return tags;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_term_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

FieldTerms field_terms(const PhotoRecord& record) {
  FieldTerms t;
  for (auto& w : tokenize(record.title)) ++t.title[w];
  for (auto& w : tokenize(record.description)) ++t.description[w];
  for (const auto& tag : record.tags) ++t.tags[tag];
  return t;
}

CorpusFrequencies corpus_frequencies(std::span<const PhotoRecord> records) {
  CorpusFrequencies f;
  f.documents = records.size();
  for (const auto& r : records) {
    const FieldTerms t = field_terms(r);
    add_terms(f.title, t.title);
    add_terms(f.description, t.description);
    add_terms(f.tags, t.tags);
  }
  return f;
}

double idf(std::size_t documents, int df) {
  return std::log((double(documents) + 1.0) / (double(df) + 1.0)) + 1.0;
}

double tfidf_score(const FieldTerms& terms, const std::string& tag,
                   const CorpusFrequencies& freq, const FieldWeights& w) {
  double score = 0;
  if (int tf = lookup(terms.title, tag)) {
    score += w.title * tf * idf(freq.documents, lookup(freq.title, tag));
  }
  if (int tf = lookup(terms.description, tag)) {
    score += w.description * tf *
             idf(freq.documents, lookup(freq.description, tag));
  }
  if (int tf = lookup(terms.tags, tag)) {
    score += w.tags * tf * idf(freq.documents, lookup(freq.tags, tag));
  }
  return score;
}

double tfidf_score(const PhotoRecord& record, const std::string& tag,
                   const CorpusFrequencies& freq, const FieldWeights& w) {
  return tfidf_score(field_terms(record), tag, freq, w);
}

std::vector<TagSelection> build_training_set(
    std::span<const PhotoRecord> records, std::span<const std::string> vocab,
    std::size_t k, const std::set<std::string>& excluded_ids,
    const FieldWeights& weights) {
  if (vocab.empty()) throw Error("build_training_set: empty vocabulary");
  if (k == 0) throw Error("build_training_set: k must be >= 1");
  const CorpusFrequencies freq = corpus_frequencies(records);
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < vocab.size(); ++i) slot.emplace(vocab[i], i);
  std::vector<std::vector<std::pair<std::string, double>>> candidates(
      vocab.size());
  for (const auto& r : records) {
    if (excluded_ids.count(r.photo_id)) continue;
    const FieldTerms terms = field_terms(r);
    std::set<std::size_t> hits;
    for (const auto* field : {&terms.title, &terms.description, &terms.tags}) {
      for (const auto& [term, _] : *field) {
        auto it = slot.find(term);
        if (it != slot.end()) hits.insert(it->second);
      }
    }
    for (std::size_t s : hits) {
      const double score = tfidf_score(terms, vocab[s], freq, weights);
      if (score > 0) candidates[s].emplace_back(r.photo_id, score);
    }
  }
  std::vector<TagSelection> out;
  out.reserve(vocab.size());
  for (std::size_t s = 0; s < vocab.size(); ++s) {
    auto& c = candidates[s];
    std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    TagSelection sel{vocab[s], {}, c.size() < k};
    if (c.size() > k) c.resize(k);
    sel.photos = std::move(c);
    out.push_back(std::move(sel));
  }
  return out;
}

}  // namespace yftag::tags
