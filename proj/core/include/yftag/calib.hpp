#pragma once

// Per-tag posterior calibration: p = 1 / (1 + exp(-(s + b))) with a
// human-tuned bias b per tag. Holds the scored corpus, the calibration
// table, the judgment journal and the bias suggester.

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "yftag/dataset.hpp"
#include "yftag/error.hpp"
#include "yftag/network.hpp"
#include "yftag/train.hpp"

namespace yftag::calib {

struct ScoredPhoto {
  std::string photo_id;
  double logit = 0.0;
  friend bool operator==(const ScoredPhoto&, const ScoredPhoto&) = default;
};

// Per tag, photos sorted by logit descending, equal logits by photo_id.
class ScoreIndex {
 public:
  ScoreIndex() = default;
  // Takes unsorted (tag -> photos) lists. Throws on non-finite logits or a
  // repeated (tag, photo).
  explicit ScoreIndex(std::map<std::string, std::vector<ScoredPhoto>> lists);

  std::vector<std::string> tags() const;
  bool has_tag(const std::string& tag) const;
  // Throws NotFoundError for an unknown tag.
  const std::vector<ScoredPhoto>& photos(const std::string& tag) const;
  std::optional<double> logit(const std::string& tag,
                              const std::string& photo_id) const;

  friend bool operator==(const ScoreIndex& a, const ScoreIndex& b) {
    return a.lists_ == b.lists_;
  }

 private:
  std::map<std::string, std::vector<ScoredPhoto>> lists_;
  std::map<std::string, std::unordered_map<std::string, double>> lookup_;
};

// "photo_id<TAB>tag<TAB>logit" lines, the same layout eval reads.
void write_index(std::ostream& out, const ScoreIndex& index);
ScoreIndex read_index(std::istream& in);

struct ScoreResult {
  ScoreIndex index;
  std::size_t scored = 0;
  std::size_t skipped = 0;  // unreadable images
};

// Center-crop inference over every example. The network's class count
// must equal the vocabulary size.
ScoreResult score_corpus(net::Network& network, const data::Dataset& corpus,
                         std::span<const std::string> vocab,
                         const train::AugmentConfig& augment,
                         int batch_size = 64);

// Every *.ppm / *.pgm file in `dir` (photo id = file stem); unreadable
// files are skipped and counted.
ScoreResult score_directory(net::Network& network, const std::string& dir,
                            std::span<const std::string> vocab,
                            const train::AugmentConfig& augment,
                            int batch_size = 64);

class DisabledTag : public Error {
 public:
  using Error::Error;
};

class InsufficientJudgments : public Error {
 public:
  using Error::Error;
};

struct TagCalibration {
  double bias = 0.0;
  bool enabled = true;
  std::int64_t modified = 0;  // unix milliseconds, 0 = never
  friend bool operator==(const TagCalibration&, const TagCalibration&) = default;
};

std::int64_t now_millis();

// Thread-safe: many readers, writers serialized.
class CalibrationTable {
 public:
  CalibrationTable() = default;
  explicit CalibrationTable(std::span<const std::string> tags);
  CalibrationTable(const CalibrationTable& other);
  CalibrationTable& operator=(const CalibrationTable& other);

  bool has_tag(const std::string& tag) const;
  void add_tag(const std::string& tag);
  TagCalibration get(const std::string& tag) const;
  std::vector<std::pair<std::string, TagCalibration>> entries() const;

  void set_bias(const std::string& tag, double bias,
                std::int64_t stamp = now_millis());
  void set_enabled(const std::string& tag, bool enabled,
                   std::int64_t stamp = now_millis());

  // Versioned text form; write() always emits the current version.
  void write(std::ostream& out) const;
  static CalibrationTable read(std::istream& in);
  void persist(const std::string& path) const;
  static CalibrationTable load(const std::string& path);

  friend bool operator==(const CalibrationTable& a, const CalibrationTable& b);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, TagCalibration> entries_;
};

inline constexpr int kTableVersion = 2;

enum class Verdict { correct, incorrect };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct Judgment {
  std::string tag;
  std::string photo_id;
  Verdict verdict = Verdict::correct;
  std::int64_t timestamp = 0;
  friend bool operator==(const Judgment&, const Judgment&) = default;
};

// Append-only journal; the latest verdict per (tag, photo) wins.
class JudgmentLog {
 public:
  JudgmentLog() = default;
  // Replays `path` if it exists, then appends new judgments to it.
  explicit JudgmentLog(const std::string& path);

  void record(Judgment j);
  // Latest verdict per photo for `tag`, ordered by photo_id.
  std::vector<Judgment> for_tag(const std::string& tag) const;
  std::size_t count(const std::string& tag) const;

 private:
  void apply(Judgment j);

  mutable std::mutex mutex_;
  std::map<std::string, std::map<std::string, Judgment>> latest_;
  std::ofstream journal_;
};

struct PosteriorItem {
  std::string photo_id;
  double logit = 0.0;
  double posterior = 0.0;
};

// Highest-scoring photos of an enabled tag.
std::vector<PosteriorItem> top_scoring(const ScoreIndex& index,
                                       const CalibrationTable& table,
                                       const std::string& tag, std::size_t n);

// The n photos whose posterior is nearest p, nearest first; equal
// distances keep index order.
std::vector<PosteriorItem> around_posterior(const ScoreIndex& index,
                                            const CalibrationTable& table,
                                            const std::string& tag, double p,
                                            std::size_t n);

struct SuggestOptions {
  double window = 0.05;     // half-width in posterior
  std::size_t min_judgments = 10;
  std::size_t min_window = 10;  // judged items the window must hold
};

struct JudgedLogit {
  double logit = 0.0;
  bool correct = false;
};

struct Suggestion {
  double bias = 0.0;
  // Every judgment agrees, so only one direction of the scan is bounded.
  bool unconstrained = false;
  double precision = 0.0;  // judged precision in the window at `bias`
  std::size_t window_count = 0;
  std::size_t judged = 0;
};

// Judged precision in the posterior window [p - w, p + w] at bias b.
struct WindowStats {
  std::size_t count = 0;
  std::size_t correct = 0;
};
WindowStats window_stats(std::span<const JudgedLogit> judged, double bias,
                         double p, double window);

// Exact scan over the biases where an item enters or leaves the window.
// Picks the bias whose window precision is closest to p; among equally
// good biases, the median one. Throws InsufficientJudgments below
// min_judgments or when no bias fills the window.
Suggestion suggest_bias(std::span<const JudgedLogit> judged, double p,
                        const SuggestOptions& options = {});

// Joins the tag's judgments with their logits; judgments of photos absent
// from the index are ignored.
Suggestion suggest_bias(const ScoreIndex& index, const JudgmentLog& log,
                        const std::string& tag, double p,
                        const SuggestOptions& options = {});

}  // namespace yftag::calib
