#include "yftag/calib.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>

#include "yftag/eval.hpp"
#include "yftag/multilabel.hpp"

namespace yftag::calib {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError("bad " + what + " '" + text + "'", 0);
  }
  return v;
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
  std::int64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError("bad " + what + " '" + text + "'", 0);
  }
  return v;
}

void check_tag_name(const std::string& tag) {
  if (tag.empty() || tag.find_first_of("\t\n\r") != std::string::npos) {
    throw Error("invalid tag name '" + tag + "'");
  }
}

void check_bias(double bias) {
  if (!std::isfinite(bias)) throw NumericError("bias must be finite");
}

ScoreResult index_logits(const Tensor& logits, const data::Dataset& corpus,
                         std::span<const std::string> vocab) {
  std::map<std::string, std::vector<ScoredPhoto>> lists;
  for (const auto& tag : vocab) lists[tag];
  const int v = static_cast<int>(vocab.size());
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    for (int c = 0; c < v; ++c) {
      lists[vocab[c]].push_back(
          {corpus.examples[i].id, double(logits[i * std::size_t(v) + c])});
    }
  }
  ScoreResult r;
  r.index = ScoreIndex(std::move(lists));
  r.scored = corpus.examples.size();
  return r;
}

}  // namespace

ScoreIndex::ScoreIndex(std::map<std::string, std::vector<ScoredPhoto>> lists)
    : lists_(std::move(lists)) {
  for (auto& [tag, photos] : lists_) {
    check_tag_name(tag);
    auto& lookup = lookup_[tag];
    for (const auto& p : photos) {
      if (!std::isfinite(p.logit)) {
        throw NumericError("non-finite logit for " + p.photo_id + "/" + tag);
      }
      if (!lookup.emplace(p.photo_id, p.logit).second) {
        throw Error("photo " + p.photo_id + " scored twice for " + tag);
      }
    }
    std::sort(photos.begin(), photos.end(),
              [](const ScoredPhoto& a, const ScoredPhoto& b) {
                if (a.logit != b.logit) return a.logit > b.logit;
                return a.photo_id < b.photo_id;
              });
  }
}

std::vector<std::string> ScoreIndex::tags() const {
  std::vector<std::string> out;
  for (const auto& [tag, _] : lists_) out.push_back(tag);
  return out;
}

bool ScoreIndex::has_tag(const std::string& tag) const {
  return lists_.count(tag) > 0;
}

const std::vector<ScoredPhoto>& ScoreIndex::photos(const std::string& tag) const {
  auto it = lists_.find(tag);
  if (it == lists_.end()) throw NotFoundError("unknown tag '" + tag + "'");
  return it->second;
}

std::optional<double> ScoreIndex::logit(const std::string& tag,
                                        const std::string& photo_id) const {
  auto it = lookup_.find(tag);
  if (it == lookup_.end()) return std::nullopt;
  auto p = it->second.find(photo_id);
  if (p == it->second.end()) return std::nullopt;
  return p->second;
}

void write_index(std::ostream& out, const ScoreIndex& index) {
  for (const auto& tag : index.tags()) {
    for (const auto& p : index.photos(tag)) {
      out << p.photo_id << '\t' << tag << '\t' << format_double(p.logit) << '\n';
    }
  }
}

ScoreIndex read_index(std::istream& in) {
  eval::RankedPredictions preds;
  eval::read_predictions(in, preds);
  std::map<std::string, std::vector<ScoredPhoto>> lists;
  for (auto& [tag, items] : preds.scores) {
    auto& list = lists[tag];
    for (auto& [item, score] : items) list.push_back({item, score});
  }
  return ScoreIndex(std::move(lists));
}

ScoreResult score_corpus(net::Network& network, const data::Dataset& corpus,
                         std::span<const std::string> vocab,
                         const train::AugmentConfig& augment, int batch_size) {
  if (int(vocab.size()) != network.num_classes()) {
    throw ShapeError("network has " + std::to_string(network.num_classes()) +
                     " classes, vocabulary " + std::to_string(vocab.size()));
  }
  return index_logits(
      train::predict_logits(network, corpus, augment, batch_size), corpus,
      vocab);
}

ScoreResult score_directory(net::Network& network, const std::string& dir,
                            std::span<const std::string> vocab,
                            const train::AugmentConfig& augment,
                            int batch_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw NotFoundError("no image directory " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  data::Dataset corpus;
  corpus.class_names.assign(vocab.begin(), vocab.end());
  std::size_t skipped = 0;
  const int channels = network.plan().input.channels;
  for (const auto& f : files) {
    try {
      Image img = read_pnm(f.string());
      if (img.channels != channels) throw ShapeError("channel mismatch");
      corpus.examples.push_back({f.stem().string(), std::move(img), {}});
    } catch (const std::exception&) {
      ++skipped;
    }
  }
  ScoreResult r = score_corpus(network, corpus, vocab, augment, batch_size);
  r.skipped = skipped;
  return r;
}

std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

CalibrationTable::CalibrationTable(std::span<const std::string> tags) {
  for (const auto& t : tags) add_tag(t);
}

CalibrationTable::CalibrationTable(const CalibrationTable& other) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
}

CalibrationTable& CalibrationTable::operator=(const CalibrationTable& other) {
  if (this == &other) return *this;
  auto copy = other.entries();
  std::unique_lock lock(mutex_);
  entries_.clear();
  for (auto& [tag, cal] : copy) entries_.emplace(tag, cal);
  return *this;
}

bool CalibrationTable::has_tag(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  return entries_.count(tag) > 0;
}

void CalibrationTable::add_tag(const std::string& tag) {
  check_tag_name(tag);
  std::unique_lock lock(mutex_);
  entries_.try_emplace(tag);
}

TagCalibration CalibrationTable::get(const std::string& tag) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(tag);
  if (it == entries_.end()) throw NotFoundError("unknown tag '" + tag + "'");
  return it->second;
}

std::vector<std::pair<std::string, TagCalibration>> CalibrationTable::entries()
    const {
  std::shared_lock lock(mutex_);
  return {entries_.begin(), entries_.end()};
}

void CalibrationTable::set_bias(const std::string& tag, double bias,
                                std::int64_t stamp) {
  check_bias(bias);
  std::unique_lock lock(mutex_);
  auto it = entries_.find(tag);
  if (it == entries_.end()) throw NotFoundError("unknown tag '" + tag + "'");
  it->second.bias = bias;
  it->second.modified = stamp;
}

void CalibrationTable::set_enabled(const std::string& tag, bool enabled,
                                   std::int64_t stamp) {
  std::unique_lock lock(mutex_);
  auto it = entries_.find(tag);
  if (it == entries_.end()) throw NotFoundError("unknown tag '" + tag + "'");
  it->second.enabled = enabled;
  it->second.modified = stamp;
}

void CalibrationTable::write(std::ostream& out) const {
  out << "# yftag-calibration v" << kTableVersion << '\n';
  out << "# tag\tbias\tenabled\tmodified\n";
  for (const auto& [tag, c] : entries()) {
    out << tag << '\t' << format_double(c.bias) << '\t' << (c.enabled ? 1 : 0)
        << '\t' << c.modified << '\n';
  }
}

CalibrationTable CalibrationTable::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty calibration table", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string magic = "# yftag-calibration v";
  if (line.rfind(magic, 0) != 0) {
    throw ParseError("not a calibration table: '" + line + "'", 0);
  }
  const auto version = parse_int(line.substr(magic.size()), "table version");
  if (version < 1) throw ParseError("bad table version", magic.size());
  if (version > kTableVersion) {
    throw Error("calibration table version " + std::to_string(version) +
                " is newer than supported version " +
                std::to_string(kTableVersion));
  }
  const std::size_t fields = version == 1 ? 3 : 4;
  CalibrationTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != fields) {
      throw ParseError("calibration line " + std::to_string(lineno) +
                           " needs " + std::to_string(fields) + " fields",
                       0);
    }
    check_tag_name(f[0]);
    TagCalibration c;
    c.bias = parse_double(f[1], "bias");
    check_bias(c.bias);
    if (f[2] != "0" && f[2] != "1") {
      throw ParseError("bad enabled flag '" + f[2] + "'", 0);
    }
    c.enabled = f[2] == "1";
    if (fields == 4) c.modified = parse_int(f[3], "modified stamp");
    if (!table.entries_.emplace(f[0], c).second) {
      throw ParseError("tag '" + f[0] + "' listed twice", 0);
    }
  }
  return table;
}

void CalibrationTable::persist(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write calibration table " + path);
    write(out);
    if (!out) throw Error("failed writing calibration table " + path);
  }
  std::filesystem::rename(tmp, path);
}

CalibrationTable CalibrationTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read calibration table " + path);
  return read(in);
}

bool operator==(const CalibrationTable& a, const CalibrationTable& b) {
  return a.entries() == b.entries();
}

std::string_view to_string(Verdict v) {
  return v == Verdict::correct ? "correct" : "incorrect";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "correct") return Verdict::correct;
  if (text == "incorrect") return Verdict::incorrect;
  throw ParseError("verdict must be 'correct' or 'incorrect', got '" +
                       std::string(text) + "'",
                   0);
}

JudgmentLog::JudgmentLog(const std::string& path) {
  {
    std::ifstream in(path);
    std::string line;
    std::size_t lineno = 0;
    while (in && std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto f = split_tabs(line);
      if (f.size() != 4) {
        throw ParseError("journal line " + std::to_string(lineno) +
                             " needs timestamp, tag, photo, verdict",
                         0);
      }
      apply({f[1], f[2], parse_verdict(f[3]), parse_int(f[0], "timestamp")});
    }
  }
  const bool fresh = !std::filesystem::exists(path) ||
                     std::filesystem::file_size(path) == 0;
  journal_.open(path, std::ios::app);
  if (!journal_) throw Error("cannot open judgment journal " + path);
  if (fresh) journal_ << "# yftag-judgments v1\n" << std::flush;
}

void JudgmentLog::apply(Judgment j) {
  auto& slot = latest_[j.tag];
  const std::string photo = j.photo_id;
  slot.insert_or_assign(photo, std::move(j));
}

void JudgmentLog::record(Judgment j) {
  check_tag_name(j.tag);
  if (j.photo_id.empty() || j.photo_id.find_first_of("\t\n\r") != std::string::npos) {
    throw Error("invalid photo id '" + j.photo_id + "'");
  }
  std::lock_guard lock(mutex_);
  if (journal_.is_open()) {
    // One write per line keeps each entry whole.
    const std::string line = std::to_string(j.timestamp) + '\t' + j.tag + '\t' +
                             j.photo_id + '\t' + std::string(to_string(j.verdict)) +
                             '\n';
    journal_.write(line.data(), std::streamsize(line.size()));
    journal_.flush();
    if (!journal_) throw Error("failed appending to judgment journal");
  }
  apply(std::move(j));
}

std::vector<Judgment> JudgmentLog::for_tag(const std::string& tag) const {
  std::lock_guard lock(mutex_);
  std::vector<Judgment> out;
  auto it = latest_.find(tag);
  if (it == latest_.end()) return out;
  for (const auto& [_, j] : it->second) out.push_back(j);
  return out;
}

std::size_t JudgmentLog::count(const std::string& tag) const {
  std::lock_guard lock(mutex_);
  auto it = latest_.find(tag);
  return it == latest_.end() ? 0 : it->second.size();
}

namespace {

TagCalibration serving(const CalibrationTable& table, const ScoreIndex& index,
                       const std::string& tag) {
  if (!index.has_tag(tag)) throw NotFoundError("unknown tag '" + tag + "'");
  TagCalibration c = table.get(tag);
  if (!c.enabled) throw DisabledTag("tag '" + tag + "' is disabled");
  return c;
}

}  // namespace

std::vector<PosteriorItem> top_scoring(const ScoreIndex& index,
                                       const CalibrationTable& table,
                                       const std::string& tag, std::size_t n) {
  const double bias = serving(table, index, tag).bias;
  const auto& photos = index.photos(tag);
  std::vector<PosteriorItem> out;
  for (std::size_t i = 0; i < std::min(n, photos.size()); ++i) {
    out.push_back({photos[i].photo_id, photos[i].logit,
                   multilabel::posterior(photos[i].logit, bias)});
  }
  return out;
}

std::vector<PosteriorItem> around_posterior(const ScoreIndex& index,
                                            const CalibrationTable& table,
                                            const std::string& tag, double p,
                                            std::size_t n) {
  if (!(p > 0.0 && p < 1.0)) throw Error("posterior target must be in (0, 1)");
  const double bias = serving(table, index, tag).bias;
  const auto& photos = index.photos(tag);
  std::vector<PosteriorItem> all;
  all.reserve(photos.size());
  for (const auto& ph : photos) {
    all.push_back({ph.photo_id, ph.logit, multilabel::posterior(ph.logit, bias)});
  }
  std::stable_sort(all.begin(), all.end(),
                   [p](const PosteriorItem& a, const PosteriorItem& b) {
                     return std::abs(a.posterior - p) < std::abs(b.posterior - p);
                   });
  if (all.size() > n) all.resize(n);
  return all;
}

WindowStats window_stats(std::span<const JudgedLogit> judged, double bias,
                         double p, double window) {
  WindowStats s;
  for (const auto& j : judged) {
    if (std::abs(multilabel::posterior(j.logit, bias) - p) <= window) {
      ++s.count;
      s.correct += j.correct ? 1 : 0;
    }
  }
  return s;
}

Suggestion suggest_bias(std::span<const JudgedLogit> judged, double p,
                        const SuggestOptions& options) {
  if (!(options.window > 0) || !(p - options.window > 0) ||
      !(p + options.window < 1)) {
    throw Error("posterior window must lie inside (0, 1)");
  }
  if (judged.size() < options.min_judgments) {
    throw InsufficientJudgments(
        std::to_string(judged.size()) + " judgments, need at least " +
        std::to_string(options.min_judgments));
  }
  std::vector<JudgedLogit> items(judged.begin(), judged.end());
  std::sort(items.begin(), items.end(),
            [](const JudgedLogit& a, const JudgedLogit& b) {
              if (a.logit != b.logit) return a.logit < b.logit;
              return a.correct < b.correct;
            });
  std::vector<double> logits;
  std::vector<std::size_t> prefix{0};
  for (const auto& j : items) {
    if (!std::isfinite(j.logit)) throw NumericError("non-finite judged logit");
    logits.push_back(j.logit);
    prefix.push_back(prefix.back() + (j.correct ? 1 : 0));
  }
  const double lo = multilabel::logit_of(p - options.window);
  const double hi = multilabel::logit_of(p + options.window);

  // Window membership changes only where an item crosses an edge; it is
  // constant between consecutive breakpoints, so one probe per interval
  // covers every distinct window.
  std::vector<double> breaks;
  for (double s : logits) {
    breaks.push_back(lo - s);
    breaks.push_back(hi - s);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  struct Probe {
    double bias;
    std::size_t count, correct;
  };
  std::vector<Probe> probes;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double b = 0.5 * (breaks[i] + breaks[i + 1]);
    const auto first = std::lower_bound(logits.begin(), logits.end(), lo - b);
    const auto last = std::upper_bound(logits.begin(), logits.end(), hi - b);
    const std::size_t a = first - logits.begin(), z = last - logits.begin();
    if (z <= a || z - a < options.min_window) continue;
    probes.push_back({b, z - a, prefix[z] - prefix[a]});
  }
  if (probes.empty()) {
    throw InsufficientJudgments("no bias puts " +
                                std::to_string(options.min_window) +
                                " judged items in the posterior window");
  }
  Suggestion out;
  out.judged = items.size();
  const std::size_t total_correct = prefix.back();
  const Probe* pick = nullptr;
  if (total_correct == items.size()) {
    // Nothing contradicts the classifier: push the window as far down the
    // logit scale as the judgments allow.
    pick = &probes.back();
    out.unconstrained = true;
  } else if (total_correct == 0) {
    pick = &probes.front();
    out.unconstrained = true;
  } else {
    double best = 2.0;
    for (const auto& pr : probes) {
      best = std::min(best, std::abs(double(pr.correct) / pr.count - p));
    }
    std::vector<const Probe*> optimal;
    for (const auto& pr : probes) {
      if (std::abs(double(pr.correct) / pr.count - p) <= best + 1e-12) {
        optimal.push_back(&pr);
      }
    }
    pick = optimal[(optimal.size() - 1) / 2];
  }
  out.bias = pick->bias;
  out.window_count = pick->count;
  out.precision = double(pick->correct) / pick->count;
  return out;
}

Suggestion suggest_bias(const ScoreIndex& index, const JudgmentLog& log,
                        const std::string& tag, double p,
                        const SuggestOptions& options) {
  if (!index.has_tag(tag)) throw NotFoundError("unknown tag '" + tag + "'");
  std::vector<JudgedLogit> judged;
  for (const auto& j : log.for_tag(tag)) {
    if (auto s = index.logit(tag, j.photo_id)) {
      judged.push_back({*s, j.verdict == Verdict::correct});
    }
  }
  return suggest_bias(judged, p, options);
}

}  // namespace yftag::calib
