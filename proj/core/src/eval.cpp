#include "yftag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <sstream>

namespace yftag::eval {
namespace {

std::vector<std::size_t> rank_order(std::span<const double> scores) {
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  return order;
}

void require_sizes(std::span<const double> scores,
                   const std::vector<bool>& relevant) {
  if (scores.size() != relevant.size()) {
    throw Error("scores and relevance differ in length");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

double average_precision(std::span<const double> scores,
                         const std::vector<bool>& relevant) {
  require_sizes(scores, relevant);
  const auto order = rank_order(scores);
  std::size_t hits = 0;
  double sum = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!relevant[order[r]]) continue;
    ++hits;
    sum += double(hits) / double(r + 1);
  }
  if (hits == 0) throw NoRelevantItems("average precision needs a relevant item");
  return sum / double(hits);
}

double precision_at_k(std::span<const double> scores,
                      const std::vector<bool>& relevant, std::size_t k) {
  require_sizes(scores, relevant);
  if (k == 0) throw Error("precision_at_k: k must be >= 1");
  if (k > scores.size()) throw Error("precision_at_k: k exceeds item count");
  const auto order = rank_order(scores);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < k; ++r) hits += relevant[order[r]] ? 1 : 0;
  return double(hits) / double(k);
}

MapResult mean_ap(const RankedPredictions& preds,
                  const std::optional<std::set<std::string>>& subset) {
  std::vector<std::string> tags;
  if (subset) {
    for (const auto& tag : *subset) {
      if (!preds.scores.count(tag)) {
        throw NotFoundError("tag '" + tag + "' has no predictions");
      }
      tags.push_back(tag);
    }
  } else {
    for (const auto& [tag, _] : preds.scores) tags.push_back(tag);
  }
  static const std::set<std::string> kNone;
  MapResult result;
  double sum = 0;
  for (const auto& tag : tags) {
    const auto& items = preds.scores.at(tag);
    auto truth_it = preds.truth.find(tag);
    const auto& truth = truth_it == preds.truth.end() ? kNone : truth_it->second;
    std::vector<double> scores;
    std::vector<bool> relevant;
    scores.reserve(items.size());
    for (const auto& [item, score] : items) {
      scores.push_back(score);
      relevant.push_back(truth.count(item) > 0);
    }
    try {
      const double ap = average_precision(scores, relevant);
      result.per_tag[tag] = ap;
      sum += ap;
    } catch (const NoRelevantItems&) {
      result.skipped.push_back(tag);
    }
  }
  if (result.per_tag.empty()) throw Error("mAP: no tag has a positive item");
  result.map = sum / double(result.per_tag.size());
  return result;
}

double mean_ap(const Tensor& scores, std::span<const std::vector<int>> labels) {
  if (scores.rank() != 2 || std::size_t(scores.dim(0)) != labels.size()) {
    throw ShapeError("mean_ap: one label row per score row required");
  }
  const int n = scores.dim(0), v = scores.dim(1);
  std::vector<std::vector<bool>> relevant(v, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    for (int t : labels[i]) {
      if (t < 0 || t >= v) throw Error("mean_ap: label outside score columns");
      relevant[t][i] = true;
    }
  }
  double sum = 0;
  int counted = 0;
  std::vector<double> column(n);
  for (int c = 0; c < v; ++c) {
    for (int i = 0; i < n; ++i) column[i] = scores[std::size_t(i) * v + c];
    try {
      sum += average_precision(column, relevant[c]);
      ++counted;
    } catch (const NoRelevantItems&) {
    }
  }
  if (counted == 0) throw Error("mAP: no class has a positive item");
  return sum / counted;
}

void read_predictions(std::istream& in, RankedPredictions& preds) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [tag, items] : preds.scores) {
    for (const auto& item : items) seen.emplace(item.first, tag);
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != 3) {
      throw ParseError("prediction line needs item, tag, score (line " +
                           std::to_string(lineno) + ")",
                       0);
    }
    double score = 0;
    try {
      std::size_t used = 0;
      score = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad score '" + f[2] + "' (line " +
                           std::to_string(lineno) + ")",
                       0);
    }
    if (!std::isfinite(score)) {
      throw ParseError("non-finite score (line " + std::to_string(lineno) + ")",
                       0);
    }
    if (!seen.emplace(f[0], f[1]).second) {
      throw ParseError("duplicate score for item '" + f[0] + "', tag '" + f[1] +
                           "' (line " + std::to_string(lineno) + ")",
                       0);
    }
    preds.scores[f[1]].emplace_back(f[0], score);
  }
}

void read_truth(std::istream& in, RankedPredictions& preds) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto f = split_tabs(line);
    if (f.size() != 2) {
      throw ParseError("truth line needs item, tag (line " +
                           std::to_string(lineno) + ")",
                       0);
    }
    preds.truth[f[1]].insert(f[0]);
  }
}

std::set<std::string> read_tag_list(std::istream& in) {
  std::set<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    tags.insert(line);
  }
  return tags;
}

}  // namespace yftag::eval
