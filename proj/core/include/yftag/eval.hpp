#pragma once

// Non-interpolated average precision: the mean, over relevant items, of
// precision at each relevant item's rank. Items are ranked by descending
// score; equal scores keep their input order.

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "yftag/error.hpp"
#include "yftag/tensor.hpp"

namespace yftag::eval {

// AP is undefined without a relevant item; mAP skips such tags.
class NoRelevantItems : public Error {
 public:
  using Error::Error;
};

double average_precision(std::span<const double> scores,
                         const std::vector<bool>& relevant);

// Fraction of relevant items among the top k. Requires 1 <= k <= n.
double precision_at_k(std::span<const double> scores,
                      const std::vector<bool>& relevant, std::size_t k);

struct RankedPredictions {
  // tag -> (item id, score), in input order.
  std::map<std::string, std::vector<std::pair<std::string, double>>> scores;
  // tag -> items that truly carry it.
  std::map<std::string, std::set<std::string>> truth;
};

struct MapResult {
  double map = 0.0;
  std::map<std::string, double> per_tag;  // tags that entered the mean
  std::vector<std::string> skipped;       // no positive among scored items
};

// Unweighted mean of per-tag AP over tags with at least one positive,
// restricted to `subset` when given. Throws if a subset tag has no
// predictions or if no tag qualifies.
MapResult mean_ap(const RankedPredictions& preds,
                  const std::optional<std::set<std::string>>& subset = {});

// Column-wise mAP over a score matrix [N,V] with per-row positive class
// indices. Columns without positives are skipped.
double mean_ap(const Tensor& scores, std::span<const std::vector<int>> labels);

// "item<TAB>tag<TAB>score" lines.
void read_predictions(std::istream& in, RankedPredictions& preds);
// "item<TAB>tag" lines.
void read_truth(std::istream& in, RankedPredictions& preds);
// One tag per line; blank lines and '#' comments ignored.
std::set<std::string> read_tag_list(std::istream& in);

}  // namespace yftag::eval
