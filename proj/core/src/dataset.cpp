#include "yftag/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "yftag/error.hpp"

namespace yftag::data {

namespace fs = std::filesystem;

std::vector<std::vector<int>> Dataset::labels() const {
  std::vector<std::vector<int>> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.positives);
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream classes(fs::path(dir) / "classes.txt");
  for (const auto& name : dataset.class_names) classes << name << '\n';
  std::ofstream labels(fs::path(dir) / "labels.tsv");
  for (const auto& e : dataset.examples) {
    const std::string file = e.id + (e.image.channels == 1 ? ".pgm" : ".ppm");
    write_pnm((fs::path(dir) / file).string(), e.image);
    labels << e.id << '\t' << file << '\t';
    for (std::size_t i = 0; i < e.positives.size(); ++i) {
      if (i) labels << ',';
      labels << dataset.class_names.at(e.positives[i]);
    }
    labels << '\n';
  }
  if (!classes || !labels) throw Error("cannot write dataset to " + dir);
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  std::ifstream classes(fs::path(dir) / "classes.txt");
  if (!classes) throw NotFoundError("no classes.txt in " + dir);
  std::map<std::string, int> index;
  std::string line;
  while (std::getline(classes, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!index.emplace(line, ds.num_classes()).second) {
      throw Error("duplicate class '" + line + "' in " + dir);
    }
    ds.class_names.push_back(line);
  }
  std::ifstream labels(fs::path(dir) / "labels.tsv");
  if (!labels) throw NotFoundError("no labels.tsv in " + dir);
  std::size_t lineno = 0;
  while (std::getline(labels, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw ParseError("labels.tsv line " + std::to_string(lineno) +
                           " needs id, file, tags",
                       0);
    }
    Example e;
    e.id = line.substr(0, t1);
    e.image = read_pnm((fs::path(dir) / line.substr(t1 + 1, t2 - t1 - 1)).string());
    std::string tags = line.substr(t2 + 1);
    std::size_t start = 0;
    while (start < tags.size()) {
      auto comma = tags.find(',', start);
      if (comma == std::string::npos) comma = tags.size();
      const std::string tag = tags.substr(start, comma - start);
      if (!tag.empty()) {
        auto it = index.find(tag);
        if (it == index.end()) {
          throw NotFoundError("unknown class '" + tag + "' on labels.tsv line " +
                              std::to_string(lineno));
        }
        e.positives.push_back(it->second);
      }
      start = comma + 1;
    }
    std::sort(e.positives.begin(), e.positives.end());
    e.positives.erase(std::unique(e.positives.begin(), e.positives.end()),
                      e.positives.end());
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

}  // namespace yftag::data
