#pragma once

// Labelled image collections. On disk a dataset is a directory holding
// classes.txt (one class name per line, index = line number), labels.tsv
// ("id<TAB>file<TAB>tag,tag,...") and the image files it names.

#include <string>
#include <vector>

#include "yftag/image.hpp"

namespace yftag::data {

struct Example {
  std::string id;
  Image image;
  std::vector<int> positives;  // class indices, sorted
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Example> examples;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<std::vector<int>> labels() const;
};

// Images are written as PPM/PGM named "<id>.ppm" or "<id>.pgm".
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace yftag::data
